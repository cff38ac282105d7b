"""Naive O(T*K) temporal-variation reference, written independently of the library."""

import math

import numpy as np


def naive_variation(trace, kernel_size=11, cap=3000.0):
    """Explicit loop over time; each step averages its neighbour rows directly."""
    x = np.asarray(trace, dtype=np.float64)
    t_len = x.shape[0]
    half = kernel_size // 2
    total = np.zeros(x.shape[1])
    for t in range(t_len):
        rows = [u for u in range(max(0, t - half), min(t_len, t + half + 1)) if u != t]
        m = x[rows].sum(axis=0) / len(rows)
        total += (x[t] - m) ** 2
    return np.minimum(total / t_len, cap)


def synthetic_profile_values():
    """Fixed profile behind the golden graymap: a ramp with a few hand-picked cells."""
    values = [3000.0 * ((k * 37) % 128) / 127.0 for k in range(128)]
    values[0] = 0.0
    values[1] = 3000.0
    # 255 * v / 3000 lands exactly on x.5 here, so rounding must go up
    values[2] = 3000.0 * 0.5 / 255.0
    values[3] = 3000.0 * 127.5 / 255.0
    values[4] = math.nextafter(3000.0 * 0.5 / 255.0, 0.0)
    return values
