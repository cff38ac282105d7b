"""Temporal-variation profile of a RAM trace, its complexity scalar and heatmaps."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

RAM_SIZE = 128
GRID_ROWS, GRID_COLS = 16, 8


@dataclass(frozen=True)
class VariationProfile:
    per_byte: np.ndarray
    kernel_size: int = 11
    cap: float = 3000.0

    def __post_init__(self):
        pb = np.asarray(self.per_byte, dtype=np.float64)
        if pb.ndim != 1:
            raise ValueError("per_byte must be one-dimensional")
        if np.any(pb < 0) or np.any(pb > self.cap):
            raise ValueError("per-byte values must lie in [0, cap]")
        object.__setattr__(self, "per_byte", pb)


def window_neighbour_means(x: np.ndarray, kernel_size: int = 11, include_center: bool = False, boundary: str = "truncate") -> tuple[np.ndarray, np.ndarray]:
    """Mean of each sample's temporal neighbours, per column.

    ``x`` is (T, B).  Returns ``(means, valid)`` where ``valid`` flags the rows
    that take part in the average: every row for ``truncate``, only rows with a
    full window for ``valid``.
    """
    t_len = x.shape[0]
    half = kernel_size // 2
    csum = np.zeros((t_len + 1,) + x.shape[1:], dtype=np.float64)
    np.cumsum(x, axis=0, out=csum[1:])
    t = np.arange(t_len)
    lo = np.maximum(t - half, 0)
    hi = np.minimum(t + half, t_len - 1)
    sums = csum[hi + 1] - csum[lo]
    counts = (hi - lo + 1).astype(np.float64)
    if not include_center:
        sums = sums - x
        counts = counts - 1
    means = sums / counts.reshape((-1,) + (1,) * (x.ndim - 1))
    if boundary == "truncate":
        valid = np.ones(t_len, dtype=bool)
    elif boundary == "valid":
        valid = (t - half >= 0) & (t + half <= t_len - 1)
    else:
        raise ValueError(f"unknown boundary mode {boundary!r}")
    return means, valid


def temporal_variation(trace, kernel_size: int = 11, cap: float = 3000.0, include_center: bool = False, boundary: str = "truncate") -> VariationProfile:
    """Per-byte mean squared residual against the windowed neighbour mean, capped.

    The window is centred on each sample, spans ``kernel_size`` samples and is
    truncated at the ends of the trace.  By default the sample itself is left
    out of its neighbour mean.  The cap applies to the per-byte mean.
    """
    x = np.asarray(trace, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("trace must be a non-empty (T, bytes) matrix")
    if kernel_size < 3 or kernel_size % 2 == 0:
        raise ValueError("kernel_size must be odd and >= 3")
    if x.shape[0] < 2:
        raise ValueError("temporal variation needs at least 2 rows")
    if cap < 0:
        raise ValueError("cap must be non-negative")
    means, valid = window_neighbour_means(x, kernel_size, include_center, boundary)
    if not valid.any():
        raise ValueError("trace shorter than one full window")
    sq = (x - means) ** 2
    per_byte = np.minimum(sq[valid].mean(axis=0), cap)
    return VariationProfile(per_byte, kernel_size, cap)


def ram_complexity(profile: VariationProfile) -> float:
    return float(np.mean(profile.per_byte))


def heatmap_grid(profile: VariationProfile) -> np.ndarray:
    """16x8 grid; byte k sits at row k // 8, column k % 8."""
    if profile.per_byte.shape[0] != RAM_SIZE:
        raise ValueError(f"heatmap needs {RAM_SIZE} byte values")
    return profile.per_byte.reshape(GRID_ROWS, GRID_COLS)


def heatmap_intensity(profile: VariationProfile) -> np.ndarray:
    scale = profile.cap if math.isfinite(profile.cap) else float(profile.per_byte.max())
    if scale <= 0:
        return np.zeros((GRID_ROWS, GRID_COLS), dtype=np.int64)
    x = 255.0 * heatmap_grid(profile) / scale
    # half-up rounding; floor(x + 0.5) would send 0.49999999999999994 to 1
    base = np.floor(x)
    return (base + (x - base >= 0.5)).astype(np.int64)


def format_heat_csv(profile: VariationProfile) -> str:
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in heatmap_grid(profile))


def format_pgm(profile: VariationProfile) -> str:
    img = heatmap_intensity(profile)
    lines = ["P2", f"{GRID_COLS} {GRID_ROWS}", "255"]
    lines += [" ".join(str(int(v)) for v in row) for row in img]
    return "\n".join(lines) + "\n"


def render_heatmap(profile: VariationProfile, prefix) -> tuple[str, str]:
    """Write ``<prefix>.heat.csv`` and ``<prefix>.pgm``; returns both paths."""
    prefix = os.fspath(prefix)
    csv_path, pgm_path = prefix + ".heat.csv", prefix + ".pgm"
    with open(csv_path, "w", newline="") as fh:
        fh.write(format_heat_csv(profile))
    with open(pgm_path, "w", newline="") as fh:
        fh.write(format_pgm(profile))
    return csv_path, pgm_path


def read_heat_csv(path) -> VariationProfile:
    with open(path) as fh:
        rows = [line.strip() for line in fh if line.strip()]
    try:
        values = [float(v) for row in rows for v in row.split(",")]
    except ValueError as exc:
        raise ValueError(f"{path}: malformed heat CSV ({exc})") from None
    if len(rows) != GRID_ROWS or len(values) != RAM_SIZE:
        raise ValueError(f"{path}: expected {GRID_ROWS}x{GRID_COLS} values")
    arr = np.array(values)
    return VariationProfile(arr, cap=max(3000.0, float(arr.max())))


def parse_pgm(text: str) -> np.ndarray:
    tokens = [t for line in text.splitlines() for t in line.split("#", 1)[0].split()]
    if not tokens or tokens[0] != "P2":
        raise ValueError("not a P2 graymap")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    pix = np.array([int(t) for t in tokens[4:]], dtype=np.int64)
    if pix.size != w * h or np.any(pix > maxval):
        raise ValueError("graymap payload does not match its header")
    return pix.reshape(h, w)
