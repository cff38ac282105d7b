"""Central finite-difference oracle for the value network, in float64."""

import numpy as np

from conftest import relu_margin, small_network
from duelforge.neuralnet import compute_gradients, forward_batch


def loss_and_output_grad(q, coeffs):
    # L = sum(c * Q) + 0.5 * sum(Q^2)
    return float(np.sum(coeffs * q) + 0.5 * np.sum(q * q)), coeffs + q


def numeric_gradients(params, inputs, coeffs, h=1e-3):
    grads = []
    for layer in params.layers:
        pair = []
        for arr in (layer.weights, layer.biases):
            g = np.zeros_like(arr, dtype=np.float64)
            flat = arr.reshape(-1)
            for k in range(flat.size):
                old = flat[k]
                flat[k] = old + h
                up, _ = loss_and_output_grad(forward_batch(params, inputs)[0], coeffs)
                flat[k] = old - h
                down, _ = loss_and_output_grad(forward_batch(params, inputs)[0], coeffs)
                flat[k] = old
                g.reshape(-1)[k] = (up - down) / (2 * h)
            pair.append(g)
        grads.append(tuple(pair))
    return grads


def analytic_gradients(params, inputs, coeffs):
    q, acts = forward_batch(params, inputs)
    _, dq = loss_and_output_grad(q, coeffs)
    return compute_gradients(params, acts, dq)


def relative_errors(a, n, floor=1e-8):
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def random_case(seed, batch=5, margin=0.02):
    """A random (network, inputs, loss coefficients) with every ReLU at least
    ``margin`` away from its kink, so finite differences never straddle one."""
    attempt = 0
    while True:
        params = small_network(seed * 1000 + attempt)
        r = np.random.default_rng(seed * 1000 + attempt)
        inputs = r.random((batch, params.dims[0]))
        coeffs = r.normal(size=(batch, params.action_count))
        if relu_margin(params, inputs) >= margin:
            return params, inputs, coeffs
        attempt += 1


def max_relative_error(seed):
    params, inputs, coeffs = random_case(seed)
    ana = analytic_gradients(params, inputs, coeffs)
    num = numeric_gradients(params, inputs, coeffs)
    worst = 0.0
    for (aw, ab), (nw, nb) in zip(ana, num):
        worst = max(worst, float(relative_errors(aw, nw).max()), float(relative_errors(ab, nb).max()))
    return worst
