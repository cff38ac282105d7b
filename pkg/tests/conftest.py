import numpy as np
import pytest

from duelforge.neuralnet import Layer, NetworkParameters, init_layers


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running training or statistical checks")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_network(seed, dims=(4, 8, 6, 3), dtype=np.float64):
    """Random small network held in ``dtype`` with non-zero biases."""
    p = init_layers(dims, seed)
    r = np.random.default_rng(seed + 1)
    layers = [Layer(l.weights.astype(dtype), r.uniform(-0.5, 0.5, l.biases.shape).astype(dtype)) for l in p.layers]
    return NetworkParameters(layers, [False] * len(layers))


def relu_margin(params, inputs):
    """Smallest |pre-activation| over all hidden units and samples."""
    x = np.asarray(inputs, dtype=np.float64)
    margin = np.inf
    for layer in params.layers[:-1]:
        z = x @ layer.weights.T.astype(np.float64) + layer.biases.astype(np.float64)
        margin = min(margin, float(np.abs(z).min()))
        x = np.maximum(z, 0.0)
    return margin


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
