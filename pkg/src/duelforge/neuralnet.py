"""Fully-connected Q-value network with Adam, layer freezing and checkpoints.

The network is the fixed 128 -> 512 -> 256 -> A stack used by every learner in
the package.  Parameters are stored as float32; forward and backward passes
accumulate in a configurable dtype (float64 unless the caller asks otherwise).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

OBS_SIZE = 128
HIDDEN = (512, 256)
MAX_ACTIONS = 32

CHECKPOINT_MAGIC = b"DFCK"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Base class for checkpoint decoding failures."""


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedPayloadError(CheckpointError):
    pass


class DimensionMismatchError(CheckpointError):
    pass


@dataclass
class Layer:
    weights: np.ndarray  # (out, in) float32
    biases: np.ndarray  # (out,) float32

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape

    @property
    def size(self) -> int:
        return self.weights.size + self.biases.size


@dataclass
class NetworkParameters:
    layers: list[Layer]
    freeze_mask: list[bool] = field(default_factory=lambda: [False, False, False])

    def __post_init__(self):
        if len(self.freeze_mask) != len(self.layers):
            raise ValueError("freeze_mask must have one entry per layer")

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.layers[0].weights.shape[1],) + tuple(l.weights.shape[0] for l in self.layers)

    @property
    def action_count(self) -> int:
        return self.layers[-1].weights.shape[0]

    def parameter_count(self) -> int:
        return sum(layer.size for layer in self.layers)

    def trainable_count(self) -> int:
        return sum(layer.size for layer, frozen in zip(self.layers, self.freeze_mask) if not frozen)

    def equals(self, other: "NetworkParameters") -> bool:
        """Bitwise equality of all arrays and the freeze mask."""
        if list(self.freeze_mask) != list(other.freeze_mask) or len(self.layers) != len(other.layers):
            return False
        for a, b in zip(self.layers, other.layers):
            if a.weights.shape != b.weights.shape or a.biases.shape != b.biases.shape:
                return False
            if a.weights.tobytes() != b.weights.tobytes() or a.biases.tobytes() != b.biases.tobytes():
                return False
        return True


def _rng_for(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)


def init_layers(dims, seed: int) -> NetworkParameters:
    """Fan-in scaled uniform weights, zero biases, nothing frozen."""
    rng = _rng_for(seed)
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in)).astype(np.float32)
        layers.append(Layer(w, np.zeros(fan_out, dtype=np.float32)))
    return NetworkParameters(layers, [False] * len(layers))


def init_network(action_count: int, seed: int) -> NetworkParameters:
    if not 1 <= action_count <= MAX_ACTIONS:
        raise ValueError(f"action_count must be in [1, {MAX_ACTIONS}], got {action_count}")
    return init_layers((OBS_SIZE, *HIDDEN, action_count), seed)


def copy_weights(source: NetworkParameters) -> NetworkParameters:
    return NetworkParameters(
        [Layer(l.weights.copy(), l.biases.copy()) for l in source.layers],
        list(source.freeze_mask),
    )


def forward_batch(params: NetworkParameters, inputs: np.ndarray, dtype=np.float64, upto: int | None = None):
    """Run the network on a (B, in) batch.

    Returns ``(outputs, activations)`` where ``activations[i]`` is the input fed
    to layer ``i``; the list is what :func:`backward_and_update` consumes.
    With ``upto`` set, stop after that many layers (hidden features).
    """
    x = np.asarray(inputs, dtype=dtype)
    activations = []
    n = len(params.layers) if upto is None else upto
    for i, layer in enumerate(params.layers[:n]):
        activations.append(x)
        x = x @ layer.weights.T.astype(dtype, copy=False) + layer.biases.astype(dtype, copy=False)
        if i < len(params.layers) - 1:
            np.maximum(x, 0.0, out=x)
    return x, activations


def forward_from(params: NetworkParameters, features: np.ndarray, start: int, dtype=np.float64) -> np.ndarray:
    """Continue a forward pass from the activations entering layer ``start``."""
    x = np.asarray(features, dtype=dtype)
    last = len(params.layers) - 1
    for i in range(start, last + 1):
        layer = params.layers[i]
        x = x @ layer.weights.T.astype(dtype, copy=False) + layer.biases.astype(dtype, copy=False)
        if i < last:
            np.maximum(x, 0.0, out=x)
    return x


def forward(params: NetworkParameters, observation) -> np.ndarray:
    obs = np.asarray(observation, dtype=np.float64)
    if obs.ndim != 1 or obs.shape[0] != params.dims[0]:
        raise ValueError(f"observation must have length {params.dims[0]}, got shape {obs.shape}")
    out, _ = forward_batch(params, obs[None, :])
    return out[0]


@dataclass
class OptimizerState:
    first_moments: list[tuple[np.ndarray, np.ndarray]]
    second_moments: list[tuple[np.ndarray, np.ndarray]]
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon_hat: float = 1e-8
    step_count: int = 0


def init_optimizer(params: NetworkParameters, learning_rate: float = 1e-4, dtype=np.float64, **kw) -> OptimizerState:
    if learning_rate <= 0:
        raise ValueError("learning_rate must be positive")
    zeros = lambda: [(np.zeros(l.weights.shape, dtype), np.zeros(l.biases.shape, dtype)) for l in params.layers]
    return OptimizerState(zeros(), zeros(), learning_rate=learning_rate, **kw)


def compute_gradients(params: NetworkParameters, activations, output_grads: np.ndarray):
    """Backpropagate ``dL/d(output)`` to per-layer (dW, db).

    Frozen layers get ``None`` and, when every layer below is frozen too, the
    backward pass stops early.
    """
    g = output_grads
    n = len(params.layers)
    lowest_trainable = next((i for i, f in enumerate(params.freeze_mask) if not f), n)
    grads: list = [None] * n
    for i in range(n - 1, lowest_trainable - 1, -1):
        a = activations[i]
        if not params.freeze_mask[i]:
            grads[i] = (g.T @ a, g.sum(axis=0))
        if i > lowest_trainable:
            w = params.layers[i].weights.astype(g.dtype, copy=False)
            g = (g @ w) * (a > 0)
    return grads


def adam_step(params: NetworkParameters, opt: OptimizerState, grads) -> list[float]:
    """Apply one Adam update in place; returns per-layer gradient norms."""
    opt.step_count += 1
    t = opt.step_count
    b1, b2 = opt.beta1, opt.beta2
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    norms = []
    for i, g in enumerate(grads):
        if g is None or params.freeze_mask[i]:
            norms.append(0.0)
            continue
        layer = params.layers[i]
        sq = 0.0
        for j, (grad, name) in enumerate(zip(g, ("weights", "biases"))):
            if not np.all(np.isfinite(grad)):
                raise FloatingPointError(f"non-finite gradient in layer {i} {name}")
            m = opt.first_moments[i][j]
            v = opt.second_moments[i][j]
            grad = grad.astype(m.dtype, copy=False)
            tmp = np.multiply(grad, 1.0 - b1, dtype=m.dtype)
            m *= b1
            m += tmp
            np.multiply(grad, grad, out=tmp)
            sq += float(tmp.sum())
            tmp *= 1.0 - b2
            v *= b2
            v += tmp
            # step = lr * m_hat / (sqrt(v_hat) + eps)
            np.sqrt(v, out=tmp)
            tmp *= 1.0 / np.sqrt(corr2)
            tmp += opt.epsilon_hat
            np.divide(m, tmp, out=tmp)
            tmp *= opt.learning_rate / corr1
            target = getattr(layer, name)
            if target.dtype == tmp.dtype:
                target -= tmp
            else:
                target[...] = (target.astype(tmp.dtype) - tmp).astype(np.float32)
        norms.append(sq**0.5)
    return norms


def backward_and_update(params, opt, batch_inputs, per_sample_loss_gradients, activations=None, dtype=np.float64):
    """Backprop per-sample output gradients (summed over the batch) and take an Adam step.

    ``per_sample_loss_gradients`` is ``dL/dQ`` with shape (B, A); any batch
    averaging is the caller's job.  Parameters are updated in place and also
    returned together with the optimizer state and per-layer gradient norms.
    """
    grads_out = np.asarray(per_sample_loss_gradients, dtype=dtype)
    if not np.all(np.isfinite(grads_out)):
        raise FloatingPointError("non-finite loss gradient")
    if activations is None:
        _, activations = forward_batch(params, batch_inputs, dtype=dtype)
    if grads_out.shape != (activations[0].shape[0], params.action_count):
        raise ValueError("gradient shape does not match batch")
    grads = compute_gradients(params, activations, grads_out)
    norms = adam_step(params, opt, grads)
    return params, opt, norms


def serialize(params: NetworkParameters) -> bytes:
    parts = [CHECKPOINT_MAGIC, struct.pack("<HH", CHECKPOINT_VERSION, params.action_count)]
    for layer in params.layers:
        rows, cols = layer.weights.shape
        parts.append(struct.pack("<II", rows, cols))
        parts.append(np.ascontiguousarray(layer.weights, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(layer.biases, dtype="<f4").tobytes())
    parts.append(bytes(1 if f else 0 for f in params.freeze_mask))
    return b"".join(parts)


def deserialize(data: bytes) -> NetworkParameters:
    data = bytes(data)
    if len(data) < 4 or data[:4] != CHECKPOINT_MAGIC:
        raise BadMagicError("bad magic: not a network checkpoint")
    if len(data) < 8:
        raise TruncatedPayloadError("truncated payload: header incomplete")
    version, action_count = struct.unpack_from("<HH", data, 4)
    if version != CHECKPOINT_VERSION:
        raise VersionMismatchError(f"version mismatch: expected {CHECKPOINT_VERSION}, got {version}")
    expected = [(HIDDEN[0], OBS_SIZE), (HIDDEN[1], HIDDEN[0]), (action_count, HIDDEN[1])]
    offset = 8
    layers = []
    for rows_cols in expected:
        if len(data) < offset + 8:
            raise TruncatedPayloadError("truncated payload: layer header incomplete")
        rows, cols = struct.unpack_from("<II", data, offset)
        offset += 8
        if (rows, cols) != rows_cols:
            raise DimensionMismatchError(f"dimension mismatch: expected {rows_cols}, got {(rows, cols)}")
        n = rows * cols * 4 + rows * 4
        if len(data) < offset + n:
            raise TruncatedPayloadError("truncated payload: layer data incomplete")
        w = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=offset).reshape(rows, cols)
        b = np.frombuffer(data, dtype="<f4", count=rows, offset=offset + rows * cols * 4)
        offset += n
        layers.append(Layer(w.astype(np.float32), b.astype(np.float32)))
    if len(data) < offset + 3:
        raise TruncatedPayloadError("truncated payload: freeze mask incomplete")
    mask = data[offset : offset + 3]
    if len(data) != offset + 3:
        raise CheckpointError("trailing bytes after freeze mask")
    if any(m not in (0, 1) for m in mask):
        raise CheckpointError("freeze mask bytes must be 0 or 1")
    if not 1 <= action_count <= MAX_ACTIONS:
        raise DimensionMismatchError(f"action count {action_count} out of range")
    return NetworkParameters(layers, [bool(m) for m in mask])


def save_checkpoint(params: NetworkParameters, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(params))


def load_checkpoint(path) -> NetworkParameters:
    with open(path, "rb") as fh:
        return deserialize(fh.read())
