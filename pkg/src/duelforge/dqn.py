"""Double deep Q-learning: targets, Huber loss, epsilon schedules, learner."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .neuralnet import (
    NetworkParameters,
    OptimizerState,
    adam_step,
    compute_gradients,
    copy_weights,
    forward,
    forward_batch,
    forward_from,
    init_optimizer,
)
from .replay import PrioritizedBuffer


@dataclass
class LearnerConfig:
    discount: float = 0.99
    learning_rate: float = 1e-3
    batch_size: int = 256
    target_sync_period: int = 1000
    huber_delta: float = 1.0
    warmup_factor: int = 10
    compute_dtype: str = "float32"

    def __post_init__(self):
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must be in (0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.target_sync_period < 1:
            raise ValueError("target_sync_period must be >= 1")

    @property
    def warmup(self) -> int:
        return self.warmup_factor * self.batch_size


@dataclass(frozen=True)
class EpsilonSchedule:
    kind: str = "linear"  # linear | multiplicative | fixed
    start: float = 1.0
    floor: float = 0.05
    decay_rate: float = 0.9999985
    decay_steps: int = 1_000_000

    def __post_init__(self):
        if self.kind not in ("linear", "multiplicative", "fixed"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not 0.0 <= self.floor <= self.start <= 1.0:
            raise ValueError("need 0 <= floor <= start <= 1")

    def value(self, step: int) -> float:
        return epsilon_at(self, step)


def epsilon_at(schedule: EpsilonSchedule, step: int) -> float:
    if schedule.kind == "fixed":
        return schedule.start
    if schedule.kind == "linear":
        if schedule.decay_steps <= 0:
            return schedule.floor
        return max(schedule.floor, schedule.start - (schedule.start - schedule.floor) * step / schedule.decay_steps)
    return max(schedule.floor, schedule.start * schedule.decay_rate**step)


def greedy(q_values: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum: ties go to the lowest index
    return np.argmax(q_values, axis=-1)


def select_action(params: NetworkParameters, observation, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy choice on a normalized observation.

    Always consumes exactly one uniform draw, plus one integer draw when
    exploring, so the RNG stream does not depend on the network output.
    """
    if rng.random() < epsilon:
        return int(rng.integers(params.action_count))
    return int(greedy(forward(params, observation)))


def select_actions(params: NetworkParameters, observations: np.ndarray, epsilon: float, rng: np.random.Generator, dtype=np.float64) -> np.ndarray:
    """Batched epsilon-greedy with the same per-row draw pattern as :func:`select_action`."""
    n = observations.shape[0]
    explore = rng.random(n) < epsilon
    actions = np.empty(n, dtype=np.int64)
    for i in np.flatnonzero(explore):
        actions[i] = rng.integers(params.action_count)
    exploit = ~explore
    if exploit.any():
        q, _ = forward_batch(params, observations[exploit], dtype=dtype)
        actions[exploit] = greedy(q)
    return actions


def huber(x: np.ndarray, delta: float = 1.0) -> np.ndarray:
    a = np.abs(x)
    return np.where(a <= delta, 0.5 * x * x, delta * (a - 0.5 * delta))


def huber_grad(x: np.ndarray, delta: float = 1.0) -> np.ndarray:
    return np.clip(x, -delta, delta)


def compute_targets(online: NetworkParameters, target: NetworkParameters, rewards, next_obs, terminals, discount: float, dtype=np.float64):
    """Double-Q bootstrap: the online net picks a', the target net scores it."""
    rewards = np.asarray(rewards, dtype=dtype)
    q_online, _ = forward_batch(online, next_obs, dtype=dtype)
    q_target, _ = forward_batch(target, next_obs, dtype=dtype)
    best = greedy(q_online)
    bootstrap = q_target[np.arange(len(best)), best]
    return np.where(np.asarray(terminals, dtype=bool), rewards, rewards + discount * bootstrap)


def _shared_frozen_prefix(a: NetworkParameters, b: NetworkParameters) -> int:
    """Number of leading layers frozen in both nets and holding identical weights."""
    k = 0
    for la, lb, fa, fb in zip(a.layers, b.layers, a.freeze_mask, b.freeze_mask):
        if not (fa and fb):
            break
        if la.weights is not lb.weights and not (
            np.array_equal(la.weights, lb.weights) and np.array_equal(la.biases, lb.biases)
        ):
            break
        k += 1
    return min(k, len(a.layers) - 1)


class DoubleDQNLearner:
    """Owns the online and target networks plus the optimizer state.

    One call to :meth:`learn` is one gradient step on a prioritized batch.
    The target network is refreshed from the online one every
    ``target_sync_period`` gradient steps.
    """

    def __init__(self, online: NetworkParameters, config: LearnerConfig, rng: np.random.Generator):
        self.config = config
        self.dtype = np.dtype(config.compute_dtype)
        self.online = online
        self.target = copy_weights(online)
        self.opt: OptimizerState = init_optimizer(online, config.learning_rate, dtype=self.dtype)
        self.rng = rng
        self.grad_steps = 0
        self.target_syncs = 0
        self._frozen_prefix = _shared_frozen_prefix(self.online, self.target)

    @property
    def frozen_depth(self) -> int:
        """Leading layers whose output never changes during training."""
        return self._frozen_prefix

    def features(self, observations: np.ndarray) -> np.ndarray:
        """Frozen-prefix output for raw uint8 observations, as stored in a feature buffer."""
        dt = self.dtype
        x = np.asarray(observations).astype(dt) / dt.type(255.0)
        feats, _ = forward_batch(self.online, x, dtype=dt, upto=self._frozen_prefix)
        return feats.astype(np.float32, copy=False)

    def ready(self, buffer: PrioritizedBuffer) -> bool:
        return len(buffer) >= max(self.config.warmup, self.config.batch_size)

    def learn(self, buffer: PrioritizedBuffer, beta: float) -> dict:
        cfg = self.config
        dt = self.dtype
        indices, batch, weights = buffer.sample(cfg.batch_size, beta, self.rng)
        n = len(indices)
        # s and s' go through the online net together; leading layers frozen in
        # both nets hold identical weights, so the target net reuses those features
        k = self._frozen_prefix
        if k and buffer.feature_depth == k:
            feats = np.concatenate([batch["features"], batch["next_features"]]).astype(dt, copy=False)
            acts_prefix = [None] * k
        else:
            both = np.concatenate([batch["obs"], batch["next_obs"]]).astype(dt) / dt.type(255.0)
            feats, acts_prefix = forward_batch(self.online, both, dtype=dt, upto=k)
            acts_prefix = [a[:n] for a in acts_prefix]
        q_all, acts_rest = forward_batch_from(self.online, feats, k, dt)
        q_s, q_next_online = q_all[:n], q_all[n:]
        q_next_target = forward_from(self.target, feats[n:], k, dtype=dt)
        activations = acts_prefix + [a[:n] for a in acts_rest]

        rows = np.arange(n)
        best = greedy(q_next_online)
        rewards = batch["rewards"].astype(dt)
        y = np.where(batch["terminals"], rewards, rewards + dt.type(cfg.discount) * q_next_target[rows, best])
        q_taken = q_s[rows, batch["actions"]]
        td = y - q_taken
        w = weights.astype(dt)
        loss = float(np.mean(w * huber(td, cfg.huber_delta)))

        out_grads = np.zeros_like(q_s)
        out_grads[rows, batch["actions"]] = -w * huber_grad(td, cfg.huber_delta) / n
        grads = compute_gradients(self.online, activations, out_grads)
        norms = adam_step(self.online, self.opt, grads)
        buffer.update_priorities(indices, td)

        self.grad_steps += 1
        if self.grad_steps % cfg.target_sync_period == 0:
            self.sync_target()
        return {
            "loss": loss,
            "mean_abs_td": float(np.mean(np.abs(td))),
            "grad_norms": norms,
            "updated_parameters": self.online.trainable_count(),
            "players": batch["players"],
        }

    def sync_target(self) -> None:
        self.target = copy_weights(self.online)
        self.target_syncs += 1


def forward_batch_from(params: NetworkParameters, features: np.ndarray, start: int, dtype):
    """Like :func:`forward_from` but also returns the activations entering each later layer."""
    x = features
    acts = []
    last = len(params.layers) - 1
    for i in range(start, last + 1):
        acts.append(x)
        layer = params.layers[i]
        x = x @ layer.weights.T.astype(dtype, copy=False) + layer.biases.astype(dtype, copy=False)
        if i < last:
            np.maximum(x, 0.0, out=x)
    return x, acts
