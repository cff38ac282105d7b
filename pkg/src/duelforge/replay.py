"""Proportional prioritized experience replay backed by a sum tree."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OBS_SIZE = 128


@dataclass(frozen=True)
class Transition:
    obs: bytes
    action: int
    reward: float
    next_obs: bytes
    terminal: bool
    player: int = 1

    def __post_init__(self):
        if len(self.obs) != OBS_SIZE or len(self.next_obs) != OBS_SIZE:
            raise ValueError("observations must be exactly 128 bytes")
        if not -1.0 <= self.reward <= 1.0:
            raise ValueError(f"reward {self.reward} outside the clip range [-1, 1]")


class SumTree:
    """Binary tree over ``capacity`` leaves where each node holds its subtree sum.

    Parents are recomputed as ``left + right`` rather than adjusted by deltas so
    the root never drifts from the sum of the leaves.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        size = 1
        while size < capacity:
            size *= 2
        self._leaf_base = size
        self._nodes = np.zeros(2 * size, dtype=np.float64)

    @property
    def total(self) -> float:
        return float(self._nodes[1])

    def leaves(self) -> np.ndarray:
        return self._nodes[self._leaf_base : self._leaf_base + self.capacity].copy()

    def get(self, idx) -> np.ndarray:
        return self._nodes[self._leaf_base + np.asarray(idx)]

    def set(self, idx, values) -> None:
        nodes = self._nodes
        if np.isscalar(idx):
            node = self._leaf_base + int(idx)
            nodes[node] = float(values)
            node //= 2
            while node >= 1:
                nodes[node] = nodes[2 * node] + nodes[2 * node + 1]
                node //= 2
            return
        idx = np.asarray(idx, dtype=np.int64)
        values = np.broadcast_to(np.asarray(values, dtype=np.float64), idx.shape)
        # duplicates: the last write wins, same as a sequential loop
        nodes[self._leaf_base + idx] = values
        parents = np.unique((self._leaf_base + idx) // 2)
        while parents.size:
            nodes[parents] = nodes[2 * parents] + nodes[2 * parents + 1]
            if parents[0] == 1:
                break
            parents = np.unique(parents // 2)

    def find(self, masses: np.ndarray) -> np.ndarray:
        """Leaf index for each cumulative mass (vectorized descent)."""
        v = np.asarray(masses, dtype=np.float64).copy()
        node = np.ones(v.shape, dtype=np.int64)
        nodes = self._nodes
        while node[0] < self._leaf_base:
            left = 2 * node
            left_mass = nodes[left]
            go_right = v >= left_mass
            v = np.where(go_right, v - left_mass, v)
            node = np.where(go_right, left + 1, left)
        return node - self._leaf_base


class PrioritizedBuffer:
    """Ring buffer of transitions with proportional prioritization.

    Sampled ``indices`` are insertion serial numbers, so an index whose slot
    has since been overwritten can be recognized and skipped.
    """

    def __init__(self, capacity: int, alpha: float = 0.6, priority_floor: float = 1e-5, obs_size: int = OBS_SIZE):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        if priority_floor <= 0:
            raise ValueError("priority_floor must be positive")
        self.capacity = capacity
        self.alpha = alpha
        self.priority_floor = priority_floor
        self.max_priority = 1.0
        self.tree = SumTree(capacity)
        self.obs = np.zeros((capacity, obs_size), dtype=np.uint8)
        self.next_obs = np.zeros((capacity, obs_size), dtype=np.uint8)
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity, dtype=np.float32)
        self.terminals = np.zeros(capacity, dtype=bool)
        self.players = np.zeros(capacity, dtype=np.uint8)
        self.priorities = np.zeros(capacity, dtype=np.float64)
        self.serials = np.full(capacity, -1, dtype=np.int64)
        self.pushed = 0
        self.stale_updates = 0
        self.feature_depth: int | None = None

    def attach_features(self, dim: int, depth: int) -> None:
        """Also store float32 hidden features for obs and next_obs.

        ``depth`` names the layer the features come out of; a learner only
        uses them when its frozen prefix has the same depth.
        """
        if self.pushed:
            raise RuntimeError("features must be attached to an empty buffer")
        self.features = np.zeros((self.capacity, dim), dtype=np.float32)
        self.next_features = np.zeros((self.capacity, dim), dtype=np.float32)
        self.feature_depth = depth

    def __len__(self) -> int:
        return min(self.pushed, self.capacity)

    def push(self, obs, action: int, reward: float, next_obs, terminal: bool, player: int = 1,
             features=None, next_features=None) -> int:
        if not -1.0 <= reward <= 1.0:
            raise ValueError(f"reward {reward} outside the clip range [-1, 1]")
        if self.feature_depth is not None and (features is None or next_features is None):
            raise ValueError("this buffer stores features; pass features and next_features")
        slot = self.pushed % self.capacity
        if self.feature_depth is not None:
            self.features[slot] = features
            self.next_features[slot] = next_features
        self.obs[slot] = np.frombuffer(bytes(obs), dtype=np.uint8) if isinstance(obs, (bytes, bytearray)) else obs
        self.next_obs[slot] = (
            np.frombuffer(bytes(next_obs), dtype=np.uint8) if isinstance(next_obs, (bytes, bytearray)) else next_obs
        )
        self.actions[slot] = action
        self.rewards[slot] = reward
        self.terminals[slot] = terminal
        self.players[slot] = player
        self.priorities[slot] = self.max_priority
        self.serials[slot] = self.pushed
        self.tree.set(int(slot), self.max_priority**self.alpha)
        self.pushed += 1
        return self.pushed - 1

    def push_transition(self, t: Transition) -> int:
        return self.push(t.obs, t.action, t.reward, t.next_obs, t.terminal, t.player)

    def probabilities(self) -> np.ndarray:
        """P(i) for every live slot, in slot order."""
        n = len(self)
        return self.tree.leaves()[:n] / self.tree.total

    def contains(self, serial: int) -> bool:
        return self.pushed - len(self) <= serial < self.pushed

    def get(self, serial: int) -> Transition:
        if not self.contains(serial):
            raise KeyError(f"transition {serial} is not in the buffer")
        s = serial % self.capacity
        return Transition(
            self.obs[s].tobytes(), int(self.actions[s]), float(self.rewards[s]),
            self.next_obs[s].tobytes(), bool(self.terminals[s]), int(self.players[s]),
        )

    def sample_slots(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        n = len(self)
        if n < batch_size:
            raise ValueError(f"buffer holds {n} transitions, fewer than batch size {batch_size}")
        total = self.tree.total
        segment = total / batch_size
        masses = (np.arange(batch_size) + rng.random(batch_size)) * segment
        np.minimum(masses, np.nextafter(total, 0.0), out=masses)
        slots = self.tree.find(masses)
        # float round-off can land on an empty leaf past the live region
        return np.minimum(slots, n - 1)

    def sample(self, batch_size: int, beta: float, rng: np.random.Generator):
        """Stratified draw of ``batch_size`` transitions.

        Returns ``(indices, batch, is_weights)`` where ``batch`` is a dict of
        arrays and the importance weights are normalized so the largest is 1.
        """
        if not 0.0 <= beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")
        slots = self.sample_slots(batch_size, rng)
        n = len(self)
        probs = self.tree.get(slots) / self.tree.total
        weights = (n * probs) ** (-beta)
        weights /= weights.max()
        batch = {
            "obs": self.obs[slots],
            "actions": self.actions[slots],
            "rewards": self.rewards[slots],
            "next_obs": self.next_obs[slots],
            "terminals": self.terminals[slots],
            "players": self.players[slots],
        }
        if self.feature_depth is not None:
            batch["features"] = self.features[slots]
            batch["next_features"] = self.next_features[slots]
        return self.serials[slots].copy(), batch, weights

    def update_priorities(self, indices, td_errors) -> None:
        indices = np.asarray(indices, dtype=np.int64)
        td = np.abs(np.asarray(td_errors, dtype=np.float64))
        live = (indices >= self.pushed - len(self)) & (indices < self.pushed)
        self.stale_updates += int(np.count_nonzero(~live))
        if not live.any():
            return
        slots = indices[live] % self.capacity
        p = td[live] + self.priority_floor
        self.priorities[slots] = p
        self.tree.set(slots, p**self.alpha)
        self.max_priority = max(self.max_priority, float(p.max()))

    def clear(self) -> None:
        depth = self.feature_depth
        dim = self.features.shape[1] if depth is not None else 0
        self.__init__(self.capacity, self.alpha, self.priority_floor, self.obs.shape[1])
        if depth is not None:
            self.attach_features(dim, depth)
