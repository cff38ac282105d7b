"""Atari-style preprocessing around a :class:`~.games.Game`."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .games import RAM_SIZE, Game, make_game

SEED_MASK = 0xFFFFFFFFFFFFFFFF


class EpisodeOverError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnvConfig:
    game: str = "duelpong"
    mode: str = "two_player"  # two_player | single_player
    seed: int = 0
    frame_skip: int = 4
    sticky_prob: float = 0.25
    max_episode_steps: int = 200
    noop_max: int = 0

    def __post_init__(self):
        if self.mode not in ("two_player", "single_player"):
            raise ValueError(f"mode must be two_player or single_player, got {self.mode!r}")
        if self.frame_skip < 1:
            raise ValueError("frame_skip must be >= 1")
        if not 0.0 <= self.sticky_prob < 1.0:
            raise ValueError("sticky_prob must be in [0, 1)")
        if self.max_episode_steps < 1:
            raise ValueError("max_episode_steps must be >= 1")
        if self.noop_max < 0:
            raise ValueError("noop_max must be >= 0")


@dataclass
class StepResult:
    obs: list[np.ndarray]
    rewards: list[float]
    terminals: list[bool]
    truncated: bool

    @property
    def done(self) -> bool:
        return self.truncated or any(self.terminals)


class ByteEnv:
    """Frame skip, sticky actions, no-op resets and the episode step cap.

    Rewards are returned unclipped; :func:`clip_and_normalize` does the
    learner-side preprocessing.  In single-player mode only player 1 acts and
    the game's scripted partner drives player 2.
    """

    def __init__(self, config: EnvConfig):
        self.config = config
        self.game: Game = make_game(config.game)
        game_seq, wrap_seq = np.random.SeedSequence(int(config.seed) & SEED_MASK).spawn(2)
        self.game_rng = np.random.default_rng(game_seq)
        self.rng = np.random.default_rng(wrap_seq)
        self.n_players = 2 if config.mode == "two_player" else 1
        self.steps = 0
        self._done = True
        self._prev = [0, 0]

    @property
    def n_actions(self) -> int:
        return self.game.n_actions

    @property
    def annotation(self):
        return self.game.annotation

    def _observe(self) -> list[np.ndarray]:
        ram = self.game.ram()
        return [ram] + [ram.copy() for _ in range(self.n_players - 1)]

    def reset(self) -> list[np.ndarray]:
        cfg = self.config
        while True:
            self.game.reset(self.game_rng)
            k = int(self.rng.integers(0, cfg.noop_max + 1)) if cfg.noop_max else 0
            ended = False
            for _ in range(k):
                _, ended = self.game.tick(0, 0 if self.n_players == 2 else None)
                if ended:
                    break
            if not ended:
                break
        self.steps = 0
        self._prev = [0, 0]
        self._done = False
        return self._observe()

    def step(self, actions) -> StepResult:
        if self._done:
            raise EpisodeOverError("episode is over; call reset()")
        actions = [int(a) for a in np.atleast_1d(actions)]
        if len(actions) != self.n_players:
            raise ValueError(f"expected {self.n_players} action(s), got {len(actions)}")
        effective = []
        for p, a in enumerate(actions):
            if not 0 <= a < self.n_actions:
                raise ValueError(f"action {a} out of range for {self.config.game}")
            # one draw per player per step, in player order
            if self.rng.random() < self.config.sticky_prob:
                a = self._prev[p]
            effective.append(a)
            self._prev[p] = a
        a1 = effective[0]
        a2 = effective[1] if self.n_players == 2 else None
        total = [0.0, 0.0]
        terminal = False
        for _ in range(self.config.frame_skip):
            (r1, r2), terminal = self.game.tick(a1, a2)
            total[0] += r1
            total[1] += r2
            if terminal:
                break
        self.steps += 1
        truncated = not terminal and self.steps >= self.config.max_episode_steps
        self._done = terminal or truncated
        return StepResult(
            obs=self._observe(),
            rewards=total[: self.n_players],
            terminals=[terminal] * self.n_players,
            truncated=truncated,
        )


class AnnotationMap:
    """Disjoint byte-index pairs exchanged to make player 2 look like player 1."""

    def __init__(self, swap_pairs=(), size: int = RAM_SIZE):
        seen = set()
        pairs = []
        for i, j in swap_pairs:
            i, j = int(i), int(j)
            if not (0 <= i < size and 0 <= j < size) or i == j:
                raise ValueError(f"invalid swap pair ({i}, {j})")
            if i in seen or j in seen:
                raise ValueError(f"index reused in swap pair ({i}, {j})")
            seen.update((i, j))
            pairs.append((i, j))
        self.swap_pairs = tuple(pairs)
        perm = np.arange(size)
        for i, j in pairs:
            perm[i], perm[j] = j, i
        self.permutation = perm

    def __eq__(self, other):
        return isinstance(other, AnnotationMap) and set(map(frozenset, self.swap_pairs)) == set(map(frozenset, other.swap_pairs))

    def __repr__(self):
        return f"AnnotationMap({list(self.swap_pairs)})"

    def apply(self, obs: np.ndarray) -> np.ndarray:
        return np.asarray(obs)[..., self.permutation]


def reconstruct_for_player2(obs, annotation: AnnotationMap) -> np.ndarray:
    return annotation.apply(obs)


class AgentIndication:
    """Rewrites player 2's observation so it reads as if player 2 were player 1."""

    def __init__(self, env: ByteEnv, annotation: AnnotationMap | None = None):
        self.env = env
        self.annotation = annotation if annotation is not None else AnnotationMap(env.annotation)

    def __getattr__(self, name):
        return getattr(self.env, name)

    def _rewrite(self, obs):
        if len(obs) > 1:
            obs = [obs[0]] + [self.annotation.apply(o) for o in obs[1:]]
        return obs

    def reset(self):
        return self._rewrite(self.env.reset())

    def step(self, actions) -> StepResult:
        res = self.env.step(actions)
        res.obs = self._rewrite(res.obs)
        return res


def clip_and_normalize(reward: float, obs) -> tuple[float, np.ndarray]:
    return float(min(max(reward, -1.0), 1.0)), np.asarray(obs, dtype=np.float64) / 255.0


def make_env(game: str, mode: str = "two_player", seed: int = 0, **kw) -> ByteEnv:
    return ByteEnv(EnvConfig(game=game, mode=mode, seed=seed, **kw))


def random_rollout(env: ByteEnv, steps: int, seed: int) -> np.ndarray:
    """Both players act uniformly at random; returns the (steps, 128) trace of player-1 RAM."""
    if env.n_players != 2:
        raise ValueError("random rollouts need a two-player environment")
    if steps < 1:
        raise ValueError("steps must be positive")
    rng = np.random.default_rng(int(seed) & SEED_MASK)
    trace = np.empty((steps, RAM_SIZE), dtype=np.uint8)
    obs = env.reset()
    n = env.n_actions
    for t in range(steps):
        trace[t] = obs[0]
        res = env.step(rng.integers(0, n, size=2))
        obs = env.reset() if res.done else res.obs
    return trace
