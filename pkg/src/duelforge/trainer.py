"""Single-player pretraining, transfer with layer freezing, and self-play training."""

from __future__ import annotations

import csv
import json
import logging
import os
import platform
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .config import Config, config_hash, dumps, to_dict
from .dqn import DoubleDQNLearner, EpsilonSchedule, LearnerConfig, epsilon_at, select_action, select_actions
from .envcore import AgentIndication, ByteEnv, EnvConfig
from .metrics import LOG_COLUMNS
from .neuralnet import (
    NetworkParameters,
    copy_weights,
    forward_batch,
    init_network,
    load_checkpoint,
    save_checkpoint,
)
from .replay import PrioritizedBuffer

log = logging.getLogger(__name__)

SEED_MASK = 0xFFFFFFFFFFFFFFFF


def derive_rng(seed: int, *tags: int) -> np.random.Generator:
    """Independent stream for (seed, tag...) that does not depend on call order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & SEED_MASK, *tags]))


def env_config(cfg: Config, mode: str, seed: int) -> EnvConfig:
    e = cfg.env
    return EnvConfig(cfg.game, mode, seed, e.frame_skip, e.sticky_prob, e.max_episode_steps, e.noop_max)


def learner_config(cfg: Config, phase: str) -> LearnerConfig:
    section = cfg.single_player if phase == "single" else cfg.two_player
    lc = cfg.learner
    return LearnerConfig(
        discount=lc.discount,
        learning_rate=section.learning_rate,
        batch_size=section.batch_size,
        target_sync_period=lc.target_sync_period,
        huber_delta=lc.huber_delta,
        warmup_factor=lc.warmup_factor,
        compute_dtype=lc.compute_dtype,
    )


def beta_at(cfg: Config, step: int, horizon: int) -> float:
    start = cfg.learner.beta_start
    if horizon <= 0:
        return 1.0
    return min(1.0, start + (1.0 - start) * step / horizon)


def action_count(cfg: Config) -> int:
    return ByteEnv(env_config(cfg, "two_player", 0)).n_actions


# --------------------------------------------------------------------------
# single-player pretraining


@dataclass
class PretrainResult:
    params: NetworkParameters
    curve: list[dict]
    env_steps: int
    grad_steps: int
    checkpoint_path: str | None = None
    curve_path: str | None = None


CURVE_COLUMNS = ["episode", "env_step", "reward", "raw_score", "epsilon"]


def pretrain_single_player(cfg: Config, seed: int | None = None, out_dir=None, progress=None) -> PretrainResult:
    """Train player 1 against the scripted partner with N env copies feeding one learner.

    The env copies are stepped round-robin in this process, so a run is
    reproducible for a given seed whatever ``num_envs`` is set to.
    """
    sp = cfg.single_player
    seed = sp.seed if seed is None else seed
    envs = [ByteEnv(env_config(cfg, "single_player", int(derive_rng(seed, 0, i).integers(2**63)))) for i in range(sp.num_envs)]
    params = init_network(envs[0].n_actions, seed)
    curve: list[dict] = []
    grad_steps = 0
    if sp.steps > 0:
        act_rng, learn_rng = derive_rng(seed, 1), derive_rng(seed, 2)
        learner = DoubleDQNLearner(params, learner_config(cfg, "single"), learn_rng)
        buffer = PrioritizedBuffer(sp.buffer_size, cfg.learner.alpha, cfg.learner.priority_floor)
        schedule = EpsilonSchedule("linear", sp.epsilon_start, sp.epsilon_floor, decay_steps=int(sp.epsilon_decay_fraction * sp.steps))
        dtype = np.dtype(cfg.learner.compute_dtype)
        obs = np.stack([env.reset()[0] for env in envs])
        ep_reward = np.zeros(len(envs))
        ep_raw = np.zeros(len(envs))
        step = 0
        credit = 0.0
        while step < sp.steps:
            eps = epsilon_at(schedule, step)
            actions = select_actions(params, obs / 255.0, eps, act_rng, dtype=dtype)
            for i, env in enumerate(envs):
                if step >= sp.steps:
                    break
                res = env.step([actions[i]])
                raw = res.rewards[0]
                reward = min(max(raw, -1.0), 1.0)
                buffer.push(obs[i], actions[i], reward, res.obs[0], res.terminals[0])
                ep_reward[i] += reward
                ep_raw[i] += raw
                step += 1
                if learner.ready(buffer):
                    credit += sp.updates_per_step
                    while credit >= 1.0:
                        learner.learn(buffer, beta_at(cfg, step, sp.steps))
                        credit -= 1.0
                if res.done:
                    curve.append({"episode": len(curve), "env_step": step, "reward": ep_reward[i],
                                  "raw_score": ep_raw[i], "epsilon": eps})
                    ep_reward[i] = ep_raw[i] = 0.0
                    obs[i] = env.reset()[0]
                else:
                    obs[i] = res.obs[0]
            if progress is not None:
                progress(step, curve)
        grad_steps = learner.grad_steps
    result = PretrainResult(params, curve, sp.steps, grad_steps)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        result.checkpoint_path = os.path.join(out_dir, f"pretrain_{cfg.game}_seed{seed}.dfck")
        result.curve_path = os.path.join(out_dir, f"pretrain_{cfg.game}_seed{seed}.csv")
        save_checkpoint(params, result.checkpoint_path)
        with open(result.curve_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CURVE_COLUMNS)
            for row in curve:
                w.writerow([row["episode"], row["env_step"], f"{row['reward']:g}", f"{row['raw_score']:g}", f"{row['epsilon']:.6f}"])
    return result


def evaluate_greedy(params: NetworkParameters, cfg: Config, episodes: int = 100, seed: int = 0, policy=None) -> np.ndarray:
    """Raw single-player episode scores of the greedy policy (or ``policy(obs, rng)``)."""
    env = ByteEnv(env_config(cfg, "single_player", seed))
    rng = derive_rng(seed, 7)
    scores = np.zeros(episodes)
    for ep in range(episodes):
        obs = env.reset()[0]
        total = 0.0
        while True:
            if policy is None:
                q, _ = forward_batch(params, obs[None, :] / 255.0)
                action = int(np.argmax(q[0]))
            else:
                action = policy(obs, rng)
            res = env.step([action])
            total += res.rewards[0]
            obs = res.obs[0]
            if res.done:
                break
        scores[ep] = total
    return scores


def random_policy(n_actions: int):
    return lambda obs, rng: int(rng.integers(n_actions))


# --------------------------------------------------------------------------
# transfer and self-play


def transfer_checkpoint(checkpoint: NetworkParameters, freeze_layers: int = 2, action_count: int | None = None) -> NetworkParameters:
    """Copy every weight into a fresh network and freeze the first ``freeze_layers`` layers."""
    if not 0 <= freeze_layers <= len(checkpoint.layers):
        raise ValueError(f"freeze_layers must be in [0, {len(checkpoint.layers)}]")
    if action_count is not None and checkpoint.action_count != action_count:
        raise ValueError(f"checkpoint has {checkpoint.action_count} actions, game needs {action_count}")
    params = copy_weights(checkpoint)
    params.freeze_mask = [i < freeze_layers for i in range(len(params.layers))]
    return params


@dataclass
class EpisodeRecord:
    seed: int
    episode: int
    steps: int
    reward_p1: float
    reward_p2: float
    raw_score_p1: float
    epsilon: float
    wall_ms: float | None = None

    def row(self) -> list:
        wall = "" if self.wall_ms is None else f"{self.wall_ms:.1f}"
        return [self.seed, self.episode, self.steps, f"{self.reward_p1:g}", f"{self.reward_p2:g}",
                f"{self.raw_score_p1:g}", f"{self.epsilon:.6f}", wall]


@dataclass
class TwoPlayerResult:
    seed: int
    variant: str
    records: list[EpisodeRecord]
    params: NetworkParameters
    env_steps: int
    grad_steps: int
    sync_steps: list[int] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    wall_seconds: float = 0.0
    buffer_players: tuple[int, ...] = ()


def train_two_player(cfg: Config, seed: int, start_params: NetworkParameters | None = None, hook=None) -> TwoPlayerResult:
    """Self-play DQN: player 1 learns, player 2 replays a periodic snapshot of player 1.

    With ``start_params`` the run is the transferred variant: the checkpoint is
    copied and its first ``freeze_layers`` layers frozen.  ``hook(env_step,
    learner, opponent)`` is called after every environment step.
    """
    tp = cfg.two_player
    env = AgentIndication(ByteEnv(env_config(cfg, "two_player", seed)))
    n_actions = env.n_actions
    if start_params is None:
        variant = "scratch"
        online = init_network(n_actions, seed)
    else:
        variant = "transferred"
        online = transfer_checkpoint(start_params, tp.freeze_layers, n_actions)
    learner = DoubleDQNLearner(online, learner_config(cfg, "two"), derive_rng(seed, 2))
    buffer = PrioritizedBuffer(tp.buffer_size, cfg.learner.alpha, cfg.learner.priority_floor)
    # frozen layers never change, so their output is computed once per observation
    cache = tp.cache_frozen_features and learner.frozen_depth > 0
    if cache:
        buffer.attach_features(online.dims[learner.frozen_depth], learner.frozen_depth)
    opponent = copy_weights(online)
    p1_rng, p2_rng = derive_rng(seed, 1), derive_rng(seed, 3)
    schedule = EpsilonSchedule("multiplicative", tp.epsilon_start, tp.epsilon_floor, tp.epsilon_decay_rate)
    horizon = min(tp.step_cap, tp.episode_budget * cfg.env.max_episode_steps)

    result = TwoPlayerResult(seed, variant, [], online, 0, 0)
    env_steps = 0
    started = time.perf_counter()
    if hook is not None:
        hook(0, learner, opponent)
    for episode in range(tp.episode_budget):
        if env_steps >= tp.step_cap:
            break
        t0 = time.perf_counter()
        obs = env.reset()
        feat = learner.features(obs[0][None])[0] if cache else None
        totals = [0.0, 0.0]
        raw_p1 = 0.0
        steps = 0
        eps = epsilon_at(schedule, env_steps)
        capped = False
        while True:
            if env_steps >= tp.step_cap:
                result.notes.append(f"step cap {tp.step_cap} reached during episode {episode}; partial episode dropped")
                capped = True
                break
            eps = epsilon_at(schedule, env_steps)
            a1 = select_action(learner.online, obs[0] / 255.0, eps, p1_rng)
            a2 = select_action(opponent, obs[1] / 255.0, tp.opponent_epsilon, p2_rng)
            res = env.step([a1, a2])
            r1 = min(max(res.rewards[0], -1.0), 1.0)
            r2 = min(max(res.rewards[1], -1.0), 1.0)
            # only player 1's experience is learned from
            next_feat = learner.features(res.obs[0][None])[0] if cache else None
            buffer.push(obs[0], a1, r1, res.obs[0], res.terminals[0], player=1,
                        features=feat, next_features=next_feat)
            totals[0] += r1
            totals[1] += r2
            raw_p1 += res.rewards[0]
            env_steps += 1
            steps += 1
            if learner.ready(buffer):
                learner.learn(buffer, beta_at(cfg, env_steps, horizon))
            if env_steps % tp.self_play_sync_period == 0:
                opponent = copy_weights(learner.online)
                result.sync_steps.append(env_steps)
            if hook is not None:
                hook(env_steps, learner, opponent)
            obs, feat = res.obs, next_feat
            if res.done:
                break
        if capped:
            break
        wall = (time.perf_counter() - t0) * 1000.0 if tp.record_wall_time else None
        result.records.append(EpisodeRecord(seed, episode, steps, totals[0], totals[1], raw_p1, eps, wall))
    if len(result.records) < tp.episode_budget and not result.notes:
        result.notes.append(f"step cap {tp.step_cap} reached after {len(result.records)} episodes")
    result.env_steps = env_steps
    result.grad_steps = learner.grad_steps
    result.wall_seconds = time.perf_counter() - started
    result.buffer_players = tuple(int(p) for p in np.unique(buffer.players[: len(buffer)]))
    return result


def write_episode_log(result: TwoPlayerResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for rec in result.records:
            w.writerow(rec.row())
        for note in result.notes:
            fh.write(f"# {note}\n")


def run_path(out_dir, game: str, variant: str, seed: int, ext: str) -> str:
    return os.path.join(os.fspath(out_dir), game, f"{variant}_seed{seed}.{ext}")


def _run_one(cfg: Config, variant: str, seed: int, checkpoint_path: str | None, out_dir: str) -> dict:
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    entry = {"variant": variant, "seed": seed, "started": started}
    try:
        start = load_checkpoint(checkpoint_path) if variant == "transferred" else None
        result = train_two_player(cfg, seed, start)
        log_path = run_path(out_dir, cfg.game, variant, seed, "csv")
        ckpt_path = run_path(out_dir, cfg.game, variant, seed, "dfck")
        write_episode_log(result, log_path)
        save_checkpoint(result.params, ckpt_path)
        entry.update(
            status="ok",
            episodes=len(result.records),
            env_steps=result.env_steps,
            grad_steps=result.grad_steps,
            wall_seconds=round(result.wall_seconds, 3),
            steps_per_second=round(result.env_steps / result.wall_seconds, 2) if result.wall_seconds else None,
            log=os.path.basename(log_path),
            checkpoint=os.path.basename(ckpt_path),
            notes=result.notes,
        )
    except Exception as exc:  # a failed seed must not take the others down
        entry.update(status="failed", error=f"{type(exc).__name__}: {exc}", traceback=traceback.format_exc())
    entry["finished"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return entry


def _read_runs(manifest_path: str) -> list:
    if not os.path.exists(manifest_path):
        return []
    try:
        with open(manifest_path) as fh:
            return json.load(fh).get("runs", [])
    except (OSError, json.JSONDecodeError):
        return []


def _finished(entry: dict, out_dir: str, game: str) -> bool:
    if entry.get("status") != "ok":
        return False
    game_dir = os.path.join(out_dir, game)
    return all(os.path.exists(os.path.join(game_dir, entry.get(k) or "")) for k in ("log", "checkpoint"))


def run_seed_matrix(cfg: Config, out_dir, variants=("scratch", "transferred"), checkpoint_path=None, workers: int = 1,
                    resume: bool = False) -> dict:
    """Train every (variant, seed) pair and write logs, checkpoints and a manifest.

    Completed runs are kept when others fail; the manifest records each run's
    status and wall time and is merged with any manifest already present.
    With one worker it is rewritten after every run.  ``resume`` skips pairs
    the manifest already lists as finished whose files are still on disk.
    """
    if "transferred" in variants and not checkpoint_path:
        raise ValueError("the transferred variant needs a pretrained checkpoint")
    out = os.fspath(out_dir)
    game_dir = os.path.join(out, cfg.game)
    os.makedirs(game_dir, exist_ok=True)
    with open(os.path.join(game_dir, "config.ini"), "w") as fh:
        fh.write(dumps(cfg))
    manifest_path = os.path.join(game_dir, "manifest.json")
    previous = _read_runs(manifest_path)
    jobs = [(v, s) for v in variants for s in cfg.two_player.seeds]
    if resume:
        done = {(r.get("variant"), r.get("seed")) for r in previous if _finished(r, out, cfg.game)}
        for v, s in jobs:
            if (v, s) in done:
                log.info("run %s seed %s already finished; skipped", v, s)
        jobs = [j for j in jobs if j not in done]
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    runs: list = []

    def write() -> dict:
        fresh = {(r["variant"], r["seed"]) for r in runs}
        merged = [r for r in previous if (r.get("variant"), r.get("seed")) not in fresh] + runs
        merged.sort(key=lambda r: (r["variant"], r["seed"]))
        manifest = {
            "game": cfg.game,
            "config_hash": config_hash(cfg),
            "config": to_dict(cfg),
            "pretrained_checkpoint": os.fspath(checkpoint_path) if checkpoint_path else None,
            "versions": {"duelforge": __version__, "python": platform.python_version(), "numpy": np.__version__},
            "started": started,
            "finished": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "runs": merged,
            "totals": {
                "runs": len(merged),
                "failed": sum(r["status"] != "ok" for r in merged),
                "wall_seconds": round(sum(r.get("wall_seconds", 0.0) for r in merged), 3),
            },
        }
        tmp = manifest_path + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(manifest, fh, indent=2, default=list)
            fh.write("\n")
        os.replace(tmp, manifest_path)
        return manifest

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_one, cfg, v, s, checkpoint_path, out) for v, s in jobs]
            runs = [f.result() for f in futures]
    else:
        for v, s in jobs:
            runs.append(_run_one(cfg, v, s, checkpoint_path, out))
            write()
    manifest = write()
    for r in runs:
        if r["status"] != "ok":
            log.error("run %s seed %s failed: %s", r["variant"], r["seed"], r["error"])
    return manifest
