"""Reward statistics and the transfer-vs-scratch report."""

from __future__ import annotations

import csv
import glob
import json
import logging
import math
import os
import re
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

LOG_COLUMNS = ["seed", "episode", "steps", "reward_p1", "reward_p2", "raw_score_p1", "epsilon", "wall_ms"]
VARIANTS = ("scratch", "transferred")


class ReportInputError(ValueError):
    """An input file for the report could not be parsed."""

    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = path


@dataclass
class RewardSeries:
    values: np.ndarray
    game: str = ""
    variant: str = ""
    seed: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("reward series must be finite")


@dataclass
class ComparisonRow:
    game: str
    ram_complexity: float
    normalized_diff_of_means: float


def _values(x) -> np.ndarray:
    if isinstance(x, RewardSeries):
        return x.values
    return np.asarray(x, dtype=np.float64)


def running_average(series, window: int = 10) -> np.ndarray:
    """Trailing mean over the last ``min(i + 1, window)`` values."""
    x = _values(series)
    if window < 1:
        raise ValueError("window must be >= 1")
    if x.size == 0:
        raise ValueError("series is empty")
    out = np.empty_like(x)
    head = min(window - 1, x.size)
    for i in range(head):
        out[i] = x[: i + 1].mean()
    if x.size >= window:
        out[window - 1 :] = np.lib.stride_tricks.sliding_window_view(x, window).mean(axis=1)
    return out


def nearest_rank(sorted_values: np.ndarray, q: float) -> float:
    """The ceil(q*N)-th order statistic (1-based), clamped to the sample."""
    n = sorted_values.size
    # tolerance keeps e.g. 0.95 * 100 from rounding up to rank 96
    rank = math.ceil(q * n - 1e-9)
    return float(sorted_values[min(max(rank, 1), n) - 1])


def winsor_bounds(values, level: float = 0.90, tail: float | None = None) -> tuple[float, float]:
    x = np.sort(_values(values))
    if x.size == 0:
        raise ValueError("cannot winsorize an empty input")
    if tail is None:
        if not 0.0 < level <= 1.0:
            raise ValueError("level must be in (0, 1]")
        tail = (1.0 - level) / 2.0
    if not 0.0 <= tail < 0.5:
        raise ValueError("tail fraction must be in [0, 0.5)")
    return nearest_rank(x, tail), nearest_rank(x, 1.0 - tail)


def winsorize(values, level: float = 0.90, tail: float | None = None) -> np.ndarray:
    x = _values(values)
    lo, hi = winsor_bounds(x, level, tail)
    return np.clip(x, lo, hi)


def min_max_normalize(values) -> np.ndarray:
    x = _values(values)
    if x.size == 0:
        raise ValueError("cannot normalize an empty input")
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def normalized_diff_of_means(transferred, scratch, level: float = 0.90, tail: float | None = None) -> float:
    """mean(transferred) - mean(scratch) after joint winsorization and min-max scaling.

    Both pools share one set of clamp bounds and one min/max, so the result is
    on a single per-game scale and lies in [-1, 1].
    """
    a, b = _values(transferred), _values(scratch)
    if a.size == 0 or b.size == 0:
        raise ValueError("both reward pools must be non-empty")
    pool = np.concatenate([a, b])
    lo, hi = winsor_bounds(pool, level, tail)
    a, b = np.clip(a, lo, hi), np.clip(b, lo, hi)
    lo, hi = min(a.min(), b.min()), max(a.max(), b.max())
    if hi == lo:
        return 0.0
    return float(((a - lo) / (hi - lo)).mean() - ((b - lo) / (hi - lo)).mean())


def pearson(xs, ys) -> float:
    x, y = _values(xs), _values(ys)
    if x.shape != y.shape:
        raise ValueError("xs and ys must have the same length")
    if x.size < 2:
        raise ValueError("need at least two points")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("pearson is undefined for zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def leave_one_out_pearson(xs, ys) -> list[float]:
    x, y = _values(xs), _values(ys)
    out = []
    for i in range(x.size):
        keep = np.arange(x.size) != i
        try:
            out.append(pearson(x[keep], y[keep]))
        except ValueError:
            out.append(float("nan"))
    return out


# --------------------------------------------------------------------------
# report assembly


@dataclass
class SeedLog:
    path: str
    game: str
    variant: str
    seed: int
    rewards: np.ndarray
    wall_ms: float | None


@dataclass
class ReportResult:
    out_dir: str
    games: list[str] = field(default_factory=list)
    rows: list[ComparisonRow] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    files: list[str] = field(default_factory=list)


_LOG_NAME = re.compile(r"^(scratch|transferred)_seed(-?\d+)\.csv$")


def read_episode_log(path) -> tuple[np.ndarray, np.ndarray]:
    """Return (reward_p1, wall_ms) columns of an episode log; '#' lines are notes."""
    with open(path, newline="") as fh:
        lines = [line for line in fh if line.strip() and not line.startswith("#")]
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise ReportInputError(path, "empty episode log") from None
    if header != LOG_COLUMNS:
        raise ReportInputError(path, f"unexpected header {header}")
    rewards, wall = [], []
    for lineno, row in enumerate(reader, 2):
        if len(row) != len(LOG_COLUMNS):
            raise ReportInputError(path, f"row {lineno} has {len(row)} fields")
        try:
            rewards.append(float(row[3]))
            wall.append(float(row[7]) if row[7] else math.nan)
        except ValueError:
            raise ReportInputError(path, f"row {lineno} is not numeric") from None
    r = np.array(rewards)
    if not np.all(np.isfinite(r)):
        raise ReportInputError(path, "non-finite reward")
    return r, np.array(wall)


def discover_logs(logs_dir) -> dict[str, dict[str, list[SeedLog]]]:
    """Logs live at ``<logs_dir>/<game>/<variant>_seed<seed>.csv``."""
    found: dict[str, dict[str, list[SeedLog]]] = {}
    for path in sorted(glob.glob(os.path.join(os.fspath(logs_dir), "*", "*.csv"))):
        m = _LOG_NAME.match(os.path.basename(path))
        if not m:
            continue
        game = os.path.basename(os.path.dirname(path))
        rewards, wall = read_episode_log(path)
        wall_total = float(np.nansum(wall)) if np.any(np.isfinite(wall)) else None
        found.setdefault(game, {}).setdefault(m.group(1), []).append(
            SeedLog(path, game, m.group(1), int(m.group(2)), rewards, wall_total)
        )
    for variants in found.values():
        for logs in variants.values():
            logs.sort(key=lambda s: s.seed)
    return found


def read_manifest_walltimes(game_dir) -> dict[tuple[str, int], float]:
    path = os.path.join(game_dir, "manifest.json")
    if not os.path.exists(path):
        return {}
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ReportInputError(path, f"malformed manifest ({exc.msg})") from None
    out = {}
    for run in manifest.get("runs", []):
        if run.get("status") == "ok" and "wall_seconds" in run:
            out[(run["variant"], int(run["seed"]))] = float(run["wall_seconds"])
    return out


def discover_profiles(profiles_dir) -> dict[str, float]:
    from .ramscope import ram_complexity, read_heat_csv

    out = {}
    if profiles_dir is None:
        return out
    for path in sorted(glob.glob(os.path.join(os.fspath(profiles_dir), "**", "*.heat.csv"), recursive=True)):
        game = os.path.basename(path)[: -len(".heat.csv")]
        out[game] = ram_complexity(read_heat_csv(path))
    return out


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return f"{v:.6f}"


def _mean_curve(logs: list[SeedLog], window: int) -> np.ndarray:
    curves = [running_average(s.rewards, window) for s in logs if s.rewards.size]
    if not curves:
        return np.zeros(0)
    n = min(c.size for c in curves)
    return np.mean([c[:n] for c in curves], axis=0)


def build_report(logs_dir, profiles_dir=None, out_dir=None, checkpoints=(1, 1000, 2000), window: int = 10,
                 last_n: int = 100, level: float = 0.90, tail: float | None = None) -> ReportResult:
    """Assemble curves, snapshots, wall times and the complexity correlation table."""
    out_dir = os.fspath(out_dir if out_dir is not None else os.path.join(logs_dir, "report"))
    result = ReportResult(out_dir)
    logs = discover_logs(logs_dir)
    complexity = discover_profiles(profiles_dir)
    os.makedirs(out_dir, exist_ok=True)

    def write(name, rows):
        path = os.path.join(out_dir, name)
        with open(path, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
        result.files.append(path)

    snap_rows = [["game", "variant", "seeds"] + [f"episode_{k}" for k in checkpoints]]
    wall_rows = [["game", "variant", "runs", "mean_wall_seconds", "source"]]
    corr_rows = [["game", "ram_complexity", "norm_diff_means", "pearson_r", "pearson_r_loo_min", "pearson_r_loo_max", "note"]]
    xs, ys = [], []

    for game in sorted(logs):
        variants = logs[game]
        result.games.append(game)
        curves = {v: _mean_curve(variants.get(v, []), window) for v in VARIANTS}
        length = max(c.size for c in curves.values())
        rows = [["episode", "scratch", "transferred"]]
        for i in range(length):
            rows.append([i + 1] + [_fmt(float(curves[v][i])) if i < curves[v].size else "" for v in VARIANTS])
        write(f"curves_{game}.csv", rows)

        manifest_wall = read_manifest_walltimes(os.path.join(os.fspath(logs_dir), game))
        for v in VARIANTS:
            seed_logs = variants.get(v, [])
            if not seed_logs:
                continue
            snaps = []
            for k in checkpoints:
                vals = [s.rewards[k - 1] for s in seed_logs if s.rewards.size >= k]
                snaps.append(f"{np.mean(vals):.3f} ± {np.std(vals):.3f}" if vals else "")
            snap_rows.append([game, v, len(seed_logs)] + snaps)
            walls = [manifest_wall.get((v, s.seed)) for s in seed_logs]
            source = "manifest"
            if any(w is None for w in walls):
                walls = [s.wall_ms / 1000.0 if s.wall_ms is not None else None for s in seed_logs]
                source = "episode_log"
            walls = [w for w in walls if w is not None]
            wall_rows.append([game, v, len(seed_logs), _fmt(float(np.mean(walls))) if walls else "", source if walls else "missing"])

        missing = [v for v in VARIANTS if not variants.get(v)]
        if missing:
            msg = f"{game}: missing {'/'.join(missing)} logs, skipped"
            result.warnings.append(msg)
            corr_rows.append([game, "", "", "", "", "", f"missing variant: {'/'.join(missing)}"])
            continue
        if game not in complexity:
            msg = f"{game}: no RAM profile, skipped"
            result.warnings.append(msg)
            corr_rows.append([game, "", "", "", "", "", "missing ram profile"])
            continue
        pools = {v: np.concatenate([s.rewards[-last_n:] for s in variants[v]]) for v in VARIANTS}
        diff = normalized_diff_of_means(pools["transferred"], pools["scratch"], level, tail)
        result.rows.append(ComparisonRow(game, complexity[game], diff))
        xs.append(complexity[game])
        ys.append(diff)
        corr_rows.append([game, _fmt(complexity[game]), _fmt(diff), "", "", "", ""])

    r = loo_min = loo_max = None
    if len(xs) >= 2:
        try:
            r = pearson(xs, ys)
        except ValueError as exc:
            result.warnings.append(f"pearson: {exc}")
    if len(xs) >= 3:
        loo = [v for v in leave_one_out_pearson(xs, ys) if not math.isnan(v)]
        if loo:
            loo_min, loo_max = min(loo), max(loo)
    corr_rows.append(["ALL", "", "", _fmt(r), _fmt(loo_min), _fmt(loo_max), f"games={len(xs)}"])

    write("snapshots.csv", snap_rows)
    write("walltime.csv", wall_rows)
    write("correlation.csv", corr_rows)
    for w in result.warnings:
        log.warning(w)
    return result
