"""Command-line entry point: pretrain, selfplay, analyze-ram and report.

Exit codes are 0 on success, 1 on a runtime failure and 2 on a usage error.
Every command writes the fully resolved configuration to ``config.ini`` in its
output directory; passing that file back with ``--config`` reruns the command
with identical settings.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import __version__
from .config import Config, ConfigError, dumps, load

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("duelforge")


class UsageError(Exception):
    pass


def default_out() -> str:
    return os.environ.get("DUELFORGE_OUT", "results")


def _seeds(text: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("at least one seed is required")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file; command-line flags override it")
    common.add_argument("--out", help="output directory (default: $DUELFORGE_OUT or ./results)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="duelforge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", parents=[common], help="single-player pretraining against the scripted partner")
    p.add_argument("--game", required=True)
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("selfplay", parents=[common], help="two-player self-play over a seed matrix")
    p.add_argument("--game", required=True)
    p.add_argument("--variant", required=True, choices=("scratch", "transferred"))
    p.add_argument("--from", dest="checkpoint", help="pretrained checkpoint (required for --variant transferred)")
    p.add_argument("--episodes", type=int)
    p.add_argument("--seeds", type=_seeds)
    p.add_argument("--workers", type=int, default=1, help="parallel seed runs; 1 is bitwise reproducible")
    p.add_argument("--resume", action="store_true", help="skip seeds the manifest already lists as finished")

    p = sub.add_parser("analyze-ram", parents=[common], help="random-agent RAM trace and temporal-variation heatmap")
    p.add_argument("--game", required=True)
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("report", parents=[common], help="curves, snapshots, wall times and the complexity table")
    p.add_argument("results", help="directory holding <game>/<variant>_seed<seed>.csv logs")
    p.add_argument("--profiles", help="directory searched for <game>.heat.csv profiles (default: the results dir)")
    p.add_argument("--no-plots", action="store_true", help="skip the PNG figures")
    return parser


def resolve_config(args) -> Config:
    cfg = load(args.config) if args.config else Config()
    if getattr(args, "game", None):
        cfg.game = args.game.lower()
    if args.command == "pretrain":
        if args.steps is not None:
            cfg.single_player.steps = args.steps
        if args.seed is not None:
            cfg.single_player.seed = args.seed
    elif args.command == "selfplay":
        if args.episodes is not None:
            cfg.two_player.episode_budget = args.episodes
        if args.seeds is not None:
            cfg.two_player.seeds = args.seeds
    elif args.command == "analyze-ram":
        if args.steps is not None:
            cfg.ramscope.steps = args.steps
        if args.seed is not None:
            cfg.ramscope.seed = args.seed
    return cfg.validate()


def echo_config(cfg: Config, out_dir) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "config.ini")
    with open(path, "w") as fh:
        fh.write(dumps(cfg))
    return path


def _check_game(cfg: Config) -> None:
    from .envcore import GAMES

    if cfg.game not in GAMES:
        raise UsageError(f"unknown game {cfg.game!r}; choose from {', '.join(sorted(GAMES))}")


def cmd_pretrain(cfg: Config, args) -> int:
    from .trainer import pretrain_single_player

    _check_game(cfg)
    if cfg.single_player.steps < 0:
        raise UsageError("--steps must be >= 0")
    out = args.out or default_out()
    echo_config(cfg, out)

    def progress(step, curve):
        if curve and step % 10_000 < cfg.single_player.num_envs:
            tail = curve[-20:]
            log.info("step %d  episodes %d  recent score %.2f", step, len(curve), sum(c["raw_score"] for c in tail) / len(tail))

    result = pretrain_single_player(cfg, out_dir=out, progress=progress)
    print(result.checkpoint_path)
    print(result.curve_path)
    return EXIT_OK


def cmd_selfplay(cfg: Config, args) -> int:
    from .trainer import run_seed_matrix

    _check_game(cfg)
    if args.variant == "transferred" and not args.checkpoint:
        raise UsageError("--variant transferred requires --from <checkpoint>")
    if args.variant == "scratch" and args.checkpoint:
        raise UsageError("--from only applies to --variant transferred")
    if args.checkpoint and not os.path.isfile(args.checkpoint):
        raise UsageError(f"checkpoint not found: {args.checkpoint}")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    out = args.out or default_out()
    manifest = run_seed_matrix(cfg, out, variants=(args.variant,), checkpoint_path=args.checkpoint, workers=args.workers,
                                resume=args.resume)
    failed = [r for r in manifest["runs"] if r["variant"] == args.variant and r["status"] != "ok"]
    for r in manifest["runs"]:
        if r["variant"] == args.variant and r["status"] == "ok":
            print(os.path.join(out, cfg.game, r["log"]))
    for r in failed:
        print(f"seed {r['seed']} failed: {r['error']}", file=sys.stderr)
    return EXIT_FAILURE if failed else EXIT_OK


def cmd_analyze_ram(cfg: Config, args) -> int:
    from .envcore import make_env, random_rollout, save_trace
    from .plotting import plot_heatmap
    from .ramscope import ram_complexity, render_heatmap, temporal_variation

    _check_game(cfg)
    rs = cfg.ramscope
    if rs.steps < 2:
        raise UsageError("temporal variation needs a trace of at least 2 rows (--steps >= 2)")
    out = args.out or default_out()
    echo_config(cfg, out)
    e = cfg.env
    env = make_env(cfg.game, "two_player", rs.seed, frame_skip=e.frame_skip, sticky_prob=e.sticky_prob,
                   max_episode_steps=e.max_episode_steps, noop_max=e.noop_max)
    trace = random_rollout(env, rs.steps, rs.seed)
    prefix = os.path.join(out, cfg.game)
    save_trace(trace, prefix + ".dftr")
    profile = temporal_variation(trace, rs.kernel_size, rs.cap, rs.include_center, rs.boundary)
    render_heatmap(profile, prefix)
    plot_heatmap(profile, prefix + ".png", title=cfg.game)
    value = ram_complexity(profile)
    with open(prefix + ".complexity.txt", "w") as fh:
        fh.write(f"{value!r}\n")
    print(f"{cfg.game} ram_complexity {value:.6f}")
    return EXIT_OK


def cmd_report(cfg: Config, args) -> int:
    from .metrics import build_report
    from .plotting import plot_curves

    if not os.path.isdir(args.results):
        raise UsageError(f"results directory not found: {args.results}")
    out = args.out or os.path.join(args.results, "report")
    echo_config(cfg, out)
    m = cfg.metrics
    result = build_report(
        args.results, args.profiles or args.results, out, checkpoints=m.checkpoints, window=m.window,
        last_n=m.last_n, level=m.winsor_level, tail=m.winsor_tail if m.winsor_tail >= 0 else None,
    )
    if not result.games:
        print(f"warning: no episode logs found under {args.results}; empty report", file=sys.stderr)
    if not args.no_plots:
        for game in result.games:
            plot_curves(os.path.join(out, f"curves_{game}.csv"), os.path.join(out, f"curves_{game}.png"), title=game)
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(os.path.join(out, "correlation.csv"))
    return EXIT_OK


COMMANDS = {"pretrain": cmd_pretrain, "selfplay": cmd_selfplay, "analyze-ram": cmd_analyze_ram, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    from .metrics import ReportInputError

    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except (UsageError, ConfigError) as exc:
        print(f"duelforge {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ReportInputError as exc:
        print(f"duelforge {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"duelforge {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
