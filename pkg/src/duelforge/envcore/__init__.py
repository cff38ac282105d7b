from .env import (
    AgentIndication,
    AnnotationMap,
    ByteEnv,
    EnvConfig,
    EpisodeOverError,
    StepResult,
    clip_and_normalize,
    make_env,
    random_rollout,
    reconstruct_for_player2,
)
from .games import GAMES, RAM_SIZE, CoopCatch, DuelPong, Game, make_game
from .io import load_annotation, load_trace, parse_annotation, save_annotation, save_trace

__all__ = [
    "AgentIndication", "AnnotationMap", "ByteEnv", "EnvConfig", "EpisodeOverError", "StepResult",
    "clip_and_normalize", "make_env", "random_rollout", "reconstruct_for_player2",
    "GAMES", "RAM_SIZE", "CoopCatch", "DuelPong", "Game", "make_game",
    "load_annotation", "load_trace", "parse_annotation", "save_annotation", "save_trace",
]
