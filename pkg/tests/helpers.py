from duelforge.config import Config


def tiny_config(game="duelpong", episodes=3, seeds=(7,)):
    """Small batch, short warmup and budget so training code runs in seconds."""
    cfg = Config(game=game)
    cfg.learner.warmup_factor = 2
    cfg.single_player.steps = 2_000
    cfg.single_player.batch_size = 16
    cfg.single_player.num_envs = 4
    cfg.single_player.buffer_size = 5_000
    tp = cfg.two_player
    tp.episode_budget = episodes
    tp.seeds = seeds
    tp.batch_size = 16
    tp.buffer_size = 5_000
    return cfg.validate()
