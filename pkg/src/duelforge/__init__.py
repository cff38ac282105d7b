"""Single-player to two-player transfer under self-play on byte-state games."""

__version__ = "0.1.0"
