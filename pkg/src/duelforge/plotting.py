"""Matplotlib renderings of report curves and RAM heatmaps.

Figures are written to files only; the Agg backend is selected so no display
is needed.
"""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .ramscope import VariationProfile, heatmap_grid  # noqa: E402


def plot_curves(curves_csv, png_path, title: str | None = None) -> str:
    """Line plot of the seed-averaged smoothed reward curves in ``curves_<game>.csv``."""
    with open(curves_csv, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    fig, ax = plt.subplots(figsize=(7, 4))
    for col in range(1, len(header)):
        pts = [(int(r[0]), float(r[col])) for r in body if r[col] != ""]
        if pts:
            ax.plot(*zip(*pts), label=header[col], linewidth=1.2)
    ax.set_xlabel("episode")
    ax.set_ylabel("reward (running average)")
    if title:
        ax.set_title(title)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(png_path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return os.fspath(png_path)


def plot_heatmap(profile: VariationProfile, png_path, title: str | None = None) -> str:
    fig, ax = plt.subplots(figsize=(3.2, 5))
    im = ax.imshow(heatmap_grid(profile), cmap="gray", vmin=0, vmax=profile.cap, interpolation="nearest")
    ax.set_xticks(range(8))
    ax.set_yticks(range(0, 16, 2))
    ax.set_xlabel("byte % 8")
    ax.set_ylabel("byte // 8")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, fraction=0.08)
    fig.tight_layout()
    fig.savefig(png_path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return os.fspath(png_path)
