"""Matplotlib rendering of ensemble trajectories to image files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")  # headless; render straight to files

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_ensemble_figure"]


def render_ensemble_figure(curves, out_path, title: str | None = None,
                           reference: tuple[str, np.ndarray, np.ndarray] | None = None):
    """Log-scale mean-V trajectories with their percentile bands.

    curves is a list of dicts with keys label, grid, mean, low, high;
    reference is an optional (label, grid, values) dashed overlay.
    """
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for c in curves:
        line, = ax.plot(c["grid"], c["mean"], lw=1.6, label=c["label"])
        ax.fill_between(c["grid"], np.maximum(c["low"], 1e-300), c["high"],
                        color=line.get_color(), alpha=0.18, lw=0)
    if reference is not None:
        name, grid, vals = reference
        ax.plot(grid, vals, "k--", lw=1.2, label=name)
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("mean V(s(t))")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.25)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
