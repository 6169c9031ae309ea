"""Render a descent trace to a figure file.

The trace CSV stays the authoritative output; this draws the usual
convergence picture (sigma_max on the left axis, sigma_min on the
right, against iteration) next to it for quick inspection.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")  # file rendering only; must be set before pyplot loads

import matplotlib.pyplot as plt

from .descent import Trace

__all__ = ["plot_trace"]


def plot_trace(trace: Trace, path, title: str | None = None) -> None:
    """Write a sigma_max / sigma_min vs iteration figure (format from the extension)."""
    iters = [r.iter for r in trace.records]
    sigma_max = [r.sigma_max for r in trace.records]
    sigma_min = [r.sigma_min for r in trace.records]

    fig, ax_max = plt.subplots(figsize=(6.4, 4.0))
    ax_min = ax_max.twinx()
    (line_max,) = ax_max.plot(iters, sigma_max, color="tab:blue", label="sigma_max")
    (line_min,) = ax_min.plot(iters, sigma_min, color="tab:red", linestyle="--", label="sigma_min")
    ax_max.set_xlabel("iteration")
    ax_max.set_ylabel("sigma_max", color="tab:blue")
    ax_min.set_ylabel("sigma_min", color="tab:red")
    ax_max.tick_params(axis="y", labelcolor="tab:blue")
    ax_min.tick_params(axis="y", labelcolor="tab:red")
    ax_max.legend(handles=[line_max, line_min], loc="best")
    if title:
        ax_max.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
