"""PNG renderings written next to the CSV/JSONL outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_heatmap(heat: np.ndarray, path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(4, 4))
    im = ax.imshow(heat, cmap="viridis", origin="upper")
    ax.set_xticks([])
    ax.set_yticks([])
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return Path(path)


def plot_curves(curves: dict, path, ylabel: str = "solve rate") -> Path:
    """``curves`` maps a label to a list of {'env_steps', 'solve_rate_mean', 'solve_rate_std'} dicts."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, recs in curves.items():
        x = np.array([r["env_steps"] for r in recs])
        m = np.array([r["solve_rate_mean"] for r in recs])
        s = np.array([r["solve_rate_std"] for r in recs])
        ax.plot(x, m, label=label)
        ax.fill_between(x, m - s, m + s, alpha=0.2)
    ax.set_xlabel("environment steps")
    ax.set_ylabel(ylabel)
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return Path(path)


def plot_bars(labels, values, errors, path, ylabel: str) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(values)), values, yerr=errors, capsize=4)
    ax.set_xticks(range(len(values)))
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return Path(path)
