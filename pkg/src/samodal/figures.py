"""Matplotlib figures accompanying the text reports.

The report path of `eval` and `ablate` can drop PNG figures next to the
delimited output: precision-recall curves per IoU threshold, and grouped
mean/std bars for ablation grids. Figures are presentation sugar; the JSON
and TSV files stay the canonical outputs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import RECALL_GRID


def save_pr_curves(
    curves: dict[float, np.ndarray], path: str | Path, title: str
) -> Path | None:
    """One PR panel, one line per IoU threshold."""
    if not curves:
        return None
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for thr in sorted(curves):
        ax.plot(RECALL_GRID, curves[thr], label=f"IoU {thr:.2f}", linewidth=1.4)
    ax.set_xlabel("recall")
    ax.set_ylabel("interpolated precision")
    ax.set_title(title)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=7, ncol=2, frameon=False)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_ablation_bars(
    metric_rows: list[str],
    columns: list[str],
    means: dict[str, list[float | None]],
    stds: dict[str, list[float | None]],
    path: str | Path,
    title: str,
) -> Path:
    """Grouped bars: one group per metric row, one bar per grid column."""
    fig, ax = plt.subplots(figsize=(max(6.0, 1.3 * len(metric_rows)), 4.0))
    n_cols = len(columns)
    width = 0.8 / max(n_cols, 1)
    x = np.arange(len(metric_rows))
    for ci, col in enumerate(columns):
        heights = [
            0.0 if means[row][ci] is None else means[row][ci] for row in metric_rows
        ]
        errs = [
            0.0 if stds[row][ci] is None else stds[row][ci] for row in metric_rows
        ]
        ax.bar(
            x + (ci - (n_cols - 1) / 2) * width,
            heights,
            width=width * 0.92,
            yerr=errs,
            capsize=2,
            label=col,
        )
    ax.set_xticks(x)
    ax.set_xticklabels(metric_rows, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("score")
    ax.set_title(title)
    ax.legend(fontsize=8, frameon=False)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
