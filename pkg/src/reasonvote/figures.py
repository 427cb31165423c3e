"""Figure rendering for the reporting path.

Every plot lands next to its delimited output as a PNG; callers opt out
with --no-figures.  The Agg backend keeps this headless-safe.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import DiversityStats, EvalReport, summary_table


def plot_sweep(points: Sequence[tuple[int, float]], out_path: str | Path, title: str = "") -> Path:
    """Accuracy vs number of aggregated paths."""
    out_path = Path(out_path)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ms = [m for m, _ in points]
    accs = [a for _, a in points]
    ax.plot(ms, accs, marker="o")
    ax.set_xlabel("paths per question (M)")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_summary(reports: Sequence[EvalReport], out_path: str | Path) -> Path:
    """Grouped bar chart of accuracy per method and dataset."""
    out_path = Path(out_path)
    methods, datasets, cells = summary_table(reports)
    fig, ax = plt.subplots(figsize=(max(5, 1.6 * len(datasets)), 3.5))
    width = 0.8 / max(1, len(methods))
    for i, method in enumerate(methods):
        xs = [j + i * width for j in range(len(datasets))]
        ys = [cells.get((method, ds), 0.0) for ds in datasets]
        ax.bar(xs, ys, width=width, label=method)
    ax.set_xticks([j + width * (len(methods) - 1) / 2 for j in range(len(datasets))])
    ax.set_xticklabels(datasets)
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_diversity(stats: DiversityStats, out_path: str | Path) -> Path:
    """Distinct chains vs distinct answers, averaged per question."""
    out_path = Path(out_path)
    fig, ax = plt.subplots(figsize=(4, 3.5))
    ax.bar(
        ["distinct chains", "distinct answers"],
        [stats.avg_distinct_chains, stats.avg_distinct_answers],
        color=["tab:blue", "tab:orange"],
    )
    ax.set_ylabel("average per question")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
