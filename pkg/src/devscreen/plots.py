"""Figure rendering for evaluation reports.

Every helper writes a PNG to the given path and returns the path. The
Agg backend is forced so rendering works headless; figures carry no
timestamps, keeping report outputs reproducible byte for byte.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluate import CVReport, EvalReport  # noqa: E402
from .triage import LeafStats  # noqa: E402

_METRICS = ("precision", "recall", "f1")


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, metadata={"Software": ""})
    plt.close(fig)
    return path


def save_metric_bars(reports: Sequence[EvalReport], path: str | Path) -> Path:
    """Grouped precision/recall/f1 bars, one group per report."""
    fig, ax = plt.subplots(figsize=(max(4.0, 1.8 * len(reports)), 3.2))
    width = 0.27
    for m, metric in enumerate(_METRICS):
        xs = [i + (m - 1) * width for i in range(len(reports))]
        ys = [getattr(r, metric) or 0.0 for r in reports]
        ax.bar(xs, ys, width=width, label=metric)
    ax.set_xticks(range(len(reports)))
    ax.set_xticklabels([r.strategy_descriptor or f"run {i}" for i, r in enumerate(reports)],
                       rotation=20, ha="right", fontsize=8)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("score")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def save_cv_folds(report: CVReport, path: str | Path) -> Path:
    """Per-fold precision/recall with pooled values as horizontal lines."""
    fig, ax = plt.subplots(figsize=(5.2, 3.2))
    xs = list(range(1, report.k + 1))
    for metric, marker in (("precision", "o"), ("recall", "s")):
        ys = [getattr(r, metric) for r in report.per_fold]
        ax.plot(xs, [y if y is not None else float("nan") for y in ys],
                marker=marker, label=metric)
        pooled = getattr(report.pooled, metric)
        if pooled is not None:
            ax.axhline(pooled, linestyle="--", linewidth=0.8, alpha=0.6)
    ax.set_xlabel("fold")
    ax.set_ylabel("score")
    ax.set_xticks(xs)
    ax.set_ylim(0.0, 1.05)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def save_baseline_curve(reports: Sequence[EvalReport], fractions: Sequence[float],
                        path: str | Path) -> Path:
    """Precision/recall against the selection fraction."""
    fig, ax = plt.subplots(figsize=(5.2, 3.2))
    for metric, marker in (("precision", "o"), ("recall", "s")):
        ys = [getattr(r, metric) for r in reports]
        ax.plot(list(fractions), [y if y is not None else float("nan") for y in ys],
                marker=marker, label=metric)
    ax.set_xlabel("fraction")
    ax.set_ylabel("score")
    ax.set_ylim(0.0, 1.05)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def save_leaf_errors(stats: Sequence[LeafStats], path: str | Path) -> Path:
    """Stacked correct/incorrect counts per leaf, sorted by error count."""
    ordered = sorted(stats, key=lambda s: (-s.n_incorrect, s.leaf_id))
    fig, ax = plt.subplots(figsize=(max(4.0, 0.5 * len(ordered)), 3.2))
    xs = range(len(ordered))
    ax.bar(xs, [s.n_correct for s in ordered], label="correct", color="#7da7d9")
    ax.bar(xs, [s.n_incorrect for s in ordered],
           bottom=[s.n_correct for s in ordered], label="incorrect", color="#d97d7d")
    ax.set_xticks(list(xs))
    ax.set_xticklabels([str(s.leaf_id) for s in ordered], fontsize=8)
    ax.set_xlabel("leaf id")
    ax.set_ylabel("records")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)
