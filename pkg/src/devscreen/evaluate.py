"""Metrics, stratified cross-validation, count-threshold baselines, and
the misclassification refinement report.

Precision and recall use TRUE (public development project) as the
positive class. Degenerate denominators yield ``None`` rather than a
number, and ``None`` propagates into f1.
"""
from __future__ import annotations

import csv
import io
import math
import random
import re
import statistics
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .corpus import LabeledDataset
from .features import FeatureSchema, FeatureVector, default_schema, normalize_text
from .tree import DecisionTree, TrainParams, classify, train

DIMENSIONS = ("committer", "community", "star", "watcher")


class EvalError(Exception):
    """Raised for invalid evaluation inputs."""


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise EvalError("confusion cells must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)


@dataclass(frozen=True)
class EvalReport:
    precision: float | None
    recall: float | None
    f1: float | None
    matrix: ConfusionMatrix
    strategy_descriptor: str = ""

    def as_dict(self) -> dict:
        return {
            "strategy": self.strategy_descriptor,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.matrix.tp,
            "fp": self.matrix.fp,
            "fn": self.matrix.fn,
            "tn": self.matrix.tn,
        }


@dataclass(frozen=True)
class CVReport:
    k: int
    seed: int
    per_fold: tuple[EvalReport, ...]
    pooled: EvalReport
    mean_precision: float | None
    std_precision: float | None
    mean_recall: float | None
    std_recall: float | None


@dataclass(frozen=True)
class RefineConfig:
    misclassification_threshold: float = 0.15
    top_ngrams: int = 30

    def __post_init__(self) -> None:
        if not 0.0 < self.misclassification_threshold < 1.0:
            raise EvalError("misclassification_threshold must be in (0, 1)")
        if self.top_ngrams < 1:
            raise EvalError("top_ngrams must be positive")


def confusion(predictions: Sequence[bool], truth: Sequence[bool]) -> ConfusionMatrix:
    if len(predictions) != len(truth):
        raise EvalError(f"length mismatch: {len(predictions)} predictions, {len(truth)} truths")
    tp = fp = fn = tn = 0
    for pred, actual in zip(predictions, truth):
        if actual is None:
            raise EvalError("truth labels must all be present")
        if pred and actual:
            tp += 1
        elif pred and not actual:
            fp += 1
        elif not pred and actual:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


def precision_recall(m: ConfusionMatrix, strategy_descriptor: str = "") -> EvalReport:
    precision = m.tp / (m.tp + m.fp) if m.tp + m.fp > 0 else None
    recall = m.tp / (m.tp + m.fn) if m.tp + m.fn > 0 else None
    if precision is None or recall is None:
        f1 = None
    elif precision + recall == 0.0:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return EvalReport(precision=precision, recall=recall, f1=f1, matrix=m,
                      strategy_descriptor=strategy_descriptor)


def evaluate_tree(tree: DecisionTree, matrix: Sequence[FeatureVector],
                  labels: Sequence[bool | None], strategy_descriptor: str = "") -> EvalReport:
    """Classify every vector and score against the labels."""
    preds = [classify(tree, fv).klass for fv in matrix]
    return precision_recall(confusion(preds, list(labels)), strategy_descriptor)


# ---------------------------------------------------------------------------
# Cross-validation


def stratified_folds(labels: Sequence[bool], k: int, seed: int) -> list[list[int]]:
    """Deal a seeded per-class shuffle round-robin into k folds.

    Folds are disjoint, cover all indices, and per-fold class counts
    differ by at most one across folds.
    """
    if k < 2:
        raise EvalError("fold count must be >= 2")
    if k > len(labels):
        raise EvalError(f"fold count {k} exceeds dataset size {len(labels)}")
    rng = random.Random(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    dealt = 0
    # One dealing pointer across both classes keeps fold sizes within one
    # of each other too (empty folds would break leave-one-out).
    for klass in (False, True):
        idx = [i for i, label in enumerate(labels) if bool(label) == klass]
        rng.shuffle(idx)
        for i in idx:
            folds[dealt % k].append(i)
            dealt += 1
    for fold in folds:
        fold.sort()
    return folds


def cross_validate(matrix: Sequence[FeatureVector], labels: Sequence[bool | None],
                   k: int, params: TrainParams | None = None, seed: int = 0) -> CVReport:
    """Stratified k-fold CV. The pooled confusion matrix is the primary
    aggregate; per-fold mean and stddev are reported alongside."""
    params = params or TrainParams()
    for i, label in enumerate(labels):
        if label is None:
            raise EvalError(f"label missing for row {i}")
    y = [bool(l) for l in labels]
    folds = stratified_folds(y, k, seed)
    per_fold: list[EvalReport] = []
    pooled = ConfusionMatrix()
    for fold_no, holdout in enumerate(folds):
        held = set(holdout)
        train_matrix = [matrix[i] for i in range(len(matrix)) if i not in held]
        train_labels = [y[i] for i in range(len(y)) if i not in held]
        tree = train(train_matrix, train_labels, params)
        preds = [classify(tree, matrix[i]).klass for i in holdout]
        m = confusion(preds, [y[i] for i in holdout])
        per_fold.append(precision_recall(m, f"fold {fold_no}"))
        pooled = pooled + m

    def agg(values: list[float | None]) -> tuple[float | None, float | None]:
        defined = [v for v in values if v is not None]
        if not defined:
            return None, None
        mean = statistics.mean(defined)
        std = statistics.stdev(defined) if len(defined) > 1 else 0.0
        return mean, std

    mean_p, std_p = agg([r.precision for r in per_fold])
    mean_r, std_r = agg([r.recall for r in per_fold])
    return CVReport(
        k=k, seed=seed, per_fold=tuple(per_fold),
        pooled=precision_recall(pooled, f"pooled {k}-fold cv (seed {seed})"),
        mean_precision=mean_p, std_precision=std_p,
        mean_recall=mean_r, std_recall=std_r,
    )


# ---------------------------------------------------------------------------
# Count-threshold baselines


def _baseline(ds: LabeledDataset, dimension: str, fraction: float,
              strategy: str) -> EvalReport:
    if dimension not in DIMENSIONS:
        raise EvalError(f"unknown dimension {dimension!r} (have: {', '.join(DIMENSIONS)})")
    if not 0.0 <= fraction <= 1.0:
        raise EvalError("fraction must be in [0, 1]")
    records = list(ds)
    truth: list[bool] = []
    for rec in records:
        if rec.label is None:
            raise EvalError(f"record {rec.project_id} has no label")
        truth.append(rec.label)
    n = len(records)
    cut = math.ceil(fraction * n)
    if strategy == "top":
        order = sorted(range(n), key=lambda i: (-records[i].count(dimension),
                                                records[i].project_id))
        chosen = set(order[:cut])
        preds = [i in chosen for i in range(n)]
        descriptor = f"top({dimension}, p={fraction:g})"
    else:
        order = sorted(range(n), key=lambda i: (records[i].count(dimension),
                                                records[i].project_id))
        deleted = set(order[:cut])
        preds = [i not in deleted for i in range(n)]
        descriptor = f"bottom({dimension}, p={fraction:g})"
    return precision_recall(confusion(preds, truth), descriptor)


def baseline_top(ds: LabeledDataset, dimension: str, fraction: float) -> EvalReport:
    """Predict TRUE for the top ``ceil(fraction * n)`` records by count
    (descending, ties by project_id), FALSE for the rest."""
    return _baseline(ds, dimension, fraction, "top")


def baseline_bottom(ds: LabeledDataset, dimension: str, fraction: float) -> EvalReport:
    """Delete (predict FALSE for) the bottom ``ceil(fraction * n)``
    records by count; everything remaining is predicted TRUE."""
    return _baseline(ds, dimension, fraction, "bottom")


# ---------------------------------------------------------------------------
# Misclassification / refinement report


@dataclass(frozen=True)
class MisclassifiedItem:
    project_id: str
    description: str | None
    predicted: bool
    truth: bool
    leaf_id: int


@dataclass(frozen=True)
class MisclassReport:
    items: tuple[MisclassifiedItem, ...]
    n_total: int
    threshold: float
    threshold_exceeded: bool
    candidate_strings: tuple[str, ...] = field(default=())

    @property
    def fraction(self) -> float:
        return len(self.items) / self.n_total if self.n_total else 0.0


def _ngrams(text: str) -> list[str]:
    tokens = re.findall(r"[a-z0-9]+", normalize_text(text))
    grams = list(tokens)
    grams.extend(f"{a} {b}" for a, b in zip(tokens, tokens[1:]))
    return grams


def misclassification_report(tree: DecisionTree, matrix: Sequence[FeatureVector],
                             labels: Sequence[bool | None], ds: LabeledDataset,
                             cfg: RefineConfig | None = None,
                             schema: FeatureSchema | None = None) -> MisclassReport:
    """List every misclassified record and surface frequent description
    n-grams (not already lexicon patterns) as candidate new keywords."""
    cfg = cfg or RefineConfig()
    schema = schema or default_schema()
    records = list(ds)
    if not len(records) == len(matrix) == len(labels):
        raise EvalError("dataset, matrix, and labels must be aligned")
    items: list[MisclassifiedItem] = []
    for rec, fv, label in zip(records, matrix, labels):
        if label is None:
            raise EvalError(f"record {rec.project_id} has no label")
        got = classify(tree, fv)
        if got.klass != bool(label):
            items.append(MisclassifiedItem(
                project_id=rec.project_id, description=rec.description,
                predicted=got.klass, truth=bool(label), leaf_id=got.leaf_id))

    known_patterns = {kw.pattern for kw in schema.description_keywords}
    counts: Counter[str] = Counter()
    for item in items:
        if item.description:
            counts.update(set(_ngrams(item.description)))
    ranked = sorted((g for g in counts if g not in known_patterns),
                    key=lambda g: (-counts[g], g))
    n_total = len(records)
    return MisclassReport(
        items=tuple(items),
        n_total=n_total,
        threshold=cfg.misclassification_threshold,
        threshold_exceeded=(len(items) / n_total > cfg.misclassification_threshold
                            if n_total else False),
        candidate_strings=tuple(ranked[:cfg.top_ngrams]),
    )


# ---------------------------------------------------------------------------
# Report serialization

REPORT_COLUMNS = ("strategy", "precision", "recall", "f1", "tp", "fp", "fn", "tn")


def _format_metric(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def reports_to_csv(reports: Sequence[EvalReport]) -> str:
    """One row per strategy/fold; blank cell for undefined metrics."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in reports:
        writer.writerow([
            r.strategy_descriptor,
            _format_metric(r.precision), _format_metric(r.recall), _format_metric(r.f1),
            r.matrix.tp, r.matrix.fp, r.matrix.fn, r.matrix.tn,
        ])
    return buf.getvalue()


def render_eval(report: EvalReport) -> str:
    m = report.matrix
    lines = []
    if report.strategy_descriptor:
        lines.append(f"strategy:  {report.strategy_descriptor}")
    lines.append(f"precision: {_format_metric(report.precision) or 'undefined'}")
    lines.append(f"recall:    {_format_metric(report.recall) or 'undefined'}")
    lines.append(f"f1:        {_format_metric(report.f1) or 'undefined'}")
    lines.append(f"matrix:    tp={m.tp} fp={m.fp} fn={m.fn} tn={m.tn} (n={m.total})")
    return "\n".join(lines) + "\n"


def render_cv(report: CVReport) -> str:
    lines = [render_eval(report.pooled).rstrip("\n")]
    lines.append(f"folds:     {report.k} (seed {report.seed})")
    lines.append(
        "per-fold:  precision "
        f"{_format_metric(report.mean_precision) or 'undefined'}"
        f" +/- {_format_metric(report.std_precision) or 'n/a'},"
        " recall "
        f"{_format_metric(report.mean_recall) or 'undefined'}"
        f" +/- {_format_metric(report.std_recall) or 'n/a'}"
    )
    return "\n".join(lines) + "\n"
