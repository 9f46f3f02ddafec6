"""Human-in-the-loop triage: flag high-misclassification leaves, queue
the records routed to them for manual confirmation, persist decisions,
and compute combined (auto + human) metrics.

A session lives in a directory: ``session.json`` holds the immutable
queue and per-item display fields; ``labels.ndjson`` is the append-only
decision store. Reloading the directory replays the store and restores
identical state.
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import LabeledDataset
from .evaluate import EvalReport, confusion, precision_recall
from .features import FeatureVector
from .labels import (DECISION_UNDECIDED, DECISIONS, LabelRecord,
                     append_label_records, decision_to_label,
                     read_label_records, replay)
from .tree import DecisionTree, classify

SESSION_FORMAT = "triage-session/1"
SESSION_FILE = "session.json"
LABELS_FILE = "labels.ndjson"

STATUS_PENDING = "pending"
STATUS_DECIDED = "decided"
STATUS_UNDECIDED = "undecided"

DEFAULT_CRITERIA_TEXT = (
    "Mark TRUE when the project is open to outside participation and its "
    "content builds software: libraries, plugins, frameworks, or tools.\n"
    "Mark FALSE for mirrors, forks, coursework, personal snippets, "
    "configuration collections, demos, and documentation-only repositories.\n"
    "Mark UNDECIDED when the description and metadata leave genuine doubt; "
    "undecided items return to the queue for a second pass."
)


class TriageError(Exception):
    """Raised for invalid session operations."""


@dataclass(frozen=True)
class LeafStats:
    leaf_id: int
    n_routed: int
    n_correct: int
    n_incorrect: int
    predicted_class: bool


@dataclass(frozen=True)
class FlagSet:
    flagged_leaf_ids: frozenset[int]
    coverage: float
    effort: float
    diagnostic: str = ""


@dataclass(frozen=True)
class QueueItem:
    project_id: str
    auto_class: bool
    leaf_id: int
    description: str | None
    url: str
    language: str | None
    star: int
    watcher: int
    committer: int
    community: int

    def as_api_dict(self, criteria_text: str) -> dict:
        return {
            "project_id": self.project_id,
            "description": self.description,
            "url": self.url,
            "language": self.language,
            "star": self.star,
            "watcher": self.watcher,
            "committer": self.committer,
            "community": self.community,
            "auto_class": "TRUE" if self.auto_class else "FALSE",
            "criteria_text": criteria_text,
        }


def leaf_statistics(tree: DecisionTree, matrix: Sequence[FeatureVector],
                    labels: Sequence[bool | None]) -> list[LeafStats]:
    """Route every vector and tally correctness per reached leaf."""
    if len(matrix) != len(labels):
        raise TriageError("matrix and labels must be aligned")
    tallies: dict[int, list] = {}
    for fv, label in zip(matrix, labels):
        if label is None:
            raise TriageError("labels must all be present")
        got = classify(tree, fv)
        routed = tallies.setdefault(got.leaf_id, [0, 0, got.klass])
        if got.klass == bool(label):
            routed[0] += 1
        else:
            routed[1] += 1
    return [
        LeafStats(leaf_id=leaf_id, n_routed=correct + incorrect,
                  n_correct=correct, n_incorrect=incorrect, predicted_class=klass)
        for leaf_id, (correct, incorrect, klass) in sorted(tallies.items())
    ]


def select_flag_leaves(stats: Sequence[LeafStats], coverage_target: float = 1.0,
                       effort_budget: float = 1.0, n_total: int | None = None,
                       leaf_ids: Iterable[int] | None = None) -> FlagSet:
    """Pick leaves for manual review.

    With ``leaf_ids`` the set is taken as given. Otherwise leaves are
    added greedily in descending n_incorrect order until coverage
    reaches ``coverage_target`` or the next leaf would push effort past
    ``effort_budget``.
    """
    if n_total is None:
        n_total = sum(s.n_routed for s in stats)
    if n_total <= 0:
        return FlagSet(frozenset(), coverage=1.0, effort=0.0,
                       diagnostic="empty dataset")
    by_id = {s.leaf_id: s for s in stats}
    total_incorrect = sum(s.n_incorrect for s in stats)

    def measure(ids: frozenset[int]) -> tuple[float, float]:
        captured = sum(by_id[i].n_incorrect for i in ids if i in by_id)
        routed = sum(by_id[i].n_routed for i in ids if i in by_id)
        coverage = captured / total_incorrect if total_incorrect else 1.0
        return coverage, routed / n_total

    if leaf_ids is not None:
        ids = frozenset(leaf_ids)
        unknown = ids - set(by_id)
        if unknown:
            raise TriageError(f"unknown leaf ids: {sorted(unknown)}")
        coverage, effort = measure(ids)
        return FlagSet(ids, coverage=coverage, effort=effort)

    if not 0.0 < coverage_target <= 1.0:
        raise TriageError("coverage_target must be in (0, 1]")
    if not 0.0 < effort_budget <= 1.0:
        raise TriageError("effort_budget must be in (0, 1]")
    chosen: set[int] = set()
    routed = 0
    captured = 0
    diagnostic = ""
    for s in sorted(stats, key=lambda s: (-s.n_incorrect, s.leaf_id)):
        coverage = captured / total_incorrect if total_incorrect else 1.0
        if coverage >= coverage_target:
            break
        if (routed + s.n_routed) / n_total > effort_budget:
            if not chosen:
                diagnostic = (f"no leaf fits the effort budget {effort_budget:g}: "
                              f"smallest candidate routes {s.n_routed}/{n_total}")
            break
        chosen.add(s.leaf_id)
        routed += s.n_routed
        captured += s.n_incorrect
    coverage, effort = measure(frozenset(chosen))
    return FlagSet(frozenset(chosen), coverage=coverage, effort=effort,
                   diagnostic=diagnostic)


def partition(tree: DecisionTree, flag_set: FlagSet, ds: LabeledDataset,
              matrix: Sequence[FeatureVector]
              ) -> tuple[list[tuple[str, bool]], list[QueueItem]]:
    """Split the dataset into auto-classified ids and the review queue,
    both in dataset order."""
    records = list(ds)
    if len(records) != len(matrix):
        raise TriageError("dataset and matrix must be aligned")
    auto: list[tuple[str, bool]] = []
    flagged: list[QueueItem] = []
    for rec, fv in zip(records, matrix):
        got = classify(tree, fv)
        if got.leaf_id in flag_set.flagged_leaf_ids:
            flagged.append(QueueItem(
                project_id=rec.project_id, auto_class=got.klass, leaf_id=got.leaf_id,
                description=rec.description, url=rec.url, language=rec.language,
                star=rec.star_count, watcher=rec.watcher_count,
                committer=rec.committer_count, community=rec.community_count))
        else:
            auto.append((rec.project_id, got.klass))
    return auto, flagged


@dataclass
class TriageSession:
    session_id: str
    schema_fingerprint: str
    flag_set: FlagSet
    queue: tuple[QueueItem, ...]
    auto: tuple[tuple[str, bool], ...]
    n_total: int
    criteria_text: str = DEFAULT_CRITERIA_TEXT
    truth: Mapping[str, bool] = field(default_factory=dict)
    label_path: Path | None = None
    decisions: dict[str, LabelRecord] = field(default_factory=dict)
    _queued_ids: frozenset[str] = field(init=False, repr=False)
    _last_stamp: int = field(init=False, default=0, repr=False)

    def __post_init__(self) -> None:
        ids = [item.project_id for item in self.queue]
        self._queued_ids = frozenset(ids)
        if len(ids) != len(self._queued_ids):
            raise TriageError("duplicate project ids in queue")
        foreign = set(self.decisions) - self._queued_ids
        if foreign:
            raise TriageError(f"decisions for unqueued ids: {sorted(foreign)[:5]}")
        for record in self.decisions.values():
            self._last_stamp = max(self._last_stamp, _stamp_value(record.timestamp))

    def status(self, project_id: str) -> str:
        record = self.decisions.get(project_id)
        if record is None:
            return STATUS_PENDING
        return STATUS_UNDECIDED if record.decision == DECISION_UNDECIDED else STATUS_DECIDED

    def item(self, project_id: str) -> QueueItem:
        for item in self.queue:
            if item.project_id == project_id:
                return item
        raise TriageError(f"project {project_id!r} is not queued")

    def pending(self) -> list[QueueItem]:
        return [item for item in self.queue if self.status(item.project_id) == STATUS_PENDING]

    def counts(self) -> dict[str, int]:
        decided = sum(1 for i in self.queue if self.status(i.project_id) == STATUS_DECIDED)
        undecided = sum(1 for i in self.queue if self.status(i.project_id) == STATUS_UNDECIDED)
        return {
            "total": len(self.queue),
            "pending": len(self.queue) - decided - undecided,
            "decided": decided,
            "undecided": undecided,
        }

    @property
    def effort(self) -> float:
        return len(self.queue) / self.n_total if self.n_total else 0.0


def _stamp_value(timestamp: str) -> int:
    try:
        return int(timestamp)
    except (TypeError, ValueError):
        return 0


def _next_stamp(session: TriageSession) -> str:
    # Wall-clock nanoseconds, forced strictly monotone within the session
    # so replay order always matches decision order.
    now = time.time_ns()
    session._last_stamp = max(now, session._last_stamp + 1)
    return str(session._last_stamp)


def record_decision(session: TriageSession, project_id: str, decision: str,
                    note: str = "") -> TriageSession:
    """Store one reviewer decision; persisted to the label store before
    the in-memory session updates. Re-recording overwrites."""
    if project_id not in session._queued_ids:
        raise TriageError(f"project {project_id!r} is not queued")
    if decision not in DECISIONS:
        raise TriageError(
            f"unknown decision {decision!r} (expected one of {', '.join(DECISIONS)})")
    record = LabelRecord(project_id=project_id, decision=decision,
                         source=f"triage:{note}" if note else "triage",
                         timestamp=_next_stamp(session))
    if session.label_path is not None:
        append_label_records(session.label_path, [record])
    session.decisions[project_id] = record
    return session


@dataclass(frozen=True)
class CombinedReport:
    report: EvalReport | None
    effort: float
    n_total: int
    n_auto: int
    n_flagged: int
    pending: int
    decided: int
    undecided: int

    def as_dict(self) -> dict:
        out = {
            "effort": self.effort,
            "n_total": self.n_total,
            "n_auto": self.n_auto,
            "n_flagged": self.n_flagged,
            "pending": self.pending,
            "decided": self.decided,
            "undecided": self.undecided,
        }
        out["metrics"] = self.report.as_dict() if self.report else None
        return out


def combined_metrics(session: TriageSession,
                     truth: Mapping[str, bool] | None = None) -> CombinedReport:
    """Score auto predictions plus human decisions against truth labels.

    Pending and UNDECIDED flagged items are excluded from the matrix and
    reported as counts. Without truth labels only counts are returned.
    """
    truth = dict(truth) if truth is not None else dict(session.truth)
    counts = session.counts()
    preds: list[bool] = []
    actual: list[bool] = []
    if truth:
        for project_id, klass in session.auto:
            if project_id not in truth:
                raise TriageError(f"no truth label for auto item {project_id!r}")
            preds.append(klass)
            actual.append(truth[project_id])
        for item in session.queue:
            record = session.decisions.get(item.project_id)
            if record is None or record.decision == DECISION_UNDECIDED:
                continue
            if item.project_id not in truth:
                raise TriageError(f"no truth label for flagged item {item.project_id!r}")
            preds.append(bool(decision_to_label(record.decision)))
            actual.append(truth[item.project_id])
        report = precision_recall(confusion(preds, actual),
                                  f"combined(session {session.session_id})")
    else:
        report = None
    return CombinedReport(
        report=report, effort=session.effort, n_total=session.n_total,
        n_auto=len(session.auto), n_flagged=len(session.queue),
        pending=counts["pending"], decided=counts["decided"],
        undecided=counts["undecided"],
    )


# ---------------------------------------------------------------------------
# Session persistence


def _session_payload(session: TriageSession) -> dict:
    return {
        "format": SESSION_FORMAT,
        "schema_fingerprint": session.schema_fingerprint,
        "flag_set": {
            "flagged_leaf_ids": sorted(session.flag_set.flagged_leaf_ids),
            "coverage": session.flag_set.coverage,
            "effort": session.flag_set.effort,
            "diagnostic": session.flag_set.diagnostic,
        },
        "n_total": session.n_total,
        "criteria_text": session.criteria_text,
        "auto": [[pid, klass] for pid, klass in session.auto],
        "queue": [
            {
                "project_id": i.project_id,
                "auto_class": i.auto_class,
                "leaf_id": i.leaf_id,
                "description": i.description,
                "url": i.url,
                "language": i.language,
                "star": i.star,
                "watcher": i.watcher,
                "committer": i.committer,
                "community": i.community,
            }
            for i in session.queue
        ],
        "truth": {pid: klass for pid, klass in sorted(session.truth.items())},
    }


def _content_id(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True).encode("utf-8")
    return hashlib.sha256(canonical).hexdigest()[:12]


def create_session(tree: DecisionTree, flag_set: FlagSet, ds: LabeledDataset,
                   matrix: Sequence[FeatureVector],
                   criteria_text: str | None = None) -> TriageSession:
    """Build an in-memory session; the id is a content hash, so the same
    inputs always produce the same session."""
    auto, flagged = partition(tree, flag_set, ds, matrix)
    truth = {rec.project_id: rec.label for rec in ds if rec.label is not None}
    session = TriageSession(
        session_id="",
        schema_fingerprint=tree.schema_fingerprint,
        flag_set=flag_set,
        queue=tuple(flagged),
        auto=tuple(auto),
        n_total=len(matrix),
        criteria_text=criteria_text or DEFAULT_CRITERIA_TEXT,
        truth=truth,
    )
    session.session_id = _content_id(_session_payload(session))
    return session


def save_session(session: TriageSession, directory: str | Path) -> Path:
    """Write ``session.json``; an existing label store is left alone."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    payload = _session_payload(session)
    payload["session_id"] = session.session_id
    target = directory / SESSION_FILE
    tmp = target.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    tmp.replace(target)
    return directory


def load_session(directory: str | Path) -> TriageSession:
    """Reconstruct a session from disk, replaying the label store."""
    directory = Path(directory)
    path = directory / SESSION_FILE
    if not path.exists():
        raise TriageError(f"no {SESSION_FILE} in {directory}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise TriageError(f"{path}: invalid JSON at byte {exc.pos}: {exc.msg}") from exc
    if raw.get("format") != SESSION_FORMAT:
        raise TriageError(f"{path}: missing format tag {SESSION_FORMAT!r}")
    queue = tuple(
        QueueItem(
            project_id=str(q["project_id"]), auto_class=bool(q["auto_class"]),
            leaf_id=int(q["leaf_id"]),
            description=q.get("description"), url=str(q.get("url", "")),
            language=q.get("language"),
            star=int(q.get("star", 0)), watcher=int(q.get("watcher", 0)),
            committer=int(q.get("committer", 0)), community=int(q.get("community", 0)),
        )
        for q in raw.get("queue", [])
    )
    fs = raw.get("flag_set", {})
    label_path = directory / LABELS_FILE
    queued = {item.project_id for item in queue}
    decisions = {
        pid: record
        for pid, record in replay(read_label_records(label_path)).items()
        if pid in queued
    }
    session = TriageSession(
        session_id=str(raw.get("session_id", "")),
        schema_fingerprint=str(raw.get("schema_fingerprint", "")),
        flag_set=FlagSet(
            flagged_leaf_ids=frozenset(int(i) for i in fs.get("flagged_leaf_ids", [])),
            coverage=float(fs.get("coverage", 0.0)),
            effort=float(fs.get("effort", 0.0)),
            diagnostic=str(fs.get("diagnostic", "")),
        ),
        queue=queue,
        auto=tuple((str(pid), bool(klass)) for pid, klass in raw.get("auto", [])),
        n_total=int(raw.get("n_total", 0)),
        criteria_text=str(raw.get("criteria_text", DEFAULT_CRITERIA_TEXT)),
        truth={str(pid): bool(klass) for pid, klass in raw.get("truth", {}).items()},
        label_path=label_path,
        decisions=decisions,
    )
    return session


def export_labels(session: TriageSession) -> str:
    """Current decisions as line-delimited label records, queue order."""
    lines = []
    for item in session.queue:
        record = session.decisions.get(item.project_id)
        if record is not None:
            lines.append(record.to_json())
    return "\n".join(lines) + ("\n" if lines else "")
