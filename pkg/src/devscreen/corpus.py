"""Project record ingestion, exclusion filters, and label merging.

Records arrive as CSV (with a header row) or NDJSON files. A column map
binds record field names to column/key names so dumps with arbitrary
headers can be ingested without rewriting them.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import IO, Iterable, Iterator

from .labels import (
    DECISION_FALSE,
    DECISION_TRUE,
    DECISION_UNDECIDED,
    LabelRecord,
    read_label_records,
)

COUNT_FIELDS = ("star_count", "watcher_count", "committer_count", "community_count")

#: Canonical column order used by the CSV/NDJSON writers.
RECORD_FIELDS = (
    "project_id",
    "owner",
    "name",
    "url",
    "description",
    "language",
    *COUNT_FIELDS,
    "is_fork",
    "created_at",
    "label",
)

REQUIRED_FIELDS = ("project_id", "owner", "name", "url", *COUNT_FIELDS, "is_fork")
OPTIONAL_FIELDS = ("description", "language", "created_at", "label")

_TRUE_TOKENS = {"true", "1", "yes", "t"}
_FALSE_TOKENS = {"false", "0", "no", "f", ""}


class CorpusError(Exception):
    """Raised for invalid records, datasets, or configuration."""


class ParseError(CorpusError):
    """Raised when an input file cannot be parsed into records."""


def _clean_optional(value: str | None) -> str | None:
    # Empty and whitespace-only strings collapse to missing so that
    # CSV round trips are lossless (a CSV cell cannot distinguish them).
    if value is None:
        return None
    if not value.strip():
        return None
    return value


@dataclass(frozen=True)
class ProjectRecord:
    """One repository's raw metadata plus an optional ground-truth label."""

    project_id: str
    owner: str = ""
    name: str = ""
    url: str = ""
    description: str | None = None
    language: str | None = None
    star_count: int = 0
    watcher_count: int = 0
    committer_count: int = 0
    community_count: int = 0
    is_fork: bool = False
    created_at: str | None = None
    label: bool | None = None

    def __post_init__(self) -> None:
        if not self.project_id:
            raise CorpusError("project_id must be non-empty")
        for name in COUNT_FIELDS:
            if getattr(self, name) < 0:
                raise CorpusError(f"{name} must be >= 0, got {getattr(self, name)}")
        object.__setattr__(self, "description", _clean_optional(self.description))
        object.__setattr__(self, "language", _clean_optional(self.language))
        object.__setattr__(self, "created_at", _clean_optional(self.created_at))

    def count(self, dimension: str) -> int:
        """Return one of the four ranking counts by short name (e.g. "star")."""
        field_name = f"{dimension}_count"
        if field_name not in COUNT_FIELDS:
            raise CorpusError(f"unknown count dimension {dimension!r}")
        return getattr(self, field_name)


@dataclass(frozen=True)
class LabeledDataset:
    """An ordered, duplicate-free collection of project records."""

    records: tuple[ProjectRecord, ...]
    provenance: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        seen: set[str] = set()
        for rec in self.records:
            if rec.project_id in seen:
                raise CorpusError(f"duplicate project_id {rec.project_id!r}")
            seen.add(rec.project_id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ProjectRecord]:
        return iter(self.records)

    def by_id(self, project_id: str) -> ProjectRecord:
        for rec in self.records:
            if rec.project_id == project_id:
                return rec
        raise KeyError(project_id)

    def labeled_fraction(self) -> float:
        if not self.records:
            return 0.0
        return sum(1 for r in self.records if r.label is not None) / len(self.records)


@dataclass(frozen=True)
class ColumnMap:
    """Binds record field names to input column/key names.

    ``removed_marker`` optionally overrides which fields must be missing
    and which counts must be zero for a record to count as removed from
    the hosting platform (dumps keep rows for deleted repositories with
    stripped metadata).
    """

    columns: dict[str, str] = field(default_factory=dict)
    removed_require_missing: tuple[str, ...] = ("description", "language")
    removed_require_zero: tuple[str, ...] = COUNT_FIELDS

    def column_for(self, field_name: str) -> str:
        return self.columns.get(field_name, field_name)

    @classmethod
    def load(cls, path: str | Path) -> "ColumnMap":
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
        if not isinstance(raw, dict):
            raise CorpusError("column map must be a JSON object")
        columns = raw.get("fields", {})
        if not isinstance(columns, dict):
            raise CorpusError("column map 'fields' must be an object")
        marker = raw.get("removed_marker", {})
        return cls(
            columns=dict(columns),
            removed_require_missing=tuple(marker.get("require_missing", ("description", "language"))),
            removed_require_zero=tuple(marker.get("require_zero", COUNT_FIELDS)),
        )


def _parse_int(value: str | None, row: int, field_name: str) -> int:
    if value is None or value == "":
        raise ParseError(f"row {row}: {field_name} missing")
    try:
        parsed = int(str(value).strip())
    except (TypeError, ValueError):
        raise ParseError(f"row {row}: {field_name} not an integer") from None
    if parsed < 0:
        raise ParseError(f"row {row}: {field_name} negative")
    return parsed


def _parse_bool(value, row: int, field_name: str) -> bool:
    if isinstance(value, bool):
        return value
    token = str(value or "").strip().lower()
    if token in _TRUE_TOKENS:
        return True
    if token in _FALSE_TOKENS:
        return False
    raise ParseError(f"row {row}: {field_name} not a boolean ({value!r})")


def _parse_label(value, row: int) -> bool | None:
    if value is None:
        return None
    if isinstance(value, bool):
        return value
    token = str(value).strip().upper()
    if token == "":
        return None
    if token in (DECISION_TRUE, "1"):
        return True
    if token in (DECISION_FALSE, "0"):
        return False
    raise ParseError(f"row {row}: label not TRUE/FALSE ({value!r})")


def _record_from_mapping(raw: dict, row: int, cmap: ColumnMap) -> ProjectRecord:
    def get(field_name: str):
        return raw.get(cmap.column_for(field_name))

    pid = get("project_id")
    if pid is None or str(pid).strip() == "":
        raise ParseError(f"row {row}: project_id missing")
    description = get("description")
    language = get("language")
    created_at = get("created_at")
    try:
        return ProjectRecord(
            project_id=str(pid).strip(),
            owner=str(get("owner") or ""),
            name=str(get("name") or ""),
            url=str(get("url") or ""),
            description=None if description is None else str(description),
            language=None if language is None else str(language),
            star_count=_parse_int(get("star_count"), row, "star_count"),
            watcher_count=_parse_int(get("watcher_count"), row, "watcher_count"),
            committer_count=_parse_int(get("committer_count"), row, "committer_count"),
            community_count=_parse_int(get("community_count"), row, "community_count"),
            is_fork=_parse_bool(get("is_fork"), row, "is_fork"),
            created_at=None if created_at is None else str(created_at),
            label=_parse_label(get("label"), row),
        )
    except CorpusError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"row {row}: {exc}") from exc


def _open_source(source) -> IO[str]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8"))
    if isinstance(source, str):  # pragma: no cover - handled above
        return io.StringIO(source)
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        return io.StringIO(data)
    raise ParseError(f"unreadable source {source!r}")


def parse_projects(source, format: str = "csv", column_map: ColumnMap | None = None,
                   provenance: str = "") -> LabeledDataset:
    """Parse a CSV or NDJSON stream into a :class:`LabeledDataset`.

    Rows are numbered from 1 (header excluded for CSV) in error messages.
    Duplicate project ids and malformed fields are fatal.
    """
    cmap = column_map or ColumnMap()
    records: list[ProjectRecord] = []
    seen: set[str] = set()
    handle = _open_source(source)
    try:
        if format == "csv":
            reader = csv.DictReader(handle)
            for row_no, raw in enumerate(reader, start=1):
                cleaned = {k: (v if v != "" else None) for k, v in raw.items() if k is not None}
                if cleaned.get(cmap.column_for("is_fork")) is None:
                    cleaned[cmap.column_for("is_fork")] = "false"
                rec = _record_from_mapping(cleaned, row_no, cmap)
                if rec.project_id in seen:
                    raise ParseError(f"row {row_no}: duplicate project_id {rec.project_id!r}")
                seen.add(rec.project_id)
                records.append(rec)
        elif format == "ndjson":
            for row_no, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    raw = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"row {row_no}: invalid JSON ({exc.msg})") from exc
                if not isinstance(raw, dict):
                    raise ParseError(f"row {row_no}: expected a JSON object")
                rec = _record_from_mapping(raw, row_no, cmap)
                if rec.project_id in seen:
                    raise ParseError(f"row {row_no}: duplicate project_id {rec.project_id!r}")
                seen.add(rec.project_id)
                records.append(rec)
        else:
            raise ParseError(f"unknown format {format!r} (expected csv or ndjson)")
    finally:
        handle.close()
    return LabeledDataset(records=tuple(records), provenance=provenance)


def _record_to_row(rec: ProjectRecord) -> dict[str, str]:
    row: dict[str, str] = {}
    for name in RECORD_FIELDS:
        value = getattr(rec, name)
        if name == "is_fork":
            row[name] = "true" if value else "false"
        elif name == "label":
            row[name] = "" if value is None else (DECISION_TRUE if value else DECISION_FALSE)
        elif value is None:
            row[name] = ""
        else:
            row[name] = str(value)
    return row


def serialize_dataset(ds: LabeledDataset, format: str = "csv") -> str:
    """Render a dataset back to CSV or NDJSON text (inverse of parsing)."""
    if format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=RECORD_FIELDS, lineterminator="\n")
        writer.writeheader()
        for rec in ds:
            writer.writerow(_record_to_row(rec))
        return buf.getvalue()
    if format == "ndjson":
        lines = []
        for rec in ds:
            obj: dict = {}
            for name in RECORD_FIELDS:
                value = getattr(rec, name)
                if name == "label" and value is not None:
                    value = DECISION_TRUE if value else DECISION_FALSE
                if value is not None:
                    obj[name] = value
            lines.append(json.dumps(obj, sort_keys=True))
        return "\n".join(lines) + ("\n" if lines else "")
    raise CorpusError(f"unknown format {format!r}")


def save_dataset(ds: LabeledDataset, path: str | Path, format: str | None = None) -> None:
    path = Path(path)
    if format is None:
        format = "ndjson" if path.suffix in (".ndjson", ".jsonl") else "csv"
    path.write_text(serialize_dataset(ds, format), encoding="utf-8")


def load_dataset(path: str | Path, format: str | None = None,
                 column_map: ColumnMap | None = None) -> LabeledDataset:
    path = Path(path)
    if format is None:
        format = "ndjson" if path.suffix in (".ndjson", ".jsonl") else "csv"
    return parse_projects(path, format=format, column_map=column_map, provenance=str(path))


# ---------------------------------------------------------------------------
# Exclusion filters


@dataclass(frozen=True)
class FilterConfig:
    """Which exclusion filters run, and their parameters.

    A record is "removed" when every field in ``removed_require_missing``
    is absent and every count in ``removed_require_zero`` is zero. The
    non-English filter is a transparent heuristic (fraction of letters
    that are ASCII) and defaults to off.
    """

    drop_forks: bool = True
    drop_removed: bool = True
    drop_non_english: bool = False
    english_ascii_letter_ratio: float = 0.8
    removed_require_missing: tuple[str, ...] = ("description", "language")
    removed_require_zero: tuple[str, ...] = COUNT_FIELDS

    def __post_init__(self) -> None:
        if not 0.0 <= self.english_ascii_letter_ratio <= 1.0:
            raise CorpusError("english_ascii_letter_ratio must be within [0, 1]")


@dataclass(frozen=True)
class ExclusionReport:
    """Per-reason exclusion counts. A record counts once, under the first
    matching reason in order: fork, removed, non-English."""

    fork: int = 0
    removed: int = 0
    non_english: int = 0

    @property
    def total(self) -> int:
        return self.fork + self.removed + self.non_english

    def as_dict(self) -> dict[str, int]:
        return {"fork": self.fork, "removed": self.removed, "non_english": self.non_english}


def _is_removed(rec: ProjectRecord, cfg: FilterConfig) -> bool:
    for name in cfg.removed_require_missing:
        if getattr(rec, name) is not None:
            return False
    for name in cfg.removed_require_zero:
        if getattr(rec, name) != 0:
            return False
    return True


def looks_english(text: str | None, ratio: float) -> bool:
    """ASCII-letter heuristic: True when at least ``ratio`` of the letter
    characters are ASCII. Missing or letter-free text passes (no evidence)."""
    if text is None:
        return True
    letters = [ch for ch in text if ch.isalpha()]
    if not letters:
        return True
    ascii_letters = sum(1 for ch in letters if ch.isascii())
    return ascii_letters / len(letters) >= ratio


def apply_filters(ds: LabeledDataset, cfg: FilterConfig | None = None) -> tuple[LabeledDataset, ExclusionReport]:
    """Drop records failing any enabled filter; report per-reason counts."""
    cfg = cfg or FilterConfig()
    kept: list[ProjectRecord] = []
    fork = removed = non_english = 0
    for rec in ds:
        if cfg.drop_forks and rec.is_fork:
            fork += 1
            continue
        if cfg.drop_removed and _is_removed(rec, cfg):
            removed += 1
            continue
        if cfg.drop_non_english and not looks_english(rec.description, cfg.english_ascii_letter_ratio):
            non_english += 1
            continue
        kept.append(rec)
    report = ExclusionReport(fork=fork, removed=removed, non_english=non_english)
    return LabeledDataset(records=tuple(kept), provenance=ds.provenance), report


# ---------------------------------------------------------------------------
# Label merging


@dataclass(frozen=True)
class MergeReport:
    applied: int = 0
    unknown_ids: tuple[str, ...] = ()

    @property
    def warnings(self) -> tuple[str, ...]:
        return tuple(f"label for unknown project_id {pid!r} ignored" for pid in self.unknown_ids)


def merge_labels(ds: LabeledDataset, labels: str | Path | Iterable[LabelRecord]) -> tuple[LabeledDataset, MergeReport]:
    """Apply line-delimited label records to a dataset.

    Later lines override earlier ones for the same project id. UNDECIDED
    clears the label. Labels for unknown ids are collected as warnings,
    not errors.
    """
    if isinstance(labels, (str, Path)):
        label_records = read_label_records(labels)
    else:
        label_records = list(labels)

    final: dict[str, str] = {}
    for lr in label_records:
        final[lr.project_id] = lr.decision

    known = {rec.project_id for rec in ds}
    unknown = tuple(pid for pid in final if pid not in known)

    merged: list[ProjectRecord] = []
    applied = 0
    for rec in ds:
        decision = final.get(rec.project_id)
        if decision is None:
            merged.append(rec)
            continue
        applied += 1
        if decision == DECISION_UNDECIDED:
            merged.append(replace(rec, label=None))
        else:
            merged.append(replace(rec, label=decision == DECISION_TRUE))
    return (
        LabeledDataset(records=tuple(merged), provenance=ds.provenance),
        MergeReport(applied=applied, unknown_ids=unknown),
    )
