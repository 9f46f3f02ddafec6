"""Append-only label store: line-delimited decision records.

Each line is a JSON object ``{project_id, decision, source, timestamp}``.
Replaying a file in order with last-write-wins reconstructs the current
decision for every project id.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

DECISION_TRUE = "TRUE"
DECISION_FALSE = "FALSE"
DECISION_UNDECIDED = "UNDECIDED"
DECISIONS = (DECISION_TRUE, DECISION_FALSE, DECISION_UNDECIDED)


class LabelStoreError(Exception):
    """Raised for malformed label records or stores."""


@dataclass(frozen=True)
class LabelRecord:
    project_id: str
    decision: str
    source: str = ""
    timestamp: str = ""

    def __post_init__(self) -> None:
        if not self.project_id:
            raise LabelStoreError("label record needs a project_id")
        if self.decision not in DECISIONS:
            raise LabelStoreError(
                f"unknown decision {self.decision!r} (expected one of {', '.join(DECISIONS)})"
            )

    def to_json(self) -> str:
        return json.dumps(
            {
                "project_id": self.project_id,
                "decision": self.decision,
                "source": self.source,
                "timestamp": self.timestamp,
            },
            sort_keys=True,
        )


def parse_label_line(line: str, line_no: int = 0) -> LabelRecord:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise LabelStoreError(f"label line {line_no}: invalid JSON ({exc.msg})") from exc
    if not isinstance(raw, dict):
        raise LabelStoreError(f"label line {line_no}: expected a JSON object")
    try:
        return LabelRecord(
            project_id=str(raw.get("project_id", "")),
            decision=str(raw.get("decision", "")).upper(),
            source=str(raw.get("source", "")),
            timestamp=str(raw.get("timestamp", "")),
        )
    except LabelStoreError as exc:
        raise LabelStoreError(f"label line {line_no}: {exc}") from exc


def read_label_records(source: str | Path) -> list[LabelRecord]:
    """Read every record from a label store file, in file order."""
    path = Path(source)
    if not path.exists():
        return []
    records: list[LabelRecord] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            records.append(parse_label_line(line, line_no))
    return records


def append_label_records(path: str | Path, records: Iterable[LabelRecord]) -> None:
    """Append records to the store; the write is flushed before returning."""
    with open(path, "a", encoding="utf-8") as handle:
        for record in records:
            handle.write(record.to_json() + "\n")
        handle.flush()


def replay(records: Iterable[LabelRecord]) -> dict[str, LabelRecord]:
    """Collapse a record stream to the current decision per project id
    (last write wins)."""
    current: dict[str, LabelRecord] = {}
    for record in records:
        current[record.project_id] = record
    return current


def decision_to_label(decision: str) -> bool | None:
    if decision == DECISION_TRUE:
        return True
    if decision == DECISION_FALSE:
        return False
    return None


def label_to_decision(label: bool | None) -> str:
    if label is None:
        return DECISION_UNDECIDED
    return DECISION_TRUE if label else DECISION_FALSE
