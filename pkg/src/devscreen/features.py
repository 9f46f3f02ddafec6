"""Keyword lexicon and feature extraction for project records.

A schema holds three groups of features: description keywords, URL
keywords, and the four popularity counts, plus two derived flags
(``have_language``, ``is_null``). Extraction is pure and total: any
record yields a complete vector.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import LabeledDataset, ProjectRecord

LEXICON_FORMAT = "lexicon/1"

MODE_SUBSTRING = "substring"
MODE_WORD = "word"

NUMERIC_FEATURES = ("star", "watcher", "community", "committer")
DERIVED_FLAGS = ("have_language", "is_null")

#: Patterns this short are matched as whole words by default; longer ones
#: as substrings. Keeps distinctive tokens permissive while taming short
#: token noise ("my" inside "mysql", "dot" inside "dotfiles").
WORD_MODE_MAX_LEN = 4

DEFAULT_DESCRIPTION_PATTERNS = (
    "mirror", "fork", "moved", "longer", "test", "personal", "website",
    "framework", "tool", "module", "component", "app", "system", "dotfiles",
    "collection", "blog", "plugin", "library", "server", "config", "guide",
    "set", "repository", "deprecated", "file", "demo", "my", "github", "dot",
    "simple", "extension", "helper", "template", "http", "https", "source",
    "setting", "list of", "collection of", "example", "vim", "sample",
    "university", "school", "practice", "backup", "intro", "first",
    "tutorial", "course", "copy", "null", "localization", "storage", "theme",
    "resume", "clone", "translation", "documentation",
)

DEFAULT_URL_PATTERNS = (("url_dot", "dot"), ("url_config", "config"), ("url_doc", "doc"))


class SchemaError(Exception):
    """Raised for invalid lexicons or mismatched schema fingerprints."""


def normalize_text(text: str) -> str:
    """Lowercase and collapse whitespace runs to single spaces."""
    return " ".join(text.lower().split())


@dataclass(frozen=True)
class KeywordFeature:
    name: str
    pattern: str
    mode: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "pattern", normalize_text(self.pattern))
        if not self.name:
            raise SchemaError("feature name must be non-empty")
        if not self.pattern:
            raise SchemaError(f"feature {self.name!r}: pattern empty after normalization")
        if self.mode not in (MODE_SUBSTRING, MODE_WORD):
            raise SchemaError(f"feature {self.name!r}: unknown mode {self.mode!r}")


@dataclass(frozen=True)
class FeatureSchema:
    """The configurable lexicon: which strings become boolean features."""

    description_keywords: tuple[KeywordFeature, ...]
    url_keywords: tuple[KeywordFeature, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "description_keywords", tuple(self.description_keywords))
        object.__setattr__(self, "url_keywords", tuple(self.url_keywords))
        seen: set[str] = set()
        for name in self.feature_names():
            if name in seen:
                raise SchemaError(f"duplicate feature name {name!r}")
            seen.add(name)

    def boolean_feature_names(self) -> tuple[str, ...]:
        return (
            tuple(kw.name for kw in self.description_keywords)
            + tuple(kw.name for kw in self.url_keywords)
            + DERIVED_FLAGS
        )

    def feature_names(self) -> tuple[str, ...]:
        return self.boolean_feature_names() + NUMERIC_FEATURES

    def fingerprint(self) -> str:
        """Stable hash of the schema's matching behavior."""
        payload = json.dumps(
            {
                "description": [(kw.name, kw.pattern, kw.mode) for kw in self.description_keywords],
                "url": [(kw.name, kw.pattern, kw.mode) for kw in self.url_keywords],
                "numeric": NUMERIC_FEATURES,
                "derived": DERIVED_FLAGS,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def vector(self, values: Mapping[str, int | bool] | None = None) -> "FeatureVector":
        """Build a vector with every feature defaulting to zero.

        Convenience for tests and fixtures; ``extract_features`` is the
        production path.
        """
        values = dict(values or {})
        booleans: dict[str, int] = {}
        for name in self.boolean_feature_names():
            booleans[name] = int(bool(values.pop(name, 0)))
        numerics: dict[str, int] = {}
        for name in NUMERIC_FEATURES:
            numerics[name] = int(values.pop(name, 0))
        if values:
            raise SchemaError(f"unknown feature names: {sorted(values)}")
        return FeatureVector(booleans=booleans, numerics=numerics,
                             schema_fingerprint=self.fingerprint())


@dataclass(frozen=True)
class FeatureVector:
    """One record's extracted feature values.

    ``booleans`` holds the description/URL/derived features in schema
    order; ``numerics`` holds the four counts.
    """

    booleans: dict[str, int]
    numerics: dict[str, int]
    schema_fingerprint: str

    def value(self, name: str) -> int:
        if name in self.booleans:
            return self.booleans[name]
        if name in self.numerics:
            return self.numerics[name]
        raise KeyError(name)

    def as_dict(self) -> dict[str, int]:
        out = dict(self.booleans)
        out.update(self.numerics)
        return out


def default_mode(pattern: str) -> str:
    return MODE_WORD if len(pattern) <= WORD_MODE_MAX_LEN else MODE_SUBSTRING


@lru_cache(maxsize=1)
def default_schema() -> FeatureSchema:
    """The built-in lexicon: 59 description keywords and 3 URL keywords."""
    description = tuple(
        KeywordFeature(name=pattern, pattern=pattern, mode=default_mode(pattern))
        for pattern in DEFAULT_DESCRIPTION_PATTERNS
    )
    url = tuple(
        KeywordFeature(name=name, pattern=pattern, mode=MODE_SUBSTRING)
        for name, pattern in DEFAULT_URL_PATTERNS
    )
    return FeatureSchema(description_keywords=description, url_keywords=url)


def load_lexicon(path: str | Path | None = None) -> FeatureSchema:
    """Load a lexicon file, or return the built-in schema when omitted."""
    if path is None:
        return default_schema()
    with open(path, "r", encoding="utf-8") as handle:
        try:
            raw = json.load(handle)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"lexicon {path}: invalid JSON at byte {exc.pos}") from exc
    if not isinstance(raw, dict) or raw.get("format") != LEXICON_FORMAT:
        raise SchemaError(f"lexicon {path}: missing format tag {LEXICON_FORMAT!r}")

    def parse_group(key: str) -> tuple[KeywordFeature, ...]:
        entries = raw.get(key, [])
        if not isinstance(entries, list):
            raise SchemaError(f"lexicon {path}: {key} must be a list")
        group = []
        for entry in entries:
            name = entry.get("name") or entry.get("pattern")
            pattern = entry.get("pattern")
            if pattern is None:
                raise SchemaError(f"lexicon {path}: entry missing pattern: {entry!r}")
            mode = entry.get("mode") or default_mode(normalize_text(str(pattern)))
            group.append(KeywordFeature(name=str(name), pattern=str(pattern), mode=str(mode)))
        return tuple(group)

    return FeatureSchema(
        description_keywords=parse_group("description_keywords"),
        url_keywords=parse_group("url_keywords"),
    )


def save_lexicon(schema: FeatureSchema, path: str | Path) -> None:
    payload = {
        "format": LEXICON_FORMAT,
        "description_keywords": [
            {"name": kw.name, "pattern": kw.pattern, "mode": kw.mode}
            for kw in schema.description_keywords
        ],
        "url_keywords": [
            {"name": kw.name, "pattern": kw.pattern, "mode": kw.mode}
            for kw in schema.url_keywords
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


@lru_cache(maxsize=8)
def _matchers(schema: FeatureSchema):
    def compile_one(kw: KeywordFeature):
        if kw.mode == MODE_WORD:
            rx = re.compile(r"(?<![a-z0-9])" + re.escape(kw.pattern) + r"(?![a-z0-9])")
            return lambda text, rx=rx: 1 if rx.search(text) else 0
        return lambda text, pat=kw.pattern: 1 if pat in text else 0

    description = [(kw.name, compile_one(kw)) for kw in schema.description_keywords]
    url = [(kw.name, compile_one(kw)) for kw in schema.url_keywords]
    return description, url


def extract_features(rec: ProjectRecord, schema: FeatureSchema | None = None) -> FeatureVector:
    """Convert one record into a feature vector. Total: never raises for
    a valid record."""
    schema = schema or default_schema()
    description_matchers, url_matchers = _matchers(schema)

    desc = rec.description
    desc_norm = normalize_text(desc) if desc is not None and desc.strip() else None
    url_norm = normalize_text(rec.url or "")

    booleans: dict[str, int] = {}
    for name, match in description_matchers:
        booleans[name] = match(desc_norm) if desc_norm is not None else 0
    for name, match in url_matchers:
        booleans[name] = match(url_norm)
    booleans["have_language"] = 1 if rec.language else 0
    booleans["is_null"] = 0 if desc_norm is not None else 1

    numerics = {
        "star": rec.star_count,
        "watcher": rec.watcher_count,
        "community": rec.community_count,
        "committer": rec.committer_count,
    }
    return FeatureVector(booleans=booleans, numerics=numerics,
                         schema_fingerprint=schema.fingerprint())


def featurize_dataset(ds: LabeledDataset, schema: FeatureSchema | None = None
                      ) -> tuple[list[FeatureVector], list[bool | None]]:
    """Extract features for every record, preserving dataset order."""
    schema = schema or default_schema()
    matrix = [extract_features(rec, schema) for rec in ds]
    labels = [rec.label for rec in ds]
    return matrix, labels
