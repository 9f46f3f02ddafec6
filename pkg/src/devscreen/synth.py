"""Synthetic labeled corpora for classifier testing.

Records are sampled from a seeded generator: keyword presence per
injection rate, counts from per-dimension geometric distributions, and
the ground-truth label taken from a generator tree's classification of
the record's own extracted features (optionally flipped with label
noise). Lives outside ``corpus`` only to avoid an import cycle with the
tree module; conceptually it belongs to ingestion tooling.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Mapping

from .corpus import CorpusError, LabeledDataset, ProjectRecord
from .features import FeatureSchema, default_schema, extract_features
from .tree import DecisionTree, builtin_tree, classify

# Words guaranteed not to collide with any default lexicon pattern,
# neither as whole words nor as substrings.
FILLER_WORDS = (
    "quartz", "harbor", "lumen", "grove", "basalt", "cobalt", "meadow",
    "onyx", "ember", "fjord", "zephyr", "cedar", "ravine", "tundra",
    "mosaic", "prism", "quill", "saffron", "walnut", "juniper", "garnet",
    "violet", "marble", "canyon", "lantern", "willow", "falcon", "heron",
    "osprey", "badger", "otter", "lynx", "bison", "crane", "finch", "wren",
)

LANGUAGES = ("Ruby", "Python", "JavaScript", "Go", "Rust", "Java", "Elixir", "C")

# Probability that a count equals k is geometric: p * (1-p)^k.
DEFAULT_NUMERIC_P: dict[str, float] = {
    "star": 0.15,
    "watcher": 0.12,
    "community": 0.05,
    "committer": 0.40,
}


def default_injection_rates(schema: FeatureSchema | None = None) -> dict[str, float]:
    """Per-feature presence probabilities tuned so the built-in model's
    branches all receive traffic and classes stay roughly balanced."""
    schema = schema or default_schema()
    rates = {kw.name: 0.01 for kw in schema.description_keywords}
    rates.update({kw.name: 0.0 for kw in schema.url_keywords})
    overrides = {
        "simple": 0.02, "tutorial": 0.02, "dot": 0.02, "mirror": 0.02,
        "my": 0.02, "collection of": 0.02, "fork": 0.02, "personal": 0.02,
        "blog": 0.05, "config": 0.06, "test": 0.06, "example": 0.06,
        "demo": 0.05, "vim": 0.08, "framework": 0.08, "set": 0.05,
        "url_dot": 0.05, "url_config": 0.05, "url_doc": 0.03,
        "have_language": 0.80, "is_null": 0.07,
    }
    for name, rate in overrides.items():
        if name in rates or name in ("have_language", "is_null"):
            rates[name] = rate
    return rates


@dataclass(frozen=True)
class SynthSpec:
    n_records: int
    generator_tree: DecisionTree | None = None
    keyword_injection_rates: Mapping[str, float] | None = None
    numeric_distributions: Mapping[str, float] = field(
        default_factory=lambda: dict(DEFAULT_NUMERIC_P))
    label_noise: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_records < 1:
            raise CorpusError("n_records must be >= 1")
        if not 0.0 <= self.label_noise <= 1.0:
            raise CorpusError("label_noise must be in [0, 1]")
        for name, rate in (self.keyword_injection_rates or {}).items():
            if not 0.0 <= rate <= 1.0:
                raise CorpusError(f"injection rate for {name!r} out of [0, 1]")
        for name, p in self.numeric_distributions.items():
            if not 0.0 < p <= 1.0:
                raise CorpusError(f"geometric parameter for {name!r} out of (0, 1]")


def geometric(rng: random.Random, p: float) -> int:
    """Number of failures before the first success, via inverse CDF."""
    if p >= 1.0:
        return 0
    u = rng.random()
    return int(math.log(1.0 - u) / math.log(1.0 - p))


def generate_synthetic_corpus(spec: SynthSpec,
                              schema: FeatureSchema | None = None) -> LabeledDataset:
    """Sample a labeled dataset; deterministic for a fixed spec."""
    schema = schema or default_schema()
    tree = spec.generator_tree or builtin_tree()
    known = set(schema.feature_names())
    missing = sorted(tree.features_used() - known)
    if missing:
        raise CorpusError(f"generator tree uses features absent from schema: {missing}")

    rates = dict(default_injection_rates(schema))
    if spec.keyword_injection_rates:
        for name, rate in spec.keyword_injection_rates.items():
            if name not in rates and name not in ("have_language", "is_null"):
                raise CorpusError(f"injection rate for unknown feature {name!r}")
            rates[name] = rate
    numeric_p = dict(DEFAULT_NUMERIC_P)
    numeric_p.update(spec.numeric_distributions)

    rng = random.Random(spec.seed)
    records: list[ProjectRecord] = []
    for i in range(spec.n_records):
        owner = f"org{rng.randrange(1, 500)}"
        name_words = rng.sample(FILLER_WORDS, 2)
        name = "-".join(name_words)

        url_parts = [name]
        for kw in schema.url_keywords:
            if rng.random() < rates.get(kw.name, 0.0):
                url_parts.append(kw.pattern)
        url = f"https://example.test/{owner}/{'-'.join(url_parts)}"

        description: str | None = None
        if rng.random() >= rates.get("is_null", 0.0):
            words = list(rng.sample(FILLER_WORDS, rng.randrange(3, 7)))
            for kw in schema.description_keywords:
                if rng.random() < rates.get(kw.name, 0.0):
                    words.insert(rng.randrange(len(words) + 1), kw.pattern)
            description = " ".join(words)

        language = rng.choice(LANGUAGES) if rng.random() < rates.get("have_language", 0.0) else None

        counts = {dim: geometric(rng, numeric_p[dim]) for dim in numeric_p}
        record = ProjectRecord(
            project_id=f"syn-{i:06d}",
            owner=owner,
            name=name,
            url=url,
            description=description,
            language=language,
            star_count=counts["star"],
            watcher_count=counts["watcher"],
            committer_count=counts["committer"],
            community_count=counts["community"],
            is_fork=False,
            created_at=f"2015-{rng.randrange(1, 13):02d}-{rng.randrange(1, 29):02d}",
        )
        label = classify(tree, extract_features(record, schema)).klass
        if spec.label_noise > 0.0 and rng.random() < spec.label_noise:
            label = not label
        records.append(replace(record, label=label))

    provenance = f"synthetic(seed={spec.seed}, n={spec.n_records}, noise={spec.label_noise})"
    return LabeledDataset(records=tuple(records), provenance=provenance)
