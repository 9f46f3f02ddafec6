from __future__ import annotations

import pytest

from devscreen.corpus import LabeledDataset, ProjectRecord
from devscreen.features import default_schema, featurize_dataset
from devscreen.tree import DecisionTree, Leaf, Split, builtin_tree
from devscreen.tree import _renumber as renumber


@pytest.fixture(scope="session")
def schema():
    return default_schema()


@pytest.fixture(scope="session")
def fig4():
    return builtin_tree("fig4")


def make_record(i: int = 0, **overrides) -> ProjectRecord:
    base = dict(
        project_id=f"p{i:05d}",
        owner="octo",
        name="web",
        url=f"https://example.test/octo/web{i}",
        description="a web framework",
        language="Ruby",
        star_count=5,
        watcher_count=7,
        committer_count=2,
        community_count=3,
        is_fork=False,
        created_at=None,
        label=None,
    )
    base.update(overrides)
    return ProjectRecord(**base)


@pytest.fixture
def record_factory():
    return make_record


def dataset(records) -> LabeledDataset:
    return LabeledDataset(records=tuple(records), provenance="test")


@pytest.fixture
def dataset_factory():
    return dataset


def build_flagging_fixture(schema):
    """Four-leaf tree plus a 6,715-record corpus with fixed
    per-leaf correct/incorrect tallies.

    Routing by the "test" and "demo" keywords. DFS leaf ids:
      0: test=0, demo=0 -> TRUE   (auto,   2213 correct / 353 incorrect)
      1: test=0, demo=1 -> FALSE  (auto,   1482 correct / 194 incorrect)
      2: test=1, demo=0 -> TRUE   (flagged, 1467 correct / 355 incorrect)
      3: test=1, demo=1 -> TRUE   (flagged,  538 correct / 113 incorrect)
    """
    def leaf(klass):
        return Leaf(leaf_id=-1, klass=klass)

    root = Split("test", "boolean", None,
                 Split("demo", "boolean", None, leaf(True), leaf(False)),
                 Split("demo", "boolean", None, leaf(True), leaf(True)))
    tree = DecisionTree(root=renumber(root), schema_fingerprint=schema.fingerprint())
    blocks = [
        ("quartz", True, 2213), ("quartz", False, 353),
        ("demo", False, 1482), ("demo", True, 194),
        ("test", True, 1467), ("test", False, 355),
        ("test demo", True, 538), ("test demo", False, 113),
    ]
    records = []
    i = 0
    for desc, label, count in blocks:
        for _ in range(count):
            records.append(make_record(i, description=desc, label=label))
            i += 1
    ds = dataset(records)
    matrix, labels = featurize_dataset(ds, schema)
    return tree, ds, matrix, labels


@pytest.fixture(scope="session")
def flagging_fixture(schema):
    return build_flagging_fixture(schema)


#: classifier inputs touching every leaf of the built-in model, paired
#: with the class its printed form assigns to that path
FIG4_CASES = [
    ({}, False),
    ({"have_language": 1}, True),
    ({"have_language": 1, "blog": 1, "community": 20, "star": 3, "committer": 1}, True),
    ({"have_language": 1, "blog": 1, "community": 20, "star": 3, "committer": 2}, False),
    ({"have_language": 1, "blog": 1, "community": 20, "star": 5}, False),
    ({"have_language": 1, "blog": 1, "community": 27}, True),
    ({"have_language": 1, "config": 1, "watcher": 5}, False),
    ({"have_language": 1, "config": 1, "watcher": 6}, True),
    ({"have_language": 1, "url_config": 1, "committer": 2}, False),
    ({"have_language": 1, "url_config": 1, "committer": 3}, True),
    ({"have_language": 1, "url_config": 1, "vim": 1}, True),
    ({"have_language": 1, "test": 1, "watcher": 1}, False),
    ({"have_language": 1, "test": 1, "watcher": 1, "framework": 1}, True),
    ({"have_language": 1, "test": 1, "watcher": 2}, True),
    ({"have_language": 1, "example": 1, "watcher": 13}, False),
    ({"have_language": 1, "example": 1, "watcher": 13, "framework": 1}, True),
    ({"have_language": 1, "example": 1, "watcher": 14}, True),
    ({"have_language": 1, "demo": 1}, False),
    ({"have_language": 1, "demo": 1, "example": 1}, True),
    ({"have_language": 1, "url_dot": 1}, True),
    ({"have_language": 1, "url_dot": 1, "config": 1}, False),
    ({"have_language": 1, "url_dot": 1, "set": 1}, False),
    ({"have_language": 1, "url_dot": 1, "is_null": 1}, False),
    ({"have_language": 1, "personal": 1}, False),
    ({"have_language": 1, "fork": 1}, False),
    ({"have_language": 1, "collection of": 1}, False),
    ({"have_language": 1, "my": 1}, False),
    ({"have_language": 1, "mirror": 1}, False),
    ({"dot": 1}, False),
    ({"tutorial": 1}, False),
    ({"simple": 1}, False),
]
