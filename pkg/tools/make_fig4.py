"""Regenerate the packaged simple screening model.

The model is a hand-built binary tree over the default lexicon. Run from
the repository root:

    python tools/make_fig4.py
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from devscreen.features import default_schema
from devscreen.tree import DecisionTree, Leaf, Split, _renumber, save_tree

T, F = True, False


def leaf(klass: bool) -> Leaf:
    return Leaf(leaf_id=-1, klass=klass)


def b(feature: str, left, right) -> Split:
    return Split(feature=feature, kind="boolean", threshold=None, left=left, right=right)


def num(feature: str, threshold: float, left, right) -> Split:
    return Split(feature=feature, kind="numeric", threshold=float(threshold),
                 left=left, right=right)


def build_root() -> Split:
    blog_split = b(
        "blog",
        leaf(T),
        num("community", 26,
            num("star", 4,
                num("committer", 1, leaf(T), leaf(F)),
                leaf(F)),
            leaf(T)),
    )
    config_split = b(
        "config",
        blog_split,
        num("watcher", 5, leaf(F), leaf(T)),
    )
    url_config_split = b(
        "url_config",
        config_split,
        b("vim",
          num("committer", 2, leaf(F), leaf(T)),
          leaf(T)),
    )
    test_split = b(
        "test",
        url_config_split,
        num("watcher", 1,
            b("framework", leaf(F), leaf(T)),
            leaf(T)),
    )
    example_split = b(
        "example",
        test_split,
        num("watcher", 13,
            b("framework", leaf(F), leaf(T)),
            leaf(T)),
    )
    demo_split = b(
        "demo",
        example_split,
        b("example", leaf(F), leaf(T)),
    )
    url_dot_split = b(
        "url_dot",
        demo_split,
        b("is_null",
          b("set",
            b("config", leaf(T), leaf(F)),
            leaf(F)),
          leaf(F)),
    )
    inner = url_dot_split
    for guard in ("personal", "fork", "collection of", "my", "mirror"):
        inner = b(guard, inner, leaf(F))
    have_language_split = b("have_language", leaf(F), inner)
    inner = have_language_split
    for guard in ("dot", "tutorial", "simple"):
        inner = b(guard, inner, leaf(F))
    return inner


def main() -> None:
    schema = default_schema()
    tree = DecisionTree(root=_renumber(build_root()),
                        schema_fingerprint=schema.fingerprint())
    obj = json.loads(save_tree(tree))
    obj["note"] = "hand-built simple screening model over the default lexicon"
    out = Path(__file__).resolve().parents[1] / "src" / "devscreen" / "data" / "fig4_simple.tree"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    leaves = tree.leaf_count()
    print(f"wrote {out} ({tree.node_count()} nodes, {leaves} leaves)")


if __name__ == "__main__":
    main()
