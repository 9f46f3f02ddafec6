from __future__ import annotations

import json
import math
from statistics import NormalDist

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import renumber
from devscreen.features import FeatureVector
from devscreen.synth import SynthSpec, generate_synthetic_corpus
from devscreen.features import featurize_dataset
from devscreen.tree import (
    BUILTIN_MODELS,
    DecisionTree,
    Leaf,
    SchemaMismatchError,
    Split,
    TrainParams,
    TreeError,
    TreeFormatError,
    added_pessimistic_errors,
    builtin_tree,
    classify,
    dump_tree,
    grow,
    load_tree,
    pessimistic_errors,
    prune,
    read_tree,
    render_text,
    resolve_model,
    save_tree,
    split_quality,
    train,
)


def fv(booleans=None, numerics=None, fp="unit"):
    return FeatureVector(booleans=dict(booleans or {}), numerics=dict(numerics or {}),
                         schema_fingerprint=fp)


def rows(*triples):
    """(a, b, label) triples over two boolean features."""
    matrix = [fv({"a": a, "b": b}) for a, b, _ in triples]
    labels = [bool(lab) for _, _, lab in triples]
    return matrix, labels


# ---------------------------------------------------------------------------
# Split quality


def test_split_quality_classic_three_way():
    q = split_quality([9, 5], [[2, 3], [4, 0], [3, 2]])
    assert q.info_gain == pytest.approx(0.2467, abs=1e-3)
    assert q.split_info == pytest.approx(1.5774, abs=1e-3)
    assert q.gain_ratio == pytest.approx(0.1564, abs=1e-3)


def test_split_quality_perfect_split():
    q = split_quality([5, 5], [[5, 0], [0, 5]])
    assert q.info_gain == pytest.approx(1.0)
    assert q.split_info == pytest.approx(1.0)
    assert q.gain_ratio == pytest.approx(1.0)


def test_split_quality_degenerate_branch():
    # All mass in one branch: zero split info, ratio defined as zero.
    q = split_quality([4, 4], [[4, 4], [0, 0]])
    assert q.info_gain == pytest.approx(0.0)
    assert q.split_info == pytest.approx(0.0)
    assert q.gain_ratio == 0.0


def test_split_quality_empty_parent():
    assert split_quality([0, 0], [[0, 0], [0, 0]]) == (0.0, 0.0, 0.0)


def test_split_quality_rejects_negative_counts():
    with pytest.raises(TreeError, match="non-negative"):
        split_quality([1, -1], [[1, 0], [0, -1]])


def test_split_quality_rejects_count_mismatch():
    with pytest.raises(TreeError, match="sum to parent"):
        split_quality([3, 2], [[1, 1], [1, 1]])


@settings(max_examples=100, deadline=None)
@given(children=st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)),
                         min_size=2, max_size=4))
def test_split_quality_matches_reference_formula(children):
    parent = [sum(c[0] for c in children), sum(c[1] for c in children)]
    q = split_quality(parent, children)

    def h(counts):
        tot = sum(counts)
        if tot == 0:
            return 0.0
        return -sum((c / tot) * math.log2(c / tot) for c in counts if c)

    n = sum(parent)
    if n == 0:
        assert q == (0.0, 0.0, 0.0)
        return
    gain = h(parent) - sum(sum(c) / n * h(c) for c in children)
    split_info = h([sum(c) for c in children])
    assert q.info_gain == pytest.approx(gain, abs=1e-12)
    assert q.split_info == pytest.approx(split_info, abs=1e-12)
    expected_ratio = 0.0 if split_info == 0.0 else gain / split_info
    assert q.gain_ratio == pytest.approx(expected_ratio, abs=1e-12)


# ---------------------------------------------------------------------------
# Node types


def test_leaf_confidence():
    assert Leaf(leaf_id=0, klass=True, n_true=3, n_false=1).confidence == 0.75
    assert Leaf(leaf_id=0, klass=False, n_true=3, n_false=1).confidence == 0.25
    # count-free leaves (embedded models) report full confidence
    assert Leaf(leaf_id=0, klass=True).confidence == 1.0


def test_split_validation():
    leaf = Leaf(leaf_id=0, klass=True)
    with pytest.raises(TreeError, match="unknown split kind"):
        Split("a", "ternary", None, leaf, leaf)
    with pytest.raises(TreeError, match="finite threshold"):
        Split("a", "numeric", None, leaf, leaf)
    with pytest.raises(TreeError, match="finite threshold"):
        Split("a", "numeric", math.inf, leaf, leaf)


def test_train_params_validation():
    with pytest.raises(TreeError, match="confidence_factor"):
        TrainParams(confidence_factor=0.0)
    with pytest.raises(TreeError, match="confidence_factor"):
        TrainParams(confidence_factor=0.6)
    with pytest.raises(TreeError, match="min_leaf"):
        TrainParams(min_leaf=0)
    with pytest.raises(TreeError, match="max_depth"):
        TrainParams(max_depth=0)
    TrainParams(confidence_factor=0.5, min_leaf=1, max_depth=1)


def test_tree_counting_helpers():
    root = Split("a", "boolean", None,
                 Leaf(leaf_id=0, klass=False),
                 Split("star", "numeric", 2.0,
                       Leaf(leaf_id=1, klass=False), Leaf(leaf_id=2, klass=True)))
    tree = DecisionTree(root=root)
    assert tree.node_count() == 5
    assert tree.leaf_count() == 3
    assert tree.features_used() == {"a", "star"}
    assert [leaf.leaf_id for leaf in tree.leaves()] == [0, 1, 2]


# ---------------------------------------------------------------------------
# Classification


def test_classify_boolean_and_numeric_routing():
    root = Split("a", "boolean", None,
                 Leaf(leaf_id=0, klass=False, n_true=1, n_false=3),
                 Split("star", "numeric", 4.0,
                       Leaf(leaf_id=1, klass=False), Leaf(leaf_id=2, klass=True)))
    tree = DecisionTree(root=root, schema_fingerprint="unit")

    got = classify(tree, fv({"a": 0}, {"star": 10}))
    assert (got.klass, got.leaf_id) == (False, 0)
    assert got.confidence == 0.75

    # numeric boundary: value equal to the threshold goes left
    assert classify(tree, fv({"a": 1}, {"star": 4})).leaf_id == 1
    assert classify(tree, fv({"a": 1}, {"star": 5})).leaf_id == 2


def test_classify_rejects_schema_mismatch():
    tree = DecisionTree(root=Leaf(leaf_id=0, klass=True), schema_fingerprint="abc")
    with pytest.raises(SchemaMismatchError):
        classify(tree, fv({}, {}, fp="zzz"))


def test_classify_without_fingerprint_skips_check():
    tree = DecisionTree(root=Leaf(leaf_id=0, klass=True), schema_fingerprint="")
    assert classify(tree, fv({}, {}, fp="anything")).klass is True


# ---------------------------------------------------------------------------
# Induction


def test_grow_pure_data_is_single_leaf():
    matrix, labels = rows((0, 0, True), (1, 1, True), (0, 1, True))
    tree = grow(matrix, labels)
    assert isinstance(tree.root, Leaf)
    assert tree.root.klass is True
    assert tree.root.leaf_id == 0


def test_grow_learns_a_separable_boolean():
    triples = [(1, 0, True)] * 4 + [(0, 0, False)] * 4
    tree = grow(*rows(*triples))
    assert isinstance(tree.root, Split)
    assert tree.root.feature == "a"
    assert classify(tree, fv({"a": 1, "b": 0})).klass is True
    assert classify(tree, fv({"a": 0, "b": 0})).klass is False


def test_grow_xor_has_no_positive_gain():
    triples = [(0, 0, False), (0, 1, True), (1, 0, True), (1, 1, False)] * 3
    tree = grow(*rows(*triples), TrainParams(min_leaf=1))
    # no single feature improves purity, so induction stops at the root
    assert isinstance(tree.root, Leaf)


def test_grow_min_leaf_blocks_tiny_branches():
    triples = [(1, 0, True)] + [(0, 0, False)] * 9
    assert isinstance(grow(*rows(*triples)).root, Leaf)  # default min_leaf=2
    assert isinstance(grow(*rows(*triples), TrainParams(min_leaf=1)).root, Split)


def test_grow_max_depth():
    # labels = a OR b, which needs two levels
    triples = ([(0, 0, False)] * 3 + [(0, 1, True)] * 3
               + [(1, 0, True)] * 3 + [(1, 1, True)] * 3)
    full = grow(*rows(*triples))
    capped = grow(*rows(*triples), TrainParams(max_depth=1))
    assert full.node_count() == 5
    assert capped.node_count() == 3


def test_grow_numeric_threshold_is_midpoint():
    matrix = [fv({}, {"star": 1}), fv({}, {"star": 3})]
    tree = grow(matrix, [False, True], TrainParams(min_leaf=1))
    assert isinstance(tree.root, Split)
    assert tree.root.kind == "numeric"
    assert tree.root.threshold == 2.0


def test_grow_tie_breaks_by_feature_order():
    # identical columns: the one listed first in the vector wins
    triples = [(0, 0, False)] * 3 + [(1, 1, True)] * 3
    tree = grow(*rows(*triples))
    assert tree.root.feature == "a"


def test_grow_numeric_tie_breaks_by_smaller_threshold():
    # values 0,1,2,3 labelled T,F,F,T: thresholds 0.5 and 2.5 tie exactly
    matrix = [fv({}, {"star": v}) for v in (0, 1, 2, 3)]
    tree = grow(matrix, [True, False, False, True], TrainParams(min_leaf=1))
    assert isinstance(tree.root, Split)
    assert tree.root.threshold == 0.5


def test_grow_admissibility_prefers_solid_gain_over_skewed_ratio():
    # feature a isolates one record (high ratio, low gain); feature b
    # splits evenly with more gain. The below-average gain is rejected.
    triples = [
        (1, 0, True), (0, 0, True), (0, 0, True), (0, 1, True),
        (0, 0, False), (0, 1, False), (0, 1, False), (0, 1, False),
    ]
    tree = grow(*rows(*triples), TrainParams(min_leaf=1))
    assert isinstance(tree.root, Split)
    assert tree.root.feature == "b"


def test_grow_leaf_counts_cover_all_rows():
    spec = SynthSpec(n_records=200, seed=5, label_noise=0.1)
    matrix, labels = featurize_dataset(generate_synthetic_corpus(spec))
    tree = grow(matrix, labels)
    assert sum(l.n_true + l.n_false for l in tree.leaves()) == 200
    ids = [l.leaf_id for l in tree.leaves()]
    assert ids == list(range(len(ids)))


def test_grow_input_validation():
    with pytest.raises(TreeError, match="empty"):
        grow([], [])
    with pytest.raises(TreeError, match="aligned"):
        grow([fv({"a": 1})], [True, False])
    with pytest.raises(TreeError, match="label missing for row 1"):
        grow([fv({"a": 0}), fv({"a": 1})], [True, None])
    with pytest.raises(TreeError, match="row 1: mixed schema"):
        grow([fv({"a": 0}, fp="x"), fv({"a": 1}, fp="y")], [True, False])


def test_train_is_grow_then_prune():
    spec = SynthSpec(n_records=300, seed=7, label_noise=0.1)
    matrix, labels = featurize_dataset(generate_synthetic_corpus(spec))
    params = TrainParams(confidence_factor=0.25)
    trained = train(matrix, labels, params)
    manual = prune(grow(matrix, labels, params), 0.25, matrix, labels)
    assert trained == manual
    assert trained.node_count() <= grow(matrix, labels, params).node_count()


def test_train_deterministic_bytes():
    spec = SynthSpec(n_records=250, seed=9, label_noise=0.05)
    matrix, labels = featurize_dataset(generate_synthetic_corpus(spec))
    first = save_tree(train(matrix, labels))
    second = save_tree(train(matrix, labels))
    assert first == second


# ---------------------------------------------------------------------------
# Pessimistic error bound


def test_added_errors_zero_cases():
    assert added_pessimistic_errors(0, 0, 0.25) == 0.0
    assert added_pessimistic_errors(-3, 1, 0.25) == 0.0


def test_added_errors_no_observed_errors_exact():
    for n in (1, 5, 100):
        expected = n * (1.0 - 0.25 ** (1.0 / n))
        assert added_pessimistic_errors(n, 0, 0.25) == pytest.approx(expected, rel=1e-12)


def test_added_errors_fractional_interpolation():
    base = added_pessimistic_errors(20, 0, 0.25)
    one = added_pessimistic_errors(20, 1, 0.25)
    mid = added_pessimistic_errors(20, 0.5, 0.25)
    assert mid == pytest.approx((base + one) / 2, rel=1e-12)


def test_added_errors_saturated():
    assert added_pessimistic_errors(5, 4.7, 0.25) == pytest.approx(0.3)
    assert added_pessimistic_errors(5, 5.0, 0.25) == 0.0


@pytest.mark.parametrize("n,e,cf", [(100, 10, 0.25), (40, 6, 0.10),
                                    (1000, 37, 0.05), (14, 2, 0.25), (62, 1, 0.5)])
def test_added_errors_matches_binomial_tail_bound(n, e, cf):
    # Independent check: the bound is the rate p solving
    # Phi((e + 0.5 - n p) / sqrt(n p (1 - p))) = cf, found by bisection.
    f = (e + 0.5) / n

    def tail(p):
        return NormalDist().cdf((e + 0.5 - n * p) / math.sqrt(n * p * (1 - p)))

    lo, hi = f, 1.0 - 1e-12
    for _ in range(200):
        mid = (lo + hi) / 2
        if tail(mid) > cf:
            lo = mid
        else:
            hi = mid
    expected = lo * n - e
    assert added_pessimistic_errors(n, e, cf) == pytest.approx(expected, abs=1e-8)


def test_added_errors_monotone_in_cf():
    for n, e in ((50, 5), (200, 13), (10, 2)):
        values = [added_pessimistic_errors(n, e, cf) for cf in (0.05, 0.1, 0.25, 0.5)]
        assert values == sorted(values, reverse=True)
        assert all(v >= 0 for v in values)


def test_pessimistic_errors_adds_observed():
    assert pessimistic_errors(50, 5, 0.25) == pytest.approx(
        5 + added_pessimistic_errors(50, 5, 0.25))


# ---------------------------------------------------------------------------
# Pruning


def test_prune_validates_cf():
    tree = DecisionTree(root=Leaf(leaf_id=0, klass=True))
    with pytest.raises(TreeError, match="confidence factor"):
        prune(tree, 0.0, [fv({"a": 0})], [True])
    with pytest.raises(TreeError, match="confidence factor"):
        prune(tree, 0.7, [fv({"a": 0})], [True])


def test_prune_collapses_splits_that_do_not_reduce_errors():
    # left branch: 60 clean FALSE; right: 1/1 tie also predicting FALSE.
    # The split leaves training errors unchanged, so it collapses at any cf.
    matrix = [fv({"f": 0})] * 60 + [fv({"f": 1}), fv({"f": 1})]
    labels = [False] * 60 + [True, False]
    grown = grow(matrix, labels, TrainParams(min_leaf=1))
    assert isinstance(grown.root, Split)
    for cf in (0.5, 0.25, 0.05):
        pruned = prune(grown, cf, matrix, labels)
        assert isinstance(pruned.root, Leaf)
        assert pruned.root.klass is False


def test_prune_keeps_genuinely_useful_splits():
    matrix, labels = rows(*([(1, 0, True)] * 30 + [(0, 0, False)] * 30))
    grown = grow(matrix, labels)
    pruned = prune(grown, 0.25, matrix, labels)
    assert isinstance(pruned.root, Split)
    assert pruned.root.feature == "a"


def test_prune_refreshes_leaf_counts_and_params():
    matrix, labels = rows(*([(1, 0, True)] * 10 + [(0, 0, False)] * 8))
    grown = grow(matrix, labels)
    pruned = prune(grown, 0.1, matrix, labels)
    assert sum(l.n_true + l.n_false for l in pruned.leaves()) == 18
    assert pruned.params.confidence_factor == 0.1


def test_prune_never_grows_and_shrinks_monotonically_in_cf():
    for seed in range(6):
        spec = SynthSpec(n_records=200, seed=seed, label_noise=0.12)
        matrix, labels = featurize_dataset(generate_synthetic_corpus(spec))
        grown = grow(matrix, labels)
        sizes = [prune(grown, cf, matrix, labels).node_count()
                 for cf in (0.5, 0.25, 0.1, 0.05)]
        assert all(s <= grown.node_count() for s in sizes)
        assert sizes == sorted(sizes, reverse=True)


def test_prune_rejects_foreign_data():
    matrix, labels = rows((0, 0, True), (1, 1, False))
    tree = DecisionTree(root=Leaf(leaf_id=0, klass=True), schema_fingerprint="other")
    with pytest.raises(SchemaMismatchError):
        prune(tree, 0.25, matrix, labels)


# ---------------------------------------------------------------------------
# Rendering


def test_render_text_layout():
    root = Split("test", "boolean", None,
                 Split("star", "numeric", 2.5,
                       Leaf(leaf_id=0, klass=False), Leaf(leaf_id=1, klass=True)),
                 Leaf(leaf_id=2, klass=True))
    expected = ("test = 0\n"
                "  star <= 2.5: FALSE\n"
                "  star > 2.5: TRUE\n"
                "test = 1: TRUE\n")
    assert render_text(DecisionTree(root=root)) == expected


def test_render_text_integral_threshold_has_no_decimal_point():
    root = Split("star", "numeric", 4.0,
                 Leaf(leaf_id=0, klass=False), Leaf(leaf_id=1, klass=True))
    assert render_text(DecisionTree(root=root)) == "star <= 4: FALSE\nstar > 4: TRUE\n"


def test_render_text_single_leaf():
    assert render_text(DecisionTree(root=Leaf(leaf_id=0, klass=True))) == ": TRUE\n"


# ---------------------------------------------------------------------------
# Serialization


def test_save_load_round_trip_trained():
    spec = SynthSpec(n_records=220, seed=3, label_noise=0.08)
    matrix, labels = featurize_dataset(generate_synthetic_corpus(spec))
    tree = train(matrix, labels, TrainParams(confidence_factor=0.1, min_leaf=3))
    loaded = load_tree(save_tree(tree))
    assert loaded.root == tree.root
    assert loaded.schema_fingerprint == tree.schema_fingerprint
    assert loaded.params == tree.params


def test_save_tree_is_stable_json():
    tree = DecisionTree(root=Leaf(leaf_id=0, klass=True), schema_fingerprint="abc")
    data = save_tree(tree)
    assert data == save_tree(tree)
    raw = json.loads(data)
    assert raw["format"] == "tree/1"
    assert raw["schema_fingerprint"] == "abc"
    assert "params" not in raw


def test_dump_read_round_trip(tmp_path):
    tree = DecisionTree(
        root=Split("a", "boolean", None,
                   Leaf(leaf_id=0, klass=False, n_true=1, n_false=9),
                   Leaf(leaf_id=1, klass=True, n_true=7, n_false=2)),
        schema_fingerprint="ff00",
    )
    path = tmp_path / "model.tree"
    dump_tree(tree, path)
    assert read_tree(path).root == tree.root


def test_load_tree_invalid_json_reports_byte():
    with pytest.raises(TreeFormatError, match="invalid tree file at byte"):
        load_tree(b'{"format": "tree/1", ')


def test_load_tree_missing_format():
    with pytest.raises(TreeFormatError, match="missing format tag"):
        load_tree(json.dumps({"root": {"leaf": {"id": 0, "class": "TRUE"}}}))


def _payload(root):
    return json.dumps({"format": "tree/1", "schema_fingerprint": "", "root": root})


def test_load_tree_bad_leaf_class():
    with pytest.raises(TreeFormatError, match="root: leaf class must be TRUE or FALSE"):
        load_tree(_payload({"leaf": {"id": 0, "class": "MAYBE"}}))


def test_load_tree_negative_counts():
    with pytest.raises(TreeFormatError, match="non-negative"):
        load_tree(_payload({"leaf": {"id": 0, "class": "TRUE", "n_true": -1}}))


def test_load_tree_duplicate_leaf_ids():
    root = {
        "split": {"feature": "a", "kind": "boolean"},
        "left": {"leaf": {"id": 3, "class": "TRUE"}},
        "right": {"leaf": {"id": 3, "class": "FALSE"}},
    }
    with pytest.raises(TreeFormatError, match="duplicate leaf id 3"):
        load_tree(_payload(root))


def test_load_tree_split_missing_feature():
    root = {"split": {"kind": "boolean"},
            "left": {"leaf": {"id": 0, "class": "TRUE"}},
            "right": {"leaf": {"id": 1, "class": "TRUE"}}}
    with pytest.raises(TreeFormatError, match="root: split missing feature"):
        load_tree(_payload(root))


def test_load_tree_unknown_kind_carries_path():
    root = {
        "split": {"feature": "a", "kind": "boolean"},
        "left": {"split": {"feature": "b", "kind": "fuzzy"},
                 "left": {"leaf": {"id": 0, "class": "TRUE"}},
                 "right": {"leaf": {"id": 1, "class": "TRUE"}}},
        "right": {"leaf": {"id": 2, "class": "FALSE"}},
    }
    with pytest.raises(TreeFormatError, match="root.left: unknown split kind"):
        load_tree(_payload(root))


def test_load_tree_node_needs_leaf_or_split():
    with pytest.raises(TreeFormatError, match="'leaf' or 'split' key"):
        load_tree(_payload({}))
    with pytest.raises(TreeFormatError, match="root.right: expected an object"):
        load_tree(_payload({"split": {"feature": "a", "kind": "boolean"},
                            "left": {"leaf": {"id": 0, "class": "TRUE"}},
                            "right": 7}))


@st.composite
def node_strategy(draw, depth=0):
    make_leaf = depth >= 4 or draw(st.booleans())
    if make_leaf:
        return Leaf(leaf_id=-1, klass=draw(st.booleans()),
                    n_true=draw(st.integers(0, 40)), n_false=draw(st.integers(0, 40)))
    kind = draw(st.sampled_from(["boolean", "numeric"]))
    threshold = None
    if kind == "numeric":
        threshold = draw(st.floats(min_value=-50, max_value=50,
                                   allow_nan=False, allow_infinity=False))
    return Split(feature=draw(st.sampled_from(["a", "b", "star", "watcher"])),
                 kind=kind, threshold=threshold,
                 left=draw(node_strategy(depth=depth + 1)),
                 right=draw(node_strategy(depth=depth + 1)))


@settings(max_examples=80, deadline=None)
@given(root=node_strategy(), fp=st.sampled_from(["", "abc123"]))
def test_random_tree_round_trip(root, fp):
    tree = DecisionTree(root=renumber(root), schema_fingerprint=fp)
    loaded = load_tree(save_tree(tree))
    assert loaded.root == tree.root
    assert loaded.schema_fingerprint == fp


# ---------------------------------------------------------------------------
# Built-in models


def test_builtin_registry():
    assert BUILTIN_MODELS == ("fig4",)
    tree = builtin_tree()
    assert tree.node_count() == 61
    assert tree.leaf_count() == 31
    with pytest.raises(TreeError, match="unknown builtin model"):
        builtin_tree("nope")


def test_resolve_model_builtin_or_path(tmp_path):
    assert resolve_model("fig4").node_count() == 61
    path = tmp_path / "tiny.tree"
    dump_tree(DecisionTree(root=Leaf(leaf_id=0, klass=False)), path)
    assert isinstance(resolve_model(str(path)).root, Leaf)
