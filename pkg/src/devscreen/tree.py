"""Binary decision trees: gain-ratio induction, confidence-factor
pessimistic pruning, classification, text rendering, and a JSON file
format.

Splits are boolean equality (left on 0) or numeric thresholds (left on
value <= t). Training is fully deterministic: candidate splits are ranked
by gain ratio among those whose information gain reaches the mean of all
positive gains, with ties broken by feature order and then by smaller
threshold. Pruning replaces a subtree with a majority leaf whenever the
leaf's pessimistic error bound does not exceed the sum of the subtree
leaves' bounds. Subtree raising is not performed.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from statistics import NormalDist
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .features import FeatureVector

TREE_FORMAT = "tree/1"

KIND_BOOLEAN = "boolean"
KIND_NUMERIC = "numeric"

_GAIN_EPS = 1e-12


class TreeError(Exception):
    """Raised for invalid training inputs or tree structures."""


class TreeFormatError(TreeError):
    """Raised when a tree file cannot be decoded."""


class SchemaMismatchError(TreeError):
    """Raised when a vector's schema fingerprint differs from the tree's."""


@dataclass(frozen=True)
class Leaf:
    leaf_id: int
    klass: bool
    n_true: int = 0
    n_false: int = 0

    @property
    def confidence(self) -> float:
        total = self.n_true + self.n_false
        if total == 0:
            return 1.0  # embedded models carry no count data
        majority = self.n_true if self.klass else self.n_false
        return majority / total


@dataclass(frozen=True)
class Split:
    feature: str
    kind: str
    threshold: float | None
    left: "Node"
    right: "Node"

    def __post_init__(self) -> None:
        if self.kind not in (KIND_BOOLEAN, KIND_NUMERIC):
            raise TreeError(f"unknown split kind {self.kind!r}")
        if self.kind == KIND_NUMERIC:
            if self.threshold is None or not math.isfinite(self.threshold):
                raise TreeError(f"numeric split on {self.feature!r} needs a finite threshold")


Node = Leaf | Split


@dataclass(frozen=True)
class TrainParams:
    confidence_factor: float = 0.25
    min_leaf: int = 2
    max_depth: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.confidence_factor <= 0.5:
            raise TreeError("confidence_factor must be in (0, 0.5]")
        if self.min_leaf < 1:
            raise TreeError("min_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise TreeError("max_depth must be >= 1 when set")


@dataclass(frozen=True)
class DecisionTree:
    root: Node
    schema_fingerprint: str = ""
    params: TrainParams | None = None

    def nodes(self) -> Iterator[Node]:
        stack: list[Node] = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if isinstance(node, Split):
                stack.append(node.right)
                stack.append(node.left)

    def leaves(self) -> Iterator[Leaf]:
        for node in self.nodes():
            if isinstance(node, Leaf):
                yield node

    def node_count(self) -> int:
        return sum(1 for _ in self.nodes())

    def leaf_count(self) -> int:
        return sum(1 for _ in self.leaves())

    def features_used(self) -> set[str]:
        return {node.feature for node in self.nodes() if isinstance(node, Split)}


class Classification(NamedTuple):
    klass: bool
    leaf_id: int
    confidence: float


def classify(tree: DecisionTree, fv: FeatureVector) -> Classification:
    """Route one vector to a leaf. Boolean splits go left on 0; numeric
    splits go left on value <= threshold."""
    if tree.schema_fingerprint and fv.schema_fingerprint != tree.schema_fingerprint:
        raise SchemaMismatchError(
            f"vector schema {fv.schema_fingerprint} does not match tree schema "
            f"{tree.schema_fingerprint}"
        )
    node = tree.root
    while isinstance(node, Split):
        value = fv.value(node.feature)
        if node.kind == KIND_BOOLEAN:
            node = node.left if value == 0 else node.right
        else:
            node = node.left if value <= node.threshold else node.right
    return Classification(klass=node.klass, leaf_id=node.leaf_id, confidence=node.confidence)


# ---------------------------------------------------------------------------
# Split quality


class SplitQuality(NamedTuple):
    info_gain: float
    split_info: float
    gain_ratio: float


def _entropy(counts: Sequence[float]) -> float:
    total = float(sum(counts))
    if total <= 0.0:
        return 0.0
    h = 0.0
    for c in counts:
        if c > 0:
            p = c / total
            h -= p * math.log2(p)
    return h


def split_quality(parent_counts: Sequence[int], child_counts: Sequence[Sequence[int]]) -> SplitQuality:
    """Information gain, split information, and gain ratio (entropy in
    bits) for a candidate partition of ``parent_counts`` into branches."""
    parent = [int(c) for c in parent_counts]
    children = [[int(c) for c in child] for child in child_counts]
    if any(c < 0 for c in parent) or any(c < 0 for child in children for c in child):
        raise TreeError("class counts must be non-negative")
    for idx in range(len(parent)):
        if sum(child[idx] for child in children) != parent[idx]:
            raise TreeError("child counts must sum to parent counts")
    n = sum(parent)
    if n == 0:
        return SplitQuality(0.0, 0.0, 0.0)
    child_totals = [sum(child) for child in children]
    info_gain = _entropy(parent) - sum(
        (t / n) * _entropy(child) for t, child in zip(child_totals, children)
    )
    split_info = _entropy(child_totals)
    gain_ratio = 0.0 if split_info == 0.0 else info_gain / split_info
    return SplitQuality(info_gain, split_info, gain_ratio)


# ---------------------------------------------------------------------------
# Induction


def _vectors_to_arrays(matrix: Sequence[FeatureVector], labels: Sequence[bool | None]
                       ) -> tuple[list[tuple[str, str]], np.ndarray, np.ndarray, str]:
    if not matrix:
        raise TreeError("training set is empty")
    if len(matrix) != len(labels):
        raise TreeError("matrix and labels must be aligned")
    for i, label in enumerate(labels):
        if label is None:
            raise TreeError(f"label missing for row {i}")
    first = matrix[0]
    features = [(name, KIND_BOOLEAN) for name in first.booleans]
    features += [(name, KIND_NUMERIC) for name in first.numerics]
    x = np.empty((len(matrix), len(features)), dtype=np.int64)
    for i, fv in enumerate(matrix):
        if fv.schema_fingerprint != first.schema_fingerprint:
            raise TreeError(f"row {i}: mixed schema fingerprints in training set")
        col = 0
        for value in fv.booleans.values():
            x[i, col] = value
            col += 1
        for value in fv.numerics.values():
            x[i, col] = value
            col += 1
    y = np.fromiter((bool(l) for l in labels), dtype=bool, count=len(matrix))
    return features, x, y, first.schema_fingerprint


def _entropy_np(n_true: np.ndarray, n_false: np.ndarray) -> np.ndarray:
    # Vectorized binary entropy in bits with 0*log(0) = 0.
    total = n_true + n_false
    h = np.zeros_like(total, dtype=np.float64)
    mask = total > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        for part in (n_true, n_false):
            p = np.where(mask, part / np.maximum(total, 1), 0.0)
            term = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
            h += term
    return h


@dataclass
class _Candidate:
    gain: float
    ratio: float
    feature_index: int
    threshold: float | None  # None for boolean splits
    left_size: int


def _candidates_for_node(x: np.ndarray, y: np.ndarray, idx: np.ndarray,
                         features: list[tuple[str, str]], min_leaf: int) -> list[_Candidate]:
    n = idx.size
    yi = y[idx]
    n_true = int(yi.sum())
    parent_h = _entropy([n_true, n - n_true])
    out: list[_Candidate] = []
    for j, (_, kind) in enumerate(features):
        col = x[idx, j]
        if kind == KIND_BOOLEAN:
            left = col == 0
            nl = int(left.sum())
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            lt = int(yi[left].sum())
            rt = n_true - lt
            gain = parent_h - (nl / n) * _entropy([lt, nl - lt]) - (nr / n) * _entropy([rt, nr - rt])
            si = _entropy([nl, nr])
            ratio = 0.0 if si == 0.0 else gain / si
            out.append(_Candidate(gain, ratio, j, None, nl))
        else:
            order = np.argsort(col, kind="stable")
            sv = col[order]
            st = yi[order].astype(np.int64)
            cum_true = np.cumsum(st)
            # Split positions k: left = first k sorted rows. Valid where the
            # value changes and both sides hold at least min_leaf rows.
            ks = np.arange(1, n)
            boundary = sv[:-1] != sv[1:]
            valid = boundary & (ks >= min_leaf) & ((n - ks) >= min_leaf)
            if not valid.any():
                continue
            ks = ks[valid]
            lt = cum_true[ks - 1]
            nl = ks.astype(np.float64)
            nr = float(n) - nl
            rt = n_true - lt
            h_left = _entropy_np(lt.astype(np.float64), nl - lt)
            h_right = _entropy_np(rt.astype(np.float64), nr - rt)
            gains = parent_h - (nl / n) * h_left - (nr / n) * h_right
            sis = _entropy_np(nl, nr)
            thresholds = (sv[ks - 1] + sv[ks]) / 2.0
            for pos in range(ks.size):
                si = float(sis[pos])
                gain = float(gains[pos])
                ratio = 0.0 if si == 0.0 else gain / si
                out.append(_Candidate(gain, ratio, j, float(thresholds[pos]), int(ks[pos])))
    return out


def _pick_candidate(candidates: list[_Candidate]) -> _Candidate | None:
    positive = [c for c in candidates if c.gain > _GAIN_EPS]
    if not positive:
        return None
    mean_gain = sum(c.gain for c in positive) / len(positive)
    admissible = [c for c in positive if c.gain >= mean_gain - _GAIN_EPS]
    # Max gain ratio; ties resolved by feature order, then smaller threshold.
    def key(c: _Candidate):
        return (-c.ratio, c.feature_index, c.threshold if c.threshold is not None else -math.inf)
    return min(admissible, key=key)


def grow(matrix: Sequence[FeatureVector], labels: Sequence[bool | None],
         params: TrainParams | None = None) -> DecisionTree:
    """Fit an unpruned tree by recursive top-down induction."""
    params = params or TrainParams()
    features, x, y, fingerprint = _vectors_to_arrays(matrix, labels)

    def build(idx: np.ndarray, depth: int) -> Node:
        n = idx.size
        n_true = int(y[idx].sum())
        n_false = n - n_true
        def leaf() -> Leaf:
            return Leaf(leaf_id=-1, klass=n_true > n_false, n_true=n_true, n_false=n_false)
        if n_true == 0 or n_false == 0:
            return leaf()
        if params.max_depth is not None and depth >= params.max_depth:
            return leaf()
        if n < 2 * params.min_leaf:
            return leaf()
        chosen = _pick_candidate(_candidates_for_node(x, y, idx, features, params.min_leaf))
        if chosen is None:
            return leaf()
        name, kind = features[chosen.feature_index]
        col = x[idx, chosen.feature_index]
        if kind == KIND_BOOLEAN:
            mask = col == 0
        else:
            mask = col <= chosen.threshold
        left = build(idx[mask], depth + 1)
        right = build(idx[~mask], depth + 1)
        return Split(feature=name, kind=kind,
                     threshold=chosen.threshold if kind == KIND_NUMERIC else None,
                     left=left, right=right)

    root = build(np.arange(x.shape[0]), 0)
    return DecisionTree(root=_renumber(root), schema_fingerprint=fingerprint, params=params)


def train(matrix: Sequence[FeatureVector], labels: Sequence[bool | None],
          params: TrainParams | None = None) -> DecisionTree:
    """Grow a tree, then apply confidence-factor pruning."""
    params = params or TrainParams()
    tree = grow(matrix, labels, params)
    return prune(tree, params.confidence_factor, matrix, labels)


def _renumber(root: Node) -> Node:
    """Assign leaf ids in depth-first (left-to-right) order."""
    counter = 0

    def walk(node: Node) -> Node:
        nonlocal counter
        if isinstance(node, Leaf):
            new = replace(node, leaf_id=counter)
            counter += 1
            return new
        return Split(feature=node.feature, kind=node.kind, threshold=node.threshold,
                     left=walk(node.left), right=walk(node.right))

    return walk(root)


# ---------------------------------------------------------------------------
# Pessimistic pruning


def added_pessimistic_errors(n: float, e: float, cf: float) -> float:
    """Extra errors charged on top of the ``e`` observed in ``n`` cases at
    the upper confidence bound of the binomial error rate.

    Normal approximation with continuity correction; exact bound at e = 0
    and linear interpolation below one error, matching the classic
    pessimistic-pruning estimate.
    """
    if n <= 0:
        return 0.0
    if e < 1e-9:
        return n * (1.0 - cf ** (1.0 / n))
    if e < 1.0 - 1e-9:
        base = n * (1.0 - cf ** (1.0 / n))
        return base + e * (added_pessimistic_errors(n, 1.0, cf) - base)
    if e + 0.5 >= n:
        return max(n - e, 0.0)
    z = NormalDist().inv_cdf(1.0 - cf)
    f = (e + 0.5) / n
    rate = (f + z * z / (2 * n) + z * math.sqrt(f / n - f * f / n + z * z / (4 * n * n))) \
        / (1.0 + z * z / n)
    return rate * n - e


def pessimistic_errors(n: float, e: float, cf: float) -> float:
    """Total pessimistic error count: observed errors plus the bound margin."""
    return e + added_pessimistic_errors(n, e, cf)


def prune(tree: DecisionTree, cf: float, matrix: Sequence[FeatureVector],
          labels: Sequence[bool | None]) -> DecisionTree:
    """Bottom-up subtree replacement under the pessimistic error bound.

    A subtree collapses to a majority leaf when the collapsed leaf's
    pessimistic estimate is no larger than the sum over the (already
    pruned) subtree leaves' estimates. Never increases node count.
    """
    if not 0.0 < cf <= 0.5:
        raise TreeError("confidence factor must be in (0, 0.5]")
    features, x, y, fingerprint = _vectors_to_arrays(matrix, labels)
    if tree.schema_fingerprint and fingerprint != tree.schema_fingerprint:
        raise SchemaMismatchError("pruning data does not match the tree's schema fingerprint")
    columns = {name: j for j, (name, _) in enumerate(features)}

    def leaf_errors(leaf: Leaf) -> float:
        return float(leaf.n_false if leaf.klass else leaf.n_true)

    def subtree_estimate(node: Node) -> float:
        if isinstance(node, Leaf):
            n = node.n_true + node.n_false
            return pessimistic_errors(float(n), leaf_errors(node), cf)
        return subtree_estimate(node.left) + subtree_estimate(node.right)

    def subtree_errors(node: Node) -> float:
        if isinstance(node, Leaf):
            return leaf_errors(node)
        return subtree_errors(node.left) + subtree_errors(node.right)

    def walk(node: Node, idx: np.ndarray) -> Node:
        n = idx.size
        n_true = int(y[idx].sum())
        n_false = n - n_true
        if isinstance(node, Leaf):
            return replace(node, n_true=n_true, n_false=n_false)
        col = x[idx, columns[node.feature]]
        mask = (col == 0) if node.kind == KIND_BOOLEAN else (col <= node.threshold)
        pruned = Split(feature=node.feature, kind=node.kind, threshold=node.threshold,
                       left=walk(node.left, idx[mask]), right=walk(node.right, idx[~mask]))
        as_leaf_errors = float(min(n_true, n_false))
        # A subtree that does not reduce training errors collapses
        # unconditionally; the confidence factor only arbitrates genuine
        # improvements. Keeps shrinkage monotone across cf values.
        if subtree_errors(pruned) >= as_leaf_errors:
            return Leaf(leaf_id=-1, klass=n_true > n_false, n_true=n_true, n_false=n_false)
        leaf_estimate = pessimistic_errors(float(n), as_leaf_errors, cf)
        if leaf_estimate <= subtree_estimate(pruned):
            return Leaf(leaf_id=-1, klass=n_true > n_false, n_true=n_true, n_false=n_false)
        return pruned

    root = walk(tree.root, np.arange(x.shape[0]))
    params = tree.params or TrainParams()
    return DecisionTree(root=_renumber(root), schema_fingerprint=tree.schema_fingerprint,
                        params=replace(params, confidence_factor=cf))


# ---------------------------------------------------------------------------
# Rendering and serialization


def _format_class(klass: bool) -> str:
    return "TRUE" if klass else "FALSE"


def _format_threshold(threshold: float) -> str:
    if threshold == int(threshold):
        return str(int(threshold))
    return repr(threshold)


def render_text(tree: DecisionTree) -> str:
    """Indented text rendering: one line per edge, leaves suffixed with
    their class."""
    lines: list[str] = []

    def edge_labels(split: Split) -> tuple[str, str]:
        if split.kind == KIND_BOOLEAN:
            return f"{split.feature} = 0", f"{split.feature} = 1"
        t = _format_threshold(split.threshold)
        return f"{split.feature} <= {t}", f"{split.feature} > {t}"

    def walk(node: Node, depth: int) -> None:
        if isinstance(node, Leaf):
            # Only reachable when the whole tree is a single leaf.
            lines.append(f": {_format_class(node.klass)}")
            return
        pad = "  " * depth
        left_label, right_label = edge_labels(node)
        for label, child in ((left_label, node.left), (right_label, node.right)):
            if isinstance(child, Leaf):
                lines.append(f"{pad}{label}: {_format_class(child.klass)}")
            else:
                lines.append(f"{pad}{label}")
                walk(child, depth + 1)

    walk(tree.root, 0)
    return "\n".join(lines) + "\n"


def _node_to_obj(node: Node) -> dict:
    if isinstance(node, Leaf):
        return {
            "leaf": {
                "id": node.leaf_id,
                "class": _format_class(node.klass),
                "n_true": node.n_true,
                "n_false": node.n_false,
            }
        }
    obj: dict = {
        "split": {"feature": node.feature, "kind": node.kind},
        "left": _node_to_obj(node.left),
        "right": _node_to_obj(node.right),
    }
    if node.kind == KIND_NUMERIC:
        obj["split"]["threshold"] = node.threshold
    return obj


def _node_from_obj(obj, path: str) -> Node:
    if not isinstance(obj, dict):
        raise TreeFormatError(f"{path}: expected an object")
    if "leaf" in obj:
        leaf = obj["leaf"]
        klass_token = str(leaf.get("class", "")).upper()
        if klass_token not in ("TRUE", "FALSE"):
            raise TreeFormatError(f"{path}: leaf class must be TRUE or FALSE")
        n_true = int(leaf.get("n_true", 0))
        n_false = int(leaf.get("n_false", 0))
        if n_true < 0 or n_false < 0:
            raise TreeFormatError(f"{path}: leaf counts must be non-negative")
        return Leaf(leaf_id=int(leaf.get("id", -1)), klass=klass_token == "TRUE",
                    n_true=n_true, n_false=n_false)
    if "split" in obj:
        split = obj["split"]
        feature = split.get("feature")
        kind = split.get("kind")
        if not feature:
            raise TreeFormatError(f"{path}: split missing feature name")
        threshold = split.get("threshold")
        left = _node_from_obj(obj.get("left"), path + ".left")
        right = _node_from_obj(obj.get("right"), path + ".right")
        try:
            return Split(
                feature=str(feature),
                kind=str(kind),
                threshold=None if threshold is None else float(threshold),
                left=left,
                right=right,
            )
        except TreeError as exc:
            raise TreeFormatError(f"{path}: {exc}") from exc
    raise TreeFormatError(f"{path}: node needs a 'leaf' or 'split' key")


def save_tree(tree: DecisionTree) -> bytes:
    payload: dict = {
        "format": TREE_FORMAT,
        "schema_fingerprint": tree.schema_fingerprint,
        "root": _node_to_obj(tree.root),
    }
    if tree.params is not None:
        payload["params"] = {
            "confidence_factor": tree.params.confidence_factor,
            "min_leaf": tree.params.min_leaf,
            "max_depth": tree.params.max_depth,
        }
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")


def load_tree(data: bytes | str) -> DecisionTree:
    if isinstance(data, bytes):
        text = data.decode("utf-8", errors="replace")
    else:
        text = data
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TreeFormatError(f"invalid tree file at byte {exc.pos}: {exc.msg}") from exc
    if not isinstance(raw, dict) or raw.get("format") != TREE_FORMAT:
        raise TreeFormatError(f"missing format tag {TREE_FORMAT!r}")
    root = _node_from_obj(raw.get("root"), "root")
    seen_ids: set[int] = set()
    tree = DecisionTree(root=root, schema_fingerprint=str(raw.get("schema_fingerprint", "")))
    for leaf in tree.leaves():
        if leaf.leaf_id in seen_ids:
            raise TreeFormatError(f"duplicate leaf id {leaf.leaf_id}")
        seen_ids.add(leaf.leaf_id)
    params = None
    if isinstance(raw.get("params"), dict):
        p = raw["params"]
        params = TrainParams(
            confidence_factor=float(p.get("confidence_factor", 0.25)),
            min_leaf=int(p.get("min_leaf", 2)),
            max_depth=p.get("max_depth"),
        )
    return DecisionTree(root=root, schema_fingerprint=tree.schema_fingerprint, params=params)


def dump_tree(tree: DecisionTree, path: str | Path) -> None:
    Path(path).write_bytes(save_tree(tree))


def read_tree(path: str | Path) -> DecisionTree:
    return load_tree(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# Built-in models


BUILTIN_MODELS = ("fig4",)


def builtin_tree(name: str = "fig4") -> DecisionTree:
    """Load a model shipped with the package. ``fig4`` is the simple
    public-development classifier used as the default model everywhere."""
    if name not in BUILTIN_MODELS:
        raise TreeError(f"unknown builtin model {name!r} (have: {', '.join(BUILTIN_MODELS)})")
    data = resources.files("devscreen.data").joinpath("fig4_simple.tree").read_bytes()
    return load_tree(data)


def resolve_model(spec: str) -> DecisionTree:
    """Interpret a CLI model argument: a builtin name or a file path."""
    if spec in BUILTIN_MODELS:
        return builtin_tree(spec)
    return read_tree(spec)
