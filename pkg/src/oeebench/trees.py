"""Regression trees: CART, bagged random forests and second-order boosting."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import _treegrow as _tg
from .errors import DomainError


@dataclass(frozen=True)
class Leaf:
    value: float
    n_samples: int


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"
    gain: float = 0.0
    n_samples: int = 0


TreeNode = Union[Leaf, Split]


@dataclass(frozen=True)
class CartParams:
    max_depth: float = math.inf
    min_samples_leaf: int = 1
    min_samples_split: int = 2

    def __post_init__(self) -> None:
        if self.max_depth < 0:
            raise DomainError("max_depth must be >= 0")
        if self.min_samples_leaf < 1:
            raise DomainError("min_samples_leaf must be >= 1")
        if self.min_samples_split < 2:
            raise DomainError("min_samples_split must be >= 2")


@dataclass(frozen=True)
class RfParams:
    n_trees: int = 120
    mtry: int | None = None  # None -> ceil(p / 3)
    bootstrap: bool = True
    cart: CartParams = field(default_factory=lambda: CartParams(min_samples_leaf=2, min_samples_split=4))
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise DomainError("n_trees must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise DomainError("mtry must be >= 1")


@dataclass(frozen=True)
class GbtParams:
    rounds: int = 130
    eta: float = 0.2
    max_depth: int = 3
    reg_lambda: float = 1.0
    gamma_reg: float = 0.0
    min_child_weight: float = 1.0
    base_score: float | None = None  # None -> mean(y)
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.eta <= 1.0:
            raise DomainError("eta must lie in (0, 1]")
        if self.reg_lambda < 0 or self.gamma_reg < 0:
            raise DomainError("lambda and gamma_reg must be non-negative")
        if self.rounds < 0 or self.max_depth < 0:
            raise DomainError("rounds and max_depth must be non-negative")


# ------------------------------------------------------------- flat trees ---

_UNBOUNDED_DEPTH = 1 << 62
_FLAT_FIELDS = ("feature", "threshold", "left", "right", "value", "n_samples", "gain")
_INT_FIELDS = ("feature", "left", "right", "n_samples")


@dataclass(frozen=True, eq=False)
class FlatTree:
    """Array form of a fitted tree; node 0 is the root, ``feature == -1`` marks leaves."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return _tg.predict_flat(self.feature, self.threshold, self.left, self.right,
                                self.value, np.ascontiguousarray(X, dtype=float))

    def to_node(self, i: int = 0) -> TreeNode:
        if self.feature[i] < 0:
            return Leaf(float(self.value[i]), int(self.n_samples[i]))
        return Split(
            int(self.feature[i]), float(self.threshold[i]),
            self.to_node(int(self.left[i])), self.to_node(int(self.right[i])),
            float(self.gain[i]), int(self.n_samples[i]),
        )

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in _FLAT_FIELDS}

    @classmethod
    def from_dict(cls, d: dict) -> FlatTree:
        return cls(**{k: np.asarray(d[k], dtype=np.int64 if k in _INT_FIELDS else float)
                      for k in _FLAT_FIELDS})

    @classmethod
    def from_node(cls, root: TreeNode) -> FlatTree:
        cols: dict[str, list] = {k: [] for k in _FLAT_FIELDS}

        def add(node: TreeNode) -> int:
            i = len(cols["feature"])
            for k in cols:
                cols[k].append(0)
            if isinstance(node, Leaf):
                cols["feature"][i], cols["left"][i], cols["right"][i] = -1, -1, -1
                cols["value"][i], cols["n_samples"][i] = node.value, node.n_samples
                return i
            cols["feature"][i], cols["threshold"][i] = node.feature, node.threshold
            cols["gain"][i], cols["n_samples"][i] = node.gain, node.n_samples
            cols["left"][i] = add(node.left)
            cols["right"][i] = add(node.right)
            return i

        add(root)
        return cls(**{k: np.asarray(v, dtype=np.int64 if k in _INT_FIELDS else float)
                      for k, v in cols.items()})


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple[FlatTree, ...]
    n_features: int

    def to_dict(self) -> dict:
        return {"n_features": self.n_features, "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> ForestModel:
        return cls(tuple(FlatTree.from_dict(t) for t in d["trees"]), int(d["n_features"]))


@dataclass(frozen=True, eq=False)
class GbtModel:
    base_score: float
    eta: float
    trees: tuple[FlatTree, ...]
    n_features: int

    def to_dict(self) -> dict:
        return {"base_score": self.base_score, "eta": self.eta, "n_features": self.n_features,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> GbtModel:
        return cls(float(d["base_score"]), float(d["eta"]),
                   tuple(FlatTree.from_dict(t) for t in d["trees"]), int(d["n_features"]))


def _flat(arrays) -> FlatTree:
    return FlatTree(*(a.copy() for a in arrays))


# ------------------------------------------------------------------ CART ---

def _check_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DomainError("tree fitting needs a non-empty 2-D feature matrix")
    if X.shape[0] != y.shape[0]:
        raise DomainError(f"{X.shape[0]} rows but {y.shape[0]} targets")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DomainError("tree inputs must be finite")
    return X, y


def _depth_arg(max_depth: float) -> int:
    return _UNBOUNDED_DEPTH if math.isinf(max_depth) else int(max_depth)


def cart_fit_flat(X, y, params: CartParams = CartParams(), mtry: int | None = None, seed: int = 0) -> FlatTree:
    X, y = _check_xy(X, y)
    p = X.shape[1]
    return _flat(_tg.grow_sse(
        X, y, _depth_arg(params.max_depth), params.min_samples_leaf,
        params.min_samples_split, p if mtry is None else mtry, seed,
    ))


def cart_fit(X, y, params: CartParams = CartParams()) -> TreeNode:
    """Grow a regression tree by greedy SSE-reduction splits.

    Candidate thresholds are midpoints between adjacent distinct values; rows
    with ``x <= threshold`` go left. Growth stops at ``max_depth``, below
    ``min_samples_split``, when no split leaves ``min_samples_leaf`` rows per
    side, or when the best gain is zero.
    """
    return cart_fit_flat(X, y, params).to_node()


def tree_predict(node: TreeNode, x) -> float:
    x = np.asarray(x, dtype=float)
    while isinstance(node, Split):
        if node.feature >= x.shape[0]:
            raise DomainError("feature vector is narrower than the tree expects")
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.value


def tree_depth(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


def n_leaves(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 1
    return n_leaves(node.left) + n_leaves(node.right)


# ---------------------------------------------------------- random forest ---

def _tree_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, index])


def rf_fit(X, y, params: RfParams = RfParams()) -> ForestModel:
    """Bag ``n_trees`` CARTs, sampling ``mtry`` candidate features at every split.

    Tree ``t`` draws its bootstrap rows and feature subsets from a stream keyed
    on ``(seed, t)``, so any subset of trees can be rebuilt independently.
    """
    X, y = _check_xy(X, y)
    n, p = X.shape
    if n < 2:
        raise DomainError("random forest needs at least 2 rows")
    mtry = params.mtry if params.mtry is not None else math.ceil(p / 3)
    if mtry > p:
        raise DomainError(f"mtry = {mtry} exceeds {p} features")
    trees = []
    for t in range(params.n_trees):
        rng = _tree_rng(params.seed, t)
        if params.bootstrap:
            rows = rng.integers(0, n, size=n)
            Xb, yb = X[rows], y[rows]
        else:
            Xb, yb = X, y
        split_seed = int(rng.integers(0, 2**63 - 1))
        trees.append(cart_fit_flat(Xb, yb, params.cart, mtry, split_seed))
    return ForestModel(tuple(trees), p)


def _width(X, n_features: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != n_features:
        raise DomainError(f"feature width {X.shape[1]} != trained width {n_features}")
    return np.ascontiguousarray(X)


def rf_tree_predictions(model: ForestModel, X) -> np.ndarray:
    """Per-tree predictions, shape (n_trees, n_rows)."""
    X = _width(X, model.n_features)
    return np.stack([t.predict(X) for t in model.trees])


def rf_predict(model: ForestModel, X) -> np.ndarray:
    return rf_tree_predictions(model, X).mean(axis=0)


# ------------------------------------------------------- gradient boosting ---

def gbt_fit(X, y, params: GbtParams = GbtParams()) -> GbtModel:
    """Boost regression trees on squared error with second-order split gain.

    Gradients are ``pred - y`` and hessians 1; each leaf carries the weight
    ``-G / (H + lambda)`` and predictions move by ``eta`` times that weight.
    """
    X, y = _check_xy(X, y)
    base = float(np.mean(y)) if params.base_score is None else float(params.base_score)
    pred = np.full(y.shape[0], base)
    h = np.ones(y.shape[0])
    trees = []
    for _ in range(params.rounds):
        g = pred - y
        tree = _flat(_tg.grow_second_order(
            X, g, h, int(params.max_depth), float(params.reg_lambda),
            float(params.gamma_reg), float(params.min_child_weight),
        ))
        trees.append(tree)
        pred = pred + params.eta * tree.predict(X)
    return GbtModel(base, params.eta, tuple(trees), X.shape[1])


def gbt_predict(model: GbtModel, X) -> np.ndarray:
    X = _width(X, model.n_features)
    out = np.full(X.shape[0], model.base_score)
    for tree in model.trees:
        out += model.eta * tree.predict(X)
    return out


# ---------------------------------------------------------- serialisation ---

def tree_to_dict(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {"kind": "leaf", "value": node.value, "n_samples": node.n_samples}
    return {
        "kind": "split",
        "feature": node.feature,
        "threshold": node.threshold,
        "gain": node.gain,
        "n_samples": node.n_samples,
        "left": tree_to_dict(node.left),
        "right": tree_to_dict(node.right),
    }


def tree_from_dict(d: dict) -> TreeNode:
    if d["kind"] == "leaf":
        return Leaf(float(d["value"]), int(d["n_samples"]))
    if d["kind"] != "split":
        raise DomainError(f"unknown tree node kind {d['kind']!r}")
    return Split(
        int(d["feature"]), float(d["threshold"]),
        tree_from_dict(d["left"]), tree_from_dict(d["right"]),
        float(d.get("gain", 0.0)), int(d.get("n_samples", 0)),
    )
