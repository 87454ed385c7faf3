"""Gini decision trees, random forests and the two-layer TLEL ensemble."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .. import kernels


@dataclass
class DecisionTree:
    """Array-encoded binary tree; ``value`` is the positive fraction at a leaf."""

    feature: list[int]
    threshold: list[float]
    left: list[int]
    right: list[int]
    value: list[float]

    @classmethod
    def fit(
        cls,
        X: np.ndarray,
        y: np.ndarray,
        rows: np.ndarray | None = None,
        rng: np.random.Generator | None = None,
        max_features: int | None = None,
        max_depth: int | None = None,
    ) -> DecisionTree:
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.float64)
        if rows is None:
            rows = np.arange(len(y), dtype=np.int64)
        d = X.shape[1]
        all_features = np.arange(d, dtype=np.int64)
        tree = cls([], [], [], [], [])
        stack = [(tree._new_node(y, rows), rows, 0)]
        while stack:
            node, node_rows, depth = stack.pop()
            pos = float(y[node_rows].sum())
            if pos == 0 or pos == len(node_rows) or (max_depth is not None and depth >= max_depth):
                continue
            if max_features is not None and max_features < d and rng is not None:
                picked = np.sort(rng.choice(d, size=max_features, replace=False)).astype(np.int64)
                f, thr, _ = kernels.best_split(X, y, node_rows, picked)
                if f < 0:
                    rest = np.setdiff1d(all_features, picked)
                    f, thr, _ = kernels.best_split(X, y, node_rows, rest)
            else:
                f, thr, _ = kernels.best_split(X, y, node_rows, all_features)
            if f < 0:
                continue
            go_left = X[node_rows, f] <= thr
            lrows, rrows = node_rows[go_left], node_rows[~go_left]
            tree.feature[node] = int(f)
            tree.threshold[node] = float(thr)
            tree.left[node] = tree._new_node(y, lrows)
            tree.right[node] = tree._new_node(y, rrows)
            stack.append((tree.right[node], rrows, depth + 1))
            stack.append((tree.left[node], lrows, depth + 1))
        return tree

    def _new_node(self, y: np.ndarray, rows: np.ndarray) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(y[rows].mean()) if len(rows) else 0.0)
        return len(self.feature) - 1

    def predict(self, X: np.ndarray) -> np.ndarray:
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        node = np.zeros(len(X), dtype=np.int64)
        idx = np.arange(len(X))
        while True:
            inner = feature[node] >= 0
            if not inner.any():
                break
            i = idx[inner]
            n = node[inner]
            go_left = X[i, feature[n]] <= threshold[n]
            node[i] = np.where(go_left, left[n], right[n])
        return np.asarray(self.value)[node]

    def to_json(self) -> dict[str, Any]:
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left,
            "right": self.right,
            "value": self.value,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> DecisionTree:
        return cls(
            [int(v) for v in obj["feature"]],
            [float(v) for v in obj["threshold"]],
            [int(v) for v in obj["left"]],
            [int(v) for v in obj["right"]],
            [float(v) for v in obj["value"]],
        )


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    rows: np.ndarray,
    n_trees: int,
    rng: np.random.Generator,
    max_depth: int | None = None,
) -> list[DecisionTree]:
    """Bagged trees over ``rows``, each considering sqrt(d) features per split."""
    max_features = max(1, int(math.isqrt(X.shape[1])))
    trees = []
    for _ in range(n_trees):
        boot = rows[rng.integers(0, len(rows), size=len(rows))]
        trees.append(DecisionTree.fit(X, y, boot, rng, max_features, max_depth))
    return trees


def undersample(y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """All minority rows plus an equal-sized random draw of the majority."""
    pos = np.flatnonzero(y > 0.5)
    neg = np.flatnonzero(y <= 0.5)
    minority, majority = (pos, neg) if len(pos) <= len(neg) else (neg, pos)
    drawn = np.sort(rng.choice(majority, size=len(minority), replace=False))
    return np.sort(np.concatenate([minority, drawn])).astype(np.int64)


def fit_tlel(
    X: np.ndarray,
    y: np.ndarray,
    seed: int,
    n_forests: int = 10,
    n_trees: int = 10,
    max_depth: int | None = None,
) -> list[list[DecisionTree]]:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    forests = []
    # one child seed per forest keeps each forest reproducible on its own
    for child in np.random.SeedSequence(seed).spawn(n_forests):
        rng = np.random.default_rng(child)
        rows = undersample(y, rng)
        forests.append(fit_forest(X, y, rows, n_trees, rng, max_depth))
    return forests


def predict_forest(trees: list[DecisionTree], X: np.ndarray) -> np.ndarray:
    return np.mean([t.predict(X) for t in trees], axis=0)


def predict_tlel(forests: list[list[DecisionTree]], X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return np.mean([predict_forest(f, X) for f in forests], axis=0)
