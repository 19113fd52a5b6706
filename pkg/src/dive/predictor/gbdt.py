"""Gradient-boosted regression trees with exact greedy splits.

Written for determinism rather than raw speed: squared-error gains are
scanned at every feature-sorted position (no histograms, no subsampling),
ties broken by lowest feature index then lowest split position. The
feature order is presorted once per dataset and the sorted index matrix is
partitioned through splits. The position scan and the partition are the
hot loops, so they are numba-compiled; both are sequential and float64, so
results do not depend on the compilation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

_MIN_GAIN = 1e-12


@njit(cache=True)
def _find_best_split(S, X, resid, total):
    """Best (feature, position, gain) over all sorted split positions.

    Gain is the squared-error reduction left^2/nl + right^2/nr - total^2/n.
    Strict > keeps the first encountered optimum: lowest feature, then
    lowest position.
    """
    n, F = S.shape
    tn = total * total / n
    best_gain = -1.0e300
    best_feat = -1
    best_pos = -1
    for j in range(F):
        acc = 0.0
        for k in range(n - 1):
            row = S[k, j]
            acc += resid[row]
            if X[row, j] != X[S[k + 1, j], j]:
                right = total - acc
                gain = acc * acc / (k + 1) + right * right / (n - k - 1) - tn
                if gain > best_gain:
                    best_gain = gain
                    best_feat = j
                    best_pos = k
    return best_feat, best_pos, best_gain


@njit(cache=True)
def _partition(S, go_left, n_left):
    """Split the per-column sorted row-index matrix, preserving order."""
    n, F = S.shape
    left = np.empty((n_left, F), dtype=S.dtype)
    right = np.empty((n - n_left, F), dtype=S.dtype)
    for j in range(F):
        li = 0
        ri = 0
        for k in range(n):
            r = S[k, j]
            if go_left[r]:
                left[li, j] = r
                li += 1
            else:
                right[ri, j] = r
                ri += 1
    return left, right


@dataclass
class RegressionTree:
    """Flat array form: feature < 0 marks a leaf holding `value`."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        idx = np.zeros(len(X), dtype=np.int64)
        while True:
            feat = self.feature[idx]
            active = np.nonzero(feat >= 0)[0]
            if len(active) == 0:
                return self.value[idx]
            node = idx[active]
            go_left = X[active, feat[active]] <= self.threshold[node]
            idx[active] = np.where(go_left, self.left[node], self.right[node])

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=np.float64),
        )


class _TreeAccumulator:
    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def add(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def freeze(self) -> RegressionTree:
        return RegressionTree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            value=np.asarray(self.value, dtype=np.float64),
        )


def build_tree(X: np.ndarray, residual: np.ndarray, sorted_idx: np.ndarray,
               max_depth: int, train_pred: np.ndarray | None = None) -> RegressionTree:
    """Fit one squared-error regression tree to the residuals.

    sorted_idx is X argsorted per column (stable), computed once per
    dataset and shared by every tree. When train_pred is given, each leaf
    writes its value to its rows, giving the training-set prediction
    without a descent pass.
    """
    acc = _TreeAccumulator()
    root = acc.add()
    stack: list[tuple[int, np.ndarray, int]] = [(root, sorted_idx, 0)]

    while stack:
        node, S, depth = stack.pop()
        rows = S[:, 0]
        n = len(rows)
        total = float(residual[rows].sum())
        if depth >= max_depth or n < 2:
            _leaf(acc, node, rows, total / n, train_pred)
            continue

        feat, pos, gain = _find_best_split(S, X, residual, total)
        if feat < 0 or gain <= _MIN_GAIN:
            _leaf(acc, node, rows, total / n, train_pred)
            continue

        lo = X[S[pos, feat], feat]
        hi = X[S[pos + 1, feat], feat]
        threshold = (lo + hi) / 2.0
        if threshold >= hi:  # midpoint rounded up onto the right-side value
            threshold = lo

        go_left = X[:, feat] <= threshold
        S_left, S_right = _partition(S, go_left, pos + 1)

        left_id = acc.add()
        right_id = acc.add()
        acc.feature[node] = int(feat)
        acc.threshold[node] = float(threshold)
        acc.left[node] = left_id
        acc.right[node] = right_id
        # right pushed first so the left child is processed first (stable ids)
        stack.append((right_id, S_right, depth + 1))
        stack.append((left_id, S_left, depth + 1))

    return acc.freeze()


def _leaf(acc: _TreeAccumulator, node: int, rows: np.ndarray, value: float,
          train_pred: np.ndarray | None):
    acc.value[node] = value
    if train_pred is not None:
        train_pred[rows] = value


def train_ensemble(X: np.ndarray, y: np.ndarray, n_trees: int, max_depth: int,
                   learning_rate: float,
                   monitor=None) -> tuple[float, list[RegressionTree]]:
    """Boost squared error: each tree fits the current residuals; the
    prediction is base + lr * sum of tree outputs.

    monitor(tree_index, tree) is invoked after each boosting step so
    cross-validation can score tree-count checkpoints from one run.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    base = float(y.mean())
    sorted_idx = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable"))
    pred = np.full(len(y), base, dtype=np.float64)
    tree_pred = np.zeros(len(y), dtype=np.float64)
    trees: list[RegressionTree] = []
    for i in range(n_trees):
        tree = build_tree(X, y - pred, sorted_idx, max_depth, train_pred=tree_pred)
        trees.append(tree)
        pred += learning_rate * tree_pred
        if monitor is not None:
            monitor(i, tree)
    return base, trees


def predict_ensemble(base: float, learning_rate: float,
                     trees: list[RegressionTree], X: np.ndarray) -> np.ndarray:
    out = np.full(len(X), base, dtype=np.float64)
    for tree in trees:
        out += learning_rate * tree.predict(X)
    return out
