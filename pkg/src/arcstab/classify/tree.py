"""CART decision trees (Gini impurity) and bootstrap-aggregated ensembles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TreeArrays:
    """Flat node storage; leaves have ``feature == -1``.

    ``value[node]`` holds the class frequencies of the training samples that
    reached the node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_dict(cls, d: dict) -> "TreeArrays":
        return cls(np.array(d["feature"], int), np.array(d["threshold"], float),
                   np.array(d["left"], int), np.array(d["right"], int),
                   np.array(d["value"], float))

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Class-frequency rows for each sample of ``X``."""
        out = np.empty((len(X), self.value.shape[1]))
        for r, x in enumerate(X):
            node = 0
            while self.feature[node] >= 0:
                node = self.left[node] if x[self.feature[node]] <= self.threshold[node] else self.right[node]
            out[r] = self.value[node]
        return out


def _gini(counts: np.ndarray) -> np.ndarray:
    n = counts.sum(axis=-1, keepdims=True)
    p = np.divide(counts, n, out=np.zeros_like(counts, dtype=float), where=n > 0)
    return 1.0 - (p * p).sum(axis=-1)


def _best_split(X, y, n_classes, min_leaf):
    """Lowest weighted Gini over all features and midpoint thresholds.

    Ties keep the first feature and the lowest threshold, so the result does
    not depend on sample order.
    """
    n, d = X.shape
    parent = _gini(np.bincount(y, minlength=n_classes).astype(float))
    best = (parent - 1e-12, None, None)
    onehot = np.eye(n_classes)[y]
    for f in range(d):
        order = np.lexsort((y, X[:, f]))
        xs = X[order, f]
        left_counts = np.cumsum(onehot[order], axis=0)
        total = left_counts[-1]
        # candidate split after position k: between xs[k] and xs[k+1]
        k = np.arange(min_leaf - 1, n - min_leaf)
        k = k[xs[k] < xs[k + 1]] if len(k) else k
        if not len(k):
            continue
        lc = left_counts[k]
        rc = total - lc
        nl = (k + 1).astype(float)
        impurity = (nl * _gini(lc) + (n - nl) * _gini(rc)) / n
        pos = int(np.argmin(impurity))
        if impurity[pos] < best[0]:
            kk = k[pos]
            best = (impurity[pos], f, 0.5 * (xs[kk] + xs[kk + 1]))
    return best[1], best[2]


def fit_tree(X: np.ndarray, y: np.ndarray, n_classes: int, max_depth: int | None = None,
             min_leaf: int = 1) -> TreeArrays:
    feature, threshold, left, right, value = [], [], [], [], []

    def grow(idx, depth):
        node = len(feature)
        counts = np.bincount(y[idx], minlength=n_classes).astype(float)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(counts / counts.sum())
        if (max_depth is not None and depth >= max_depth) or np.count_nonzero(counts) < 2 \
                or len(idx) < 2 * min_leaf:
            return node
        f, t = _best_split(X[idx], y[idx], n_classes, min_leaf)
        if f is None:
            return node
        go_left = X[idx, f] <= t
        feature[node], threshold[node] = f, t
        left[node] = grow(idx[go_left], depth + 1)
        right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(np.arange(len(y)), 0)
    return TreeArrays(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                      np.array(value))


def fit_bagged(X, y, n_classes, n_trees, bootstrap_fraction, rng, max_depth=None, min_leaf=1):
    """Trees on seeded bootstrap resamples; prediction averages their leaves."""
    n = len(y)
    m = max(1, int(round(bootstrap_fraction * n)))
    trees = []
    for _ in range(n_trees):
        idx = np.sort(rng.integers(0, n, size=m))
        trees.append(fit_tree(X[idx], y[idx], n_classes, max_depth, min_leaf))
    return trees
