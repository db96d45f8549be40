"""CART regression trees with optional cost-complexity pruning."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from drml_iv.learners import _tree_kernels as K
from drml_iv.learners.spec import FittedLearner, cv_assignment


@dataclass(frozen=True, eq=False)
class TreeFit(FittedLearner):
    feature: np.ndarray = None
    threshold: np.ndarray = None
    left: np.ndarray = None
    right: np.ndarray = None
    value: np.ndarray = None
    count: np.ndarray = None
    prune_alpha: np.ndarray = None
    alpha: float = 0.0

    def _predict(self, X):
        return K.predict_tree(np.ascontiguousarray(X), self.feature, self.threshold, self.left,
                              self.right, self.value, self.prune_alpha, self.alpha)

    def leaf_ids(self, X) -> np.ndarray:
        X = np.ascontiguousarray(np.asarray(X, dtype=float))
        return K.leaf_ids(X, self.feature, self.threshold, self.left, self.right,
                          self.prune_alpha, self.alpha)

    @property
    def n_leaves(self) -> int:
        internal = (self.left != -1) & (self.prune_alpha > self.alpha)
        reachable = np.zeros(self.left.shape[0], dtype=bool)
        reachable[0] = True
        for i in range(self.left.shape[0]):
            if reachable[i] and internal[i]:
                reachable[self.left[i]] = reachable[self.right[i]] = True
        return int(np.sum(reachable & ~internal))


def _grow(X, y, max_depth, min_leaf):
    n, p = X.shape
    order = np.empty((p, n), dtype=np.int64)
    by_y = np.argsort(y, kind="stable")
    Xy = X[by_y]
    for j in range(p):
        order[j] = by_y[np.argsort(Xy[:, j], kind="stable")]
    max_nodes = min(2 ** (max_depth + 1) - 1, 2 * (n // min_leaf) + 1)
    return K.grow_tree(np.ascontiguousarray(X), y, order, min_leaf, max_depth, max_nodes)


def fit_tree(X: np.ndarray, y: np.ndarray, max_depth: int = 6, min_leaf: int = 20,
             prune: bool = False, cv_folds: int = 5, is_probability: bool = False) -> TreeFit:
    """Grow a regression tree; with ``prune`` pick the penalty by CV.

    ``X`` must have at least one column (callers route p = 0 to a constant).

    The pruning penalty is chosen among the geometric midpoints of the full
    tree's weakest-link sequence, minimising ``cv_folds``-fold squared error;
    ties favour the larger penalty (smaller tree).
    """
    y = np.asarray(y, dtype=float)
    feature, threshold, left, right, value, count, sse = _grow(X, y, max_depth, min_leaf)
    prune_alpha, path = K.prune_path(left, right, sse)
    alpha = 0.0
    if prune and path.shape[0] > 1:
        candidates = np.sqrt(path * np.append(path[1:], path[-1]))
        candidates[-1] = path[-1]
        folds = cv_assignment(X, y, cv_folds)
        cv_sse = np.zeros(candidates.shape[0])
        for f in np.unique(folds):
            tr, te = folds != f, folds == f
            t = _grow(X[tr], y[tr], max_depth, min_leaf)
            pa, _ = K.prune_path(t[2], t[3], t[6])
            cv_sse += K.path_sse(np.ascontiguousarray(X[te]), y[te], t[0], t[1], t[2], t[3],
                                 t[4], pa, candidates)
        best = np.flatnonzero(cv_sse <= cv_sse.min() * (1 + 1e-12))[-1]
        alpha = float(candidates[best])
    return TreeFit("tree", X.shape[1], feature=feature, threshold=threshold, left=left,
                   right=right, value=value, count=count, prune_alpha=prune_alpha,
                   alpha=alpha, is_probability=is_probability)
