from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from drml_iv.errors import InputError
from drml_iv.learners.glm import fit_linear, fit_logistic
from drml_iv.learners.spec import ConstantFit, FittedLearner, LearnerSpec, resolve_spec
from drml_iv.learners.stack import fit_stack
from drml_iv.learners.tree import fit_tree


@dataclass(frozen=True, eq=False)
class CellMeansFit(FittedLearner):
    cells: dict = None

    def _predict(self, X):
        return np.array([self.cells.get(tuple(row), np.nan) for row in X.tolist()], dtype=float)


def _fit_cell_means(X, y, is_probability):
    members = {}
    for key, v in zip(map(tuple, X.tolist()), y.tolist()):
        members.setdefault(key, []).append(v)
    cells = {k: math.fsum(members[k]) / len(members[k]) for k in sorted(members)}
    return CellMeansFit("cell_means", X.shape[1], cells=cells, is_probability=is_probability)


def exact_mean(v) -> float:
    """Correctly rounded mean; identical for any ordering of ``v``."""
    return math.fsum(v) / len(v)


def fit(spec, features, target, is_probability: bool = False) -> FittedLearner:
    """Fit a regression of ``target`` on ``features`` according to ``spec``.

    A target without variation always yields a constant predictor, whatever
    the requested kind. Rows are put in a canonical order first, so the fit
    does not depend on the order of the input rows.
    """
    spec = resolve_spec(spec)
    X = np.asarray(features, dtype=float)
    y = np.asarray(target, dtype=float).reshape(-1)
    if X.ndim == 1:
        X = X.reshape(y.shape[0], -1) if X.size else np.empty((y.shape[0], 0))
    if X.shape[0] != y.shape[0]:
        raise InputError(f"features have {X.shape[0]} rows, target has {y.shape[0]}")
    if y.shape[0] == 0:
        raise InputError("cannot fit on zero rows")
    if is_probability and (y.min() < 0.0 or y.max() > 1.0):
        raise InputError("probability target must lie in [0, 1]")
    p = X.shape[1]
    # Canonical row order makes every fit, including its floating-point
    # summation order, independent of how the rows were supplied.
    order = np.lexsort([X[:, j] for j in range(p - 1, -1, -1)] + [y])
    X, y = np.ascontiguousarray(X[order]), y[order]
    if np.all(y == y[0]):
        return ConstantFit(spec.kind, p, value=float(y[0]), is_probability=is_probability)

    kind = spec.kind
    if kind == "glm":
        kind = "logistic" if is_probability else "linear"
    if kind == "mean" or (p == 0 and kind in ("tree", "cell_means")):
        return ConstantFit(spec.kind, p, value=exact_mean(y), is_probability=is_probability)
    if kind == "linear":
        return fit_linear(X, y, is_probability)
    if kind == "logistic":
        return fit_logistic(X, y)
    if kind == "tree":
        return fit_tree(X, y, spec.max_depth, spec.min_leaf, spec.prune, spec.cv_folds,
                        is_probability)
    if kind == "cell_means":
        return _fit_cell_means(X, y, is_probability)
    if kind == "stack":
        return fit_stack(spec, X, y, is_probability)
    raise InputError(f"unsupported learner kind {kind!r}")  # pragma: no cover


def predict(model: FittedLearner, features) -> np.ndarray:
    return model.predict(features)
