"""Cross-validated convex stacking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from drml_iv.learners.spec import FittedLearner, LearnerSpec, cv_assignment

NNLS_TOL = 1e-10
NNLS_MAX_ITER = 200_000


@njit(cache=True)
def _nnls_projected_gradient(G, b, tol, max_iter):
    # accelerated projected gradient on 0.5 w'Gw - b'w, w >= 0, with
    # gradient-based restarts
    m = b.shape[0]
    L = 0.0
    for i in range(m):
        s = 0.0
        for j in range(m):
            s += abs(G[i, j])
        L = max(L, s)
    if L <= 0.0:
        return np.zeros(m), 0
    w = np.full(m, 1.0 / m)
    x = w.copy()
    t = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        grad = G @ x - b
        w_new = np.maximum(x - grad / L, 0.0)
        diff = 0.0
        for i in range(m):
            diff = max(diff, abs(w_new[i] - w[i]))
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        restart = 0.0
        for i in range(m):
            restart += grad[i] * (w_new[i] - w[i])
        if restart > 0.0:
            t_new = 1.0
            x = w_new.copy()
        else:
            x = w_new + ((t - 1.0) / t_new) * (w_new - w)
        w = w_new
        t = t_new
        if diff < tol:
            break
    return w, it


def nnls_weights(P: np.ndarray, y: np.ndarray, tol: float = NNLS_TOL):
    """Non-negative least squares of ``y`` on the columns of ``P``.

    Returns the (unnormalised) weights and the iteration count.
    """
    n = P.shape[0]
    G = P.T @ P / n
    b = P.T @ y / n
    return _nnls_projected_gradient(np.ascontiguousarray(G), b, tol, NNLS_MAX_ITER)


@dataclass(frozen=True, eq=False)
class StackFit(FittedLearner):
    members: tuple = ()
    weights: np.ndarray = None
    cv_mse: np.ndarray = None

    def _predict(self, X):
        out = np.zeros(X.shape[0])
        for w, member in zip(self.weights, self.members):
            if w != 0.0:
                out += w * member.predict(X)
        return out

    def member_predictions(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.column_stack([m.predict(X) for m in self.members])


def fit_stack(spec: LearnerSpec, X: np.ndarray, y: np.ndarray, is_probability: bool) -> StackFit:
    from drml_iv.learners.api import fit

    folds = cv_assignment(X, y, spec.cv_folds)
    oof = np.zeros((y.shape[0], len(spec.members)))
    for f in np.unique(folds):
        tr, te = folds != f, folds == f
        for j, member in enumerate(spec.members):
            oof[te, j] = fit(member, X[tr], y[tr], is_probability).predict(X[te])
    cv_mse = np.mean((oof - y[:, None]) ** 2, axis=0)
    w, _ = nnls_weights(oof, y)
    total = w.sum()
    if total > 0.0:
        w = w / total
    else:
        w = np.zeros(len(spec.members))
        w[int(np.argmin(cv_mse))] = 1.0
    members = tuple(fit(m, X, y, is_probability) for m in spec.members)
    return StackFit("stack", X.shape[1], members=members, weights=w, cv_mse=cv_mse,
                    is_probability=is_probability)
