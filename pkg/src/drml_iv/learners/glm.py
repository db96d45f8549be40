"""Least squares and logistic regression with an intercept."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from drml_iv.learners.spec import FittedLearner

RIDGE = 1e-8
IRLS_TOL = 1e-8
IRLS_MAX_ITER = 100
COEF_CAP = 30.0


def _design(X):
    return np.column_stack([np.ones(X.shape[0]), X])


@dataclass(frozen=True, eq=False)
class LinearFit(FittedLearner):
    intercept: float = 0.0
    coef: np.ndarray = None
    ridged: bool = False

    def _predict(self, X):
        return self.intercept + X @ self.coef


@dataclass(frozen=True, eq=False)
class LogisticFit(FittedLearner):
    intercept: float = 0.0
    coef: np.ndarray = None
    converged: bool = True
    separated: bool = False
    n_iter: int = 0

    def _predict(self, X):
        return expit(self.intercept + X @ self.coef)


def fit_linear(X: np.ndarray, y: np.ndarray, is_probability: bool = False) -> LinearFit:
    D = _design(X)
    ridged = np.linalg.matrix_rank(D) < D.shape[1]
    if ridged:
        # one-hot blocks and duplicated columns make X'X singular
        G = D.T @ D + RIDGE * np.eye(D.shape[1])
        beta = np.linalg.solve(G, D.T @ y)
    else:
        beta = np.linalg.lstsq(D, y, rcond=None)[0]
    return LinearFit("linear", X.shape[1], intercept=float(beta[0]), coef=beta[1:],
                     ridged=bool(ridged), is_probability=is_probability)


def fit_logistic(X: np.ndarray, y: np.ndarray) -> LogisticFit:
    """Maximum likelihood by iteratively reweighted least squares.

    Targets may be fractional in [0, 1]. Under complete separation the
    coefficients are capped at +-30 and iteration stops with
    ``separated=True``; predictions then saturate.
    """
    D = _design(X)
    k = D.shape[1]
    ybar = float(np.clip(y.mean(), 1e-6, 1 - 1e-6))
    beta = np.zeros(k)
    beta[0] = np.log(ybar / (1 - ybar))
    converged = separated = False
    it = 0
    for it in range(1, IRLS_MAX_ITER + 1):
        p = expit(D @ beta)
        w = p * (1 - p)
        H = (D * w[:, None]).T @ D + RIDGE * np.eye(k)
        step = np.linalg.solve(H, D.T @ (y - p))
        beta = beta + step
        if np.max(np.abs(beta)) > COEF_CAP:
            beta = np.clip(beta, -COEF_CAP, COEF_CAP)
            separated = True
            break
        if np.max(np.abs(step)) < IRLS_TOL:
            converged = True
            break
    return LogisticFit("logistic", X.shape[1], intercept=float(beta[0]), coef=beta[1:],
                       converged=converged, separated=separated, n_iter=it,
                       is_probability=True)
