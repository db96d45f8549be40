"""Cross-fitting of the three nuisance regressions.

* ``pi(x)``      -- P(Z = 1 | X = x), truncated to ``[eps, 1 - eps]``
* ``mu(x, z)``   -- E[Y | X = x, Z = z]
* ``lambda(x, z)`` -- E[A | X = x, Z = z], clipped to [0, 1]

``mu`` and ``lambda`` are fit separately within each instrument arm, so both
``z = 0`` and ``z = 1`` predictions exist for every learner kind.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from drml_iv.data_model import IvDataset
from drml_iv.errors import InputError
from drml_iv.learners import FittedLearner, LearnerSpec, fit, resolve_spec

DEFAULT_EPSILON = 0.01
DEFAULT_FOLDS = 5


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    assignment: np.ndarray
    seed: int

    def __post_init__(self):
        self.assignment.setflags(write=False)

    @property
    def n(self) -> int:
        return self.assignment.shape[0]

    def rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)


def make_folds(n: int, k: int, z, seed: int) -> FoldPlan:
    """Seeded fold assignment, stratified by instrument arm.

    Each arm is shuffled and dealt round-robin; the deal continues from
    arm 0 into arm 1, so overall fold sizes differ by at most one and so do
    per-arm counts.
    """
    z = np.asarray(z).reshape(-1)
    if z.shape[0] != n:
        raise InputError(f"instrument has length {z.shape[0]}, expected {n}")
    if k < 2:
        raise InputError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    assignment = np.empty(n, dtype=np.int64)
    offset = 0
    for arm in (0, 1):
        rows = np.flatnonzero(z == arm)
        if rows.size < k:
            raise InputError(f"k={k} folds exceeds the size of instrument arm Z={arm} ({rows.size})")
        rows = rng.permutation(rows)
        assignment[rows] = (offset + np.arange(rows.size)) % k
        offset += rows.size
    return FoldPlan(k=k, assignment=assignment, seed=seed)


class NuisancePredictions(NamedTuple):
    pi1: np.ndarray
    mu0: np.ndarray
    mu1: np.ndarray
    lam0: np.ndarray
    lam1: np.ndarray


@dataclass(frozen=True, eq=False)
class FoldFit:
    pi: FittedLearner
    mu0: FittedLearner
    mu1: FittedLearner
    lam0: FittedLearner
    lam1: FittedLearner


@dataclass(frozen=True, eq=False)
class NuisanceModel:
    """Per-fold fitted nuisances, or closed-form oracle functions.

    In oracle mode ``oracle`` holds ``(pi1(x), mu(x, z), lam(x, z))`` and no
    fitting is involved; every row is scored with the same functions.
    """

    fold_fits: tuple[FoldFit, ...] = ()
    epsilon: float = DEFAULT_EPSILON
    y_binary: bool = False
    specs: tuple[LearnerSpec, LearnerSpec, LearnerSpec] | None = None
    oracle: tuple[Callable, Callable, Callable] | None = None

    @classmethod
    def from_functions(cls, pi1: Callable, mu: Callable, lam: Callable,
                       epsilon: float = DEFAULT_EPSILON, y_binary: bool = False) -> "NuisanceModel":
        return cls(epsilon=epsilon, y_binary=y_binary, oracle=(pi1, mu, lam))

    @property
    def is_oracle(self) -> bool:
        return self.oracle is not None

    def _clip(self, pi1, mu0, mu1, lam0, lam1) -> NuisancePredictions:
        eps = self.epsilon
        pi1 = np.clip(pi1, eps, 1.0 - eps)
        lam0, lam1 = np.clip(lam0, 0.0, 1.0), np.clip(lam1, 0.0, 1.0)
        if self.y_binary:
            mu0, mu1 = np.clip(mu0, 0.0, 1.0), np.clip(mu1, 0.0, 1.0)
        return NuisancePredictions(pi1, mu0, mu1, lam0, lam1)

    def predict(self, x, fold: int | None = None) -> NuisancePredictions:
        """Score covariate rows ``x`` with one fold's fits (or the oracle)."""
        x = np.asarray(x, dtype=float)
        if self.is_oracle:
            pi_f, mu_f, lam_f = self.oracle
            return self._clip(
                np.asarray(pi_f(x), dtype=float),
                np.asarray(mu_f(x, 0), dtype=float), np.asarray(mu_f(x, 1), dtype=float),
                np.asarray(lam_f(x, 0), dtype=float), np.asarray(lam_f(x, 1), dtype=float),
            )
        ff = self.fold_fits[fold]
        return self._clip(ff.pi.predict(x), ff.mu0.predict(x), ff.mu1.predict(x),
                          ff.lam0.predict(x), ff.lam1.predict(x))


def fit_nuisances(data: IvDataset, folds: FoldPlan, spec_pi, spec_mu, spec_lambda,
                  epsilon: float = DEFAULT_EPSILON) -> NuisanceModel:
    """Fit pi, mu and lambda once per fold, each on the rows outside that fold."""
    if folds.n != data.n:
        raise InputError(f"fold plan covers {folds.n} rows, dataset has {data.n}")
    if not 0.0 <= epsilon < 0.5:
        raise InputError("epsilon must lie in [0, 0.5)")
    spec_pi, spec_mu, spec_lambda = (resolve_spec(s) for s in (spec_pi, spec_mu, spec_lambda))
    y_binary = data.y_is_binary
    fits = []
    for f in range(folds.k):
        train = folds.assignment != f
        x, y, a, z = data.x[train], data.y[train], data.a[train], data.z[train]
        arms = {}
        for arm in (0, 1):
            sel = z == arm
            if not sel.any():
                raise InputError(f"training split for fold {f} has no rows with Z={arm}")
            arms[arm] = (x[sel], y[sel], a[sel].astype(float))
        fits.append(FoldFit(
            pi=fit(spec_pi, x, z.astype(float), is_probability=True),
            mu0=fit(spec_mu, arms[0][0], arms[0][1], is_probability=y_binary),
            mu1=fit(spec_mu, arms[1][0], arms[1][1], is_probability=y_binary),
            lam0=fit(spec_lambda, arms[0][0], arms[0][2], is_probability=True),
            lam1=fit(spec_lambda, arms[1][0], arms[1][2], is_probability=True),
        ))
    return NuisanceModel(fold_fits=tuple(fits), epsilon=epsilon, y_binary=y_binary,
                         specs=(spec_pi, spec_mu, spec_lambda))


def predict_out_of_fold(model: NuisanceModel, data: IvDataset,
                        folds: FoldPlan | None = None) -> NuisancePredictions:
    """Score each row with the fits that never saw it.

    ``folds`` may be omitted only for oracle models.
    """
    if model.is_oracle:
        return model.predict(data.x)
    if folds is None or folds.n != data.n:
        raise InputError("fold plan does not match the dataset")
    if len(model.fold_fits) != folds.k:
        raise InputError("nuisance model and fold plan have different fold counts")
    out = [np.empty(data.n) for _ in range(5)]
    for f in range(folds.k):
        rows = folds.assignment == f
        if not rows.any():
            continue
        for vec, vals in zip(out, model.predict(data.x[rows], fold=f)):
            vec[rows] = vals
    return NuisancePredictions(*out)
