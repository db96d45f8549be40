"""Conditional LATEs by second-stage regression of the pseudo-outcomes.

The numerator and denominator pseudo-outcomes (``Gamma_dot``, ``Delta_dot``)
are regressed separately on the modifiers ``V``; their ratio at ``v`` is the
conditional effect among compliers with ``V = v``. Percentile bands come from
a row bootstrap that keeps the cross-fitted pseudo-outcomes fixed.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from drml_iv.data_model import IvDataset
from drml_iv.errors import InputError
from drml_iv.influence import PseudoOutcomes
from drml_iv.late import WEAK_INSTRUMENT_FLOOR, LateResult, estimate_late_drml
from drml_iv.learners import FittedLearner, LearnerSpec, fit, resolve_spec
from drml_iv.nuisance import DEFAULT_EPSILON, DEFAULT_FOLDS, FoldPlan, NuisanceModel

GRID_POINTS = 50
GRID_QUANTILES = (0.02, 0.98)
MAX_DISCRETE_LEVELS = 10
MAX_RESAMPLE_TRIES = 1000


def is_discrete(column: np.ndarray) -> bool:
    """Integer-valued with at most ``MAX_DISCRETE_LEVELS`` distinct values."""
    values = np.unique(column)
    return values.shape[0] <= MAX_DISCRETE_LEVELS and bool(np.all(values == np.round(values)))


def default_grid(V: np.ndarray) -> np.ndarray:
    """Observed levels for discrete columns, 50 points between the 2nd and
    98th percentiles otherwise; several columns give the Cartesian product."""
    if V.shape[1] == 0:
        return np.empty((1, 0))
    axes = []
    for j in range(V.shape[1]):
        col = V[:, j]
        if is_discrete(col):
            axes.append(np.unique(col))
        else:
            axes.append(np.linspace(*np.quantile(col, GRID_QUANTILES), GRID_POINTS))
    return np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, V.shape[1])


def default_second_stage(V: np.ndarray) -> LearnerSpec:
    if V.shape[1] == 0:
        return resolve_spec("mean")
    if all(is_discrete(V[:, j]) for j in range(V.shape[1])):
        return resolve_spec("cell_means")
    return resolve_spec("superlearner")


@dataclass(frozen=True, eq=False)
class SecondStage:
    gamma: FittedLearner
    delta: FittedLearner
    floor: float = WEAK_INSTRUMENT_FLOOR

    @classmethod
    def fit(cls, spec: LearnerSpec, V: np.ndarray, pseudo: PseudoOutcomes,
            floor: float = WEAK_INSTRUMENT_FLOOR) -> "SecondStage":
        return cls(fit(spec, V, pseudo.gamma_dot), fit(spec, V, pseudo.delta_dot), floor)

    def evaluate(self, V: np.ndarray):
        """Return ``(gamma, delta, chi, flagged)``; flagged points get ``chi = nan``."""
        g = self.gamma.predict(V)
        d = self.delta.predict(V)
        flagged = ~(np.abs(d) >= self.floor)
        with np.errstate(divide="ignore", invalid="ignore"):
            chi = np.where(flagged, np.nan, g / np.where(flagged, 1.0, d))
        return g, d, chi, flagged


@dataclass(frozen=True, eq=False)
class ClateResult:
    v_grid: np.ndarray
    Gamma_v: np.ndarray
    Delta_v: np.ndarray
    chi_v: np.ndarray
    flagged: np.ndarray
    band_lo: np.ndarray
    band_hi: np.ndarray
    B: int
    alpha: float
    second_stage_spec: LearnerSpec
    modifier_columns: tuple[str, ...]
    marginal: LateResult | None = None
    resample_retries: int = 0
    diagnostics: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        out = []
        for i in range(self.v_grid.shape[0]):
            row = {c: float(self.v_grid[i, j]) for j, c in enumerate(self.modifier_columns)}
            row.update(gamma=float(self.Gamma_v[i]), delta=float(self.Delta_v[i]),
                       chi=float(self.chi_v[i]), lo=float(self.band_lo[i]),
                       hi=float(self.band_hi[i]), flagged=int(self.flagged[i]))
            out.append(row)
        return out

    def to_dict(self) -> dict:
        return {
            "modifier_columns": list(self.modifier_columns),
            "second_stage": self.second_stage_spec.label,
            "B": self.B,
            "alpha": self.alpha,
            "resample_retries": self.resample_retries,
            "marginal_chi_hat": None if self.marginal is None else self.marginal.chi_hat,
            "grid": self.rows(),
        }


def _bootstrap_rep(child: np.random.SeedSequence, n, z, pseudo, V, grid, spec, floor):
    rng = np.random.default_rng(child)
    for tries in range(MAX_RESAMPLE_TRIES):
        idx = rng.integers(0, n, n)
        zb = z[idx]
        if zb.min() == 0 and zb.max() == 1:
            stage = SecondStage.fit(spec, V[idx], pseudo.take(idx), floor)
            return stage.evaluate(grid)[2], tries
    raise InputError("bootstrap could not draw a resample containing both instrument arms")


def bootstrap_bands(pseudo: PseudoOutcomes, z, V, grid, spec: LearnerSpec, B: int, alpha: float,
                    seed: int, threads: int = 1, floor: float = WEAK_INSTRUMENT_FLOOR):
    """Percentile bands of ``chi(v)`` over ``B`` row resamples.

    Replicate ``b`` draws from the ``b``-th child of ``SeedSequence(seed)``,
    so the bands do not depend on ``threads`` or on scheduling. Resamples
    missing an instrument arm are redrawn and counted in ``retries``.
    Replicates where a grid point is flagged contribute ``nan`` there and
    are ignored by the quantiles.
    """
    children = np.random.SeedSequence(seed).spawn(B)
    z = np.asarray(z)
    args = (pseudo.n, z, pseudo, V, grid, spec, floor)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda c: _bootstrap_rep(c, *args), children))
    else:
        results = [_bootstrap_rep(c, *args) for c in children]
    draws = np.array([r[0] for r in results]).reshape(B, grid.shape[0])
    retries = int(sum(r[1] for r in results))
    with np.errstate(all="ignore"):
        lo = np.nanquantile(draws, alpha / 2.0, axis=0) if B else np.full(grid.shape[0], np.nan)
        hi = np.nanquantile(draws, 1.0 - alpha / 2.0, axis=0) if B else np.full(grid.shape[0], np.nan)
    return lo, hi, retries, draws


def _cross_fit(data, folds, spec_pi, spec_mu, spec_lambda, epsilon, k, seed, nuisance, floor):
    return estimate_late_drml(data, folds, spec_pi, spec_mu, spec_lambda, epsilon, k=k, seed=seed,
                              nuisance=nuisance, floor=floor, return_pseudo=True)


def estimate_clate(data: IvDataset, folds: FoldPlan | None = None, spec_pi="superlearner",
                   spec_mu="superlearner", spec_lambda="superlearner",
                   v_columns: Sequence[str] = (), second_stage=None, v_grid=None, B: int = 500,
                   alpha: float = 0.05, seed: int = 0, threads: int = 1, *,
                   epsilon: float = DEFAULT_EPSILON, k: int = DEFAULT_FOLDS,
                   nuisance: NuisanceModel | None = None, floor: float = WEAK_INSTRUMENT_FLOOR,
                   refit_nuisances: bool = False) -> ClateResult:
    """Conditional LATE on a grid of modifier values with bootstrap bands.

    Parameters
    ----------
    v_columns : sequence of str
        Covariate names forming ``V``; empty means the marginal effect.
    second_stage : LearnerSpec or preset name, optional
        Defaults to per-cell means for discrete ``V`` and the stacked
        learner otherwise.
    v_grid : array, optional
        Evaluation points, shape (m, len(v_columns)).
    B : int
        Bootstrap replicates; 0 skips the bands.
    refit_nuisances : bool
        Must be False. Bootstrap replicates reuse the cross-fitted
        pseudo-outcomes; refitting nuisances per replicate is not offered.
    """
    if refit_nuisances:
        raise InputError("refitting nuisances inside the bootstrap is not supported")
    if B < 0:
        raise InputError("B must be non-negative")
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must lie in (0, 1)")
    v_columns = tuple(v_columns)
    V = data.columns(v_columns) if v_columns else np.empty((data.n, 0))
    spec = default_second_stage(V) if second_stage is None else resolve_spec(second_stage)
    grid = default_grid(V) if v_grid is None else np.asarray(v_grid, dtype=float).reshape(-1, V.shape[1])
    marginal, pseudo = _cross_fit(data, folds, spec_pi, spec_mu, spec_lambda, epsilon, k, seed,
                                  nuisance, floor)
    stage = SecondStage.fit(spec, V, pseudo, floor)
    g, d, chi, flagged = stage.evaluate(grid)
    if B:
        lo, hi, retries, _ = bootstrap_bands(pseudo, data.z, V, grid, spec, B, alpha, seed,
                                             threads, floor)
    else:
        lo = hi = np.full(grid.shape[0], np.nan)
        retries = 0
    return ClateResult(grid, g, d, chi, flagged, lo, hi, B, alpha, spec, v_columns, marginal,
                       retries, {"n_flagged": int(flagged.sum())})


@dataclass(frozen=True, eq=False)
class IteDistribution:
    values: np.ndarray
    flagged: np.ndarray
    chi_marginal: float

    @property
    def mean(self) -> float:
        return float(np.nanmean(self.values))

    @property
    def sd(self) -> float:
        return float(np.nanstd(self.values, ddof=1))

    def quantiles(self, probs=(0.05, 0.25, 0.5, 0.75, 0.95)) -> dict[float, float]:
        return {p: float(q) for p, q in zip(probs, np.nanquantile(self.values, probs))}


def ite_distribution(data: IvDataset, folds: FoldPlan | None = None, spec_pi="superlearner",
                     spec_mu="superlearner", spec_lambda="superlearner", second_stage="superlearner",
                     *, epsilon: float = DEFAULT_EPSILON, k: int = DEFAULT_FOLDS, seed: int = 0,
                     nuisance: NuisanceModel | None = None,
                     floor: float = WEAK_INSTRUMENT_FLOOR) -> IteDistribution:
    """Conditional LATE evaluated at every row's own covariates."""
    marginal, pseudo = _cross_fit(data, folds, spec_pi, spec_mu, spec_lambda, epsilon, k, seed,
                                  nuisance, floor)
    stage = SecondStage.fit(resolve_spec(second_stage), data.x, pseudo, floor)
    _, _, chi, flagged = stage.evaluate(data.x)
    return IteDistribution(chi, flagged, marginal.chi_hat)
