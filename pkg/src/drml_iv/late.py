"""Marginal LATE estimators: cross-fitted one-step, TSLS and the plain Wald ratio."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import norm

from drml_iv.data_model import IvDataset
from drml_iv.errors import EstimationError, InputError, WeakInstrumentError
from drml_iv.influence import PseudoOutcomes, chi_if_point, compute_pseudo_outcomes
from drml_iv.learners.api import exact_mean
from drml_iv.nuisance import (
    DEFAULT_EPSILON,
    DEFAULT_FOLDS,
    FoldPlan,
    NuisanceModel,
    fit_nuisances,
    make_folds,
    predict_out_of_fold,
)

WEAK_INSTRUMENT_FLOOR = 0.01


@dataclass(frozen=True)
class LateResult:
    method: str
    chi_hat: float
    se: float
    ci: tuple[float, float]
    alpha: float
    n: int
    Gamma_hat: float = float("nan")
    Delta_hat: float = float("nan")
    diagnostics: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        """Flat dict suitable for one JSON object or CSV row."""
        rec = asdict(self)
        rec["ci_lo"], rec["ci_hi"] = rec.pop("ci")
        diag = rec.pop("diagnostics")
        for key in sorted(diag):
            rec[f"diag_{key}"] = diag[key]
        return rec

    def covers(self, value: float) -> bool:
        return self.ci[0] <= value <= self.ci[1]

    @property
    def width(self) -> float:
        return self.ci[1] - self.ci[0]


def wald_interval(estimate: float, se: float, alpha: float) -> tuple[float, float]:
    q = float(norm.ppf(1.0 - alpha / 2.0))
    return (float(estimate - q * se), float(estimate + q * se))


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must lie in (0, 1)")


def late_from_pseudo(pseudo: PseudoOutcomes, alpha: float = 0.05,
                     floor: float = WEAK_INSTRUMENT_FLOOR, diagnostics: dict | None = None) -> LateResult:
    """Ratio of pseudo-outcome means with a Wald interval from the ratio's influence function."""
    _check_alpha(alpha)
    n = pseudo.n
    Gamma = exact_mean(pseudo.gamma_dot)
    Delta = exact_mean(pseudo.delta_dot)
    if not abs(Delta) >= floor:
        raise WeakInstrumentError(Delta, floor)
    chi = Gamma / Delta
    phi = chi_if_point(pseudo.gamma_dot, pseudo.delta_dot, chi, Delta)
    se = float(np.sqrt(np.mean(phi ** 2) / n))
    diag = {"abs_Delta_hat": abs(Delta), "if_mean": float(np.mean(phi))}
    diag.update(diagnostics or {})
    return LateResult("drml", chi, se, wald_interval(chi, se, alpha), alpha, n,
                      Gamma_hat=Gamma, Delta_hat=Delta, diagnostics=diag)


def _r2(obs, pred):
    ss = np.sum((obs - obs.mean()) ** 2)
    return float(1.0 - np.sum((obs - pred) ** 2) / ss) if ss > 0 else float("nan")


def _logloss(obs, pred):
    p = np.clip(pred, 1e-12, 1 - 1e-12)
    return float(-np.mean(obs * np.log(p) + (1 - obs) * np.log(1 - p)))


def estimate_late_drml(data: IvDataset, folds: FoldPlan | None = None, spec_pi="superlearner",
                       spec_mu="superlearner", spec_lambda="superlearner",
                       epsilon: float = DEFAULT_EPSILON, alpha: float = 0.05, *,
                       k: int = DEFAULT_FOLDS, seed: int = 0, nuisance: NuisanceModel | None = None,
                       floor: float = WEAK_INSTRUMENT_FLOOR, return_pseudo: bool = False):
    """Cross-fitted one-step estimator of the LATE.

    Nuisances are fit per fold (or taken from ``nuisance``, e.g. an oracle
    model), every row is scored out of fold, and the estimate is the ratio of
    the pooled pseudo-outcome means. The standard error is the root mean
    square of the estimated centered influence function over ``sqrt(n)``.

    Raises
    ------
    WeakInstrumentError
        If ``|Delta_hat|`` falls below ``floor``.
    """
    _check_alpha(alpha)
    if nuisance is None or not nuisance.is_oracle:
        if folds is None:
            folds = make_folds(data.n, k, data.z, seed)
        if data.n < 10 * folds.k:
            raise InputError(f"need at least {10 * folds.k} rows for {folds.k}-fold cross-fitting")
    if nuisance is None:
        nuisance = fit_nuisances(data, folds, spec_pi, spec_mu, spec_lambda, epsilon)
    preds = predict_out_of_fold(nuisance, data, folds)
    pseudo = compute_pseudo_outcomes(data, preds)
    lam_z = np.where(data.z == 1, preds.lam1, preds.lam0)
    mu_z = np.where(data.z == 1, preds.mu1, preds.mu0)
    diag = {
        "epsilon": nuisance.epsilon,
        "folds": 0 if nuisance.is_oracle else folds.k,
        "oracle": nuisance.is_oracle,
        "pi_logloss": _logloss(data.z, preds.pi1),
        "lambda_logloss": _logloss(data.a, lam_z),
        "mu_r2": _r2(data.y, mu_z),
        "pi_truncated_share": float(np.mean((preds.pi1 <= nuisance.epsilon)
                                            | (preds.pi1 >= 1 - nuisance.epsilon))),
    }
    result = late_from_pseudo(pseudo, alpha, floor, diag)
    return (result, pseudo) if return_pseudo else result


def _ols(D, y):
    rank = np.linalg.matrix_rank(D)
    if rank < D.shape[1]:
        G = D.T @ D + 1e-8 * np.eye(D.shape[1])
        beta = np.linalg.solve(G, D.T @ y)
        if np.linalg.cond(G) > 1e14:
            raise EstimationError("TSLS design is rank deficient beyond the ridge tolerance")
        return beta, G
    beta = np.linalg.lstsq(D, y, rcond=None)[0]
    return beta, D.T @ D


def estimate_late_tsls(data: IvDataset, alpha: float = 0.05) -> LateResult:
    """Two-stage least squares with linear main effects of the covariates.

    Stage 1 regresses A on (1, Z, X); stage 2 regresses Y on (1, A_hat, X).
    The standard error is the classical homoskedastic one,
    ``sigma^2 (W'W)^{-1}`` with ``W = (1, A_hat, X)`` and ``sigma^2`` from
    residuals computed with the observed A, on ``n - p - 2`` degrees of
    freedom.
    """
    _check_alpha(alpha)
    n = data.n
    ones = np.ones(n)
    D1 = np.column_stack([ones, data.z, data.x])
    b1, _ = _ols(D1, data.a.astype(float))
    a_hat = D1 @ b1
    W = np.column_stack([ones, a_hat, data.x])
    b2, G = _ols(W, data.y)
    chi = float(b2[1])
    resid = data.y - np.column_stack([ones, data.a, data.x]) @ b2
    dof = n - W.shape[1]
    if dof <= 0:
        raise EstimationError("not enough rows for TSLS standard errors")
    sigma2 = float(resid @ resid / dof)
    se = float(np.sqrt(sigma2 * np.linalg.inv(G)[1, 1]))
    first_stage = float(b1[1])
    return LateResult("tsls", chi, se, wald_interval(chi, se, alpha), alpha, n,
                      diagnostics={"first_stage_coef": first_stage, "sigma2": sigma2})


def estimate_late_unadjusted(data: IvDataset, alpha: float = 0.05) -> LateResult:
    """Wald ratio of instrument-arm mean differences, no covariates.

    The standard error is the delta-method one, which reduces to
    ``sqrt(sum_z var(Y - chi A | Z = z) / n_z) / |denominator|``.
    """
    _check_alpha(alpha)
    z1 = data.z == 1
    z0 = ~z1
    n1, n0 = int(z1.sum()), int(z0.sum())
    if n1 == 0 or n0 == 0:
        raise InputError("both instrument arms must be non-empty")
    a = data.a.astype(float)
    num = data.y[z1].mean() - data.y[z0].mean()
    den = a[z1].mean() - a[z0].mean()
    if den == 0.0:
        raise EstimationError("zero denominator: instrument does not shift treatment")
    chi = float(num / den)
    r = data.y - chi * a
    var = r[z1].var() / n1 + r[z0].var() / n0
    se = float(np.sqrt(var) / abs(den))
    return LateResult("unadjusted", chi, se, wald_interval(chi, se, alpha), alpha, data.n,
                      Gamma_hat=float(num), Delta_hat=float(den),
                      diagnostics={"n_z1": n1, "n_z0": n0})
