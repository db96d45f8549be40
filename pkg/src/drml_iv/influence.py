"""Uncentered influence-function values for the IV functionals.

The pointwise helpers accept scalars or equal-length arrays. ``pi1`` is the
probability of ``Z = 1``; the probability of the observed arm is derived
from it as ``z * pi1 + (1 - z) * (1 - pi1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from drml_iv.data_model import IvDataset
from drml_iv.errors import InputError
from drml_iv.nuisance import NuisancePredictions


def _check_pi(pi1):
    pi1 = np.asarray(pi1, dtype=float)
    if np.any(pi1 <= 0.0) or np.any(pi1 >= 1.0):
        raise InputError("instrument propensity pi1 must lie strictly inside (0, 1)")
    return pi1


def _arm_term(resp, z, fit0, fit1, pi1):
    z = np.asarray(z, dtype=float)
    pi_z = z * pi1 + (1.0 - z) * (1.0 - pi1)
    fit_z = np.where(z == 1.0, fit1, fit0)
    return (2.0 * z - 1.0) / pi_z * (resp - fit_z) + (np.asarray(fit1) - np.asarray(fit0))


def gamma_dot_point(y, z, mu0, mu1, pi1):
    """Uncentered influence value for the instrument effect on the outcome."""
    pi1 = _check_pi(pi1)
    out = _arm_term(np.asarray(y, dtype=float), z, mu0, mu1, pi1)
    return float(out) if out.ndim == 0 else out


def delta_dot_point(a, z, lam0, lam1, pi1):
    """Uncentered influence value for the instrument effect on treatment."""
    pi1 = _check_pi(pi1)
    out = _arm_term(np.asarray(a, dtype=float), z, lam0, lam1, pi1)
    return float(out) if out.ndim == 0 else out


def strata_dot_point(a, z, lam0, lam1, pi1):
    """Uncentered influence values for the always-taker and never-taker shares.

    Returns ``(at_dot, nt_dot)`` with::

        at_dot = (1 - z) / (1 - pi1) * (a - lam0) + lam0
        nt_dot = z / pi1 * (lam1 - a) + 1 - lam1
    """
    pi1 = _check_pi(pi1)
    a = np.asarray(a, dtype=float)
    z = np.asarray(z, dtype=float)
    lam0 = np.asarray(lam0, dtype=float)
    lam1 = np.asarray(lam1, dtype=float)
    at = (1.0 - z) / (1.0 - pi1) * (a - lam0) + lam0
    nt = z / pi1 * (lam1 - a) + (1.0 - lam1)
    if at.ndim == 0:
        return float(at), float(nt)
    return at, nt


def chi_if_point(gamma_dot, delta_dot, chi, Delta):
    """Centered influence value of the LATE ratio at ``(chi, Delta)``.

    Equal to ``(gamma_dot - chi * delta_dot) / Delta``, which expands to the
    residual-weighted form ``(2z-1)/pi_z * (y - mu_z - chi (a - lam_z))
    + gamma(x) - chi delta(x)`` divided by ``Delta``.
    """
    if Delta == 0:
        raise InputError("Delta must be non-zero")
    out = (np.asarray(gamma_dot, dtype=float) - chi * np.asarray(delta_dot, dtype=float)) / Delta
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class PseudoOutcomes:
    gamma_dot: np.ndarray
    delta_dot: np.ndarray
    lambda0_dot: np.ndarray
    lambda1_dot: np.ndarray
    gamma_hat: np.ndarray
    delta_hat: np.ndarray

    @property
    def n(self) -> int:
        return self.gamma_dot.shape[0]

    def take(self, rows) -> "PseudoOutcomes":
        return PseudoOutcomes(*(getattr(self, f)[rows] for f in self.__dataclass_fields__))


def compute_pseudo_outcomes(data: IvDataset, nuis: NuisancePredictions) -> PseudoOutcomes:
    """Row-wise influence values from out-of-fold nuisance predictions."""
    pi1, mu0, mu1, lam0, lam1 = (np.asarray(v, dtype=float) for v in nuis)
    if any(v.shape != (data.n,) for v in (pi1, mu0, mu1, lam0, lam1)):
        raise InputError("nuisance predictions are not aligned with the dataset")
    gamma_dot = gamma_dot_point(data.y, data.z, mu0, mu1, pi1)
    delta_dot = delta_dot_point(data.a, data.z, lam0, lam1, pi1)
    at_dot, nt_dot = strata_dot_point(data.a, data.z, lam0, lam1, pi1)
    return PseudoOutcomes(
        gamma_dot=np.atleast_1d(gamma_dot), delta_dot=np.atleast_1d(delta_dot),
        lambda0_dot=np.atleast_1d(at_dot), lambda1_dot=np.atleast_1d(nt_dot),
        gamma_hat=mu1 - mu0, delta_hat=lam1 - lam0,
    )
