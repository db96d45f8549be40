"""Covariate profiles of the principal strata.

Each stratum has a pseudo-outcome whose mean is the stratum's share:

* compliers      ``Delta_dot``
* always-takers  ``Lambda0_dot``  (treated even when ``Z = 0``)
* never-takers   ``Lambda1_dot``  (untreated even when ``Z = 1``)

The three add up to one on every row. A profile at ``V = v0`` is the ratio
``P_n[W 1(V = v0)] / P_n[W]`` for the stratum's pseudo-outcome ``W``; a
density profile replaces the indicator by a kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from drml_iv.errors import InputError, WeakInstrumentError
from drml_iv.influence import PseudoOutcomes

STRATA = ("complier", "always_taker", "never_taker")
_ALIASES = {"co": "complier", "at": "always_taker", "nt": "never_taker"}
SHARE_FLOOR = 0.01


def _stratum(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in STRATA:
        raise InputError(f"unknown stratum {name!r}; choose from {STRATA}")
    return name


def stratum_weights(pseudo: PseudoOutcomes, stratum: str) -> np.ndarray:
    stratum = _stratum(stratum)
    return {"complier": pseudo.delta_dot, "always_taker": pseudo.lambda0_dot,
            "never_taker": pseudo.lambda1_dot}[stratum]


@dataclass(frozen=True)
class Share:
    estimate: float
    se: float

    def ci(self, alpha: float = 0.05) -> tuple[float, float]:
        q = norm.ppf(1.0 - alpha / 2.0)
        return (self.estimate - q * self.se, self.estimate + q * self.se)


def _mean_and_se(w):
    m = float(np.mean(w))
    return Share(m, float(np.sqrt(np.mean((w - m) ** 2) / w.shape[0])))


def strata_shares(pseudo: PseudoOutcomes) -> dict[str, Share]:
    """Share of each stratum with its influence-function standard error."""
    return {s: _mean_and_se(stratum_weights(pseudo, s)) for s in STRATA}


@dataclass(frozen=True, eq=False)
class StrataProfileResult:
    """Profile of one stratum over levels (discrete) or a grid (density).

    ``se``, ``ci_lo`` and ``ci_hi`` are ``None`` for density profiles, which
    carry point estimates only; ``negative`` flags density values below zero.
    """

    stratum: str
    kind: str
    v0: np.ndarray
    estimate: np.ndarray
    marginal_share: Share
    se: np.ndarray | None = None
    ci_lo: np.ndarray | None = None
    ci_hi: np.ndarray | None = None
    negative: np.ndarray | None = None
    bandwidth: float | None = None
    alpha: float = 0.05

    def rows(self) -> list[dict]:
        if self.kind == "discrete":
            return [{"v0": _plain(v), "estimate": float(e), "se": float(s), "lo": float(lo),
                     "hi": float(hi)}
                    for v, e, s, lo, hi in zip(self.v0, self.estimate, self.se, self.ci_lo,
                                               self.ci_hi)]
        return [{"v0": float(v), "density": float(e), "negative_flag": int(f)}
                for v, e, f in zip(self.v0, self.estimate, self.negative)]


def _plain(v):
    v = v.item() if hasattr(v, "item") else v
    return int(v) if isinstance(v, float) and v.is_integer() else v


def _denominator(w, floor, stratum):
    D = float(np.mean(w))
    if not abs(D) >= floor:
        raise WeakInstrumentError(D, floor, where=f"{stratum} share")
    return D


def profile_discrete(pseudo: PseudoOutcomes, v, v0=None, stratum: str = "complier",
                     alpha: float = 0.05, floor: float = SHARE_FLOOR) -> StrataProfileResult:
    """Share of the stratum with ``V = v0``, for one level or every observed level.

    The standard error comes from the ratio influence function
    ``(W 1(V = v0) - psi W) / P_n W``.
    """
    stratum = _stratum(stratum)
    v = np.asarray(v).reshape(-1)
    if v.shape[0] != pseudo.n:
        raise InputError(f"modifier has {v.shape[0]} rows, pseudo-outcomes have {pseudo.n}")
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must lie in (0, 1)")
    levels = np.unique(v) if v0 is None else np.atleast_1d(np.asarray(v0))
    missing = [lv for lv in levels.tolist() if not np.any(v == lv)]
    if missing:
        raise InputError(f"level(s) {missing} not observed in the modifier")
    w = stratum_weights(pseudo, stratum)
    D = _denominator(w, floor, stratum)
    n = pseudo.n
    est, se = np.empty(levels.shape[0]), np.empty(levels.shape[0])
    for i, lv in enumerate(levels):
        wv = w * (v == lv)
        psi = float(np.mean(wv)) / D
        phi = (wv - psi * w) / D
        est[i] = psi
        se[i] = np.sqrt(np.mean(phi ** 2) / n)
    q = norm.ppf(1.0 - alpha / 2.0)
    return StrataProfileResult(stratum, "discrete", levels, est, _mean_and_se(w), se,
                               est - q * se, est + q * se, alpha=alpha)


@dataclass(frozen=True)
class DensitySpec:
    """Gaussian kernel with a fixed bandwidth or the ``"silverman"`` rule."""

    grid: np.ndarray | None = None
    h: float | str = "silverman"
    kernel: str = "gaussian"
    n_grid: int = 101

    def __post_init__(self):
        if self.kernel != "gaussian":
            raise InputError("only the gaussian kernel is supported")
        if isinstance(self.h, str):
            if self.h != "silverman":
                raise InputError(f"unknown bandwidth rule {self.h!r}")
        elif not self.h > 0:
            raise InputError("bandwidth h must be positive")

    def bandwidth(self, v: np.ndarray) -> float:
        return silverman_bandwidth(v) if isinstance(self.h, str) else float(self.h)

    def points(self, v: np.ndarray) -> np.ndarray:
        if self.grid is not None:
            return np.asarray(self.grid, dtype=float).reshape(-1)
        lo, hi = np.quantile(v, [0.02, 0.98])
        return np.linspace(lo, hi, self.n_grid)


def silverman_bandwidth(v) -> float:
    """``0.9 min(sd, IQR / 1.34) n^(-1/5)`` on the unweighted sample."""
    v = np.asarray(v, dtype=float).reshape(-1)
    sd = float(np.std(v, ddof=1)) if v.shape[0] > 1 else 0.0
    q75, q25 = np.quantile(v, [0.75, 0.25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    if not spread > 0:
        raise InputError("cannot choose a bandwidth for a constant modifier")
    return 0.9 * spread * v.shape[0] ** (-0.2)


def weighted_kde(v, weights, grid, h: float) -> np.ndarray:
    """``sum_i w_i K_h(v_i - g) / sum_i w_i`` with a Gaussian ``K``, chunked over rows."""
    v = np.asarray(v, dtype=float).reshape(-1)
    w = np.asarray(weights, dtype=float).reshape(-1)
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if not h > 0:
        raise InputError("bandwidth h must be positive")
    acc = np.zeros(grid.shape[0])
    for start in range(0, v.shape[0], 8192):
        vv, ww = v[start:start + 8192], w[start:start + 8192]
        acc += ww @ norm.pdf((vv[:, None] - grid[None, :]) / h)
    return acc / h / np.sum(w)


def profile_density(pseudo: PseudoOutcomes, v, spec: DensitySpec | None = None,
                    stratum: str = "complier", floor: float = SHARE_FLOOR) -> StrataProfileResult:
    """Kernel density of a continuous covariate within a stratum.

    Pseudo-outcome weights can be negative, so the estimate can dip below
    zero; such grid points are flagged, never clipped.
    """
    stratum = _stratum(stratum)
    spec = spec or DensitySpec()
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != pseudo.n:
        raise InputError(f"modifier has {v.shape[0]} rows, pseudo-outcomes have {pseudo.n}")
    w = stratum_weights(pseudo, stratum)
    _denominator(w, floor, stratum)
    h = spec.bandwidth(v)
    grid = spec.points(v)
    dens = weighted_kde(v, w, grid, h)
    return StrataProfileResult(stratum, "density", grid, dens, _mean_and_se(w),
                               negative=dens < 0.0, bandwidth=h)
