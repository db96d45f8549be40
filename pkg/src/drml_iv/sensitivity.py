"""Sensitivity of the LATE to defiers.

With a defier share ``delta1`` and a defier-minus-complier effect gap
``delta2`` the instrument-based ratio no longer identifies the complier
effect; the estimate consistent with a given ``(delta1, delta2)`` is

    xi = chi_hat + delta1 * delta2 / Delta_hat.

Nothing is re-estimated: the map reuses ``chi_hat`` and ``Delta_hat``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from drml_iv.errors import InputError

DELTA1_RANGE = (0.0, 1.0)
DELTA2_RANGE = (-2.0, 2.0)


def _check(Delta_hat, delta1, delta2, y_binary=True):
    if Delta_hat == 0:
        raise InputError("Delta_hat must be non-zero")
    d1 = np.asarray(delta1, dtype=float)
    d2 = np.asarray(delta2, dtype=float)
    if np.any(d1 < 0.0) or np.any(d1 > 1.0):
        raise InputError("delta1 is a proportion and must lie in [0, 1]")
    if np.any(np.abs(d2) > 2.0):
        if y_binary:
            raise InputError("delta2 must lie in [-2, 2] for a binary outcome")
        warnings.warn("delta2 outside [-2, 2]", stacklevel=3)
    return d1, d2


def xi(chi_hat: float, Delta_hat: float, delta1, delta2, y_binary: bool = True):
    """Defier-adjusted estimate; broadcasts over ``delta1`` and ``delta2``."""
    d1, d2 = _check(Delta_hat, delta1, delta2, y_binary)
    out = chi_hat + d1 * d2 / Delta_hat
    return float(out) if np.ndim(out) == 0 else out


def frontier_delta2(chi_hat: float, Delta_hat: float, delta1):
    """The gap ``delta2*`` at which ``xi`` crosses zero, for ``delta1 > 0``."""
    d1 = np.asarray(delta1, dtype=float)
    if np.any(d1 <= 0.0):
        raise InputError("frontier is defined for delta1 > 0")
    out = -chi_hat * Delta_hat / d1
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class SensitivitySurface:
    """``xi`` on a Cartesian ``(delta1, delta2)`` grid plus its zero set.

    ``frontier`` is an (m, 2) array of ``(delta1, delta2)`` pairs. When
    ``chi_hat != 0`` it holds the analytic curve at every positive grid
    ``delta1`` whose ``delta2*`` falls inside the ``delta2`` range. When
    ``chi_hat == 0`` the zero set is the two axes, represented by the grid
    points on ``delta1 = 0`` and on ``delta2 = 0``.
    """

    chi_hat: float
    Delta_hat: float
    delta1_grid: np.ndarray
    delta2_grid: np.ndarray
    xi: np.ndarray
    frontier: np.ndarray

    def long_rows(self) -> list[dict]:
        rows = []
        for i, d1 in enumerate(self.delta1_grid):
            for j, d2 in enumerate(self.delta2_grid):
                rows.append({"delta1": float(d1), "delta2": float(d2), "xi": float(self.xi[i, j])})
        return rows

    def frontier_rows(self) -> list[dict]:
        return [{"delta1": float(a), "delta2": float(b)} for a, b in self.frontier]

    def sign_preserved(self) -> np.ndarray:
        """Boolean grid: ``sign(xi) == sign(chi_hat)``."""
        return np.sign(self.xi) == np.sign(self.chi_hat)


def sensitivity_surface(chi_hat: float, Delta_hat: float, n_delta1: int = 101,
                        n_delta2: int = 161, y_binary: bool = True,
                        delta2_range: tuple[float, float] = DELTA2_RANGE) -> SensitivitySurface:
    """Evaluate ``xi`` over equispaced grids on [0, 1] and ``delta2_range``."""
    if n_delta1 < 2 or n_delta2 < 2:
        raise InputError("grids need at least two points")
    d1 = np.linspace(*DELTA1_RANGE, n_delta1)
    d2 = np.linspace(*delta2_range, n_delta2)
    surface = xi(chi_hat, Delta_hat, d1[:, None], d2[None, :], y_binary)
    if chi_hat == 0:
        axis1 = np.column_stack([np.zeros_like(d2), d2])
        axis2 = np.column_stack([d1[1:], np.zeros(n_delta1 - 1)]) if np.any(d2 == 0) else np.empty((0, 2))
        frontier = np.vstack([axis1, axis2])
    else:
        pos = d1[d1 > 0]
        star = frontier_delta2(chi_hat, Delta_hat, pos)
        keep = (star >= delta2_range[0]) & (star <= delta2_range[1])
        frontier = np.column_stack([pos[keep], star[keep]])
    return SensitivitySurface(float(chi_hat), float(Delta_hat), d1, d2, surface, frontier)
