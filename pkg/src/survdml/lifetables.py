"""Deterministic transforms between cumulative hazards and survival-type curves.

All time-to-event quantities downstream (survival functions, censoring
survival, cause-specific cumulative incidence, restricted means) are carried
as right-continuous step functions on a shared time grid and derived from
cumulative hazards.  Integrals are exact rectangle sums on the grid, never
quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "StepFunction",
    "cumhaz_to_survival",
    "survival_to_rmst",
    "cif_from_hazards",
    "cif_to_rmtl",
    "stieltjes_integrate",
    "rectangle_cumulative_integral",
    "left_shift",
]


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous piecewise-constant function on a sorted time grid.

    Parameters
    ----------
    grid : ndarray of shape (m,)
        Strictly increasing positive times.
    values : ndarray of shape (m,)
        Function value on ``[grid[q], grid[q+1])``.
    init : float
        Value on ``[0, grid[0])`` -- 1 for survival-type curves, 0 for
        cumulative-type curves.
    """

    grid: np.ndarray
    values: np.ndarray
    init: float

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or values.shape != grid.shape:
            raise ValueError("grid and values must be 1-d arrays of equal length")
        if grid.size and np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __call__(self, t):
        """Evaluate at ``t`` (scalar or array), right-continuously."""
        idx = np.searchsorted(self.grid, t, side="right") - 1
        padded = np.concatenate([[self.init], self.values])
        return padded[np.asarray(idx) + 1] if np.ndim(t) else padded[idx + 1]

    def left_limit(self, t):
        """Evaluate at ``t-``: the value at the previous grid point."""
        idx = np.searchsorted(self.grid, t, side="left") - 1
        padded = np.concatenate([[self.init], self.values])
        return padded[np.asarray(idx) + 1] if np.ndim(t) else padded[idx + 1]

    def increments(self) -> np.ndarray:
        """Jump sizes at grid points: value minus the left limit."""
        if self.grid.size == 0:
            return np.empty(0)
        return np.diff(self.values, prepend=self.init)

    def integrate(self, upto: float) -> float:
        """Exact rectangle integral over ``[0, upto]``."""
        if upto <= 0:
            raise ValueError("integration endpoint must be positive")
        lefts = np.concatenate([[0.0], self.grid])
        vals = np.concatenate([[self.init], self.values])
        rights = np.concatenate([self.grid, [np.inf]])
        widths = np.minimum(rights, upto) - np.minimum(lefts, upto)
        return float(np.sum(vals * widths))


def left_shift(values: np.ndarray, init: float) -> np.ndarray:
    """Left-limit values at grid points, by index shift (works on the last axis)."""
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    out[..., 0] = init
    out[..., 1:] = values[..., :-1]
    return out


def rectangle_cumulative_integral(grid: np.ndarray, values: np.ndarray,
                                  init: float) -> np.ndarray:
    """Cumulative ``int_0^{grid[q]}`` of a step function, at every grid point.

    ``values`` may be a matrix with curves on the last axis; the grid is
    shared.  Returns an array of the same shape.
    """
    grid = np.asarray(grid, dtype=float)
    widths = np.diff(grid, prepend=0.0)
    lagged = left_shift(np.asarray(values, dtype=float), init)
    return np.cumsum(lagged * widths, axis=-1)


def cumhaz_to_survival(cumhaz: StepFunction, mode: str = "product-limit") -> StepFunction:
    """Survival curve from a cumulative hazard.

    ``exp`` mode returns ``exp(-H)``; ``product-limit`` returns the product
    of ``1 - dH`` over grid jumps, which keeps survival exactly consistent
    with discrete hazard increments (required when the hazard was fitted on
    a discrete grid).
    """
    inc = cumhaz.increments()
    if cumhaz.init != 0.0:
        raise ValueError("cumulative hazard must start at 0")
    if np.any(inc < -1e-12):
        raise ValueError("cumulative hazard must be nondecreasing")
    if mode == "exp":
        vals = np.exp(-cumhaz.values)
    elif mode == "product-limit":
        if np.any(inc > 1.0 + 1e-12):
            raise ValueError("product-limit mode requires hazard increments <= 1")
        vals = np.cumprod(1.0 - np.clip(inc, 0.0, 1.0))
    else:
        raise ValueError(f"unknown survival mode {mode!r}")
    return StepFunction(cumhaz.grid, vals, init=1.0)


def survival_to_rmst(surv: StepFunction, tau: float) -> float:
    """Restricted mean survival time: exact integral of the curve to ``tau``."""
    if tau <= 0:
        raise ValueError("restriction time must be positive")
    if np.any(surv.values < -1e-12) or np.any(surv.values > 1 + 1e-12):
        raise ValueError("survival values must lie in [0, 1]")
    if np.any(np.diff(np.concatenate([[surv.init], surv.values])) > 1e-12):
        raise ValueError("survival curve must be nonincreasing")
    return surv.integrate(tau)


def cif_from_hazards(cause_cumhaz: StepFunction, surv_allcause: StepFunction) -> StepFunction:
    """Cumulative incidence of one cause: ``F(t) = sum_{u<=t} S(u-) dH_cause(u)``."""
    if cause_cumhaz.grid.shape != surv_allcause.grid.shape or np.any(
            cause_cumhaz.grid != surv_allcause.grid):
        raise ValueError("cause hazard and survival must share one grid")
    inc = cause_cumhaz.increments()
    if np.any(inc < -1e-12):
        raise ValueError("cause hazard must be nondecreasing")
    surv_left = left_shift(surv_allcause.values, surv_allcause.init)
    return StepFunction(cause_cumhaz.grid, np.cumsum(surv_left * inc), init=0.0)


def cif_to_rmtl(cif: StepFunction, tau: float) -> float:
    """Restricted mean time lost to one cause: integral of its CIF to ``tau``."""
    if tau <= 0:
        raise ValueError("restriction time must be positive")
    if np.any(np.diff(np.concatenate([[cif.init], cif.values])) < -1e-12):
        raise ValueError("cumulative incidence must be nondecreasing")
    return cif.integrate(tau)


def stieltjes_integrate(integrand: StepFunction, measure: StepFunction,
                        upper: float, side: str = "right") -> float:
    """Sum of ``integrand(u) * dMeasure(u)`` over grid points ``u <= upper``.

    ``side`` selects whether the integrand enters at ``u`` ("right") or at
    its left limit ``u-`` ("left"), the two conventions appearing in the
    censoring-martingale integrals.
    """
    if integrand.grid.shape != measure.grid.shape or np.any(
            integrand.grid != measure.grid):
        raise ValueError("integrand and measure must share one grid")
    if side == "right":
        f = integrand.values
    elif side == "left":
        f = left_shift(integrand.values, integrand.init)
    else:
        raise ValueError(f"unknown evaluation side {side!r}")
    mask = integrand.grid <= upper
    return float(np.sum(f[mask] * measure.increments()[mask]))
