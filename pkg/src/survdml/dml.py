"""Cross-fitted one-step estimators of weighted restricted-mean effects.

For each held-out unit the uncentered influence-function plug-in combines
an outcome-model term (tilted conditional restricted mean) with a weighted
bracket: the inverse-probability-of-censoring complete-case term, minus
the conditional restricted mean, plus two censoring-martingale integrals.
Tilt and balancing weights are normalised by fold-level means (ratio form),
fold estimates are size-weighted means of the plug-ins, point estimates are
projected onto concave (restricted mean survival) or convex (restricted
mean time lost) curves, and standard errors come from the centered
plug-ins with a cumulative-maximum monotonisation.

The evaluation is fully vectorised: all integrals are cumulative rectangle
sums on the fold grid, evaluated for every unit and every output time in
one pass, so the four supported estimands share one set of matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .cohort import Cohort
from .crossfit import FittedNuisances, FoldNuisances
from .lifetables import left_shift, rectangle_cumulative_integral
from .tilting import TiltKind, balancing_weights, tilt_value

__all__ = [
    "EifMatrix", "EstimateCurve", "DmlResult",
    "fold_eif_terms", "eif_rmst", "eif_rmtl",
    "fold_estimate", "combine_folds", "lcm_project", "gcm_project",
    "sandwich_se", "estimate_effects", "estimate_all",
]

KEYS = (0, 1, "contrast")


# ---------------------------------------------------------------------------
# Influence-function plug-in terms
# ---------------------------------------------------------------------------

def fold_eif_terms(cohort: Cohort, fold: FoldNuisances, arm: int,
                   target: str = "rmst", cause: int | None = None):
    """Outcome term A and weighted bracket B for one fold and arm.

    Returns matrices of shape (fold units, fold grid) such that the
    uncentered plug-in for tilt values ``h`` and balancing weights ``w`` is
    ``h / mean(h) * A + w / mean(w) * B`` column-wise at every grid time
    taken as the restriction time.
    """
    grid = fold.grid
    m = grid.size
    idx = fold.unit_idx
    time = cohort.time[idx]
    ev_cause = cohort.cause[idx]

    surv = fold.surv[arm]
    cens = fold.cens[arm]
    cumhaz_c = fold.cumhaz_cens[arm]
    cens_left = left_shift(cens, 1.0)

    # censoring-martingale increments, zero beyond each unit's follow-up
    in_followup = grid[None, :] <= time[:, None]
    d_cumhaz_c = np.diff(cumhaz_c, prepend=0.0, axis=1)
    base = -d_cumhaz_c * in_followup
    pos = np.searchsorted(grid, time)
    on_grid = (pos < m) & (grid[np.minimum(pos, m - 1)] == time)
    censored_here = on_grid & (ev_cause == 0)
    rows = np.nonzero(censored_here)[0]
    base[rows, pos[rows]] += 1.0

    denom = surv * cens_left
    v = base / denom
    iv = np.cumsum(v, axis=1)

    # complete-case factor 1/G at each unit's own follow-up left limit
    g_at_time = cens_left[np.arange(len(idx)), np.minimum(pos, m - 1)]
    past = ~in_followup | (grid[None, :] == time[:, None])  # grid time >= T~

    if target == "rmst":
        a_mat = rectangle_cumulative_integral(grid, surv, init=1.0)
        ipcw = np.where(
            past,
            np.where((ev_cause > 0) & on_grid,
                     time / np.maximum(g_at_time, 1e-300), 0.0)[:, None],
            grid[None, :] / cens_left)
        i1 = np.cumsum(grid[None, :] * base / cens_left, axis=1)
        bracket = ipcw - a_mat + i1 + a_mat * iv - np.cumsum(a_mat * v, axis=1)
        return a_mat, bracket

    if target != "rmtl":
        raise ValueError(f"unknown target {target!r}")
    if fold.cif is None:
        raise ValueError("cause-specific nuisances were not cross-fitted")
    cif = fold.cif[arm]
    a_mat = rectangle_cumulative_integral(grid, cif, init=0.0)
    lost = np.maximum(grid[None, :] - time[:, None], 0.0)
    ipcw = np.where((ev_cause == cause) & on_grid,
                    1.0 / np.maximum(g_at_time, 1e-300), 0.0)[:, None] * lost
    cf = np.cumsum(cif * v, axis=1)
    ctf = np.cumsum(grid[None, :] * cif * v, axis=1)
    bracket = (ipcw - a_mat - (grid[None, :] * cf - ctf)
               + a_mat * iv - np.cumsum(a_mat * v, axis=1))
    return a_mat, bracket


def _locate(fold: FoldNuisances, unit: int) -> int:
    where = np.nonzero(fold.unit_idx == unit)[0]
    if where.size == 0:
        raise ValueError(f"unit {unit} is not held out in fold {fold.fold_id}")
    return int(where[0])


def _scalar_eif(cohort, unit, arm, tau, fold, weights, target, cause):
    row = _locate(fold, unit)
    col = np.searchsorted(fold.grid, tau)
    if col >= fold.grid.size or fold.grid[col] != tau:
        raise ValueError(f"tau {tau} is not on the fold grid")
    a_mat, bracket = fold_eif_terms(cohort, fold, arm, target, cause)
    h_bar = float(np.mean(weights.h))
    w_bar = float(np.mean(weights.w))
    return float(weights.h[row] / h_bar * a_mat[row, col]
                 + weights.w[row] / w_bar * bracket[row, col])


def eif_rmst(cohort, unit, arm, tau, fold, weights) -> float:
    """Uncentered restricted-mean-survival plug-in for one held-out unit."""
    return _scalar_eif(cohort, unit, arm, tau, fold, weights, "rmst", None)


def eif_rmtl(cohort, unit, cause, arm, tau, fold, weights) -> float:
    """Uncentered restricted-mean-time-lost plug-in for one held-out unit."""
    return _scalar_eif(cohort, unit, arm, tau, fold, weights, "rmtl", cause)


# ---------------------------------------------------------------------------
# Fold combination and shape corrections
# ---------------------------------------------------------------------------

def fold_estimate(phi_fold: np.ndarray) -> np.ndarray:
    """Per-restriction-time mean of the plug-ins over one fold."""
    return phi_fold.mean(axis=0)


def combine_folds(estimates, sizes) -> np.ndarray:
    """Size-weighted mean of fold estimates."""
    sizes = np.asarray(sizes, dtype=float)
    stacked = np.stack(estimates)
    return (sizes[:, None] * stacked).sum(axis=0) / sizes.sum()


def _hull_project(taus, values, upper: bool) -> np.ndarray:
    x = np.concatenate([[0.0], np.asarray(taus, dtype=float)])
    y = np.concatenate([[0.0], np.asarray(values, dtype=float)])
    sign = 1.0 if upper else -1.0
    hull = [0]
    for i in range(1, len(x)):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o])
            if sign * cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.interp(x, x[hull], y[hull])[1:]


def lcm_project(taus, values) -> np.ndarray:
    """Least concave majorant through the anchor (0, 0), on the grid."""
    return _hull_project(taus, values, upper=True)


def gcm_project(taus, values) -> np.ndarray:
    """Greatest convex minorant through the anchor (0, 0), on the grid."""
    return _hull_project(taus, values, upper=False)


def sandwich_se(centered: np.ndarray):
    """Column-wise root mean square of centered plug-ins, then its running max.

    Returns ``(sigma, sigma_plus)``; the standard error of the estimate is
    ``sigma_plus / sqrt(n)``.
    """
    if centered.shape[0] == 0:
        raise ValueError("no units")
    sigma = np.sqrt(np.mean(centered ** 2, axis=0))
    return sigma, np.maximum.accumulate(sigma)


# ---------------------------------------------------------------------------
# Result containers and the full pipeline
# ---------------------------------------------------------------------------

@dataclass
class EifMatrix:
    """Uncentered plug-in evaluations, one row per unit, one column per tau."""

    taus: np.ndarray
    estimand: TiltKind
    target: str
    cause: int | None
    phi: dict
    fold_of: np.ndarray

    def uncentered(self, key):
        if key == "contrast":
            return self.phi[1] - self.phi[0]
        return self.phi[key]

    def centered(self, key, corrected: np.ndarray):
        return self.uncentered(key) - corrected[None, :]


@dataclass
class EstimateCurve:
    """Point estimates, shape-corrected curves, and monotone standard errors."""

    taus: np.ndarray
    estimand: TiltKind
    target: str
    n: int
    raw: dict
    corrected: dict
    sigma: dict
    sigma_plus: dict
    se: dict

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for key in KEYS:
            label = key if key == "contrast" else str(key)
            for q, tau in enumerate(self.taus):
                rows.append({"tau": tau, "arm": label,
                             "estimate_raw": self.raw[key][q],
                             "estimate_corrected": self.corrected[key][q],
                             "se": self.se[key][q]})
        return pd.DataFrame(rows)


@dataclass
class DmlResult:
    curve: EstimateCurve
    eif: EifMatrix


def estimate_all(cohort: Cohort, nuisances: FittedNuisances, estimands,
                 taus, target: str = "rmst") -> dict:
    """Estimate every requested estimand, sharing one pass of fold matrices.

    ``taus`` must be included in the cross-fit evaluation grids (pass them
    as ``extra_times`` to ``cross_fit``).
    """
    taus = np.asarray(taus, dtype=float)
    estimands = [TiltKind(e) for e in estimands]
    cause = nuisances.cause
    n = cohort.n
    phi = {e: {0: np.empty((n, taus.size)), 1: np.empty((n, taus.size))}
           for e in estimands}
    fold_of = np.empty(n, dtype=int)

    for fold in nuisances.folds:
        idx = fold.unit_idx
        fold_of[idx] = fold.fold_id
        cols = np.searchsorted(fold.grid, taus)
        if np.any(cols >= fold.grid.size) or np.any(fold.grid[cols] != taus):
            raise ValueError("output taus missing from a fold grid; pass them "
                             "as extra_times when cross-fitting")
        treat = cohort.treat[idx]
        for arm in (0, 1):
            a_mat, bracket = fold_eif_terms(cohort, fold, arm, target, cause)
            a_sel, b_sel = a_mat[:, cols], bracket[:, cols]
            for e in estimands:
                bw = balancing_weights(e, fold.pi1, treat, arm)
                h_bar, w_bar = np.mean(bw.h), np.mean(bw.w)
                phi[e][arm][idx] = (bw.h[:, None] / h_bar * a_sel
                                    + bw.w[:, None] / w_bar * b_sel)

    project = lcm_project if target == "rmst" else gcm_project
    out = {}
    for e in estimands:
        eif = EifMatrix(taus=taus, estimand=e, target=target, cause=cause,
                        phi=phi[e], fold_of=fold_of)
        raw = {arm: phi[e][arm].mean(axis=0) for arm in (0, 1)}
        raw["contrast"] = raw[1] - raw[0]
        corrected = {arm: project(taus, raw[arm]) for arm in (0, 1)}
        corrected["contrast"] = corrected[1] - corrected[0]
        sigma, sigma_plus, se = {}, {}, {}
        for key in KEYS:
            sg, sp = sandwich_se(eif.centered(key, corrected[key]))
            sigma[key], sigma_plus[key] = sg, sp
            se[key] = sp / np.sqrt(n)
        curve = EstimateCurve(taus=taus, estimand=e, target=target, n=n,
                              raw=raw, corrected=corrected, sigma=sigma,
                              sigma_plus=sigma_plus, se=se)
        out[e] = DmlResult(curve=curve, eif=eif)
    return out


def estimate_effects(cohort: Cohort, nuisances: FittedNuisances, estimand,
                     taus, target: str = "rmst") -> DmlResult:
    """Single-estimand convenience wrapper around :func:`estimate_all`."""
    return estimate_all(cohort, nuisances, [estimand], taus, target)[TiltKind(estimand)]
