"""Classical benchmark estimators: outcome regression, IPCW, doubly robust.

These estimate the whole weighted survival curve (or cause-specific
cumulative incidence curve) from full-sample nuisance fits without
cross-fitting, apply a monotone correction (cumulative minimum for
survival, cumulative maximum for incidence) and clipping to [0, 1], and
integrate the corrected curves to restricted means.  Standard errors come
from a nonparametric bootstrap that refits the nuisances on every
resample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cohort import Cohort
from .crossfit import NuisanceSpecs, _fit_one
from .learners import survival_from_cumhaz
from .lifetables import left_shift, rectangle_cumulative_integral
from .tilting import TiltKind, balancing_weights

__all__ = ["ComparatorKind", "FullSampleNuisances", "ComparatorResult",
           "fit_full_nuisances", "estimate_curve", "winsorize_weights",
           "bootstrap_se"]

KINDS = ("or", "ipcw", "ipcw-cc", "dr")


class ComparatorError(ValueError):
    pass


@dataclass(frozen=True)
class ComparatorKind:
    """Estimator family, target curve, and optional weight Winsorization."""

    kind: str
    target: str = "survival"          # "survival" or "cif"
    winsorize_q: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ComparatorError(f"unknown comparator {self.kind!r}")
        if self.target not in ("survival", "cif"):
            raise ComparatorError(f"unknown target {self.target!r}")
        if self.winsorize_q is not None and not 0.5 < self.winsorize_q < 1:
            raise ComparatorError("winsorize quantile must lie in (0.5, 1)")


@dataclass
class FullSampleNuisances:
    """Nuisance predictions for every unit on one grid (no cross-fitting)."""

    grid: np.ndarray
    pi1: np.ndarray
    surv: tuple
    cens: tuple
    cumhaz_cens: tuple
    cif: tuple | None = None


@dataclass
class ComparatorResult:
    kind: ComparatorKind
    estimand: TiltKind
    grid: np.ndarray
    curves: dict            # corrected curve per key (0, 1, "contrast")
    raw_curves: dict
    taus: np.ndarray
    estimates: dict         # integrated restricted means per key, at taus
    raw_estimates: dict


def fit_full_nuisances(cohort: Cohort, specs: NuisanceSpecs, grid,
                       cause: int | None = None, eps: float | None = None,
                       seed: int = 0) -> FullSampleNuisances:
    """Fit nuisances on the whole sample and evaluate them for every unit.

    Without ``eps`` no truncation is applied (the classical estimators run
    on raw weights); ingestion fails only if a propensity or censoring
    survival value reaches zero.
    """
    grid = np.asarray(grid, dtype=float)
    prop = _fit_one("propensity", specs.propensity, cohort.x, cohort.treat,
                    seed=seed)
    pi1 = prop.predict(cohort.x)
    surv, cens, cumhaz_cens, cif = [], [], [], []
    for arm in (0, 1):
        sel = cohort.treat == arm
        x_arm, t_arm, c_arm = cohort.x[sel], cohort.time[sel], cohort.cause[sel]
        event_model = _fit_one("hazard", specs.event, x_arm, t_arm, c_arm > 0,
                               seed=seed + 1 + arm)
        censor_model = _fit_one("hazard", specs.censoring_or_event(), x_arm,
                                t_arm, c_arm == 0, seed=seed + 3 + arm)
        cumhaz = event_model.predict_cumhaz(cohort.x, grid)
        s_raw = survival_from_cumhaz(cumhaz, event_model.survival_mode)
        cumhaz_c = censor_model.predict_cumhaz(cohort.x, grid)
        g_raw = survival_from_cumhaz(cumhaz_c, censor_model.survival_mode)
        if cause is not None:
            if cohort.j_star == 1 and cause == 1:
                cumhaz_j = cumhaz
            else:
                cause_model = _fit_one("hazard", specs.cause_or_event(), x_arm,
                                       t_arm, c_arm == cause, seed=seed + 5 + arm)
                cumhaz_j = cause_model.predict_cumhaz(cohort.x, grid)
            inc = np.diff(cumhaz_j, prepend=0.0, axis=1)
            cif.append(np.cumsum(left_shift(s_raw, 1.0) * np.maximum(inc, 0), axis=1))
        surv.append(s_raw)
        cens.append(g_raw)
        cumhaz_cens.append(cumhaz_c)
    nuis = FullSampleNuisances(grid=grid, pi1=pi1, surv=tuple(surv),
                               cens=tuple(cens), cumhaz_cens=tuple(cumhaz_cens),
                               cif=tuple(cif) if cause is not None else None)
    if eps is not None:
        lo = 1.0 / eps
        nuis.pi1 = np.clip(nuis.pi1, lo, 1 - lo)
        nuis.surv = tuple(np.maximum(s, lo) for s in nuis.surv)
        nuis.cens = tuple(np.maximum(g, lo) for g in nuis.cens)
    else:
        floor = 1e-12
        if np.min(nuis.pi1) <= floor or min(g.min() for g in nuis.cens) <= floor:
            raise ComparatorError(
                "propensity or censoring survival hit zero; enable truncation")
    return nuis


def winsorize_weights(weights: np.ndarray, q: float) -> np.ndarray:
    """Cap weights at their empirical q-quantile."""
    if not 0.5 < q < 1:
        raise ComparatorError("winsorize quantile must lie in (0.5, 1)")
    weights = np.asarray(weights, dtype=float)
    return np.minimum(weights, np.quantile(weights, q))


def _martingale_pieces(cohort, nuis, arm):
    grid = nuis.grid
    m = grid.size
    time, ev = cohort.time, cohort.cause
    in_followup = grid[None, :] <= time[:, None]
    d_cumhaz_c = np.diff(nuis.cumhaz_cens[arm], prepend=0.0, axis=1)
    base = -d_cumhaz_c * in_followup
    pos = np.searchsorted(grid, time)
    on_grid = (pos < m) & (grid[np.minimum(pos, m - 1)] == time)
    rows = np.nonzero(on_grid & (ev == 0))[0]
    base[rows, pos[rows]] += 1.0
    g_left = left_shift(nuis.cens[arm], 1.0)
    g_at_time = g_left[np.arange(cohort.n), np.minimum(pos, m - 1)]
    return base, g_left, g_at_time, on_grid, in_followup


def _arm_curve(kind: ComparatorKind, cohort, nuis, bw, arm, cause):
    """Uncorrected weighted curve for one arm on the nuisance grid."""
    h, w = bw.h, bw.w
    if kind.winsorize_q is not None:
        w = w.copy()
        nz = w > 0
        w[nz] = winsorize_weights(w[nz], kind.winsorize_q)
    outcome = nuis.surv[arm] if kind.target == "survival" else nuis.cif[arm]
    or_curve = (h[:, None] * outcome).mean(axis=0) / h.mean()
    if kind.kind == "or":
        return or_curve
    grid = nuis.grid
    time, ev = cohort.time, cohort.cause
    w_mean = w.mean()
    if kind.target == "survival":
        alive = (time[:, None] > grid[None, :]).astype(float)
        if kind.kind == "ipcw":
            est = (w[:, None] * alive / nuis.cens[arm]).mean(axis=0) / w_mean
        elif kind.kind == "ipcw-cc":
            base, g_left, g_at_time, on_grid, _ = _martingale_pieces(cohort, nuis, arm)
            delta = ((ev > 0) & on_grid).astype(float)
            est = (w * delta / g_at_time)[:, None] * alive
            est = est.mean(axis=0) / w_mean
        else:  # dr
            base, g_left, g_at_time, on_grid, _ = _martingale_pieces(cohort, nuis, arm)
            surv = nuis.surv[arm]
            aug = np.cumsum(base / (surv * g_left), axis=1)
            inner = alive / nuis.cens[arm] - surv + surv * aug
            est = or_curve + (w[:, None] * inner).mean(axis=0) / w_mean
        return est
    # cause-specific cumulative incidence
    cif = nuis.cif[arm]
    base, g_left, g_at_time, on_grid, _ = _martingale_pieces(cohort, nuis, arm)
    failed_j = ((ev == cause) & on_grid)[:, None] & (
        time[:, None] <= grid[None, :])
    ipcw_term = failed_j / g_at_time[:, None]
    if kind.kind in ("ipcw", "ipcw-cc"):
        est = (w[:, None] * ipcw_term).mean(axis=0) / w_mean
    else:
        surv = nuis.surv[arm]
        v = base / (surv * g_left)
        aug = np.cumsum(v, axis=1)
        inner = ipcw_term - cif + cif * aug - np.cumsum(cif * v, axis=1)
        est = or_curve + (w[:, None] * inner).mean(axis=0) / w_mean
    return est


def estimate_curve(kind: ComparatorKind, cohort: Cohort,
                   nuis: FullSampleNuisances, estimand, taus,
                   cause: int = 1) -> ComparatorResult:
    """Weighted curve per arm with monotone correction, plus restricted means.

    Survival curves are corrected by a cumulative minimum, incidence curves
    by a cumulative maximum, both clipped to [0, 1]; the contrast and the
    integrated restricted means use the corrected curves.
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    grid = nuis.grid
    cols = np.searchsorted(grid, taus)
    if np.any(cols >= grid.size) or np.any(grid[cols] != taus):
        raise ComparatorError("requested taus must be on the nuisance grid")
    raw_curves, curves = {}, {}
    for arm in (0, 1):
        bw = balancing_weights(estimand, np.clip(nuis.pi1, 1e-12, 1 - 1e-12),
                               cohort.treat, arm)
        raw = _arm_curve(kind, cohort, nuis, bw, arm)
        if kind.target == "survival":
            corrected = np.clip(np.minimum.accumulate(raw), 0.0, 1.0)
        else:
            corrected = np.clip(np.maximum.accumulate(raw), 0.0, 1.0)
        raw_curves[arm], curves[arm] = raw, corrected
    raw_curves["contrast"] = raw_curves[1] - raw_curves[0]
    curves["contrast"] = curves[1] - curves[0]
    init = 1.0 if kind.target == "survival" else 0.0
    estimates, raw_estimates = {}, {}
    for key in (0, 1, "contrast"):
        key_init = init if key != "contrast" else 0.0
        cum = rectangle_cumulative_integral(grid, curves[key], init=key_init)
        cum_raw = rectangle_cumulative_integral(grid, raw_curves[key], init=key_init)
        estimates[key] = cum[cols]
        raw_estimates[key] = cum_raw[cols]
    return ComparatorResult(kind=kind, estimand=TiltKind(estimand), grid=grid,
                            curves=curves, raw_curves=raw_curves, taus=taus,
                            estimates=estimates, raw_estimates=raw_estimates)


def _quantile_grid(cohort, tau_max, size):
    times = np.unique(cohort.time[cohort.time <= tau_max])
    if size is None or times.size <= size:
        grid = times
    else:
        grid = np.unique(np.quantile(times, np.linspace(0, 1, size)))
    return np.unique(np.concatenate([grid, [tau_max]]))


def bootstrap_se(kind: ComparatorKind, cohort: Cohort, specs: NuisanceSpecs,
                 estimand, taus, n_boot: int, seed: int, cause: int = 1,
                 eps: float | None = None, grid_size: int | None = None):
    """Nonparametric bootstrap standard errors of the restricted means.

    Nuisances are refit on every resample.  Resamples that lose a whole
    treatment arm (or all events) are redrawn, at most ten times each.
    ``grid_size`` coarsens the integration grid of the refits (quantile
    subsampling) to bound the cost; ``None`` uses all observed times.
    """
    if n_boot < 200:
        raise ComparatorError("at least 200 bootstrap resamples are required")
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    rng_root = np.random.SeedSequence(seed)
    estimates = {key: np.empty((n_boot, taus.size)) for key in (0, 1, "contrast")}
    for b in range(n_boot):
        rng = np.random.default_rng(np.random.SeedSequence(
            entropy=seed, spawn_key=(b,)))
        for attempt in range(10):
            idx = rng.integers(0, cohort.n, size=cohort.n)
            treat, ev = cohort.treat[idx], cohort.cause[idx]
            if len(np.unique(treat)) == 2 and np.any(ev > 0):
                break
        else:
            raise ComparatorError(f"resample {b}: could not draw both arms")
        sample = cohort.subset(idx)
        grid = _quantile_grid(sample, float(taus.max()), grid_size)
        grid = np.unique(np.concatenate([grid, taus]))
        nuis = fit_full_nuisances(sample, specs, grid, cause=cause, eps=eps,
                                  seed=seed)
        result = estimate_curve(kind, sample, nuis, estimand, taus, cause=cause)
        for key in estimates:
            estimates[key][b] = result.estimates[key]
    return {key: np.std(vals, axis=0, ddof=1) for key, vals in estimates.items()}
