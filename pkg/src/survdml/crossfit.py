"""Cross-fitting: sample-splitting plans and held-out nuisance evaluation.

Units are split into K disjoint validation folds.  For each fold, the
propensity model is trained on the complement and the time-to-event models
are trained on the complement's treated and control subsets separately;
all models are then evaluated for the held-out units on the fold's
evaluation grid (the fold's distinct observed times, optionally augmented
with requested output times).  Propensities are truncated and the survival
and censoring-survival matrices floored at 1/eps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cohort import Cohort
from .learners import (LearnerSpec, LearnerError, fit_hazard, fit_propensity,
                       stack_hazard, stack_propensity, survival_from_cumhaz)
from .lifetables import left_shift

__all__ = ["CrossFitPlan", "NuisanceSpecs", "FoldNuisances", "FittedNuisances",
           "make_plan", "cross_fit"]


class CrossFitError(ValueError):
    pass


@dataclass(frozen=True)
class CrossFitPlan:
    """Disjoint validation folds covering all units."""

    n_folds: int
    fold_of: np.ndarray
    seed: int

    def validation_indices(self, k: int) -> np.ndarray:
        return np.nonzero(self.fold_of == k)[0]

    def training_indices(self, k: int) -> np.ndarray:
        return np.nonzero(self.fold_of != k)[0]


@dataclass(frozen=True)
class NuisanceSpecs:
    """Learner choices per nuisance; lists are stacked by inner CV."""

    propensity: LearnerSpec | list = field(
        default_factory=lambda: LearnerSpec("logistic"))
    event: LearnerSpec | list = field(
        default_factory=lambda: LearnerSpec("cox-breslow"))
    censoring: LearnerSpec | list | None = None
    cause: LearnerSpec | list | None = None

    def censoring_or_event(self):
        return self.censoring if self.censoring is not None else self.event

    def cause_or_event(self):
        return self.cause if self.cause is not None else self.event


@dataclass
class FoldNuisances:
    """Held-out nuisance evaluations for one fold, on its evaluation grid.

    Matrices are indexed (held-out unit, grid time); ``surv`` / ``cens`` /
    ``cumhaz_cens`` / ``cif`` are pairs indexed by arm.
    """

    fold_id: int
    unit_idx: np.ndarray
    grid: np.ndarray
    pi1: np.ndarray
    surv: tuple
    cens: tuple
    cumhaz_cens: tuple
    cif: tuple | None = None


@dataclass
class FittedNuisances:
    folds: list
    eps: float
    cause: int | None
    pi_truncated: int = 0
    surv_floored: int = 0
    cens_floored: int = 0

    @property
    def n_folds(self) -> int:
        return len(self.folds)


def make_plan(cohort: Cohort, n_folds: int, seed: int) -> CrossFitPlan:
    """Randomly split units into near-equal validation folds.

    Every fold's training complement must contain both treatment arms and
    at least one event of every cause.
    """
    n = cohort.n
    if not 2 <= n_folds <= n // 2:
        raise CrossFitError(f"K out of range: need 2 <= K <= {n // 2}, got {n_folds}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    sizes = np.diff(np.linspace(0, n, n_folds + 1).astype(int))
    fold_of = np.repeat(np.arange(n_folds), sizes)[rng.permutation(n)]
    plan = CrossFitPlan(n_folds, fold_of, seed)
    for k in range(n_folds):
        train = plan.training_indices(k)
        for arm in (0, 1):
            if not np.any(cohort.treat[train] == arm):
                raise CrossFitError(f"fold {k}: arm {arm} missing in training set")
        for j in range(1, cohort.j_star + 1):
            if not np.any(cohort.cause[train] == j):
                raise CrossFitError(f"fold {k}: no cause-{j} events in training set")
    return plan


def _fit_one(kind: str, specs, x, *args, seed=0):
    if isinstance(specs, LearnerSpec):
        specs = [specs]
    if kind == "propensity":
        if len(specs) == 1:
            return fit_propensity(x, args[0], specs[0])
        return stack_propensity(x, args[0], specs, seed=seed)
    if len(specs) == 1:
        return fit_hazard(x, args[0], args[1], specs[0])
    return stack_hazard(x, args[0], args[1], specs, seed=seed)


def _fold_grid(cohort, val_idx, extra_times, max_time):
    times = cohort.time[val_idx]
    if max_time is not None:
        times = times[times <= max_time]
    pieces = [np.unique(times)]
    if extra_times is not None:
        pieces.append(np.asarray(extra_times, dtype=float))
    grid = np.unique(np.concatenate(pieces))
    if grid.size == 0 or grid[0] <= 0:
        raise CrossFitError("evaluation grid must contain positive times")
    return grid


def cross_fit(cohort: Cohort, plan: CrossFitPlan, specs: NuisanceSpecs,
              eps: float = 50.0, extra_times=None, max_time=None,
              cause: int | None = None) -> FittedNuisances:
    """Train out-of-fold and evaluate held-out nuisances on fold grids.

    ``eps`` enforces the positivity floor: propensities are truncated to
    ``[1/eps, 1 - 1/eps]`` and survival-type matrices floored at ``1/eps``.
    ``cause`` requests cause-specific hazards and incidence curves; when
    the cohort has a single failure cause that model is shared with the
    all-cause fit.
    """
    if eps <= 1:
        raise CrossFitError("eps must exceed 1")
    fitted = FittedNuisances(folds=[], eps=float(eps), cause=cause)
    lo = 1.0 / eps
    for k in range(plan.n_folds):
        val_idx = plan.validation_indices(k)
        train_idx = plan.training_indices(k)
        grid = _fold_grid(cohort, val_idx, extra_times, max_time)
        try:
            fold = _fit_fold(cohort, k, train_idx, val_idx, grid, specs,
                             cause, plan.seed)
        except LearnerError as exc:
            raise CrossFitError(f"fold {k}: {exc}") from exc
        fitted.pi_truncated += int(np.sum((fold.pi1 < lo) | (fold.pi1 > 1 - lo)))
        fold.pi1 = np.clip(fold.pi1, lo, 1.0 - lo)
        surv, cens = [], []
        for arm in (0, 1):
            s, g = fold.surv[arm], fold.cens[arm]
            fitted.surv_floored += int(np.sum(s < lo))
            fitted.cens_floored += int(np.sum(g < lo))
            surv.append(np.maximum(s, lo))
            cens.append(np.maximum(g, lo))
        fold.surv, fold.cens = tuple(surv), tuple(cens)
        fitted.folds.append(fold)
    return fitted


def _fit_fold(cohort, k, train_idx, val_idx, grid, specs, cause, seed):
    x_train, x_val = cohort.x[train_idx], cohort.x[val_idx]
    a_train = cohort.treat[train_idx]
    prop = _fit_one("propensity", specs.propensity, x_train, a_train,
                    seed=_substream(seed, k, 0))
    pi1 = prop.predict(x_val)

    surv, cens, cumhaz_cens, cif = [], [], [], []
    want_cause = cause is not None
    for arm in (0, 1):
        sel = train_idx[cohort.treat[train_idx] == arm]
        x_arm, t_arm, c_arm = cohort.x[sel], cohort.time[sel], cohort.cause[sel]
        event_model = _fit_one("hazard", specs.event, x_arm, t_arm, c_arm > 0,
                               seed=_substream(seed, k, 10 + arm))
        censor_model = _fit_one("hazard", specs.censoring_or_event(), x_arm,
                                t_arm, c_arm == 0,
                                seed=_substream(seed, k, 20 + arm))
        cumhaz = event_model.predict_cumhaz(x_val, grid)
        s_raw = survival_from_cumhaz(cumhaz, event_model.survival_mode)
        cumhaz_c = censor_model.predict_cumhaz(x_val, grid)
        g_raw = survival_from_cumhaz(cumhaz_c, censor_model.survival_mode)
        surv.append(s_raw)
        cens.append(g_raw)
        cumhaz_cens.append(cumhaz_c)
        if want_cause:
            if cohort.j_star == 1 and cause == 1:
                cumhaz_j = cumhaz
            else:
                cause_model = _fit_one("hazard", specs.cause_or_event(), x_arm,
                                       t_arm, c_arm == cause,
                                       seed=_substream(seed, k, 30 + arm))
                cumhaz_j = cause_model.predict_cumhaz(x_val, grid)
            inc_j = np.diff(cumhaz_j, prepend=0.0, axis=1)
            cif.append(np.cumsum(left_shift(s_raw, 1.0) * np.maximum(inc_j, 0.0),
                                 axis=1))
    return FoldNuisances(
        fold_id=k, unit_idx=val_idx, grid=grid, pi1=pi1,
        surv=tuple(surv), cens=tuple(cens), cumhaz_cens=tuple(cumhaz_cens),
        cif=tuple(cif) if want_cause else None)


def _substream(seed: int, fold: int, slot: int) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(fold, slot))
    return int(ss.generate_state(1)[0])
