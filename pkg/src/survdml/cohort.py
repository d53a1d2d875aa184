"""Data model for right-censored, optionally competing-risks, observational samples.

A cohort holds one record per subject: covariates, a binary treatment
indicator, the observed follow-up time, and an event code where 0 means
censored and codes ``1..j_star`` are failure causes.  Counting-process
views (at-risk indicator and event/censoring increments) are derived on
the grid of distinct observed times.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

__all__ = ["ObservedUnit", "Cohort", "CountingView", "load_cohort",
           "counting_view", "make_cohort"]

RESERVED_COLUMNS = ("time", "event", "treat")


class CohortError(ValueError):
    """Raised when a sample violates the cohort contract."""


@dataclass(frozen=True)
class ObservedUnit:
    """One subject: covariates, treatment, follow-up time, event code."""

    covariates: np.ndarray
    treat: int
    time: float
    cause: int


@dataclass(frozen=True)
class Cohort:
    """An i.i.d. right-censored sample stored column-wise.

    Attributes
    ----------
    x : ndarray (n, d)
    treat : ndarray (n,) of 0/1
    time : ndarray (n,) of positive floats
    cause : ndarray (n,) of ints in ``0..j_star`` (0 = censored)
    j_star : int
        Number of competing causes (max observed event code).
    grid : ndarray
        Sorted distinct observed times.
    """

    x: np.ndarray
    treat: np.ndarray
    time: np.ndarray
    cause: np.ndarray
    j_star: int = field(init=False)
    grid: np.ndarray = field(init=False)

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        treat = np.asarray(self.treat, dtype=int)
        time = np.asarray(self.time, dtype=float)
        cause = np.asarray(self.cause, dtype=int)
        n = time.shape[0]
        if x.shape[0] != n or treat.shape[0] != n or cause.shape[0] != n:
            raise CohortError("column lengths disagree")
        if not np.all(np.isfinite(x)):
            raise CohortError("covariates contain non-finite values")
        if np.any(time <= 0) or not np.all(np.isfinite(time)):
            raise CohortError("non-positive time")
        if np.any((treat != 0) & (treat != 1)):
            raise CohortError("treatment indicator outside {0, 1}")
        if np.any(cause < 0):
            raise CohortError("negative event code")
        j_star = int(cause.max(initial=0))
        if j_star == 0:
            raise CohortError("no events observed in the sample")
        for arm in (0, 1):
            if not np.any(treat == arm):
                raise CohortError(f"empty arm: no units with treat={arm}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "treat", treat)
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "cause", cause)
        object.__setattr__(self, "j_star", j_star)
        object.__setattr__(self, "grid", np.unique(time))

    @property
    def n(self) -> int:
        return self.time.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def units(self) -> list[ObservedUnit]:
        return [ObservedUnit(self.x[i], int(self.treat[i]), float(self.time[i]),
                             int(self.cause[i])) for i in range(self.n)]

    def subset(self, idx: np.ndarray) -> "Cohort":
        """Cohort restricted to the given unit indices (order preserved)."""
        return Cohort(self.x[idx], self.treat[idx], self.time[idx], self.cause[idx])

    def to_frame(self, covariate_names: list[str] | None = None) -> pd.DataFrame:
        names = covariate_names or [f"x{k + 1}" for k in range(self.d)]
        data = {"time": self.time, "event": self.cause, "treat": self.treat}
        for k, name in enumerate(names):
            data[name] = self.x[:, k]
        return pd.DataFrame(data)

    def save(self, path) -> None:
        self.to_frame().to_csv(path, index=False)


@dataclass(frozen=True)
class CountingView:
    """Counting-process indicators for one unit at one grid time."""

    at_risk: int
    d_event: int
    d_cause: tuple[int, ...]
    d_censor: int


def make_cohort(x, treat, time, cause) -> Cohort:
    """Build a validated cohort from columns."""
    return Cohort(np.asarray(x, dtype=float), treat, time, cause)


def load_cohort(path, schema: dict[str, str] | None = None) -> Cohort:
    """Read a cohort from CSV.

    The expected layout is a header row with columns ``time`` (float),
    ``event`` (int >= 0, 0 = censored), ``treat`` (0/1), and all remaining
    numeric columns taken as covariates in order.  ``schema`` may remap the
    three reserved names, e.g. ``{"time": "followup_years"}``.  Missing
    values abort ingestion.
    """
    path = Path(path)
    if not path.exists():
        raise CohortError(f"no such file: {path}")
    frame = pd.read_csv(path, comment="#")
    mapping = {name: name for name in RESERVED_COLUMNS}
    if schema:
        mapping.update(schema)
    for logical, column in mapping.items():
        if column not in frame.columns:
            raise CohortError(f"missing column {column!r} (for {logical!r})")
    covariate_cols = [c for c in frame.columns if c not in set(mapping.values())]
    if not covariate_cols:
        raise CohortError("no covariate columns found")
    if frame.isna().any().any():
        raise CohortError("missing values are not supported")
    try:
        x = frame[covariate_cols].to_numpy(dtype=float)
        time = frame[mapping["time"]].to_numpy(dtype=float)
        treat = frame[mapping["treat"]].to_numpy(dtype=float)
        cause = frame[mapping["event"]].to_numpy(dtype=float)
    except (TypeError, ValueError) as exc:
        raise CohortError(f"numeric parse failed: {exc}") from exc
    if np.any(treat != np.round(treat)) or np.any(cause != np.round(cause)):
        raise CohortError("event and treat columns must be integers")
    return Cohort(x, treat.astype(int), time, cause.astype(int))


def counting_view(cohort: Cohort, unit: int, t: float) -> CountingView:
    """At-risk and increment indicators for one unit at a grid time."""
    if t not in cohort.grid:
        raise CohortError(f"time {t} is not on the cohort grid")
    time = float(cohort.time[unit])
    cause = int(cohort.cause[unit])
    at_risk = int(time >= t)
    is_jump = time == t
    d_event = int(is_jump and cause > 0)
    d_censor = int(is_jump and cause == 0)
    d_cause = tuple(int(is_jump and cause == j)
                    for j in range(1, cohort.j_star + 1))
    return CountingView(at_risk, d_event, d_cause, d_censor)
