"""Pointwise confidence intervals and simultaneous confidence bands.

Bands are built by multiplier perturbation: centered influence values,
standardised by the monotone standard-deviation curve, are weighted with
independent standard-normal draws to simulate sample paths of the limiting
process; the band critical value is the empirical quantile of the path
suprema over the requested time window.  The explicit standardised
covariance matrix is available as a cross-check only -- it can fail to be
positive semidefinite, which is why path generation never uses it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .dml import DmlResult

__all__ = ["BandSpec", "BandResult", "wald_ci", "select_band_range",
           "multiplier_band", "standardized_covariance"]

MIN_PATHS = 1000


@dataclass(frozen=True)
class BandSpec:
    """Simultaneous-band configuration."""

    alpha: float = 0.05
    n_paths: int = 10_000
    seed: int = 0
    tau_lower: float | None = None
    tau_upper: float | None = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.n_paths < MIN_PATHS:
            raise ValueError(f"at least {MIN_PATHS} multiplier paths are required")


@dataclass
class BandResult:
    key: object
    alpha: float
    c_alpha: float
    tau_lower: float
    tau_upper: float
    taus: np.ndarray        # grid points inside the band window
    band_lo: np.ndarray
    band_hi: np.ndarray
    ci_lo: np.ndarray       # pointwise intervals on the full grid
    ci_hi: np.ndarray
    full_taus: np.ndarray


def wald_ci(curve, alpha: float = 0.05, key="contrast"):
    """Symmetric normal intervals around the shape-corrected estimate."""
    z = norm.ppf(1.0 - alpha / 2.0)
    center = curve.corrected[key]
    half = z * curve.se[key]
    return center - half, center + half


def select_band_range(curve, key="contrast", tau_upper: float | None = None):
    """Window on which the standardised paths are well defined.

    The lower end is the first grid time with a positive monotone standard
    deviation; the upper end defaults to the last grid time.
    """
    positive = np.nonzero(curve.sigma_plus[key] > 0)[0]
    if positive.size == 0:
        raise ValueError("standard errors are zero everywhere; no band range")
    tau_l = float(curve.taus[positive[0]])
    tau_u = float(curve.taus[-1]) if tau_upper is None else float(tau_upper)
    if tau_u < tau_l:
        raise ValueError("band upper end precedes the first positive-variance time")
    return tau_l, tau_u


def _path_suprema(std_eif: np.ndarray, n_paths: int, seed: int,
                  chunk: int = 256) -> np.ndarray:
    n = std_eif.shape[0]
    sups = np.empty(n_paths)
    done = 0
    while done < n_paths:
        size = min(chunk, n_paths - done)
        xi = np.empty((size, n))
        for b in range(size):
            ss = np.random.SeedSequence(entropy=seed, spawn_key=(done + b,))
            xi[b] = np.random.default_rng(ss).standard_normal(n)
        paths = xi @ std_eif / np.sqrt(n)
        sups[done:done + size] = np.max(np.abs(paths), axis=1)
        done += size
    return sups


def multiplier_band(result: DmlResult, spec: BandSpec, key="contrast") -> BandResult:
    """Increasing-width simultaneous band from multiplier sample paths.

    Paths are reproducible regardless of execution order: the multiplier
    vector of path ``b`` comes from an RNG stream keyed by ``(seed, b)``.
    """
    curve = result.curve
    tau_l, tau_u = select_band_range(curve, key, spec.tau_upper)
    if spec.tau_lower is not None:
        if spec.tau_lower < tau_l:
            raise ValueError("requested band start has zero standard error")
        tau_l = float(spec.tau_lower)
    taus = curve.taus
    window = (taus >= tau_l) & (taus <= tau_u)
    sigma_plus = curve.sigma_plus[key][window]
    centered = result.eif.centered(key, curve.corrected[key])[:, window]
    sups = _path_suprema(centered / sigma_plus[None, :], spec.n_paths, spec.seed)
    c_alpha = float(np.quantile(sups, 1.0 - spec.alpha))
    half = c_alpha * curve.se[key][window]
    ci_lo, ci_hi = wald_ci(curve, spec.alpha, key)
    return BandResult(
        key=key, alpha=spec.alpha, c_alpha=c_alpha,
        tau_lower=tau_l, tau_upper=tau_u, taus=taus[window],
        band_lo=curve.corrected[key][window] - half,
        band_hi=curve.corrected[key][window] + half,
        ci_lo=ci_lo, ci_hi=ci_hi, full_taus=taus)


def standardized_covariance(result: DmlResult, key="contrast",
                            tau_upper: float | None = None):
    """Standardised covariance of the centered influence values (cross-check).

    Returns the matrix over the band window and its minimum eigenvalue;
    a negative eigenvalue demonstrates why the band uses multiplier paths
    instead of sampling from this covariance.
    """
    curve = result.curve
    tau_l, tau_u = select_band_range(curve, key, tau_upper)
    window = (curve.taus >= tau_l) & (curve.taus <= tau_u)
    centered = result.eif.centered(key, curve.corrected[key])[:, window]
    sigma_plus = curve.sigma_plus[key][window]
    cov = centered.T @ centered / centered.shape[0]
    std = cov / np.outer(sigma_plus, sigma_plus)
    return std, float(np.linalg.eigvalsh(std).min())
