"""Tilting functions and balancing weights that define the target estimand.

The tilting function h(x) reweights the covariate distribution: ATE keeps
everyone (h = 1), ATO emphasises the overlap population (h = pi(1-pi)),
ATM the matched population (h = min(pi, 1-pi)), and ATEN the entropy-
weighted population.  The balancing weight divides h by the propensity of
the received arm.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = ["TiltKind", "BalancingWeight", "tilt_value", "balancing_weights"]


class TiltKind(str, enum.Enum):
    ATE = "ate"
    ATO = "ato"
    ATM = "atm"
    ATEN = "aten"


@dataclass(frozen=True)
class BalancingWeight:
    """Per-unit tilt values h(X) and balancing weights h(X) I(A=a) / pi(a|X)."""

    h: np.ndarray
    w: np.ndarray
    arm: int
    kind: TiltKind


def tilt_value(kind: TiltKind | str, pi1):
    """Tilt h as a function of the treated-arm propensity.

    Accepts scalars or arrays; propensities must lie strictly inside (0, 1).
    """
    kind = TiltKind(kind)
    pi1 = np.asarray(pi1, dtype=float)
    if np.any(pi1 <= 0) or np.any(pi1 >= 1):
        raise ValueError("propensity must lie in (0, 1)")
    if kind is TiltKind.ATE:
        out = np.ones_like(pi1)
    elif kind is TiltKind.ATO:
        out = pi1 * (1.0 - pi1)
    elif kind is TiltKind.ATM:
        out = np.minimum(pi1, 1.0 - pi1)
    else:  # ATEN
        out = -(pi1 * np.log(pi1) + (1.0 - pi1) * np.log1p(-pi1))
    return float(out) if out.ndim == 0 else out


def balancing_weights(kind: TiltKind | str, pi1: np.ndarray, treat: np.ndarray,
                      arm: int) -> BalancingWeight:
    """Balancing weights toward arm ``arm`` given cross-fitted propensities.

    No normalisation happens here; ratio (Hajek) denominators are applied
    where the weights are averaged.
    """
    kind = TiltKind(kind)
    pi1 = np.asarray(pi1, dtype=float)
    treat = np.asarray(treat)
    h = tilt_value(kind, pi1)
    pi_arm = pi1 if arm == 1 else 1.0 - pi1
    w = np.where(treat == arm, h / pi_arm, 0.0)
    return BalancingWeight(h=np.asarray(h, dtype=float), w=w, arm=arm, kind=kind)
