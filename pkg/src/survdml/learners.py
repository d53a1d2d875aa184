"""Nuisance-model learners: propensity, hazard regressions, and stacking.

The library is intentionally small: logistic regression for treatment
assignment, and for time-to-event targets a marginal Nelson-Aalen fit,
Cox regression with Breslow baseline and Breslow tie handling, exponential
and Weibull proportional-hazards MLE, and a pooled discrete-time logistic
hazard classifier.  A cross-validated stacking ensemble combines any
subset of them.

All iterative fits use damped Newton with analytic gradients and Hessians;
gradients at the returned optimum are verified against finite differences
in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LearnerSpec", "LearnerError", "SeparationError", "ConvergenceError",
    "fit_propensity", "fit_hazard", "stack_propensity", "stack_hazard",
    "LogisticPropensity", "NelsonAalenHazard", "CoxBreslowHazard",
    "ExponentialHazard", "WeibullHazard", "DiscreteLogisticHazard",
    "StackedPropensity", "StackedHazard",
    "logistic_loglik", "cox_partial_loglik", "survival_from_cumhaz",
]

GRAD_TOL = 1e-8
MAX_ITER = 100
COEF_BLOWUP = 30.0

PROPENSITY_KINDS = ("logistic",)
HAZARD_KINDS = ("kaplan-meier", "cox-breslow", "exponential-ph",
                "weibull-ph", "discrete-hazard-logistic")


class LearnerError(ValueError):
    """Raised when a learner cannot be fit on the given data."""


class SeparationError(LearnerError):
    """Raised when logistic coefficients diverge (perfect separation)."""


class ConvergenceError(LearnerError):
    """Raised when a Newton fit fails to converge within the iteration cap."""


@dataclass(frozen=True)
class LearnerSpec:
    """Named learner with kind-specific hyperparameters."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PROPENSITY_KINDS + HAZARD_KINDS:
            raise LearnerError(f"unknown learner kind {self.kind!r}")


# ---------------------------------------------------------------------------
# Newton machinery
# ---------------------------------------------------------------------------

def _solve_psd(hess: np.ndarray, grad: np.ndarray) -> np.ndarray:
    # hess is negative (semi)definite at a maximum; fall back to the
    # pseudo-inverse on singular systems so collinear or all-zero columns
    # keep exactly zero coefficients.
    try:
        step = np.linalg.solve(-hess, grad)
        if not np.all(np.isfinite(step)):
            raise np.linalg.LinAlgError
        return step
    except np.linalg.LinAlgError:
        return np.linalg.pinv(-hess) @ grad


def _newton_maximize(value_grad_hess, beta0, *, tol=GRAD_TOL, max_iter=MAX_ITER,
                     on_max_iter="raise", blowup=None):
    beta = np.asarray(beta0, dtype=float).copy()
    value, grad, hess = value_grad_hess(beta)
    for _ in range(max_iter):
        if np.max(np.abs(grad)) < tol:
            return beta
        step = _solve_psd(hess, grad)
        scale = 1.0
        while scale > 1e-12:
            cand = beta + scale * step
            cand_value, cand_grad, cand_hess = value_grad_hess(cand)
            if np.isfinite(cand_value) and cand_value >= value - 1e-12:
                break
            scale *= 0.5
        else:
            raise ConvergenceError("step halving hit the floor without progress")
        beta, value, grad, hess = cand, cand_value, cand_grad, cand_hess
        if blowup is not None and np.max(np.abs(beta)) > blowup:
            raise SeparationError(
                "coefficients diverged; possible perfect separation")
    if np.max(np.abs(grad)) < tol or on_max_iter == "return":
        return beta
    raise ConvergenceError(f"no convergence after {max_iter} iterations")


def _expit(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _add_intercept(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return np.column_stack([np.ones(x.shape[0]), x])


def logistic_loglik(beta: np.ndarray, design: np.ndarray, y: np.ndarray):
    """Bernoulli log-likelihood and its gradient for a given design matrix."""
    z = design @ beta
    # log(1+e^z) computed stably
    ll = float(np.sum(y * z - np.logaddexp(0.0, z)))
    p = _expit(z)
    grad = design.T @ (y - p)
    return ll, grad


def _logistic_vgh(design, y, ridge=0.0):
    def vgh(beta):
        ll, grad = logistic_loglik(beta, design, y)
        p = _expit(design @ beta)
        w = p * (1.0 - p)
        hess = -(design.T * w) @ design
        if ridge:
            ll -= 0.5 * ridge * float(beta @ beta)
            grad = grad - ridge * beta
            hess = hess - ridge * np.eye(len(beta))
        return ll, grad, hess
    return vgh


# ---------------------------------------------------------------------------
# Propensity learners
# ---------------------------------------------------------------------------

class LogisticPropensity:
    """Maximum-likelihood logistic regression for P(A=1 | X)."""

    def __init__(self):
        self.coef_ = None

    def fit(self, x: np.ndarray, a: np.ndarray) -> "LogisticPropensity":
        a = np.asarray(a, dtype=float)
        if len(np.unique(a)) < 2:
            raise LearnerError("both treatment arms are required")
        design = _add_intercept(x)
        self.coef_ = _newton_maximize(
            _logistic_vgh(design, a), np.zeros(design.shape[1]),
            on_max_iter="return", blowup=COEF_BLOWUP)
        return self

    def predict(self, x: np.ndarray) -> np.ndarray:
        p = _expit(_add_intercept(x) @ self.coef_)
        return np.clip(p, 1e-12, 1.0 - 1e-12)


# ---------------------------------------------------------------------------
# Hazard learners
# ---------------------------------------------------------------------------

def survival_from_cumhaz(cumhaz: np.ndarray, mode: str) -> np.ndarray:
    """Row-wise survival matrix from a cumulative-hazard matrix."""
    cumhaz = np.asarray(cumhaz, dtype=float)
    if mode == "exp":
        return np.exp(-cumhaz)
    if mode == "product-limit":
        inc = np.diff(cumhaz, prepend=0.0, axis=-1)
        return np.cumprod(1.0 - np.clip(inc, 0.0, 1.0 - 1e-12), axis=-1)
    raise ValueError(f"unknown survival mode {mode!r}")


class _HazardBase:
    survival_mode = "product-limit"

    def predict_cumhaz(self, x: np.ndarray, grid: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict_survival(self, x: np.ndarray, grid: np.ndarray) -> np.ndarray:
        return survival_from_cumhaz(self.predict_cumhaz(x, grid),
                                    self.survival_mode)


class NelsonAalenHazard(_HazardBase):
    """Marginal cumulative hazard ignoring covariates."""

    def fit(self, x, time, event) -> "NelsonAalenHazard":
        time = np.asarray(time, dtype=float)
        event = np.asarray(event, dtype=bool)
        if not np.any(event):
            raise LearnerError("no target events in the training data")
        jumps = np.unique(time[event])
        d = np.array([np.sum(event & (time == s)) for s in jumps], dtype=float)
        at_risk = np.array([np.sum(time >= s) for s in jumps], dtype=float)
        self.jump_times_ = jumps
        self.cumhaz_ = np.cumsum(d / at_risk)
        return self

    def predict_cumhaz(self, x, grid):
        x = np.atleast_2d(x)
        idx = np.searchsorted(self.jump_times_, grid, side="right")
        base = np.concatenate([[0.0], self.cumhaz_])[idx]
        return np.broadcast_to(base, (x.shape[0], len(grid))).copy()


def cox_partial_loglik(beta: np.ndarray, x: np.ndarray, time: np.ndarray,
                       event: np.ndarray):
    """Breslow partial log-likelihood and gradient (ties handled by Breslow)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    order = np.argsort(time, kind="stable")
    xs, ts, es = x[order], np.asarray(time, float)[order], np.asarray(event, bool)[order]
    eta = xs @ beta
    r = np.exp(eta)
    # suffix sums give risk-set aggregates at each ascending position
    s0 = np.cumsum(r[::-1])[::-1]
    s1 = np.cumsum((xs * r[:, None])[::-1], axis=0)[::-1]
    jumps, first_pos = np.unique(ts[es], return_index=False), None
    ll, grad = 0.0, np.zeros(x.shape[1])
    for s in jumps:
        pos = np.searchsorted(ts, s, side="left")
        dead = es & (ts == s)
        d = int(np.sum(dead))
        ll += float(np.sum(eta[dead])) - d * np.log(s0[pos])
        grad += np.sum(xs[dead], axis=0) - d * s1[pos] / s0[pos]
    return ll, grad


class CoxBreslowHazard(_HazardBase):
    """Cox regression with Breslow baseline hazard and Breslow tie handling."""

    def fit(self, x, time, event) -> "CoxBreslowHazard":
        x = np.atleast_2d(np.asarray(x, dtype=float))
        time = np.asarray(time, dtype=float)
        event = np.asarray(event, dtype=bool)
        if not np.any(event):
            raise LearnerError("no target events in the training data")
        self.center_ = x.mean(axis=0)
        xc = x - self.center_
        order = np.argsort(time, kind="stable")
        xs, ts, es = xc[order], time[order], event[order]
        jumps = np.unique(ts[es])
        positions = np.searchsorted(ts, jumps, side="left")
        deaths = np.array([np.sum(es & (ts == s)) for s in jumps], dtype=float)
        d = xs.shape[1]
        outer = (xs[:, :, None] * xs[:, None, :]).reshape(len(ts), d * d)

        def vgh(beta):
            eta = xs @ beta
            r = np.exp(eta)
            s0 = np.cumsum(r[::-1])[::-1][positions]
            s1 = np.cumsum((xs * r[:, None])[::-1], axis=0)[::-1][positions]
            s2 = np.cumsum((outer * r[:, None])[::-1], axis=0)[::-1][positions]
            ll = float(np.sum(eta[es])) - float(np.sum(deaths * np.log(s0)))
            mu = s1 / s0[:, None]
            grad = xs[es].sum(axis=0) - (deaths[:, None] * mu).sum(axis=0)
            v = s2.reshape(-1, d, d) / s0[:, None, None] - mu[:, :, None] * mu[:, None, :]
            hess = -(deaths[:, None, None] * v).sum(axis=0)
            return ll, grad, hess

        self.coef_ = _newton_maximize(vgh, np.zeros(d))
        r = np.exp(xs @ self.coef_)
        s0 = np.cumsum(r[::-1])[::-1][positions]
        self.jump_times_ = jumps
        self.base_cumhaz_ = np.cumsum(deaths / s0)
        return self

    def predict_cumhaz(self, x, grid):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        idx = np.searchsorted(self.jump_times_, grid, side="right")
        base = np.concatenate([[0.0], self.base_cumhaz_])[idx]
        return np.exp((x - self.center_) @ self.coef_)[:, None] * base[None, :]


class ExponentialHazard(_HazardBase):
    """Constant-rate proportional hazards: rate = exp(b0 + b' X)."""

    survival_mode = "exp"

    def fit(self, x, time, event) -> "ExponentialHazard":
        time = np.asarray(time, dtype=float)
        event = np.asarray(event, dtype=float)
        if not np.any(event > 0):
            raise LearnerError("no target events in the training data")
        design = _add_intercept(x)

        def vgh(beta):
            lam = np.exp(design @ beta)
            expected = time * lam
            ll = float(np.sum(event * (design @ beta)) - np.sum(expected))
            grad = design.T @ (event - expected)
            hess = -(design.T * expected) @ design
            return ll, grad, hess

        self.coef_ = _newton_maximize(vgh, np.zeros(design.shape[1]))
        return self

    def rate(self, x) -> np.ndarray:
        return np.exp(_add_intercept(x) @ self.coef_)

    def predict_cumhaz(self, x, grid):
        return self.rate(x)[:, None] * np.asarray(grid, dtype=float)[None, :]


class WeibullHazard(_HazardBase):
    """Weibull proportional hazards: cumulative hazard t^p exp(b0 + b' X)."""

    survival_mode = "exp"

    def fit(self, x, time, event) -> "WeibullHazard":
        time = np.asarray(time, dtype=float)
        event = np.asarray(event, dtype=float)
        if not np.any(event > 0):
            raise LearnerError("no target events in the training data")
        design = _add_intercept(x)
        log_t = np.log(time)
        d = design.shape[1]

        def vgh(theta):
            beta, log_p = theta[:d], theta[d]
            p = np.exp(log_p)
            lam = np.exp(design @ beta + p * log_t)  # cumulative hazard per unit
            ll = float(np.sum(event * (design @ beta + log_p + (p - 1.0) * log_t))
                       - np.sum(lam))
            g_beta = design.T @ (event - lam)
            g_logp = float(np.sum(event * (1.0 + p * log_t) - lam * p * log_t))
            grad = np.concatenate([g_beta, [g_logp]])
            hb = -(design.T * lam) @ design
            hbp = -design.T @ (lam * p * log_t)
            hpp = float(np.sum(event * p * log_t
                               - lam * (p * log_t) ** 2 - lam * p * log_t))
            hess = np.zeros((d + 1, d + 1))
            hess[:d, :d] = hb
            hess[:d, d] = hess[d, :d] = hbp
            hess[d, d] = hpp
            return ll, grad, hess

        theta = _newton_maximize(vgh, np.zeros(d + 1))
        self.coef_, self.shape_ = theta[:d], float(np.exp(theta[d]))
        return self

    def predict_cumhaz(self, x, grid):
        scale = np.exp(_add_intercept(x) @ self.coef_)
        return scale[:, None] * np.asarray(grid, dtype=float)[None, :] ** self.shape_


class DiscreteLogisticHazard(_HazardBase):
    """Pooled person-period logistic hazard on quantile time bins.

    Each subject contributes one row per bin entered while at risk, with a
    binary label for failing in that bin; conditioning on being at risk
    keeps the pooled rows independent.  Predicted per-bin probabilities are
    converted to piecewise-constant rates.
    """

    survival_mode = "exp"

    def __init__(self, bins: int = 12, ridge: float = 1e-8):
        self.bins = bins
        self.ridge = ridge

    def fit(self, x, time, event) -> "DiscreteLogisticHazard":
        x = np.atleast_2d(np.asarray(x, dtype=float))
        time = np.asarray(time, dtype=float)
        event = np.asarray(event, dtype=bool)
        if not np.any(event):
            raise LearnerError("no target events in the training data")
        # bin edges follow event-time quantiles so every bin holds an event
        etimes = np.sort(time[event])
        q = min(self.bins, len(np.unique(etimes)))
        edges = np.unique(np.quantile(etimes, np.linspace(0, 1, q + 1)[1:]))
        edges[-1] = max(edges[-1], time.max())
        self.edges_ = edges
        n_bins = len(edges)
        lower = np.concatenate([[0.0], edges[:-1]])
        at_risk = time[:, None] > lower[None, :]
        fails = event[:, None] & (time[:, None] <= edges[None, :]) & at_risk
        rows, cols = np.nonzero(at_risk)
        design = np.zeros((len(rows), x.shape[1] + n_bins))
        design[:, :x.shape[1]] = x[rows]
        design[np.arange(len(rows)), x.shape[1] + cols] = 1.0
        labels = fails[rows, cols].astype(float)
        self.coef_ = _newton_maximize(
            _logistic_vgh(design, labels, ridge=self.ridge),
            np.zeros(design.shape[1]), on_max_iter="return")
        return self

    def predict_cumhaz(self, x, grid):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        grid = np.asarray(grid, dtype=float)
        n_bins = len(self.edges_)
        logit = x @ self.coef_[:x.shape[1]]
        probs = _expit(logit[:, None] + self.coef_[x.shape[1]:][None, :])
        lower = np.concatenate([[0.0], self.edges_[:-1]])
        widths = self.edges_ - lower
        rates = -np.log1p(-np.clip(probs, 0.0, 1.0 - 1e-12)) / widths[None, :]
        cum_at_edges = np.cumsum(rates * widths[None, :], axis=1)
        cum_lower = np.concatenate(
            [np.zeros((x.shape[0], 1)), cum_at_edges[:, :-1]], axis=1)
        # beyond the last edge the final rate is carried forward
        idx = np.minimum(np.searchsorted(self.edges_, grid, side="left"),
                         n_bins - 1)
        return cum_lower[:, idx] + rates[:, idx] * np.maximum(
            grid[None, :] - lower[idx][None, :], 0.0)


_HAZARD_CLASSES = {
    "kaplan-meier": NelsonAalenHazard,
    "cox-breslow": CoxBreslowHazard,
    "exponential-ph": ExponentialHazard,
    "weibull-ph": WeibullHazard,
    "discrete-hazard-logistic": DiscreteLogisticHazard,
}


def fit_propensity(x: np.ndarray, a: np.ndarray, spec: LearnerSpec):
    """Fit a treatment-assignment model returning a ``predict(x) -> p1``."""
    if spec.kind != "logistic":
        raise LearnerError(f"{spec.kind!r} is not a propensity learner")
    return LogisticPropensity().fit(x, a)


def fit_hazard(x: np.ndarray, time: np.ndarray, event: np.ndarray,
               spec: LearnerSpec):
    """Fit a conditional cumulative-hazard model for one target.

    ``event`` is the indicator of the modelled transition: the all-cause
    event, one specific cause (others treated as censored), or -- with the
    roles reversed -- the censoring event itself.
    """
    if spec.kind not in _HAZARD_CLASSES:
        raise LearnerError(f"{spec.kind!r} is not a hazard learner")
    model = _HAZARD_CLASSES[spec.kind](**spec.params)
    return model.fit(x, time, event)


# ---------------------------------------------------------------------------
# Stacking
# ---------------------------------------------------------------------------

def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u - css / np.arange(1, len(v) + 1) > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1.0), 0.0)


def _minimize_simplex(loss_fn, grad_fn, n_weights: int):
    """Projected gradient on the simplex; vertices are always candidates."""
    w = np.full(n_weights, 1.0 / n_weights)
    value = loss_fn(w)
    step = 1.0
    for _ in range(500):
        g = grad_fn(w)
        while step > 1e-14:
            cand = _project_simplex(w - step * g)
            cand_value = loss_fn(cand)
            if cand_value <= value + 1e-15:
                break
            step *= 0.5
        else:
            break
        if np.max(np.abs(cand - w)) < 1e-12:
            w, value = cand, cand_value
            break
        w, value = cand, cand_value
        step *= 1.3
    best_w, best_value = w, value
    for l in range(n_weights):
        vertex = np.zeros(n_weights)
        vertex[l] = 1.0
        v = loss_fn(vertex)
        if v < best_value:
            best_w, best_value = vertex, v
    if np.max(best_w) >= 1.0 - 1e-6:  # degenerate to discrete selection
        hard = np.zeros(n_weights)
        hard[int(np.argmax(best_w))] = 1.0
        best_w = hard
    return best_w, best_value


def _inner_folds(n: int, folds: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    assignment = np.repeat(np.arange(folds), np.diff(np.linspace(0, n, folds + 1).astype(int)))
    return assignment[rng.permutation(n)]


class StackedPropensity:
    """Convex combination of propensity learners chosen by inner-CV loss."""

    def __init__(self, components, weights, cv_loss):
        self.components = components
        self.weights = np.asarray(weights, dtype=float)
        self.cv_loss = float(cv_loss)

    def predict(self, x):
        preds = np.stack([c.predict(x) for c in self.components])
        return np.clip(self.weights @ preds.reshape(len(self.components), -1),
                       1e-12, 1 - 1e-12).reshape(np.atleast_2d(x).shape[0])


def stack_propensity(x, a, specs, folds: int = 2, seed: int = 0):
    """Stack propensity learners by minimising inner-CV Bernoulli deviance."""
    if len(specs) < 2:
        if len(specs) != 1:
            raise LearnerError("at least one learner spec is required")
        model = fit_propensity(x, a, specs[0])
        return StackedPropensity([model], [1.0], np.nan)
    a = np.asarray(a, dtype=float)
    n = len(a)
    assign = _inner_folds(n, folds, seed)
    preds = np.full((len(specs), n), np.nan)
    for k in range(folds):
        val = assign == k
        train = ~val
        if len(np.unique(a[train])) < 2:
            raise LearnerError(f"inner fold {k}: training part lacks an arm")
        for l, spec in enumerate(specs):
            preds[l, val] = fit_propensity(x[train], a[train], spec).predict(x[val])
    clipped = np.clip(preds, 1e-12, 1 - 1e-12)

    def loss(w):
        p = np.clip(w @ clipped, 1e-12, 1 - 1e-12)
        return float(-np.mean(a * np.log(p) + (1 - a) * np.log1p(-p)))

    def grad(w):
        p = np.clip(w @ clipped, 1e-12, 1 - 1e-12)
        dl = -(a / p - (1 - a) / (1 - p)) / n
        return clipped @ dl

    weights, cv_loss = _minimize_simplex(loss, grad, len(specs))
    models = [fit_propensity(x, a, spec) for spec in specs]
    return StackedPropensity(models, weights, cv_loss)


class StackedHazard(_HazardBase):
    """Convex combination of hazard learners on the survival scale.

    The stacked survival curve is converted back to a cumulative hazard via
    discrete product-limit inversion, so survival reconstructed from the
    returned hazard reproduces the stacked curve exactly.
    """

    def __init__(self, components, weights, cv_loss):
        self.components = components
        self.weights = np.asarray(weights, dtype=float)
        self.cv_loss = float(cv_loss)

    def predict_survival(self, x, grid):
        surv = sum(w * c.predict_survival(x, grid)
                   for w, c in zip(self.weights, self.components) if w > 0)
        return np.asarray(surv)

    def predict_cumhaz(self, x, grid):
        surv = self.predict_survival(x, grid)
        prev = np.concatenate([np.ones((surv.shape[0], 1)), surv[:, :-1]], axis=1)
        ratio = np.divide(surv, prev, out=np.ones_like(surv), where=prev > 0)
        return np.cumsum(1.0 - np.clip(ratio, 0.0, 1.0), axis=1)


def _km_censoring(time, event):
    """Kaplan-Meier estimate of the censoring survival (for Brier weights)."""
    censored = ~np.asarray(event, dtype=bool)
    if not np.any(censored):
        return lambda t: np.ones_like(np.asarray(t, dtype=float))
    model = NelsonAalenHazard().fit(None, time, censored)
    inc = np.diff(model.cumhaz_, prepend=0.0)
    surv = np.cumprod(1.0 - np.clip(inc, 0.0, 1.0 - 1e-12))

    def g(t):
        idx = np.searchsorted(model.jump_times_, np.atleast_1d(t), side="right")
        return np.concatenate([[1.0], surv])[idx]

    return g


def stack_hazard(x, time, event, specs, folds: int = 2, seed: int = 0,
                 loss: str = "brier"):
    """Stack hazard learners by minimising inner-CV integrated Brier score.

    Censoring weights in the Brier score come from a Kaplan-Meier fit on
    the inner training part.
    """
    if len(specs) < 2:
        if len(specs) != 1:
            raise LearnerError("at least one learner spec is required")
        model = fit_hazard(x, time, event, specs[0])
        return StackedHazard([model], [1.0], np.nan)
    if loss != "brier":
        raise LearnerError(f"unsupported stacking loss {loss!r}")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=bool)
    n = len(time)
    assign = _inner_folds(n, folds, seed)
    horizon = np.quantile(time[event], 0.9)
    eval_grid = np.unique(np.quantile(time[event][time[event] <= horizon],
                                      np.linspace(0.05, 1.0, 15)))
    preds = np.full((len(specs), n, len(eval_grid)), np.nan)
    weight = np.zeros((n, len(eval_grid)))
    target = np.zeros((n, len(eval_grid)))
    for k in range(folds):
        val = assign == k
        train = ~val
        if not np.any(event[train]):
            raise LearnerError(f"inner fold {k}: no events in training part")
        for l, spec in enumerate(specs):
            model = fit_hazard(x[train], time[train], event[train], spec)
            preds[l, val] = model.predict_survival(x[val], eval_grid)
        g = _km_censoring(time[train], event[train])
        g_grid = np.maximum(g(eval_grid), 1e-4)
        g_at_t = np.maximum(g(np.maximum(time[val] - 1e-12, 1e-12)), 1e-4)
        still = time[val][:, None] > eval_grid[None, :]
        failed = (~still) & event[val][:, None]
        weight[val] = still / g_grid[None, :] + failed / g_at_t[:, None]
        target[val] = still.astype(float)

    flat_w = weight.reshape(-1)
    flat_t = target.reshape(-1)
    flat_p = preds.reshape(len(specs), -1)
    denom = n * len(eval_grid)

    def loss_fn(w):
        s = w @ flat_p
        return float(np.sum(flat_w * (flat_t - s) ** 2) / denom)

    def grad_fn(w):
        s = w @ flat_p
        return -2.0 * flat_p @ (flat_w * (flat_t - s)) / denom

    weights, cv_loss = _minimize_simplex(loss_fn, grad_fn, len(specs))
    models = [fit_hazard(x, time, event, spec) for spec in specs]
    return StackedHazard(models, weights, cv_loss)
