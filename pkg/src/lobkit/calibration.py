"""Fitting procedures: empirical rates, point-process MLE, EM, and law fits.

The point-process log-likelihood uses the exact piecewise-constant covariate
path: each event contributes the log-rate at the left limit of its time, the
compensator is a finite sum of rate * interval-length terms.  The
log-likelihood is concave in the intensity coefficients (log-linear rate), so
Newton ascent with backtracking converges to the unique optimum; standard
errors come from the inverse observed information with a central-difference
Hessian.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .cancellation import priority_loglik, priority_loglik_grad
from .intensity import IntensityParams, design_matrix
from .placement import MixtureParams, StudentParams, student_pdf


class CalibrationError(Exception):
    pass


@dataclass
class FitReport:
    estimates: np.ndarray
    std_errors: np.ndarray | None
    loglik: float
    converged: bool
    iterations: int
    message: str = ""
    trace: list[float] | None = None  # per-iteration loglik where tracked


@dataclass
class CovariatePath:
    """Piecewise-constant (spread, q1, Q10) between breakpoints.

    ``times`` has one more entry than the value arrays; values hold on
    [times[k], times[k+1]).  ``events`` maps an order-type key to the sorted
    event times of that type.  ``total_volume`` optionally carries the full
    side depth used as the hazard-calibration target.
    """

    times: np.ndarray
    spread: np.ndarray
    q1: np.ndarray
    q10: np.ndarray
    events: dict[str, np.ndarray] = field(default_factory=dict)
    total_volume: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        k = self.times.size - 1
        for name in ("spread", "q1", "q10"):
            arr = np.asarray(getattr(self, name))
            if arr.size != k:
                raise ValueError(f"{name} has {arr.size} values for {k} intervals")
            setattr(self, name, arr)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        self.events = {k: np.asarray(v, dtype=float) for k, v in self.events.items()}
        for key, ev in self.events.items():
            if ev.size and (ev.min() < self.times[0] or ev.max() > self.times[-1]):
                raise ValueError(f"{key} events outside the covariate path span")

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def interval_lengths(self) -> np.ndarray:
        return np.diff(self.times)

    def left_limit_index(self, t) -> np.ndarray:
        """Interval index holding the left limit of the covariates at t.

        An event exactly on a breakpoint belongs to the preceding interval;
        events at the very start of the path take the first interval.
        """
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float), side="left") - 1
        return np.clip(idx, 0, self.times.size - 2)

    def values(self, selector: str) -> np.ndarray:
        if selector == "spread":
            return self.spread
        if selector == "q1":
            return self.q1
        if selector == "Q10":
            return self.q10
        raise ValueError(f"unknown covariate selector {selector!r}")

    def glue(self, other: "CovariatePath") -> "CovariatePath":
        """Concatenate another path after this one on a continuous clock."""
        shift = self.times[-1] - other.times[0]
        times = np.concatenate([self.times, other.times[1:] + shift])
        events = {}
        for key in set(self.events) | set(other.events):
            a = self.events.get(key, np.empty(0))
            b = other.events.get(key, np.empty(0)) + shift
            events[key] = np.concatenate([a, b])
        tot = None
        if self.total_volume is not None and other.total_volume is not None:
            tot = np.concatenate([self.total_volume, other.total_volume])
        return CovariatePath(
            times=times,
            spread=np.concatenate([self.spread, other.spread]),
            q1=np.concatenate([self.q1, other.q1]),
            q10=np.concatenate([self.q10, other.q10]),
            events=events,
            total_volume=tot,
        )


def _event_array(events) -> np.ndarray:
    arr = np.asarray(events, dtype=float)
    if arr.ndim != 1:
        raise ValueError("events must be a 1-d array of times")
    return arr


def empirical_state_intensity(events, path: CovariatePath, selector: str) -> dict:
    """N(c)/T(c) for each attained value c of the selected covariate."""
    ev = _event_array(events)
    if ev.size and (ev.min() < path.times[0] or ev.max() > path.times[-1]):
        raise CalibrationError("event outside the covariate path")
    values = path.values(selector)
    lengths = path.interval_lengths()
    exposure: dict = {}
    for v, dt in zip(values.tolist(), lengths):
        exposure[v] = exposure.get(v, 0.0) + dt
    counts: dict = {v: 0 for v in exposure}
    ev_values = values[path.left_limit_index(ev)]
    for v in ev_values.tolist():
        counts[v] = counts.get(v, 0) + 1
    return {v: counts[v] / exposure[v] for v in exposure}


def _design(path: CovariatePath, events, volume_kind: str):
    ev = _event_array(events)
    v = path.values("q1" if volume_kind == "q1" else "Q10")
    x_comp = design_matrix(path.spread, v)
    dt = path.interval_lengths()
    idx = path.left_limit_index(ev)
    x_ev = x_comp[idx]
    return x_ev, x_comp, dt


def point_process_loglik(beta, events, path: CovariatePath, volume_kind: str = "q1") -> float:
    """Sum of event log-rates (left limits) minus the compensator."""
    beta = np.asarray(beta, dtype=float)
    x_ev, x_comp, dt = _design(path, events, volume_kind)
    log_rates = x_comp @ beta
    comp_terms = np.exp(log_rates) * dt
    if not np.all(np.isfinite(comp_terms)):
        bad = int(np.flatnonzero(~np.isfinite(comp_terms))[0])
        raise CalibrationError(
            f"non-finite compensator on interval {bad} "
            f"[{path.times[bad]}, {path.times[bad + 1]}]")
    return float(np.sum(x_ev @ beta) - np.sum(comp_terms))


def point_process_loglik_grad(beta, events, path: CovariatePath,
                              volume_kind: str = "q1") -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    x_ev, x_comp, dt = _design(path, events, volume_kind)
    w = np.exp(x_comp @ beta) * dt
    return x_ev.sum(axis=0) - x_comp.T @ w


def compensator_at(beta, path: CovariatePath, times, volume_kind: str = "q1") -> np.ndarray:
    """Integrated intensity from the path start to each requested time."""
    beta = np.asarray(beta, dtype=float)
    v = path.values("q1" if volume_kind == "q1" else "Q10")
    rates = np.exp(design_matrix(path.spread, v) @ beta)
    cum = np.concatenate([[0.0], np.cumsum(rates * path.interval_lengths())])
    t = np.asarray(times, dtype=float)
    idx = path.left_limit_index(t)
    return cum[idx] + rates[idx] * (t - path.times[idx])


def fit_state_intensity_mle(events, path: CovariatePath, volume_kind: str = "q1",
                            init=None, grad_tol: float = 1e-9,
                            max_iter: int = 100) -> tuple[IntensityParams, FitReport]:
    """Newton ascent with backtracking on the concave log-likelihood."""
    ev = _event_array(events)
    if ev.size < 1:
        raise CalibrationError("need at least one event to fit")
    x_ev, x_comp, dt = _design(path, ev, volume_kind)
    n = ev.size

    if init is None:
        beta = np.zeros(6)
        beta[0] = math.log(n / path.duration)
    else:
        beta = np.asarray(init, dtype=float).copy()

    sum_x_ev = x_ev.sum(axis=0)

    def loglik(b):
        w = np.exp(x_comp @ b) * dt
        return float(sum_x_ev @ b - w.sum()), w

    def grad_hess(w):
        g = sum_x_ev - x_comp.T @ w
        h = -(x_comp * w[:, None]).T @ x_comp
        return g, h

    ll, w = loglik(beta)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        g, h = grad_hess(w)
        if np.max(np.abs(g)) <= grad_tol * max(n, 1.0):
            converged = True
            break
        try:
            step = np.linalg.solve(-h, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(-h, g, rcond=None)[0]
        t = 1.0
        for _ in range(60):
            try:
                ll_new, w_new = loglik(beta + t * step)
            except FloatingPointError:
                ll_new = -np.inf
            if np.isfinite(ll_new) and ll_new >= ll + 1e-4 * t * float(g @ step):
                break
            t *= 0.5
        else:
            break
        beta = beta + t * step
        ll, w = ll_new, w_new

    std = _central_diff_std_errors(
        lambda b: point_process_loglik(b, ev, path, volume_kind), beta) if converged else None
    params = IntensityParams.from_array(beta, volume_kind=volume_kind)
    return params, FitReport(beta, std, ll, converged, iterations)


def _central_diff_std_errors(loglik_fn, theta, rel_step: float = 1e-4) -> np.ndarray | None:
    """Inverse observed information via a central-difference Hessian."""
    theta = np.asarray(theta, dtype=float)
    k = theta.size
    h = rel_step * np.maximum(1.0, np.abs(theta))
    hess = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            if i == j:
                f0 = loglik_fn(theta)
                tp = theta.copy(); tp[i] += h[i]
                tm = theta.copy(); tm[i] -= h[i]
                hess[i, i] = (loglik_fn(tp) - 2 * f0 + loglik_fn(tm)) / h[i] ** 2
            else:
                tpp = theta.copy(); tpp[[i, j]] += [h[i], h[j]]
                tpm = theta.copy(); tpm[i] += h[i]; tpm[j] -= h[j]
                tmp = theta.copy(); tmp[i] -= h[i]; tmp[j] += h[j]
                tmm = theta.copy(); tmm[[i, j]] -= [h[i], h[j]]
                hess[i, j] = hess[j, i] = (
                    loglik_fn(tpp) - loglik_fn(tpm) - loglik_fn(tmp) + loglik_fn(tmm)
                ) / (4 * h[i] * h[j])
    try:
        cov = np.linalg.inv(-hess)
    except np.linalg.LinAlgError:
        return None
    diag = np.diag(cov)
    if np.any(diag <= 0):
        return None
    return np.sqrt(diag)


def fit_poisson_rate(events, duration: float) -> float:
    """MLE of a homogeneous Poisson rate: count / duration."""
    if duration <= 0:
        raise CalibrationError(f"duration must be > 0, got {duration}")
    n = int(events) if np.isscalar(events) else _event_array(events).size
    if n == 0:
        warnings.warn("no events: degenerate zero-rate fit", stacklevel=2)
    return n / duration


def marginal_intensity(params: IntensityParams, selector: str, values,
                       other_dist: dict) -> dict:
    """Model rate as a function of one covariate, the other integrated out.

    ``other_dist`` maps values of the non-selected covariate to
    probabilities (must sum to 1).
    """
    total = sum(other_dist.values())
    if abs(total - 1.0) > 1e-9:
        raise CalibrationError(f"distribution sums to {total}, expected 1")
    out = {}
    for v in values:
        acc = 0.0
        for o, p in other_dist.items():
            s, vol = (v, o) if selector == "spread" else (o, v)
            x = design_matrix([s], [vol])[0]
            acc += p * math.exp(float(params.as_array() @ x))
        out[v] = acc
    return out


# --- placement mixture (EM) -------------------------------------------------

_EM_INIT_QUANTILES = [(10, 50, 90), (25, 50, 75), (5, 50, 95), (15, 50, 85), (30, 50, 70)]


def _mixture_loglik(sample, weights, means, stds) -> float:
    log_comp = np.stack([
        np.log(w) - 0.5 * ((sample - m) / s) ** 2 - math.log(s * math.sqrt(2 * math.pi))
        for w, m, s in zip(weights, means, stds)
    ])
    return float(np.sum(special.logsumexp(log_comp, axis=0)))


def fit_mixture_em(sample, n_components: int = 3, tol: float = 1e-8,
                   max_iter: int = 2000, max_restarts: int = 5,
                   collapse_tol: float = 1e-4) -> tuple[MixtureParams, FitReport]:
    """EM fit of a 1-d normal mixture; components returned in ascending-mean order.

    Initialization is deterministic: component means at sample quantiles,
    a common variance and equal weights.  A component collapsing below
    ``collapse_tol`` triggers a restart from the next quantile triple.
    """
    x = np.asarray(sample, dtype=float)
    if x.size < 10 * n_components:
        raise CalibrationError(f"need >= {10 * n_components} observations, got {x.size}")

    if n_components == 1:
        mu, sd = float(np.mean(x)), float(np.std(x))
        params = MixtureParams((1.0,), (mu,), (sd,))
        ll = _mixture_loglik(x, [1.0], [mu], [sd])
        return params, FitReport(np.array([1.0, mu, sd]), None, ll, True, 1, trace=[ll])

    last_error = "unknown"
    for restart in range(max_restarts):
        qs = _EM_INIT_QUANTILES[restart % len(_EM_INIT_QUANTILES)]
        if n_components == 3:
            means = np.percentile(x, qs).astype(float)
        else:
            means = np.percentile(x, np.linspace(10, 90, n_components)).astype(float)
        stds = np.full(n_components, max(float(np.std(x)), collapse_tol * 10))
        weights = np.full(n_components, 1.0 / n_components)

        trace: list[float] = []
        collapsed = False
        converged = False
        for iteration in range(1, max_iter + 1):
            log_comp = np.stack([
                np.log(w) - 0.5 * ((x - m) / s) ** 2 - math.log(s * math.sqrt(2 * math.pi))
                for w, m, s in zip(weights, means, stds)
            ])
            log_norm = special.logsumexp(log_comp, axis=0)
            ll = float(np.sum(log_norm))
            trace.append(ll)
            resp = np.exp(log_comp - log_norm)

            nk = resp.sum(axis=1)
            weights = nk / x.size
            means = (resp @ x) / nk
            stds = np.sqrt(np.maximum((resp @ (x * x)) / nk - means ** 2, 0.0))
            if np.any(stds < collapse_tol):
                collapsed = True
                last_error = f"component collapsed on restart {restart}"
                break
            if len(trace) >= 2 and trace[-1] - trace[-2] < tol:
                converged = True
                break
        if collapsed:
            continue

        order = np.argsort(means)
        weights, means, stds = weights[order], means[order], stds[order]
        weights = weights / weights.sum()
        params = MixtureParams(tuple(weights), tuple(means), tuple(stds))
        ll = _mixture_loglik(x, weights, means, stds)
        trace.append(ll)
        estimates = np.concatenate([weights, means, stds])
        std_err = _mixture_std_errors(x, weights, means, stds)
        return params, FitReport(estimates, std_err, ll, converged,
                                 len(trace) - 1, trace=trace)
    raise CalibrationError(f"EM failed after {max_restarts} restarts: {last_error}")


def _mixture_std_errors(x, weights, means, stds) -> np.ndarray | None:
    """Observed-information standard errors in (weights, means, stds) order.

    The weight block uses the first G-1 free weights; the constrained last
    weight gets the delta-method variance of 1 - sum(others).
    """
    g = len(weights)

    def loglik(theta):
        w = np.concatenate([theta[:g - 1], [1.0 - theta[:g - 1].sum()]])
        if np.any(w <= 0):
            return -np.inf
        return _mixture_loglik(x, w, theta[g - 1:2 * g - 1], theta[2 * g - 1:])

    theta = np.concatenate([weights[:-1], means, stds])
    try:
        with np.errstate(all="ignore"):
            std_free = _central_diff_std_errors(loglik, theta, rel_step=1e-5)
    except Exception:
        return None
    if std_free is None:
        return None
    w_last = math.sqrt(float(np.sum(std_free[:g - 1] ** 2)))
    return np.concatenate([std_free[:g - 1], [w_last], std_free[g - 1:]])


# --- Student placement ------------------------------------------------------

def _student_negloglik(theta, x):
    mu, log_sigma, log_nu_shift = theta
    sigma = math.exp(log_sigma)
    nu = 0.1 + math.exp(log_nu_shift)
    return -float(np.sum(np.log(student_pdf(StudentParams(mu, sigma, nu), x))))


def fit_student(sample) -> tuple[StudentParams, FitReport]:
    """Numerical MLE of the location-scale Student law (dof constrained > 0.1)."""
    x = np.asarray(sample, dtype=float)
    if x.size < 10:
        raise CalibrationError(f"need >= 10 observations, got {x.size}")
    med = float(np.median(x))
    iqr = float(np.percentile(x, 75) - np.percentile(x, 25))
    theta0 = np.array([med, math.log(max(iqr / 2, 1e-3)), math.log(2.0)])

    result = optimize.minimize(_student_negloglik, theta0, args=(x,), method="L-BFGS-B")
    if not result.success:
        fallback = optimize.minimize(_student_negloglik, result.x, args=(x,),
                                     method="Nelder-Mead",
                                     options={"xatol": 1e-10, "fatol": 1e-10})
        if fallback.fun <= result.fun:
            result = fallback
    mu, sigma, nu = result.x[0], math.exp(result.x[1]), 0.1 + math.exp(result.x[2])
    params = StudentParams(mu, sigma, nu)

    def loglik(t):
        mu_, sig_, nu_ = t
        if sig_ <= 0 or nu_ <= 0:
            return -np.inf
        return float(np.sum(np.log(student_pdf(StudentParams(mu_, sig_, nu_), x))))

    estimates = np.array([mu, sigma, nu])
    std = _central_diff_std_errors(loglik, estimates) if result.success else None
    return params, FitReport(estimates, std, -result.fun, bool(result.success),
                             int(result.nit),
                             message="" if result.success else str(result.message))


# --- priority-index law -----------------------------------------------------

def fit_cancellation_mle(sample) -> tuple[tuple[float, float], FitReport]:
    """MLE of the priority-index law; returns ((shape, scale), report).

    The scale is log-reparameterized to stay positive; a boundary solution
    (scale -> 0, near-uniform data) is flagged in the report message.
    """
    xi = np.asarray(sample, dtype=float)
    if np.any(xi < 0) or np.any(xi > 1):
        raise CalibrationError("priority indices must lie in [0, 1]")

    def negloglik(theta):
        return -priority_loglik(theta[0], math.exp(theta[1]), xi)

    def neggrad(theta):
        g = priority_loglik_grad(theta[0], math.exp(theta[1]), xi)
        return -np.array([g[0], g[1] * math.exp(theta[1])])

    theta0 = np.array([-0.5, math.log(5.0)])
    result = optimize.minimize(negloglik, theta0, jac=neggrad, method="BFGS")
    if not result.success:
        fallback = optimize.minimize(negloglik, result.x, method="Nelder-Mead",
                                     options={"xatol": 1e-12, "fatol": 1e-12})
        if fallback.fun <= result.fun:
            result = fallback
    shape, scale = float(result.x[0]), math.exp(float(result.x[1]))
    message = ""
    if scale < 1e-6:
        message = "boundary solution: scale -> 0 (near-uniform sample)"

    def loglik(t):
        if t[1] <= 0:
            return -np.inf
        return priority_loglik(t[0], t[1], xi)

    estimates = np.array([shape, scale])
    std = _central_diff_std_errors(loglik, estimates)
    return (shape, scale), FitReport(estimates, std, -result.fun, bool(result.success),
                                     int(result.nit), message=message)
