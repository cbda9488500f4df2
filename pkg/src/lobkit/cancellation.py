"""Cancellation model: priority-index law and hazard calibration.

Which pending order gets cancelled is governed by a one-parameter-family
density over the priority index xi in [0, 1] (a scaled truncated power law).
How often cancellations fire is governed by a per-order hazard theta,
calibrated so that the expected book depth of a constant-rate reference book
matches its empirical counterpart; that expectation involves the Gauss
hypergeometric function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# treat alpha as -1 (removable singularity) below this distance
_ALPHA_LIMIT_TOL = 1e-8


class CancellationError(Exception):
    pass


class Hyp2f1Error(CancellationError):
    """Series diverged, overflowed or failed to converge; carries diagnostics."""

    def __init__(self, message: str, partial_sum: float, terms: int):
        super().__init__(f"{message} (partial sum {partial_sum:.6g} after {terms} terms)")
        self.partial_sum = partial_sum
        self.terms = terms


class RemovableSingularityError(CancellationError):
    """q = 1 exactly; perturb the size ratio slightly and retry."""


class UnbracketableError(CancellationError):
    """No hazard in the scan range brackets the target depth."""

    def __init__(self, message: str, scanned: list[tuple[float, float]]):
        super().__init__(message)
        self.scanned = scanned


@dataclass(frozen=True, slots=True)
class CancellationParams:
    """Priority-law shape/scale plus the per-order hazard (1/seconds)."""

    shape: float   # exponent of the power law
    scale: float   # > 0
    hazard: float  # > 0

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError(f"scale must be > 0, got {self.scale}")
        if self.hazard <= 0:
            raise ValueError(f"hazard must be > 0, got {self.hazard}")


@dataclass(frozen=True, slots=True)
class DepthModelInputs:
    """Arrival rates and mean sizes of the constant-rate reference book."""

    limit_rate: float
    market_rate: float
    limit_mean_size: float
    market_mean_size: float

    def __post_init__(self):
        for name in ("limit_rate", "market_rate", "limit_mean_size", "market_mean_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def size_ratio(self) -> float:
        return self.market_mean_size / self.limit_mean_size


def _norm_const(shape: float, scale: float) -> float:
    if abs(shape + 1.0) < _ALPHA_LIMIT_TOL:
        return scale / math.log1p(scale)
    return scale * (shape + 1.0) / ((1.0 + scale) ** (shape + 1.0) - 1.0)


def _check_unit_interval(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(arr > 1):
        raise ValueError(f"{name} must lie in [0, 1]")
    return arr


def priority_pdf(shape: float, scale: float, xi) -> np.ndarray | float:
    """Density of the cancelled order's priority index on [0, 1]."""
    arr = _check_unit_interval(xi, "xi")
    out = _norm_const(shape, scale) * (1.0 + scale * arr) ** shape
    return out if out.ndim else float(out)


def priority_cdf(shape: float, scale: float, xi) -> np.ndarray | float:
    arr = _check_unit_interval(xi, "xi")
    if abs(shape + 1.0) < _ALPHA_LIMIT_TOL:
        out = np.log1p(scale * arr) / math.log1p(scale)
    else:
        a1 = shape + 1.0
        out = ((1.0 + scale * arr) ** a1 - 1.0) / ((1.0 + scale) ** a1 - 1.0)
    return out if out.ndim else float(out)


def priority_cdf_inverse(shape: float, scale: float, x) -> np.ndarray | float:
    """Quantile function; maps [0, 1] onto [0, 1]."""
    arr = _check_unit_interval(x, "x")
    if abs(shape + 1.0) < _ALPHA_LIMIT_TOL:
        out = ((1.0 + scale) ** arr - 1.0) / scale
    else:
        a1 = shape + 1.0
        bracket = ((1.0 + scale) ** a1 - 1.0) * arr + 1.0
        out = (bracket ** (1.0 / a1) - 1.0) / scale
    return out if out.ndim else float(out)


def priority_loglik(shape: float, scale: float, sample) -> float:
    arr = _check_unit_interval(sample, "sample")
    if arr.size < 1:
        raise ValueError("sample must be non-empty")
    return arr.size * math.log(_norm_const(shape, scale)) \
        + shape * float(np.sum(np.log1p(scale * arr)))


def priority_loglik_grad(shape: float, scale: float, sample) -> np.ndarray:
    """Analytic gradient of the log-likelihood wrt (shape, scale)."""
    arr = _check_unit_interval(sample, "sample")
    n = arr.size
    a1 = shape + 1.0
    log1p_s = math.log1p(scale)
    sum_log = float(np.sum(np.log1p(scale * arr)))
    sum_frac = float(np.sum(arr / (1.0 + scale * arr)))
    if abs(a1) < _ALPHA_LIMIT_TOL:
        # expansions of d(ln C)/d(shape) and d(ln C)/d(scale) about shape = -1
        d_shape = -0.5 * log1p_s
        d_scale = 1.0 / scale - 1.0 / ((1.0 + scale) * log1p_s)
    else:
        pow_term = (1.0 + scale) ** a1
        denom = pow_term - 1.0
        d_shape = 1.0 / a1 - pow_term * log1p_s / denom
        d_scale = 1.0 / scale - a1 * (1.0 + scale) ** shape / denom
    return np.array([n * d_shape + sum_log, n * d_scale + shape * sum_frac])


def hyp2f1(a: float, b: float, c: float, z: float,
           rtol: float = 1e-12, max_terms: int = 500_000) -> float:
    """Gauss hypergeometric series sum_k (a)_k (b)_k / (c)_k z^k / k!.

    Plain series only, valid for |z| < 1; raises Hyp2f1Error with the
    partial sum when the series overflows or the term budget runs out.
    """
    if abs(z) >= 1.0:
        raise ValueError(f"series requires |z| < 1, got z={z}")
    if c <= 0 and c == int(c):
        raise ValueError(f"c must not be a nonpositive integer, got {c}")
    total = 1.0
    term = 1.0
    quiet = 0
    for k in range(max_terms):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z
        total += term
        if not math.isfinite(total):
            raise Hyp2f1Error(f"series overflowed at term {k + 1}", total, k + 1)
        if abs(term) <= rtol * max(abs(total), 1e-300):
            quiet += 1
            if quiet >= 2:
                return total
        else:
            quiet = 0
    raise Hyp2f1Error(f"no convergence within {max_terms} terms", total, max_terms)


def expected_depth(inputs: DepthModelInputs, hazard: float) -> float:
    """Expected one-side book depth of the constant-rate reference model.

    With nu = limit_rate/hazard, delta = market_rate/hazard and
    q = market_mean_size/limit_mean_size:

        sigma_M * ( nu/q - delta + delta q^(nu/(1-q)) / F )

    where F is the hypergeometric term.  The size ratio must satisfy
    |1 - q| < 1; q = 1 exactly is a removable singularity the caller
    resolves by perturbing q.
    """
    if hazard <= 0:
        raise ValueError(f"hazard must be > 0, got {hazard}")
    q = inputs.size_ratio
    if q == 1.0:
        raise RemovableSingularityError(
            "size ratio q = 1 exactly; perturb one mean size by ~1e-6")
    if abs(1.0 - q) >= 1.0:
        raise ValueError(f"size ratio q={q} outside the convergent regime (0 < q < 2)")
    nu = inputs.limit_rate / hazard
    delta = inputs.market_rate / hazard
    exponent = nu / (1.0 - q)
    f = hyp2f1(delta, -exponent, 1.0 + delta, 1.0 - q)
    if f == 0.0 or not math.isfinite(f):
        raise CancellationError(f"hypergeometric term unusable: {f}")
    depth = inputs.market_mean_size * (nu / q - delta + delta * q ** exponent / f)
    if not math.isfinite(depth):
        raise CancellationError(f"non-finite depth at hazard={hazard}")
    return depth


def calibrate_theta(inputs: DepthModelInputs, target_depth: float,
                    lo: float = 1e-6, hi: float = 1e3,
                    rtol: float = 1e-6) -> float:
    """Hazard such that expected_depth equals the target, by bisection.

    Scans hazards log-spaced over [lo, hi] for a bracket (depth decreases
    with the hazard); scan points where the series is not evaluable are
    skipped.  Raises UnbracketableError with the scanned values when no
    bracket exists.
    """
    if target_depth <= 0:
        raise ValueError(f"target depth must be > 0, got {target_depth}")
    n_scan = max(int(math.ceil(4 * math.log10(hi / lo))) + 1, 2)
    grid = np.geomspace(lo, hi, n_scan)
    scanned: list[tuple[float, float]] = []
    for theta in grid:
        try:
            scanned.append((float(theta), expected_depth(inputs, float(theta))))
        except (Hyp2f1Error, CancellationError, OverflowError):
            continue
    bracket = None
    for (t_lo, q_lo), (t_hi, q_hi) in zip(scanned, scanned[1:]):
        if q_lo >= target_depth >= q_hi:
            bracket = (t_lo, t_hi)
            break
    if bracket is None:
        raise UnbracketableError(
            f"target depth {target_depth} not bracketed in [{lo}, {hi}]", scanned)
    t_lo, t_hi = bracket
    while (t_hi - t_lo) > rtol * t_lo:
        mid = math.sqrt(t_lo * t_hi)
        if expected_depth(inputs, mid) >= target_depth:
            t_lo = mid
        else:
            t_hi = mid
    return math.sqrt(t_lo * t_hi)
