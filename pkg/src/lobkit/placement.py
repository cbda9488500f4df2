"""Limit-order placement laws: where new orders land relative to the best quote.

Two continuous densities over tick offsets (a location-scale Student and a
three-component normal mixture), their integration onto the integer tick
grid, and sampling from the discretized law.  Offsets are measured from the
same-side best quote; positive offsets point into the book, negative ones
into the spread.  Crossing prices are not handled here: the simulator
resamples any inadmissible draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate

DEFAULT_SUPPORT = (-20, 200)  # tick range covering all fitted laws' mass


@dataclass(frozen=True, slots=True)
class StudentParams:
    """Location-scale Student law: location/scale in ticks, nu > 0 dof."""

    loc: float
    scale: float
    dof: float

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError(f"scale must be > 0, got {self.scale}")
        if self.dof <= 0:
            raise ValueError(f"dof must be > 0, got {self.dof}")


@dataclass(frozen=True, slots=True)
class MixtureParams:
    """Normal mixture; weights sum to 1, components in ascending-mean order."""

    weights: tuple[float, ...]
    means: tuple[float, ...]
    stds: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.weights) == len(self.means) == len(self.stds)):
            raise ValueError("weights, means, stds must have equal length")
        if any(w <= 0 for w in self.weights):
            raise ValueError("all weights must be > 0")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {sum(self.weights)}, expected 1")
        if any(s <= 0 for s in self.stds):
            raise ValueError("all stds must be > 0")

    @property
    def n_components(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class TickPmf:
    """Probabilities of integer tick offsets; covered mass can be < 1."""

    offsets: np.ndarray
    probs: np.ndarray
    truncated_mass: float

    def renormalized(self) -> "TickPmf":
        total = self.probs.sum()
        return TickPmf(self.offsets, self.probs / total, 0.0)


def student_pdf(params: StudentParams, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    nu, mu, sigma = params.dof, params.loc, params.scale
    lognorm = (math.lgamma((nu + 1) / 2) - math.lgamma(nu / 2)
               - 0.5 * math.log(math.pi * nu) - math.log(sigma))
    z = (x - mu) / sigma
    out = np.exp(lognorm - (nu + 1) / 2 * np.log1p(z * z / nu))
    return out if out.ndim else float(out)


def mixture_pdf(params: MixtureParams, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for w, m, s in zip(params.weights, params.means, params.stds):
        z = (x - m) / s
        out = out + w * np.exp(-0.5 * z * z) / (s * math.sqrt(2 * math.pi))
    return out if out.ndim else float(out)


def placement_pdf(params, x):
    if isinstance(params, StudentParams):
        return student_pdf(params, x)
    if isinstance(params, MixtureParams):
        return mixture_pdf(params, x)
    raise TypeError(f"unsupported placement params: {type(params).__name__}")


def discretize_to_ticks(density: Callable[[float], float], n_min: int, n_max: int) -> TickPmf:
    """Integrate a continuous density over unit cells centred on each tick.

    P(n) is the mass of [n-0.5, n+0.5]; the mass left outside
    [n_min-0.5, n_max+0.5] is reported as ``truncated_mass``.
    """
    if n_min > n_max:
        raise ValueError(f"n_min {n_min} > n_max {n_max}")
    offsets = np.arange(n_min, n_max + 1)
    probs = np.empty(offsets.shape)
    for i, n in enumerate(offsets):
        probs[i], _ = integrate.quad(density, n - 0.5, n + 0.5,
                                     epsabs=1e-12, epsrel=1e-10, limit=200)
    lo_tail, _ = integrate.quad(density, -np.inf, n_min - 0.5,
                                epsabs=1e-12, limit=200)
    hi_tail, _ = integrate.quad(density, n_max + 0.5, np.inf,
                                epsabs=1e-12, limit=200)
    return TickPmf(offsets, probs, lo_tail + hi_tail)


def _normal_cdf(x) -> np.ndarray:
    return 0.5 * (1.0 + np.vectorize(math.erf)(np.asarray(x) / math.sqrt(2.0)))


def _cell_masses(params, edges: np.ndarray) -> np.ndarray:
    """Exact CDF increments over cell edges for the parametric laws."""
    if isinstance(params, MixtureParams):
        cdf = np.zeros_like(edges, dtype=float)
        for w, m, s in zip(params.weights, params.means, params.stds):
            cdf += w * _normal_cdf((edges - m) / s)
        return np.diff(cdf)
    if isinstance(params, StudentParams):
        from scipy import stats
        cdf = stats.t.cdf(edges, params.dof, loc=params.loc, scale=params.scale)
        return np.diff(cdf)
    raise TypeError(f"unsupported placement params: {type(params).__name__}")


@lru_cache(maxsize=32)
def _cached_pmf(params, n_min: int, n_max: int) -> TickPmf:
    offsets = np.arange(n_min, n_max + 1)
    edges = np.arange(n_min, n_max + 2) - 0.5
    probs = _cell_masses(params, edges)
    truncated = 1.0 - probs.sum()
    return TickPmf(offsets, probs, truncated).renormalized()


def placement_pmf(params, support: tuple[int, int] = DEFAULT_SUPPORT) -> TickPmf:
    """Renormalized tick pmf of a placement law over the bounded offset range.

    Uses exact CDF increments, so degenerate (near point-mass) components
    keep their full cell mass; agrees with discretize_to_ticks to quadrature
    accuracy for regular parameters.
    """
    return _cached_pmf(params, support[0], support[1])


def sample_offset(params, rng: np.random.Generator, size=None,
                  support: tuple[int, int] = DEFAULT_SUPPORT):
    """Draw integer tick offsets from the discretized placement law."""
    pmf = placement_pmf(params, support)
    cum = np.cumsum(pmf.probs)
    cum[-1] = 1.0
    u = rng.random(size)
    idx = np.searchsorted(cum, u, side="right")
    out = pmf.offsets[idx]
    return out if size is not None else int(out)
