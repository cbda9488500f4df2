"""Exponential-quadratic-log state-dependent intensity family.

One functional family serves both order types: the market-order intensity is
driven by (spread, best-quote volume) and the limit-order intensity by
(spread, ten-level depth).  An instance records which volume covariate it was
fitted against.  Rates are events per second; the spread is in integer ticks
so ln(S) >= 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_MAX_EXPONENT = 700.0  # exp() saturates IEEE double just above this


class IntensityError(Exception):
    pass


class InvalidSpreadError(IntensityError):
    pass


class IntensityOverflowError(IntensityError):
    """Exponent too large for a finite rate; signals pathological parameters."""


@dataclass(frozen=True, slots=True)
class IntensityParams:
    """Coefficients of exp(b0 + b1*lnS + b11*lnS^2 + b2*lnv + b22*lnv^2 + b12*lnS*lnv)
    with lnv = ln(1 + volume covariate)."""

    b0: float
    b1: float
    b11: float
    b2: float
    b22: float
    b12: float
    volume_kind: str = "q1"  # "q1" or "Q10": which volume covariate the fit used
    time_unit: str = "second"

    def __post_init__(self):
        if self.volume_kind not in ("q1", "Q10"):
            raise ValueError(f"volume_kind must be 'q1' or 'Q10', got {self.volume_kind!r}")
        for name in ("b0", "b1", "b11", "b2", "b22", "b12"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"non-finite coefficient {name}")

    def as_array(self) -> np.ndarray:
        return np.array([self.b0, self.b1, self.b11, self.b2, self.b22, self.b12])

    @classmethod
    def from_array(cls, beta, volume_kind: str = "q1") -> "IntensityParams":
        b = [float(x) for x in beta]
        if len(b) != 6:
            raise ValueError(f"expected 6 coefficients, got {len(b)}")
        return cls(*b, volume_kind=volume_kind)


def covariate_vector(spread: float, volume: float) -> np.ndarray:
    """Feature vector (1, lnS, lnS^2, ln(1+v), ln(1+v)^2, lnS*ln(1+v))."""
    if spread < 1:
        raise InvalidSpreadError(f"spread must be >= 1 tick, got {spread}")
    if volume < 0:
        raise ValueError(f"volume must be >= 0, got {volume}")
    ls = math.log(spread)
    lv = math.log1p(volume)
    return np.array([1.0, ls, ls * ls, lv, lv * lv, ls * lv])


def design_matrix(spread, volume) -> np.ndarray:
    """Vectorized covariate vectors, one row per observation."""
    s = np.asarray(spread, dtype=float)
    v = np.asarray(volume, dtype=float)
    if np.any(s < 1):
        raise InvalidSpreadError("spread must be >= 1 tick everywhere")
    if np.any(v < 0):
        raise ValueError("volume must be >= 0 everywhere")
    ls = np.log(s)
    lv = np.log1p(v)
    return np.column_stack([np.ones_like(ls), ls, ls * ls, lv, lv * lv, ls * lv])


def eval_state_intensity(params: IntensityParams, spread: float, volume: float) -> float:
    """Rate (events/second) at the given state; strictly positive."""
    exponent = float(params.as_array() @ covariate_vector(spread, volume))
    if exponent > _MAX_EXPONENT:
        raise IntensityOverflowError(
            f"intensity exponent {exponent:.3g} overflows at spread={spread}, "
            f"volume={volume} with coefficients {params.as_array().tolist()}")
    return math.exp(exponent)


def eval_constant_intensity(rate: float) -> float:
    """Homogeneous-Poisson baseline: a state-independent constant rate."""
    if rate <= 0:
        raise IntensityError(f"constant intensity must be > 0, got {rate}")
    return float(rate)
