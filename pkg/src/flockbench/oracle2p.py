"""Closed-form two-particle solutions for psi(r) = (1 + r)^-beta.

For two agents on a line the differences ``x = x1 - x2``, ``v = v1 - v2`` obey
``x' = v``, ``v' = -K psi(|x|) v`` and hence ``v(t) + K int_{x0}^{x(t)} psi = v0``.
The critical initial velocity ``K int_{x0}^inf psi`` separates flocking,
same-velocity divergence and different-velocity divergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DivergenceError, DomainError, NotCriticalError

CRITICAL_TOL = 1e-12


class Regime(str, Enum):
    SUBCRITICAL = "Subcritical"
    CRITICAL = "Critical"
    SUPERCRITICAL = "Supercritical"


@dataclass(frozen=True)
class TwoParticleCase:
    x0: float
    v0: float
    K: float
    beta: float

    def __post_init__(self):
        if not (self.x0 >= 0 and self.v0 >= 0 and self.K >= 0 and self.beta >= 0):
            raise DomainError("two-particle case needs x0, v0, K, beta >= 0")

    def psi(self, r):
        return (1.0 + np.abs(r)) ** (-self.beta)

    def primitive(self, a, b):
        """``int_a^b psi(y) dy`` for 0 <= a, b."""
        if self.beta == 1.0:
            return math.log((1.0 + b) / (1.0 + a))
        g = 1.0 - self.beta
        return ((1.0 + b) ** g - (1.0 + a) ** g) / g


@dataclass(frozen=True)
class Classification:
    regime: Regime
    divergent_tail: bool = False


def _require_finite_tail(case):
    if case.beta <= 1.0:
        raise DivergenceError(f"tail integral diverges for beta = {case.beta} <= 1")


def critical_velocity(case: TwoParticleCase) -> float:
    """``K (1 + x0)^(1 - beta) / (beta - 1)``."""
    _require_finite_tail(case)
    return case.K * (1.0 + case.x0) ** (1.0 - case.beta) / (case.beta - 1.0)


def critical_trajectory(case: TwoParticleCase, t):
    """Exact ``(x(t), v(t))`` for data exactly at the critical velocity."""
    vc = critical_velocity(case)
    if abs(case.v0 - vc) > CRITICAL_TOL:
        raise NotCriticalError(f"v0 = {case.v0!r} differs from critical velocity {vc!r}")
    b, K = case.beta, case.K
    base = b * K * np.asarray(t, dtype=float) / (b - 1.0) + (1.0 + case.x0) ** b
    x = base ** (1.0 / b) - 1.0
    v = K / (b - 1.0) * base ** (1.0 / b - 1.0)
    return x, v


def asymptotic_velocity(case: TwoParticleCase) -> float:
    """``v_inf = v0 - K int_{x0}^inf psi`` for supercritical data."""
    vc = critical_velocity(case)
    if case.v0 <= vc:
        raise DomainError(f"v0 = {case.v0!r} is not above the critical velocity {vc!r}")
    return case.v0 - vc


def limit_separation(case: TwoParticleCase) -> float:
    """Final distance ``x_inf`` of subcritical data, from ``K int_{x0}^{x_inf} psi = v0``."""
    if case.v0 == 0:
        return case.x0
    if case.K == 0:
        return math.inf
    b = case.beta
    if b == 1.0:
        return (1.0 + case.x0) * math.exp(case.v0 / case.K) - 1.0
    rest = (1.0 + case.x0) ** (1.0 - b) + case.v0 * (1.0 - b) / case.K
    if rest <= 0:
        return math.inf
    return rest ** (1.0 / (1.0 - b)) - 1.0


def classify(case: TwoParticleCase) -> Classification:
    """Compare v0 with the critical velocity (absolute tolerance 1e-12).

    Fat tails (beta <= 1) are always subcritical and flagged ``divergent_tail``.
    """
    if case.beta <= 1.0:
        return Classification(Regime.SUBCRITICAL, divergent_tail=True)
    vc = critical_velocity(case)
    if abs(case.v0 - vc) <= CRITICAL_TOL:
        return Classification(Regime.CRITICAL)
    return Classification(Regime.SUBCRITICAL if case.v0 < vc else Regime.SUPERCRITICAL)


def conservation_residual(case: TwoParticleCase, x, v):
    """``v + K int_{x0}^{x} psi - v0``; zero along exact solutions."""
    x = np.asarray(x, dtype=float)
    if case.beta == 1.0:
        prim = np.log((1.0 + x) / (1.0 + case.x0))
    else:
        g = 1.0 - case.beta
        prim = ((1.0 + x) ** g - (1.0 + case.x0) ** g) / g
    return np.asarray(v) + case.K * prim - case.v0


def integrate_reduced(case: TwoParticleCase, h: float, t_end: float, sample_every: int = 1):
    """RK4 on ``x' = v, v' = -K psi(x) v``; returns arrays ``t, x, v``.

    Scalar loop: the system is two-dimensional, so plain floats beat numpy here.
    """
    if not h > 0:
        raise DomainError("step must be positive")
    steps = int(math.ceil(t_end / h - 1e-9))
    sample_every = max(1, int(sample_every))
    K, b = case.K, case.beta
    x, v = float(case.x0), float(case.v0)
    ts, xs, vs = [0.0], [x], [v]
    for k in range(1, steps + 1):
        a1 = -K * (1.0 + abs(x)) ** -b * v
        x2 = x + 0.5 * h * v
        v2 = v + 0.5 * h * a1
        a2 = -K * (1.0 + abs(x2)) ** -b * v2
        x3 = x + 0.5 * h * v2
        v3 = v + 0.5 * h * a2
        a3 = -K * (1.0 + abs(x3)) ** -b * v3
        x4 = x + h * v3
        v4 = v + h * a3
        a4 = -K * (1.0 + abs(x4)) ** -b * v4
        x += h / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4)
        v += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        if k % sample_every == 0 or k == steps:
            ts.append(k * h)
            xs.append(x)
            vs.append(v)
    return np.array(ts), np.array(xs), np.array(vs)


def as_ensemble_data(case: TwoParticleCase):
    """Symmetric two-agent initial data (positions, velocities) realising the case."""
    return (np.array([[case.x0 / 2.0], [-case.x0 / 2.0]]),
            np.array([[case.v0 / 2.0], [-case.v0 / 2.0]]))
