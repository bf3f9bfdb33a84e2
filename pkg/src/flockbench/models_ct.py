"""Continuous-time Cucker-Smale variants and a fixed-step RK4 integrator.

Four right-hand sides are provided, all with ``dx_i/dt = v_i``:

* symmetric      ``dv_i = (K/N) sum_j psi_ij (v_j - v_i)``
* motsch_tadmor  ``dv_i = K sum_j psi_ij (v_j - v_i) / sum_k psi_ik``
* bonding        alignment + velocity projection + spring toward distance 2R
* weighted       ``dv_i = K sum_j m_j psi_ij (v_j - v_i)``, a Lagrangian
                 particle discretisation of the hydrodynamic model

The pairwise sums run in the compiled extension when it is available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import analysis
from ._backend import impl
from .core import DiagnosticsRecord, Ensemble, Kernel, diameters, sup_norms
from .errors import ConfigurationError, DomainError, ModelError

SYMMETRIC = "symmetric"
MOTSCH_TADMOR = "motsch_tadmor"
BONDING = "bonding"
WEIGHTED = "weighted"
VARIANTS = (SYMMETRIC, MOTSCH_TADMOR, BONDING, WEIGHTED)

# pairs closer than this are a collision for the bonding model
COLLISION_DISTANCE = 1e-10


class Derivative(NamedTuple):
    dx: np.ndarray
    dv: np.ndarray


@dataclass(frozen=True)
class CtModel:
    variant: str
    kernel: Kernel
    K: float = 1.0
    K0: float = 0.0
    K1: float = 0.0
    K2: float = 0.0
    R: float = 1.0
    spring: str = "unit"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown model variant {self.variant!r}")
        for name in ("K", "K0", "K1", "K2"):
            val = getattr(self, name)
            if not (val >= 0 and math.isfinite(val)):
                raise ConfigurationError(f"coupling {name} must be finite and >= 0, got {val}")
        if self.variant == BONDING:
            if not self.R > 0:
                raise ConfigurationError(f"bonding radius R must be > 0, got {self.R}")
            if self.spring not in ("unit", "literal"):
                raise ConfigurationError(f"spring must be 'unit' or 'literal', got {self.spring!r}")

    @classmethod
    def symmetric(cls, K, kernel):
        return cls(SYMMETRIC, kernel, K=K)

    @classmethod
    def motsch_tadmor(cls, K, kernel):
        return cls(MOTSCH_TADMOR, kernel, K=K)

    @classmethod
    def bonding(cls, K0, K1, K2, R, kernel, spring="unit"):
        """Bonding-force model.

        ``spring="unit"`` uses the force ``(|x_j - x_i| - 2R)(x_j - x_i)/|x_j - x_i|``,
        whose potential is ``K2/(4N) sum (|x_j - x_i| - 2R)^2`` so that the
        energy ``E_k + E_p`` is dissipated.  ``spring="literal"`` drops the
        normalisation; its potential is then ``K2/(2N) sum (r^3/3 - R r^2)``
        (see :func:`flockbench.analysis.energy`).
        """
        return cls(BONDING, kernel, K0=K0, K1=K1, K2=K2, R=R, spring=spring)

    @classmethod
    def weighted(cls, K, kernel):
        return cls(WEIGHTED, kernel, K=K)

    @property
    def max_coupling(self) -> float:
        if self.variant == BONDING:
            return max(self.K0, self.K1, self.K2)
        return self.K

    def default_step(self) -> float:
        """``1e-2 * min(1, 1/K_max)``."""
        k = self.max_coupling
        return 1e-2 * (1.0 if k <= 1.0 else 1.0 / k)

    def validate(self, e: Ensemble) -> None:
        if self.variant == WEIGHTED and e.masses is None:
            raise ConfigurationError("weighted model requires an ensemble with masses")

    def accelerator(self, n_agents: int, masses: Optional[np.ndarray] = None):
        """``f(x, v) -> dv/dt`` with the kernel and weights bound once."""
        pk = self.kernel.packed()
        K = self.K
        if self.variant in (SYMMETRIC, WEIGHTED):
            if self.variant == SYMMETRIC:
                w = np.full(n_agents, 1.0 / n_agents)
            elif masses is None:
                raise ConfigurationError("weighted model requires masses")
            else:
                w = np.ascontiguousarray(masses, dtype=float)
            align = impl.alignment
            return lambda x, v: align(x, v, w, K, *pk)
        if self.variant == MOTSCH_TADMOR:
            mt = impl.motsch_tadmor
            return lambda x, v: mt(x, v, K, *pk)
        bond = impl.bonding
        args = (self.K0, self.K1, self.K2, self.R, self.spring == "literal", COLLISION_DISTANCE)
        return lambda x, v: bond(x, v, *args, *pk)

    def acceleration(self, x: np.ndarray, v: np.ndarray, masses: Optional[np.ndarray] = None):
        """``dv/dt`` for raw ``(N, d)`` arrays."""
        x = np.ascontiguousarray(x, dtype=float)
        v = np.ascontiguousarray(v, dtype=float)
        return self.accelerator(x.shape[0], masses)(x, v)

    def derivative(self, e: Ensemble) -> Derivative:
        self.validate(e)
        return Derivative(np.array(e.v), self.acceleration(e.x, e.v, e.masses))


def rhs_symmetric(e: Ensemble, K: float, kernel: Kernel) -> Derivative:
    return CtModel.symmetric(K, kernel).derivative(e)


def rhs_motsch_tadmor(e: Ensemble, K: float, kernel: Kernel) -> Derivative:
    return CtModel.motsch_tadmor(K, kernel).derivative(e)


def rhs_bonding(e: Ensemble, K0: float, K1: float, K2: float, R: float, kernel: Kernel,
                spring: str = "unit") -> Derivative:
    return CtModel.bonding(K0, K1, K2, R, kernel, spring).derivative(e)


def rhs_weighted(e: Ensemble, K: float, kernel: Kernel) -> Derivative:
    return CtModel.weighted(K, kernel).derivative(e)


def diagnostics(model: CtModel, e: Ensemble) -> DiagnosticsRecord:
    """Observables of one state; Lyapunov fields only for the symmetric model."""
    Dx, Dv = diameters(e)
    x_sup, v_sup = sup_norms(e)
    masses = e.masses if model.variant == WEIGHTED else None
    e_k = analysis.kinetic_energy(e, masses)
    e_p = 0.0
    l_plus = l_minus = 0.0
    if model.variant == BONDING:
        e_p = analysis.energy(e, model.K2, model.R, spring=model.spring)[1]
    elif model.variant == SYMMETRIC:
        l_plus, l_minus = analysis.lyapunov_pm(e, model.K, model.kernel)
    return DiagnosticsRecord(e.time, Dx, Dv, x_sup, v_sup, e_k, e_p, l_plus, l_minus)


@dataclass
class Trajectory:
    """Stored states and diagnostics of one run.

    ``x`` and ``v`` hold every ``store_every``-th state (including the first
    and last); ``records`` hold every ``record_every``-th diagnostics record.
    """

    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    records: list
    masses: Optional[np.ndarray] = None
    steps: int = 0
    h: float = 0.0

    @property
    def final(self) -> Ensemble:
        return Ensemble(self.x[-1], self.v[-1], self.masses, float(self.times[-1]))

    def ensemble(self, k: int) -> Ensemble:
        return Ensemble(self.x[k], self.v[k], self.masses, float(self.times[k]))

    def series(self, name: str) -> np.ndarray:
        """A diagnostics column as an array (``"time"``, ``"Dv"``, ...)."""
        return np.array([getattr(r, name) for r in self.records])


def rk4_step(model: CtModel, x, v, h, masses=None, acc=None):
    """One classical RK4 step; ``acc`` is an optional pre-bound accelerator."""
    if acc is None:
        acc = model.accelerator(x.shape[0], masses)
    a1 = acc(x, v)
    x2, v2 = x + 0.5 * h * v, v + 0.5 * h * a1
    a2 = acc(x2, v2)
    x3, v3 = x + 0.5 * h * v2, v + 0.5 * h * a2
    a3 = acc(x3, v3)
    x4, v4 = x + h * v3, v + h * a3
    a4 = acc(x4, v4)
    x_new = x + (h / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + v4)
    v_new = v + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    return x_new, v_new


def integrate(model: CtModel, e0: Ensemble, h: Optional[float] = None, steps: int = 100,
              observer: Optional[Callable[[DiagnosticsRecord], None]] = None,
              record_every: int = 1, store_every: int = 1) -> Trajectory:
    """Advance ``e0`` by ``steps`` classical RK4 steps of size ``h``.

    ``observer`` is called with each computed :class:`DiagnosticsRecord`.
    Model errors (collisions, singular weights) are re-raised with the index
    of the step being attempted in ``err.step``.
    """
    if h is None:
        h = model.default_step()
    if not h > 0:
        raise DomainError(f"step h must be > 0, got {h}")
    if steps < 0:
        raise DomainError(f"steps must be >= 0, got {steps}")
    record_every = max(1, int(record_every))
    store_every = max(1, int(store_every))
    model.validate(e0)
    masses = e0.masses
    x = np.array(e0.x, dtype=float, order="C")
    v = np.array(e0.v, dtype=float, order="C")
    t0 = e0.time
    acc = model.accelerator(x.shape[0], masses)

    times, xs, vs, records = [t0], [x.copy()], [v.copy()], []

    def record(k, x, v):
        rec = diagnostics(model, Ensemble(x, v, masses, t0 + k * h))
        records.append(rec)
        if observer is not None:
            observer(rec)

    record(0, x, v)
    for k in range(1, steps + 1):
        try:
            x, v = rk4_step(model, x, v, h, masses, acc)
        except ModelError as err:
            err.step = k
            err.args = (f"{err.args[0] if err.args else err} (step {k})",)
            raise
        # one reduction per array; any inf or nan propagates into the sum
        if not math.isfinite(float(x.sum()) + float(v.sum())):
            err = ModelError(f"state became non-finite (step {k})")
            err.step = k
            raise err
        if k % record_every == 0 or k == steps:
            record(k, x, v)
        if k % store_every == 0 or k == steps:
            times.append(t0 + k * h)
            xs.append(x.copy())
            vs.append(v.copy())
    return Trajectory(np.array(times), np.array(xs), np.array(vs), records, masses, steps, h)
