"""State containers, communication kernels and the norms/diameters used everywhere.

Positions and velocities are stored as ``(N, d)`` float arrays.  Containers are
frozen dataclasses whose arrays are marked read-only, so they can be shared
between threads and trajectories without copying.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import special
from scipy.spatial.distance import pdist

from .errors import ConfigurationError, DomainError, IndeterminateTailError

__all__ = [
    "AgentState",
    "Ensemble",
    "Kernel",
    "DiagnosticsRecord",
    "eval_kernel",
    "kernel_tail_integral",
    "kernel_integral",
    "diameters",
    "diameter_pairs",
    "sup_norms",
]

PLAIN = "power_plain"
SQUARED = "power_squared"
CONSTANT = "constant"
TABULATED = "tabulated"

# integer codes shared with the compiled kernels
FAMILY_CODES = {PLAIN: 0, SQUARED: 1, CONSTANT: 2, TABULATED: 3}


def _frozen(a, ndim=None, name="array"):
    arr = np.array(a, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ConfigurationError(f"{name} must have {ndim} dimensions, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


class AgentState(NamedTuple):
    x: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class Ensemble:
    """Positions ``x`` and velocities ``v`` of N agents in d dimensions at ``time``.

    ``masses`` is optional; when present each entry is positive and they sum to 1.
    One-dimensional input of length N is promoted to shape ``(N, 1)``.
    """

    x: np.ndarray
    v: np.ndarray
    masses: Optional[np.ndarray] = None
    time: float = 0.0

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        v = np.array(self.v, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if v.ndim == 1:
            v = v[:, None]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ConfigurationError(f"positions must have shape (N, d), got {x.shape}")
        if x.shape != v.shape:
            raise ConfigurationError(
                f"positions {x.shape} and velocities {v.shape} differ in shape"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise ConfigurationError("non-finite coordinate in ensemble")
        if self.time < 0 or not math.isfinite(self.time):
            raise ConfigurationError(f"time must be finite and >= 0, got {self.time}")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "v", _frozen(v))
        if self.masses is not None:
            m = np.array(self.masses, dtype=float).reshape(-1)
            if m.shape[0] != x.shape[0]:
                raise ConfigurationError(f"{m.shape[0]} masses for {x.shape[0]} agents")
            if np.any(m <= 0) or not np.all(np.isfinite(m)):
                raise ConfigurationError("masses must be positive and finite")
            if abs(m.sum() - 1.0) > 1e-12:
                raise ConfigurationError(f"masses sum to {m.sum()!r}, expected 1")
            object.__setattr__(self, "masses", _frozen(m))

    @property
    def n_agents(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def agents(self) -> list[AgentState]:
        return [AgentState(self.x[i], self.v[i]) for i in range(self.n_agents)]

    def __len__(self):
        return self.n_agents

    def __getitem__(self, i) -> AgentState:
        return AgentState(self.x[i], self.v[i])

    def replace(self, **changes) -> "Ensemble":
        fields = {"x": self.x, "v": self.v, "masses": self.masses, "time": self.time}
        fields.update(changes)
        return Ensemble(**fields)

    @classmethod
    def from_agents(cls, agents: Sequence[AgentState], masses=None, time=0.0):
        if not agents:
            raise ConfigurationError("ensemble needs at least one agent")
        dims = {len(np.atleast_1d(a.x)) for a in agents} | {len(np.atleast_1d(a.v)) for a in agents}
        if len(dims) != 1:
            raise ConfigurationError("agents do not share one dimension")
        x = np.array([np.atleast_1d(a.x) for a in agents], dtype=float)
        v = np.array([np.atleast_1d(a.v) for a in agents], dtype=float)
        return cls(x, v, masses, time)


@dataclass(frozen=True)
class Kernel:
    """Communication weight psi(r) for r >= 0.

    Families::

        power_plain     psi(r) = (1 + r)**(-beta)
        power_squared   psi(r) = (1 + r**2)**(-beta)
        constant        psi(r) = c
        tabulated       piecewise-linear through (r_k, psi_k), r_0 = 0

    Beyond the last sample a tabulated kernel either decays like
    ``psi_last * ((1 + r) / (1 + r_last))**(-tail_exponent)`` or, when no
    exponent is given, is held at ``psi_last``.  Use the constructors below.
    """

    family: str
    beta: float = 0.0
    c: float = 1.0
    r: Optional[np.ndarray] = field(default=None, compare=False)
    samples: Optional[np.ndarray] = field(default=None, compare=False)
    tail_exponent: Optional[float] = None
    amplitude: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILY_CODES:
            raise ConfigurationError(f"unknown kernel family {self.family!r}")
        if self.family in (PLAIN, SQUARED) and not (self.beta >= 0 and math.isfinite(self.beta)):
            raise ConfigurationError(f"kernel exponent must be >= 0, got {self.beta}")
        if not (self.amplitude > 0 and math.isfinite(self.amplitude)):
            raise ConfigurationError(f"kernel amplitude must be positive, got {self.amplitude}")
        if self.family == CONSTANT and not (self.c > 0 and math.isfinite(self.c)):
            raise ConfigurationError(f"constant kernel needs c > 0, got {self.c}")
        if self.family == TABULATED:
            self._validate_table()

    def _validate_table(self):
        if self.r is None or self.samples is None:
            raise ConfigurationError("tabulated kernel needs sample points")
        r = np.array(self.r, dtype=float)
        p = np.array(self.samples, dtype=float)
        if r.ndim != 1 or r.shape != p.shape or r.size < 2:
            raise ConfigurationError("tabulated kernel needs >= 2 matching samples")
        if r[0] != 0.0:
            raise ConfigurationError("tabulated kernel must start at r = 0")
        if np.any(np.diff(r) <= 0):
            raise ConfigurationError("sample abscissae must be strictly increasing")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ConfigurationError("kernel samples must be finite and nonnegative")
        if np.any(np.diff(p) > 0):
            raise ConfigurationError("kernel samples must be non-increasing")
        if self.tail_exponent is not None and not self.tail_exponent >= 0:
            raise ConfigurationError("tail exponent must be >= 0")
        object.__setattr__(self, "r", _frozen(r))
        object.__setattr__(self, "samples", _frozen(p))

    @classmethod
    def power_plain(cls, beta: float) -> "Kernel":
        return cls(PLAIN, beta=float(beta))

    @classmethod
    def power_squared(cls, beta: float) -> "Kernel":
        return cls(SQUARED, beta=float(beta))

    @classmethod
    def constant(cls, c: float = 1.0) -> "Kernel":
        return cls(CONSTANT, c=float(c))

    @classmethod
    def tabulated(cls, r, samples, tail_exponent=None) -> "Kernel":
        return cls(TABULATED, r=r, samples=samples,
                   tail_exponent=None if tail_exponent is None else float(tail_exponent))

    def __call__(self, r):
        """Vectorised evaluation; no domain check (see :func:`eval_kernel`)."""
        r = np.asarray(r, dtype=float)
        if self.family == PLAIN:
            return self.amplitude * (1.0 + r) ** (-self.beta)
        if self.family == SQUARED:
            return self.amplitude * (1.0 + r * r) ** (-self.beta)
        if self.family == CONSTANT:
            return np.full_like(r, self.c)
        out = np.interp(r, self.r, self.samples)
        if self.tail_exponent is not None:
            r_last, p_last = self.r[-1], self.samples[-1]
            beyond = r > r_last
            out = np.where(beyond, p_last * ((1.0 + r) / (1.0 + r_last)) ** (-self.tail_exponent), out)
        return out

    def scaled(self, factor: float) -> "Kernel":
        """The same kernel multiplied by ``factor > 0``."""
        if not factor > 0:
            raise ConfigurationError("scale factor must be positive")
        if self.family == CONSTANT:
            return Kernel.constant(self.c * factor)
        if self.family == TABULATED:
            return Kernel.tabulated(self.r, self.samples * factor, self.tail_exponent)
        return Kernel(self.family, beta=self.beta, amplitude=self.amplitude * factor)

    @property
    def code(self) -> int:
        return FAMILY_CODES[self.family]

    def packed(self):
        """Arguments for the compiled kernels: (code, beta, c, table_r, table_psi, tail)."""
        if self.family == TABULATED:
            tr = np.ascontiguousarray(self.r)
            tp = np.ascontiguousarray(self.samples)
        else:
            tr = tp = np.zeros(1)
        tail = math.nan if self.tail_exponent is None else self.tail_exponent
        c = self.amplitude if self.family in (PLAIN, SQUARED) else self.c
        return self.code, float(self.beta), float(c), tr, tp, float(tail)

    @property
    def strictly_positive(self) -> bool:
        if self.family != TABULATED:
            return True
        return self.samples[-1] > 0

    def describe(self) -> str:
        if self.family == PLAIN:
            return f"(1+r)^-{self.beta:g}"
        if self.family == SQUARED:
            return f"(1+r^2)^-{self.beta:g}"
        if self.family == CONSTANT:
            return f"{self.c:g}"
        return f"tabulated[{self.r.size} samples]"


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    Dx: float
    Dv: float
    x_sup: float
    v_sup: float
    kinetic_energy: float = 0.0
    potential_energy: float = 0.0
    lyapunov_plus: float = 0.0
    lyapunov_minus: float = 0.0

    CSV_COLUMNS = ("t", "Dx", "Dv", "x_sup", "v_sup", "E_k", "E_p", "L_plus", "L_minus")

    def as_row(self) -> tuple:
        return (self.time, self.Dx, self.Dv, self.x_sup, self.v_sup, self.kinetic_energy,
                self.potential_energy, self.lyapunov_plus, self.lyapunov_minus)


def eval_kernel(kernel: Kernel, r: float) -> float:
    """Return psi(r); raises :class:`DomainError` for negative r."""
    r = float(r)
    if r < 0 or math.isnan(r):
        raise DomainError(f"kernel argument must be >= 0, got {r}")
    return float(kernel(r))


# ---------------------------------------------------------------------------
# integrals of psi(scale * r)**power


def _check_power(power):
    if power not in (1, 2):
        raise DomainError(f"power must be 1 or 2, got {power}")


def _squared_primitive(gamma, b):
    """int_0^b (1 + u^2)^-gamma du."""
    if b == 0:
        return 0.0
    return float(b * special.hyp2f1(0.5, gamma, 1.5, -b * b))


def _squared_tail(gamma, b):
    """int_b^inf (1 + u^2)^-gamma du for gamma > 1/2, via the incomplete beta function."""
    a = gamma - 0.5
    w = 1.0 / (1.0 + b * b)
    return float(0.5 * special.beta(a, 0.5) * special.betainc(a, 0.5, w))


def _table_segments_integral(kernel, lo, hi, power):
    """Exact integral of the piecewise-linear table (or its square) over [lo, hi]."""
    r, p = kernel.r, kernel.samples
    hi_t = min(hi, r[-1])
    if hi_t <= lo:
        return 0.0
    knots = np.concatenate(([lo], r[(r > lo) & (r < hi_t)], [hi_t]))
    vals = np.interp(knots, r, p)
    dx = np.diff(knots)
    y0, y1 = vals[:-1], vals[1:]
    if power == 1:
        return float(np.sum(dx * (y0 + y1) / 2.0))
    return float(np.sum(dx * (y0 * y0 + y0 * y1 + y1 * y1) / 3.0))


def _table_tail_integral(kernel, lo, hi, power):
    """Integral of the extension beyond the last sample over [max(lo, r_last), hi]."""
    r_last, p_last = kernel.r[-1], kernel.samples[-1]
    lo = max(lo, r_last)
    if hi <= lo or p_last == 0.0:
        return 0.0
    q = kernel.tail_exponent
    if q is None:
        if math.isinf(hi):
            raise IndeterminateTailError(
                "tabulated kernel is positive at its last sample and has no declared tail exponent"
            )
        return p_last ** power * (hi - lo)
    g = q * power
    a = (1.0 + lo) / (1.0 + r_last)
    coef = p_last ** power * (1.0 + r_last)
    if math.isinf(hi):
        return math.inf if g <= 1 else coef * a ** (1 - g) / (g - 1)
    b = (1.0 + hi) / (1.0 + r_last)
    if g == 1:
        return coef * math.log(b / a)
    return coef * (b ** (1 - g) - a ** (1 - g)) / (1 - g)


def _unit_integral(kernel: Kernel, lo: float, hi: float, power: int) -> float:
    """int_lo^hi psi(u)**power du with hi possibly infinite; inf when divergent."""
    fam = kernel.family
    amp = kernel.amplitude ** power
    if fam == CONSTANT:
        return math.inf if math.isinf(hi) else kernel.c ** power * (hi - lo)
    if fam == PLAIN:
        g = kernel.beta * power
        if math.isinf(hi):
            return math.inf if g <= 1 else amp * (1.0 + lo) ** (1 - g) / (g - 1)
        if g == 1:
            return amp * math.log((1.0 + hi) / (1.0 + lo))
        return amp * ((1.0 + hi) ** (1 - g) - (1.0 + lo) ** (1 - g)) / (1 - g)
    if fam == SQUARED:
        g = kernel.beta * power
        if math.isinf(hi):
            return math.inf if 2 * g <= 1 else amp * _squared_tail(g, lo)
        if g > 0.5 and lo > 1.0:
            # difference of tails keeps precision far out
            return amp * (_squared_tail(g, lo) - _squared_tail(g, hi))
        return amp * (_squared_primitive(g, hi) - _squared_primitive(g, lo))
    return _table_segments_integral(kernel, lo, hi, power) + _table_tail_integral(kernel, lo, hi, power)


def kernel_tail_integral(kernel: Kernel, lower: float, scale: float = 1.0, power: int = 1) -> float:
    """``int_lower^inf psi(scale * r)**power dr``.

    Power-law families use closed forms (incomplete beta for the squared form);
    tabulated kernels are integrated exactly segment by segment plus their
    declared tail.  Returns ``math.inf`` when the integral diverges and raises
    :class:`IndeterminateTailError` when a table gives no handle on its tail.
    """
    _check_power(power)
    if lower < 0:
        raise DomainError(f"lower limit must be >= 0, got {lower}")
    if not scale > 0:
        raise DomainError(f"scale must be positive, got {scale}")
    return _unit_integral(kernel, scale * lower, math.inf, power) / scale


def kernel_integral(kernel: Kernel, lower: float, upper: float, scale: float = 1.0,
                    power: int = 1) -> float:
    """Finite ``int_lower^upper psi(scale * r)**power dr`` (signed if upper < lower)."""
    _check_power(power)
    if lower < 0 or upper < 0:
        raise DomainError("integration limits must be >= 0")
    if not scale > 0:
        raise DomainError(f"scale must be positive, got {scale}")
    if upper < lower:
        return -kernel_integral(kernel, upper, lower, scale, power)
    if upper == lower:
        return 0.0
    return _unit_integral(kernel, scale * lower, scale * upper, power) / scale


# ---------------------------------------------------------------------------
# diameters and norms


def diameters(e: Ensemble) -> tuple[float, float]:
    """Spatial and velocity diameters ``(max |x_i - x_j|, max |v_i - v_j|)``."""
    if e.n_agents == 1:
        return 0.0, 0.0
    return float(pdist(e.x).max()), float(pdist(e.v).max())


def _first_max_pair(points):
    n = points.shape[0]
    if n == 1:
        return (0, 0)
    k = int(np.argmax(pdist(points)))  # pdist order is lexicographic in (i, j), i < j
    i = int(n - 2 - math.floor(math.sqrt(-8 * k + 4 * n * (n - 1) - 7) / 2.0 - 0.5))
    j = int(k + i + 1 - n * (n - 1) // 2 + (n - i) * ((n - i) - 1) // 2)
    return (i, j)


def diameter_pairs(e: Ensemble) -> tuple[tuple[int, int], tuple[int, int]]:
    """Index pairs realising Dx and Dv; ties go to the lexicographically first pair."""
    return _first_max_pair(e.x), _first_max_pair(e.v)


def sup_norms(e: Ensemble) -> tuple[float, float]:
    """``(|x|_inf, |v|_inf)`` after shifting both to zero arithmetic mean."""
    xs = e.x - e.x.mean(axis=0)
    vs = e.v - e.v.mean(axis=0)
    return float(np.sqrt((xs * xs).sum(axis=1)).max()), float(np.sqrt((vs * vs).sum(axis=1)).max())
