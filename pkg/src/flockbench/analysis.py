"""Sufficient flocking conditions, Lyapunov and energy functionals, rate fits.

Each ``check_*`` function evaluates one published sufficient condition on
initial data and returns a :class:`ConditionReport` with ``holds`` equal to
``measured < threshold``.  Divergent kernel tails give ``threshold = inf``
(unconditional flocking).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .core import (
    DiagnosticsRecord,
    Ensemble,
    Kernel,
    diameters,
    eval_kernel,
    kernel_integral,
    kernel_tail_integral,
    sup_norms,
)
from .errors import ConfigurationError, DegenerateInputError, DomainError, PositivityError


@dataclass
class ConditionReport:
    name: str
    holds: bool
    threshold: float
    measured: float
    extras: dict = field(default_factory=dict)

    @property
    def unconditional(self) -> bool:
        return math.isinf(self.threshold) and self.threshold > 0

    def to_text(self) -> str:
        """Flat ``key = value`` block, one line per field."""
        lines = [f"[condition {self.name}]",
                 f"holds = {'true' if self.holds else 'false'}",
                 f"threshold = {_fmt(self.threshold)}",
                 f"measured = {_fmt(self.measured)}"]
        if self.unconditional:
            lines.append("unconditional = true")
        for key, val in self.extras.items():
            lines.append(f"{key} = {_fmt(val)}")
        return "\n".join(lines) + "\n"


def _fmt(val):
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, (float, np.floating)):
        return repr(float(val))
    return str(val)


class Outcome(str, Enum):
    FLOCKING = "Flocking"
    DISPERSING = "Dispersing"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class OutcomeLabel:
    label: Outcome
    final_dv: float
    dx_growth_rate: float

    def to_text(self) -> str:
        return (f"outcome = {self.label.value}  final_Dv = {self.final_dv!r}  "
                f"Dx_growth_rate = {self.dx_growth_rate!r}")


# ---------------------------------------------------------------------------
# functionals


def _centered(a):
    return a - a.mean(axis=0)


def kinetic_energy(e: Ensemble, masses: Optional[np.ndarray] = None) -> float:
    """``1/2 sum |v_i - vbar|^2`` (mass-weighted with mass-weighted mean if given)."""
    if masses is None:
        vs = _centered(e.v)
        return 0.5 * float(np.sum(vs * vs))
    vbar = masses @ e.v
    vs = e.v - vbar
    return 0.5 * float(masses @ np.sum(vs * vs, axis=1))


def _pair_distances(x):
    diff = x[None, :, :] - x[:, None, :]
    return diff, np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def energy(e: Ensemble, K2: float, R: float, spring: str = "unit") -> tuple[float, float]:
    """Kinetic and potential energy of the bonding model in the zero-sum frame.

    For the default unit spring ``E_p = K2/(4N) sum_{i != j} (|x_j - x_i| - 2R)^2``.
    For ``spring="literal"`` the matching potential is
    ``K2/(2N) sum_{i,j} (r^3/3 - R r^2 + 4R^3/3)``, shifted to vanish at r = 2R.
    """
    n = e.n_agents
    e_k = kinetic_energy(e)
    _, dist = _pair_distances(e.x)
    if spring == "unit":
        stretch = (dist - 2.0 * R) ** 2
        np.fill_diagonal(stretch, 0.0)
        e_p = K2 / (4.0 * n) * float(np.sum(stretch))
    elif spring == "literal":
        phi = dist ** 3 / 3.0 - R * dist ** 2 + 4.0 * R ** 3 / 3.0
        np.fill_diagonal(phi, 0.0)
        e_p = K2 / (2.0 * n) * float(np.sum(phi))
    else:
        raise ConfigurationError(f"unknown spring {spring!r}")
    return e_k, e_p


def energy_production(e: Ensemble, K0: float, K1: float, kernel: Kernel) -> float:
    """Rate ``P = -dE/dt`` of energy dissipation in the bonding model.

    ``P = K0/(2N) sum psi_ij |v_j - v_i|^2 + K1/(2N) sum <v_j - v_i, x_j - x_i>^2 / |x_j - x_i|``;
    the second sum is over distinct pairs and is nonnegative.
    """
    n = e.n_agents
    diff, dist = _pair_distances(e.x)
    vdiff = e.v[None, :, :] - e.v[:, None, :]
    vsq = np.einsum("ijk,ijk->ij", vdiff, vdiff)
    p = K0 / (2.0 * n) * float(np.sum(kernel(dist) * vsq))
    if K1:
        proj = np.einsum("ijk,ijk->ij", vdiff, diff)
        np.fill_diagonal(dist, 1.0)
        p += K1 / (2.0 * n) * float(np.sum(proj * proj / dist))
    return p


def lyapunov_pm(e: Ensemble, K: float, kernel: Kernel) -> tuple[float, float]:
    """``|v|_inf +/- (K/2) int_0^{2|x|_inf} psi(s) ds`` in the zero-sum frame."""
    x_sup, v_sup = sup_norms(e)
    budget = 0.5 * K * kernel_integral(kernel, 0.0, 2.0 * x_sup)
    return v_sup + budget, v_sup - budget


# ---------------------------------------------------------------------------
# sufficient conditions


def _solve_budget(kernel, K, x0, v_sup, scale=2.0):
    """Radius where ``(K/2) int_{x0}^{r} psi(scale s) ds`` reaches ``v_sup``."""
    if v_sup == 0.0:
        return x0

    def residual(r):
        return 0.5 * K * kernel_integral(kernel, x0, r, scale=scale) - v_sup

    gap = max(1.0, x0)
    hi = x0 + gap
    while residual(hi) < 0:
        gap *= 2.0
        hi = x0 + gap
        if gap > 1e300:
            raise DomainError("Lyapunov budget never exhausted")
    return brentq(residual, x0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def check_symmetric(e0: Ensemble, K: float, kernel: Kernel) -> ConditionReport:
    """``|v0|_inf < (K/2) int_{|x0|_inf}^inf psi(2r) dr`` with ``|x0|_inf > 0``.

    Extras: ``K_star`` (smallest coupling for which the condition holds),
    ``x_M`` (bound on ``|x(t)|_inf`` from the Lyapunov budget), ``psi_2xM`` and
    ``decay_rate_bound = K psi(2 x_M)`` (guaranteed exponential rate of ``|v|_inf``).
    """
    x_sup, v_sup = sup_norms(e0)
    if x_sup == 0.0:
        raise DegenerateInputError("condition requires |x0|_inf > 0")
    tail = kernel_tail_integral(kernel, x_sup, scale=2.0, power=1)
    threshold = 0.0 if K == 0 else 0.5 * K * tail
    holds = v_sup < threshold
    extras = {"x0_sup": x_sup, "tail_integral": tail,
              "K_star": 0.0 if math.isinf(tail) else 2.0 * v_sup / tail}
    if holds:
        x_m = _solve_budget(kernel, K, x_sup, v_sup)
        psi_m = eval_kernel(kernel, 2.0 * x_m)
        extras.update(x_M=x_m, psi_2xM=psi_m, decay_rate_bound=K * psi_m)
    return ConditionReport("symmetric", holds, threshold, v_sup, extras)


def check_motsch_tadmor(e0: Ensemble, kernel: Kernel) -> ConditionReport:
    """``D(v0) < int_{D(x0)}^inf psi(r)^2 dr`` for a strictly positive kernel."""
    if not kernel.strictly_positive:
        raise PositivityError("Motsch-Tadmor condition requires a strictly positive kernel")
    dx, dv = diameters(e0)
    threshold = kernel_tail_integral(kernel, dx, scale=1.0, power=2)
    return ConditionReport("motsch_tadmor", dv < threshold, threshold, dv,
                           {"Dx0": dx, "Dv0": dv})


def check_bonding(e0: Ensemble, K2: float, R: float, kernel: Kernel) -> ConditionReport:
    """Energy and communication hypotheses of the bonding-force flocking theorem.

    ``E(0) < K2 R^2 N`` and ``psi_m = psi(2R + sqrt(2 N E(0) / K2)) > 0`` (the
    minimum over the interval sits at its right end because psi is
    non-increasing).  A vanishing ``psi_m`` sets the threshold to ``-inf``.
    """
    if not (K2 > 0 and R > 0):
        raise DomainError("bonding condition requires K2 > 0 and R > 0")
    n = e0.n_agents
    e_k, e_p = energy(e0, K2, R)
    e_0 = e_k + e_p
    radius = 2.0 * R + math.sqrt(2.0 * n * e_0 / K2)
    psi_m = eval_kernel(kernel, radius)
    threshold = K2 * R * R * n if psi_m > 0 else -math.inf
    return ConditionReport("bonding", e_0 < threshold, threshold, e_0,
                           {"E_k": e_k, "E_p": e_p, "psi_m": psi_m,
                            "confinement_radius": radius})


def check_hydro(e0: Ensemble, kernel: Kernel, K: float = 1.0) -> ConditionReport:
    """``R^u_0 < K int_{R^x_0}^inf psi(s) ds`` for a mass-carrying particle ensemble."""
    if e0.masses is None:
        raise ConfigurationError("hydrodynamic condition requires masses")
    rx, ru = diameters(e0)
    tail = kernel_tail_integral(kernel, rx)
    threshold = 0.0 if K == 0 else K * tail
    return ConditionReport("hydro", ru < threshold, threshold, ru, {"Rx0": rx, "Ru0": ru})


def check_discrete(kernel: Kernel, n_agents: int, graph=None, graphs=None,
                   window: Optional[int] = None) -> ConditionReport:
    """Critical exponent for unconditional flocking of the discrete maps.

    Compares the exponent of a ``(1 + r^2)^-beta`` kernel with the topology's
    threshold: 1/2 for all-to-all or hierarchical leadership, ``1/(2L)`` for
    rooted leadership of depth L, ``1/(2(N-1)^2)`` when every switched graph is
    rooted (alternating leaders), and ``1/(2 (N-1) T0)`` for joint rooted
    leadership over windows of length ``window = T0``.
    """
    from .topology import is_hierarchical, is_rooted, leader_distance, roots

    if kernel.family != "power_squared":
        raise ConfigurationError("discrete exponent check needs a (1 + r^2)^-beta kernel")
    extras = {}
    if graphs is not None:
        if all(roots(g) for g in graphs):
            threshold = 1.0 / (2.0 * (n_agents - 1) ** 2) if n_agents > 1 else math.inf
            extras["topology"] = "alternating"
        elif window is not None:
            threshold = 1.0 / (2.0 * (n_agents - 1) * window)
            extras.update(topology="joint_rooted", window=window)
        else:
            raise ConfigurationError("joint rooted switching needs a window length")
    elif graph is None:
        threshold = 0.5
        extras["topology"] = "all_to_all"
    elif is_hierarchical(graph):
        threshold = 0.5
        extras.update(topology="hierarchical", depth=leader_distance(graph)[1])
    elif is_rooted(graph):
        depth = leader_distance(graph)[1]
        threshold = 1.0 / (2.0 * depth)
        extras.update(topology="rooted", depth=depth)
    else:
        threshold = -math.inf
        extras["topology"] = "unrooted"
    return ConditionReport("discrete_exponent", kernel.beta < threshold, threshold,
                           kernel.beta, extras)


# ---------------------------------------------------------------------------
# trajectory post-processing


@dataclass(frozen=True)
class DecayFit:
    rate: float
    r_squared: float
    n_points: int


def _window(t, window):
    n = len(t)
    if isinstance(window, tuple):
        lo, hi = window
        return (t >= lo) & (t <= hi)
    mask = np.zeros(n, dtype=bool)
    if isinstance(window, (int, np.integer)) and not isinstance(window, bool):
        count = int(window)
    else:
        if not 0 < window <= 1:
            raise DomainError(f"window fraction must lie in (0, 1], got {window}")
        count = max(2, int(round(window * n)))
    mask[max(0, n - count):] = True
    return mask


def fit_decay_rate(t: Sequence[float], dv: Sequence[float], window=0.5) -> DecayFit:
    """Least-squares exponential rate ``-d log Dv / dt`` over a trailing window.

    ``window`` is a fraction of the samples, a sample count, or a ``(t0, t1)``
    time range.
    """
    t = np.asarray(t, dtype=float)
    dv = np.asarray(dv, dtype=float)
    mask = _window(t, window)
    tw, dw = t[mask], dv[mask]
    if tw.size < 2:
        raise DomainError("decay fit needs at least two samples in the window")
    if np.any(dw <= 0):
        raise DomainError("non-positive Dv inside the fit window")
    y = np.log(dw)
    slope, intercept = np.polyfit(tw, y, 1)
    resid = y - (slope * tw + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return DecayFit(float(-slope), r2, int(tw.size))


def fit_records_decay(records, floor: float = 1e-12, window=0.5) -> DecayFit:
    """:func:`fit_decay_rate` on the records whose Dv exceeds ``floor * Dv(0)``.

    Samples below the floor sit at round-off level and would flatten the fit.
    """
    t = np.array([r.time for r in records])
    dv = np.array([r.Dv for r in records])
    if dv.size == 0 or dv[0] <= 0:
        raise DomainError("decay fit needs a positive initial Dv")
    keep = dv > floor * dv[0]
    return fit_decay_rate(t[keep], dv[keep], window)


def _as_series(traj):
    if isinstance(traj, tuple) and len(traj) == 3:
        return tuple(np.asarray(a, dtype=float) for a in traj)
    recs = list(traj)
    if recs and isinstance(recs[0], DiagnosticsRecord):
        return (np.array([r.time for r in recs]), np.array([r.Dx for r in recs]),
                np.array([r.Dv for r in recs]))
    raise ConfigurationError("expected DiagnosticsRecords or a (t, Dx, Dv) tuple")


def classify_outcome(traj, tol: float = 1e-6, growth_factor: float = 1e-3) -> OutcomeLabel:
    """Label a run Flocking / Dispersing / Undetermined.

    Flocking: final Dv below ``tol`` and the Dx slope over the trailing half at
    most ``growth_factor * Dv(0)``.  Dispersing: Dv stays at or above ``tol``
    over the trailing half while Dx grows faster than that slope.
    ``traj`` is a list of records or a ``(t, Dx, Dv)`` tuple.
    """
    t, dx, dv = _as_series(traj)
    if t.size < 10:
        final = float(dv[-1]) if dv.size else math.nan
        return OutcomeLabel(Outcome.UNDETERMINED, final, math.nan)
    half = t.size // 2
    slope = float(np.polyfit(t[half:], dx[half:], 1)[0])
    limit = growth_factor * max(float(dv[0]), tol)
    final = float(dv[-1])
    if final < tol and slope <= limit:
        label = Outcome.FLOCKING
    elif float(dv[half:].min()) >= tol and slope > limit:
        label = Outcome.DISPERSING
    else:
        label = Outcome.UNDETERMINED
    return OutcomeLabel(label, final, slope)
