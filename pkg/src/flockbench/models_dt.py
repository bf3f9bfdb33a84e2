"""Discrete-time Cucker-Smale maps under leadership topologies.

All variants share the simultaneous update::

    x_i(t+1) = x_i(t) + h v_i(t)
    v_i(t+1) = v_i(t) + h sum_j phi_ij(x(t)) (v_j(t) - v_i(t))  [+ h delta_i(t) q_i]

``phi_ij = psi(|x_i - x_j|)`` for every pair (all-to-all), for ``j`` in the
leader set of ``i`` (leadership / switching), or ``H psi`` (preference).
Coupling constants are absorbed into ``h`` and the kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._backend import impl
from .analysis import kinetic_energy
from .core import DiagnosticsRecord, Ensemble, Kernel, diameters, sup_norms
from .errors import ConfigurationError, DomainError, StabilityError
from .topology import Digraph, SwitchingSignal, leader_distance, verify_contraction

ALL_TO_ALL = "all_to_all"
LEADERSHIP = "leadership"
PREFERENCE = "preference"
SWITCHING = "switching"


@dataclass(frozen=True)
class DtModel:
    h: float
    kernel: Kernel
    variant: str = ALL_TO_ALL
    graph: Optional[Digraph] = None
    H: float = 1.0
    q: Optional[np.ndarray] = field(default=None, compare=False)
    nu: float = math.inf
    graphs: tuple = ()
    signal: Optional[SwitchingSignal] = field(default=None, compare=False)

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ConfigurationError(f"time step must be positive, got {self.h}")
        if self.variant in (LEADERSHIP, PREFERENCE) and self.graph is None:
            raise ConfigurationError(f"{self.variant} model needs a graph")
        if self.variant == PREFERENCE:
            self._validate_preference()
        elif self.variant == SWITCHING:
            if not self.graphs or self.signal is None:
                raise ConfigurationError("switching model needs graphs and a signal")
            if len({g.n_vertices for g in self.graphs}) != 1:
                raise ConfigurationError("switching graphs must share the vertex set")
            self.signal.validate(0, len(self.graphs))
            object.__setattr__(self, "graphs", tuple(self.graphs))
        elif self.variant not in (ALL_TO_ALL, LEADERSHIP):
            raise ConfigurationError(f"unknown discrete variant {self.variant!r}")

    def _validate_preference(self):
        if not self.H > 0:
            raise ConfigurationError("interaction strength H must be positive")
        g = self.graph
        led = {i for _, i in g.edges}
        missing = [i for i in range(1, g.n_vertices) if i not in led]
        if missing:
            raise ConfigurationError(f"followers {missing} have empty leader sets")
        if any(i == 0 for _, i in g.edges):
            raise ConfigurationError("agent 0 must not be led in the preference model")
        if self.q is None:
            raise ConfigurationError("preference model needs preferred accelerations q")
        q = np.array(self.q, dtype=float)
        if q.ndim != 2 or q.shape[0] != g.n_vertices:
            raise ConfigurationError(f"q must have shape ({g.n_vertices}, d)")
        norms = np.linalg.norm(q, axis=1)
        if np.any(norms > self.nu * (1 + 1e-12)):
            i = int(np.argmax(norms))
            raise ConfigurationError(f"|q_{i}| = {norms[i]:g} exceeds bound nu = {self.nu:g}")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    # constructors -------------------------------------------------------
    @classmethod
    def all_to_all(cls, h, kernel):
        return cls(h, kernel, ALL_TO_ALL)

    @classmethod
    def leadership(cls, h, kernel, graph):
        return cls(h, kernel, LEADERSHIP, graph=graph)

    @classmethod
    def preference(cls, h, kernel, graph, H, q, nu=math.inf):
        return cls(h, kernel, PREFERENCE, graph=graph, H=H, q=q, nu=nu)

    @classmethod
    def switching(cls, h, kernel, graphs, signal):
        return cls(h, kernel, SWITCHING, graphs=tuple(graphs), signal=signal)

    # --------------------------------------------------------------------
    def active_graph(self, t: int) -> Optional[Digraph]:
        if self.variant == SWITCHING:
            return self.graphs[self.signal(t)]
        return self.graph

    def weights(self, x: np.ndarray, t: int = 0) -> np.ndarray:
        """``phi[i, j]`` at positions ``x`` and step ``t`` (zero diagonal)."""
        W = impl.psi_matrix(np.ascontiguousarray(x, dtype=float), *self.kernel.packed())
        if self.variant == ALL_TO_ALL:
            np.fill_diagonal(W, 0.0)
            return W
        g = self.active_graph(t)
        if g.n_vertices != x.shape[0]:
            raise ConfigurationError(f"graph has {g.n_vertices} vertices, ensemble {x.shape[0]} agents")
        W = W * g.adjacency()
        if self.variant == PREFERENCE:
            W *= self.H
        return W

    def check_stability(self, W: np.ndarray, step: Optional[int] = None) -> None:
        deg = W.sum(axis=1)
        i = int(np.argmax(deg))
        if self.h * deg[i] >= 1.0:
            raise StabilityError(i, deg[i], self.h, step)

    def max_stable_step(self, n_agents: int) -> float:
        """Largest h with ``h * sum_j phi_ij < 1`` for every state (uses phi <= psi(0))."""
        p0 = float(self.kernel(0.0)) * (self.H if self.variant == PREFERENCE else 1.0)
        if self.variant == ALL_TO_ALL:
            deg = n_agents - 1
        else:
            gs = self.graphs if self.variant == SWITCHING else (self.graph,)
            deg = max(int(g.adjacency().sum(axis=1).max()) for g in gs)
        return math.inf if deg == 0 else 1.0 / (deg * p0)

    def preference_term(self, v: np.ndarray) -> np.ndarray:
        """``delta_i q_i`` with delta_i the mean speed mismatch to the leaders of i."""
        A = self.graph.adjacency()
        n_lead = A.sum(axis=1)
        mism = np.linalg.norm(v[None, :, :] - v[:, None, :], axis=2)
        delta = np.zeros(v.shape[0])
        has = n_lead > 0
        delta[has] = (A * mism).sum(axis=1)[has] / n_lead[has]
        return delta[:, None] * self.q


def step(model: DtModel, e: Ensemble, t: int = 0) -> Ensemble:
    """One step of the discrete map; both updates read the time-t state."""
    x, v = e.x, e.v
    W = model.weights(x, t)
    model.check_stability(W, t)
    v_new = v + model.h * np.einsum("ij,ijk->ik", W, v[None, :, :] - v[:, None, :])
    if model.variant == PREFERENCE:
        v_new = v_new + model.h * model.preference_term(v)
    return Ensemble(x + model.h * v, v_new, e.masses, e.time + 1)


def flocking_matrix(e: Ensemble, graph: Digraph, h: float, kernel: Kernel,
                    H: float = 1.0) -> np.ndarray:
    """``P_t = I - h L_t`` acting on velocity fluctuations ``v_i - v_0``, i >= 1."""
    model = DtModel(h, kernel, LEADERSHIP, graph=graph) if H == 1.0 else \
        DtModel(h, kernel, PREFERENCE, graph=graph, H=H,
                q=np.zeros((graph.n_vertices, e.dim)))
    W = model.weights(e.x)
    model.check_stability(W)
    deg = W.sum(axis=1)
    Wf = W[1:, 1:]
    return np.eye(len(Wf)) - h * (np.diag(deg[1:]) - Wf)


def min_edge_weight(e: Ensemble, graph: Digraph, kernel: Kernel, H: float = 1.0) -> float:
    """``phi_m(t)``: smallest weight over the edges of ``graph`` at the current state."""
    if not graph.edges:
        return 0.0
    W = impl.psi_matrix(np.ascontiguousarray(e.x), *kernel.packed())
    return H * min(W[i, j] for j, i in graph.edges)


def dt_diagnostics(e: Ensemble, t: float) -> DiagnosticsRecord:
    Dx, Dv = diameters(e)
    x_sup, v_sup = sup_norms(e)
    return DiagnosticsRecord(float(t), Dx, Dv, x_sup, v_sup, kinetic_energy(e))


@dataclass
class DtTrajectory:
    x: np.ndarray
    v: np.ndarray
    records: list
    contraction_margins: Optional[np.ndarray] = None

    @property
    def final(self) -> Ensemble:
        return Ensemble(self.x[-1], self.v[-1], time=float(len(self.records) - 1))

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def simulate(model: DtModel, e0: Ensemble, T: int,
             observer: Optional[Callable[[DiagnosticsRecord], None]] = None,
             store_every: int = 1, contraction_eps: Optional[float] = None) -> DtTrajectory:
    """Iterate :func:`step` ``T`` times from ``e0``.

    With ``contraction_eps`` set (leadership or preference models on a graph
    rooted at 0) the epsilon-norm contraction margin of ``P_t`` is recorded at
    every step.
    """
    if T < 0:
        raise DomainError("T must be >= 0")
    if model.variant == SWITCHING:
        model.signal.validate(T, len(model.graphs))
    store_every = max(1, int(store_every))
    ell = None
    margins = []
    if contraction_eps is not None:
        if model.variant not in (LEADERSHIP, PREFERENCE):
            raise ConfigurationError("contraction tracking needs a fixed leadership graph")
        ell = leader_distance(model.graph)[0][1:]
    e = Ensemble(e0.x, e0.v, time=0.0)
    xs, vs, records = [np.array(e.x)], [np.array(e.v)], []

    def record(e, t):
        rec = dt_diagnostics(e, t)
        records.append(rec)
        if observer is not None:
            observer(rec)

    record(e, 0)
    for t in range(T):
        if ell is not None:
            P = flocking_matrix(e, model.graph, model.h, model.kernel, model.H)
            phi_m = min_edge_weight(e, model.graph, model.kernel, model.H)
            margins.append(verify_contraction(P, ell, contraction_eps, model.h, phi_m)[1])
        e = step(model, e, t)
        record(e, t + 1)
        if (t + 1) % store_every == 0 or t + 1 == T:
            xs.append(np.array(e.x))
            vs.append(np.array(e.v))
    return DtTrajectory(np.array(xs), np.array(vs), records,
                        np.array(margins) if ell is not None else None)
