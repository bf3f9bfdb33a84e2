"""Leadership digraphs, switching signals and the epsilon-weighted matrix norm.

An edge ``(j, i)`` means that agent ``j`` influences agent ``i``; ``j`` is then a
member of the leader set of ``i``.  Vertex 0 is the default root.

Graphs are exchanged as edge lists::

    digraph 3
    0 1
    1 2

where the header gives the number of vertices and each line is one ``j i`` pair.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, NotRootedError


@dataclass(frozen=True)
class Digraph:
    n_vertices: int
    edges: frozenset

    def __init__(self, n_vertices: int, edges: Iterable[tuple[int, int]] = ()):
        n = int(n_vertices)
        if n < 1:
            raise ConfigurationError("digraph needs at least one vertex")
        es = frozenset((int(j), int(i)) for j, i in edges)
        for j, i in es:
            if j == i:
                raise ConfigurationError(f"self-loop at vertex {i}")
            if not (0 <= j < n and 0 <= i < n):
                raise ConfigurationError(f"edge ({j}, {i}) out of range for {n} vertices")
        object.__setattr__(self, "n_vertices", n)
        object.__setattr__(self, "edges", es)

    @classmethod
    def chain(cls, n_vertices: int) -> "Digraph":
        return cls(n_vertices, [(k, k + 1) for k in range(n_vertices - 1)])

    @classmethod
    def star(cls, n_vertices: int, center: int = 0) -> "Digraph":
        return cls(n_vertices, [(center, k) for k in range(n_vertices) if k != center])

    @classmethod
    def complete(cls, n_vertices: int) -> "Digraph":
        return cls(n_vertices, [(j, i) for j in range(n_vertices) for i in range(n_vertices) if i != j])

    def adjacency(self) -> np.ndarray:
        """``A[i, j] = 1`` iff ``j`` influences ``i`` (row = follower)."""
        a = np.zeros((self.n_vertices, self.n_vertices))
        for j, i in self.edges:
            a[i, j] = 1.0
        return a

    def successors(self, j: int) -> list[int]:
        return sorted(i for jj, i in self.edges if jj == j)

    def to_text(self) -> str:
        lines = [f"digraph {self.n_vertices}"]
        lines += [f"{j} {i}" for j, i in sorted(self.edges)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Digraph":
        rows = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
        rows = [r for r in rows if r]
        if not rows or rows[0].split()[0] != "digraph" or len(rows[0].split()) != 2:
            raise ConfigurationError("edge list must start with 'digraph <n_vertices>'")
        try:
            n = int(rows[0].split()[1])
            edges = []
            for r in rows[1:]:
                j, i = r.split()
                edges.append((int(j), int(i)))
        except ValueError as err:
            raise ConfigurationError(f"malformed edge list: {err}") from None
        return cls(n, edges)

    @classmethod
    def read(cls, path) -> "Digraph":
        return cls.from_text(Path(path).read_text())

    def write(self, path) -> None:
        Path(path).write_text(self.to_text())


def leader_set(g: Digraph, i: int) -> set[int]:
    if not 0 <= i < g.n_vertices:
        raise DomainError(f"vertex {i} out of range")
    return {j for j, ii in g.edges if ii == i}


def is_hierarchical(g: Digraph) -> bool:
    """Every edge goes from a lower to a higher index and every i > 0 has a leader."""
    if any(j >= i for j, i in g.edges):
        return False
    led = {i for _, i in g.edges}
    return all(i in led for i in range(1, g.n_vertices))


def _bfs(g: Digraph, root: int) -> list[float]:
    dist = [math.inf] * g.n_vertices
    dist[root] = 0
    succ = {}
    for j, i in g.edges:
        succ.setdefault(j, []).append(i)
    queue = deque([root])
    while queue:
        j = queue.popleft()
        for i in succ.get(j, ()):
            if dist[i] == math.inf:
                dist[i] = dist[j] + 1
                queue.append(i)
    return dist


def is_rooted(g: Digraph, root: int = 0) -> bool:
    """``root`` has no incoming edge and reaches every other vertex."""
    if not 0 <= root < g.n_vertices:
        return False
    if any(i == root for _, i in g.edges):
        return False
    return all(d < math.inf for d in _bfs(g, root))


def roots(g: Digraph) -> list[int]:
    """All vertices at which ``g`` is rooted (at most one for n > 1)."""
    return [r for r in range(g.n_vertices) if is_rooted(g, r)]


def union_graph(gs: Sequence[Digraph]) -> Digraph:
    if not gs:
        raise ConfigurationError("union of an empty list of graphs")
    n = gs[0].n_vertices
    if any(g.n_vertices != n for g in gs):
        raise ConfigurationError("graphs in a union must share the vertex set")
    return Digraph(n, frozenset().union(*(g.edges for g in gs)))


class SwitchingSignal:
    """Map from step index to graph index.

    Periodic signals repeat ``pattern`` forever; explicit schedules cover
    ``[0, len(schedule))`` only.
    """

    def __init__(self, pattern: Sequence[int], periodic: bool = True):
        pattern = [int(k) for k in pattern]
        if not pattern:
            raise ConfigurationError("switching signal needs at least one entry")
        if min(pattern) < 0:
            raise ConfigurationError("graph indices must be >= 0")
        self.pattern = tuple(pattern)
        self.periodic = bool(periodic)

    @classmethod
    def periodic_blocks(cls, n_graphs: int, dwell: int = 1) -> "SwitchingSignal":
        """Cycle through ``0..n_graphs-1`` staying ``dwell`` steps on each."""
        return cls([k for k in range(n_graphs) for _ in range(dwell)], periodic=True)

    @property
    def description(self) -> str:
        return "periodic" if self.periodic else "explicit"

    def __call__(self, t: int) -> int:
        if t < 0:
            raise DomainError("switching signal is defined for t >= 0")
        if self.periodic:
            return self.pattern[t % len(self.pattern)]
        if t >= len(self.pattern):
            raise DomainError(f"explicit switching schedule ends before step {t}")
        return self.pattern[t]

    def validate(self, horizon: int, n_graphs: int) -> None:
        """Raise unless the signal is total on ``[0, horizon)`` with valid indices."""
        if not self.periodic and horizon > len(self.pattern):
            raise ConfigurationError(
                f"explicit schedule of length {len(self.pattern)} shorter than horizon {horizon}")
        if max(self.pattern) >= n_graphs:
            raise ConfigurationError(f"signal refers to graph {max(self.pattern)} of {n_graphs}")

    def __repr__(self):
        return f"SwitchingSignal({list(self.pattern)!r}, periodic={self.periodic})"


def is_joint_rooted(gs: Sequence[Digraph], signal: SwitchingSignal, t1: int, t2: int,
                    root: int = 0) -> bool:
    """Rootedness at ``root`` of the union of graphs active on ``[t1, t2)``."""
    if not t1 < t2:
        raise DomainError("need t1 < t2")
    active = [gs[signal(t)] for t in range(t1, t2)]
    return is_rooted(union_graph(active), root)


def leader_distance(g: Digraph, root: int = 0) -> tuple[np.ndarray, int]:
    """Shortest directed distance from ``root`` to each vertex, and the depth."""
    dist = _bfs(g, root)
    missing = [i for i, d in enumerate(dist) if d == math.inf]
    if missing:
        raise NotRootedError(f"vertices {missing} unreachable from {root}")
    ell = np.array(dist, dtype=int)
    return ell, int(ell.max())


def epsilon_norm(A, ell, eps: float) -> float:
    """``||D A D^-1||_inf`` with ``D = diag(eps**ell)``."""
    if not 0 < eps < 1:
        raise DomainError(f"epsilon must lie in (0, 1), got {eps}")
    A = np.asarray(A, dtype=float)
    ell = np.asarray(ell, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != ell.shape[0]:
        raise ConfigurationError("matrix and distance vector sizes disagree")
    scale = eps ** (ell[:, None] - ell[None, :])
    return float(np.max(np.sum(np.abs(A) * scale, axis=1)))


def verify_contraction(P, ell, eps: float, h: float, phi_m: float) -> tuple[bool, float]:
    """Check ``||P||_eps <= 1 - (1 - eps) h phi_m`` (slack 1e-12); returns (ok, margin)."""
    bound = 1.0 - (1.0 - eps) * h * phi_m
    margin = bound - epsilon_norm(P, ell, eps)
    return margin >= -1e-12, margin
