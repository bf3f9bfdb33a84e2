"""Empirical measures, velocity moments, transport distances and N-convergence studies.

The particle system is the characteristic flow of the kinetic equation, so the
empirical measure of an ensemble evolved by :mod:`flockbench.models_ct` is an
exact measure-valued solution.  Distances between clouds are the order-1
transport (W1) distance, which bounds the bounded-Lipschitz distance from above.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.stats import truncnorm

from .core import Ensemble
from .errors import ConfigurationError, CoverageError, DomainError
from .models_ct import CtModel, integrate

MAX_ASSIGNMENT_SIZE = 512
STUDY_COLUMNS = ("N", "trial", "distance", "runtime_s", "kind")


@dataclass(frozen=True)
class Marginal:
    """One-dimensional law on ``[low, high]``: uniform or truncated Gaussian."""

    low: float
    high: float
    kind: str = "uniform"
    mean: float = 0.0
    std: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.low) and math.isfinite(self.high) and self.low <= self.high):
            raise ConfigurationError(f"marginal needs finite low <= high, got [{self.low}, {self.high}]")
        if self.kind not in ("uniform", "truncnorm"):
            raise ConfigurationError(f"unknown marginal kind {self.kind!r}")
        if self.kind == "truncnorm" and not self.std > 0:
            raise ConfigurationError("truncated Gaussian needs std > 0")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.low == self.high:
            return np.full(n, self.low)
        if self.kind == "uniform":
            return rng.uniform(self.low, self.high, n)
        a = (self.low - self.mean) / self.std
        b = (self.high - self.mean) / self.std
        out = truncnorm.rvs(a, b, loc=self.mean, scale=self.std, size=n, random_state=rng)
        return np.clip(out, self.low, self.high)

    def expectation(self) -> float:
        if self.kind == "uniform" or self.low == self.high:
            return 0.5 * (self.low + self.high)
        a = (self.low - self.mean) / self.std
        b = (self.high - self.mean) / self.std
        return float(truncnorm.mean(a, b, loc=self.mean, scale=self.std))


@dataclass(frozen=True)
class DensitySpec:
    """Product law with ``d`` position marginals and ``d`` velocity marginals."""

    x: tuple
    v: tuple

    def __post_init__(self):
        if len(self.x) != len(self.v) or not self.x:
            raise ConfigurationError("position and velocity marginals must share dimension d >= 1")
        object.__setattr__(self, "x", tuple(self.x))
        object.__setattr__(self, "v", tuple(self.v))

    @classmethod
    def uniform_box(cls, x_low, x_high, v_low, v_high, dim: int = 1) -> "DensitySpec":
        return cls(tuple(Marginal(x_low, x_high) for _ in range(dim)),
                   tuple(Marginal(v_low, v_high) for _ in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.x)

    def means(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([m.expectation() for m in self.x]),
                np.array([m.expectation() for m in self.v]))

    def contains(self, e: Ensemble) -> bool:
        lo = np.array([m.low for m in self.x + self.v])
        hi = np.array([m.high for m in self.x + self.v])
        z = np.hstack([e.x, e.v])
        return bool(np.all(z >= lo) and np.all(z <= hi))


def sample(spec: DensitySpec, N: int, seed) -> Ensemble:
    """``N`` i.i.d. agents from ``spec``; ``seed`` is an int, SeedSequence or Generator."""
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = np.column_stack([m.draw(rng, N) for m in spec.x])
    v = np.column_stack([m.draw(rng, N) for m in spec.v])
    return Ensemble(x, v)


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniform atomic measure on phase-space points ``(x_i, v_i)``."""

    points: np.ndarray = field(repr=False)
    dim: int

    @classmethod
    def from_ensemble(cls, e: Ensemble) -> "EmpiricalMeasure":
        pts = np.hstack([e.x, e.v])
        pts.setflags(write=False)
        return cls(pts, e.dim)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.n_points, 1.0 / self.n_points)

    def integrate(self, test: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> float:
        """``int phi d mu`` for ``phi(x, v)`` vectorised over rows."""
        d = self.dim
        return float(np.mean(test(self.points[:, :d], self.points[:, d:])))


@dataclass(frozen=True)
class Grid:
    """Uniform spatial bins: ``shape[k]`` cells over ``[low[k], high[k]]``."""

    low: tuple
    high: tuple
    shape: tuple

    def __post_init__(self):
        if not (len(self.low) == len(self.high) == len(self.shape)):
            raise ConfigurationError("grid bounds and shape must share dimension")
        if any(h <= l for l, h in zip(self.low, self.high)) or any(s < 1 for s in self.shape):
            raise ConfigurationError("grid needs high > low and at least one bin per axis")

    def edges(self) -> list[np.ndarray]:
        return [np.linspace(l, h, s + 1) for l, h, s in zip(self.low, self.high, self.shape)]


@dataclass
class Moments:
    rho: np.ndarray
    momentum: np.ndarray
    energy: np.ndarray


def moments(mu: EmpiricalMeasure, grid: Grid) -> Moments:
    """Binned mass, momentum and energy densities of ``mu`` (as bin totals)."""
    d = mu.dim
    if len(grid.shape) != d:
        raise ConfigurationError(f"grid has dimension {len(grid.shape)}, measure {d}")
    x, v = mu.points[:, :d], mu.points[:, d:]
    lo, hi = np.array(grid.low), np.array(grid.high)
    outside = np.any((x < lo) | (x > hi), axis=1)
    if np.any(outside):
        raise CoverageError(f"{int(outside.sum())} points lie outside the grid")
    w = mu.weights
    edges = grid.edges()
    rho = np.histogramdd(x, bins=edges, weights=w)[0]
    mom = np.stack([np.histogramdd(x, bins=edges, weights=w * v[:, k])[0] for k in range(d)],
                   axis=-1)
    en = np.histogramdd(x, bins=edges, weights=w * 0.5 * np.sum(v * v, axis=1))[0]
    return Moments(rho, mom, en)


def w1_distance(mu1: EmpiricalMeasure, mu2: EmpiricalMeasure) -> float:
    """Exact order-1 transport distance between equal-size uniform clouds."""
    n = mu1.n_points
    if mu2.n_points != n:
        raise DomainError(f"W1 needs equal sizes, got {n} and {mu2.n_points}")
    if n > MAX_ASSIGNMENT_SIZE:
        raise DomainError(f"assignment limited to N <= {MAX_ASSIGNMENT_SIZE}, got {n}")
    if mu1.points.shape[1] != mu2.points.shape[1]:
        raise DomainError("measures live in different dimensions")
    cost = cdist(mu1.points, mu2.points)
    rows, cols = linear_sum_assignment(cost)
    # correctly rounded sum, so the result does not depend on argument order
    return math.fsum(cost[rows, cols]) / n


def replicate(mu: EmpiricalMeasure, times: int) -> EmpiricalMeasure:
    """The same measure with every atom repeated ``times`` times."""
    pts = np.repeat(mu.points, times, axis=0)
    pts.setflags(write=False)
    return EmpiricalMeasure(pts, mu.dim)


def w1_unequal(mu1: EmpiricalMeasure, mu2: EmpiricalMeasure) -> float:
    """W1 between uniform clouds of sizes N and M via replication to lcm(N, M)."""
    n, m = mu1.n_points, mu2.n_points
    L = math.lcm(n, m)
    if L > MAX_ASSIGNMENT_SIZE:
        raise DomainError(f"common refinement of {n} and {m} has {L} > {MAX_ASSIGNMENT_SIZE} atoms")
    return w1_distance(replicate(mu1, L // n), replicate(mu2, L // m))


def push_forward(model: CtModel, e0: Ensemble, T: float, h: float) -> Ensemble:
    """Particle flow of ``e0`` up to time ``T``; the empirical measure evolves with it."""
    steps = int(round(T / h))
    if steps == 0:
        return e0
    if not math.isclose(steps * h, T, rel_tol=1e-9):
        raise DomainError(f"horizon {T} is not a multiple of h = {h}")
    return integrate(model, e0, h=h, steps=steps, record_every=steps, store_every=steps).final


@dataclass(frozen=True)
class StudyRow:
    N: int
    trial: int
    distance: float
    runtime_s: float
    kind: str

    def as_row(self) -> tuple:
        return (self.N, self.trial, self.distance, self.runtime_s, self.kind)


def _trial_seed(seed: int, trial: int, N: int, stream: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(trial), int(N), int(stream)])


def _evolve(spec, model, N, T, h, seq):
    e0 = sample(spec, N, seq)
    return EmpiricalMeasure.from_ensemble(push_forward(model, e0, T, h))


# stream ids inside one (seed, trial, N) family
_LADDER, _TWIN, _REFERENCE = 0, 1, 2


def _run_trial(args) -> list[StudyRow]:
    spec, model, Ns, T, h, trial, seed = args
    n_ref = max(Ns)
    t0 = time.perf_counter()
    ref = _evolve(spec, model, n_ref, T, h, _trial_seed(seed, trial, n_ref, _REFERENCE))
    ref_time = time.perf_counter() - t0
    rows = []
    if len(Ns) > 1:
        for N in Ns:
            t0 = time.perf_counter()
            mu = _evolve(spec, model, N, T, h, _trial_seed(seed, trial, N, _LADDER))
            dist = w1_unequal(mu, ref)
            rows.append(StudyRow(N, trial, dist, time.perf_counter() - t0, "ladder"))
    t0 = time.perf_counter()
    twin = _evolve(spec, model, n_ref, T, h, _trial_seed(seed, trial, n_ref, _TWIN))
    dist = w1_distance(twin, ref)
    rows.append(StudyRow(n_ref, trial, dist, time.perf_counter() - t0 + ref_time, "self"))
    return rows


@dataclass
class StudyResult:
    rows: list

    def mean_distances(self) -> dict:
        """Mean ladder distance per N plus the self-distance under key ``"self"``."""
        out = {}
        for kind in ("ladder", "self"):
            by_n = {}
            for r in self.rows:
                if r.kind == kind:
                    by_n.setdefault(r.N, []).append(r.distance)
            for n, ds in sorted(by_n.items()):
                out["self" if kind == "self" else n] = float(np.mean(ds))
        return out

    def decreasing_steps(self) -> tuple[int, int]:
        """Decreases along ladder means followed by the self floor: (count, steps)."""
        m = self.mean_distances()
        seq = [m[n] for n in sorted(k for k in m if k != "self")] + [m["self"]]
        steps = len(seq) - 1
        return sum(b < a for a, b in zip(seq, seq[1:])), steps


def convergence_study(spec: DensitySpec, model: CtModel, Ns: Sequence[int], T: float, h: float,
                      trials: int, seed: int, workers: int = 1) -> StudyResult:
    """Self-convergence of empirical measures in N.

    For every trial, an independent cloud of each size in ``Ns`` is compared
    with a reference cloud of size ``N_ref = max(Ns)`` evolved to time ``T``
    (rows of kind ``ladder``, present when ``Ns`` has more than one entry).
    A further ``N_ref`` cloud against the same reference gives the noise
    floor (kind ``self``).  Random streams depend only on ``(seed, trial, N)``, so the
    result does not depend on ``workers``.
    """
    Ns = sorted({int(n) for n in Ns})
    if not Ns or Ns[0] < 1:
        raise ConfigurationError("Ns must be a non-empty list of positive sizes")
    if trials < 1:
        raise ConfigurationError(f"trials must be >= 1, got {trials}")
    if T < 0 or not h > 0:
        raise ConfigurationError("need T >= 0 and h > 0")
    jobs = [(spec, model, tuple(Ns), T, h, k, seed) for k in range(trials)]
    workers = max(1, int(workers))
    if workers == 1 or trials == 1:
        chunks = [_run_trial(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, trials, os.cpu_count() or 1)) as ex:
            chunks = list(ex.map(_run_trial, jobs))
    rows = [r for c in chunks for r in c if r.kind == "ladder"]
    rows.sort(key=lambda r: (r.N, r.trial))
    rows += [r for c in chunks for r in c if r.kind == "self"]
    return StudyResult(rows)
