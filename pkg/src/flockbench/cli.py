"""Scenario runner: ``flockbench run|check|study``.

Scenarios are INI files.  Every section is optional except ``[model]`` and a
source of initial data, and a scenario may start from an embedded preset::

    [scenario]
    preset = theorem-T1-demo

    [run]
    horizon_t = 50

Exit codes: 0 success, 2 invalid scenario, 3 model failure during the run
(collision, step-size instability, blow-up), 4 I/O failure.  Failures print
one line ``flockbench-error code=<n> kind=<kind> message=<json string>`` on
standard error and leave no output files behind.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis, models_dt, oracle2p
from .core import DiagnosticsRecord, Ensemble, Kernel, sup_norms
from .errors import (
    ConfigurationError,
    DegenerateInputError,
    DomainError,
    IndeterminateTailError,
    ModelError,
    NotRootedError,
    PositivityError,
)
from .meanfield import STUDY_COLUMNS, DensitySpec, Marginal, convergence_study
from .models_ct import VARIANTS as CT_VARIANTS
from .models_ct import CtModel, integrate
from .models_dt import DtModel
from .topology import (
    Digraph,
    SwitchingSignal,
    is_hierarchical,
    is_rooted,
    leader_distance,
    roots,
)

EXIT_OK, EXIT_VALIDATION, EXIT_MODEL, EXIT_IO = 0, 2, 3, 4
DT_VARIANTS = ("all_to_all", "leadership", "preference", "switching")

# allowed keys per section; anything else is a validation error
SCHEMA = {
    "scenario": {"name", "preset", "description"},
    "model": {"variant", "kernel", "beta", "c", "table_r", "table_psi", "tail_exponent",
              "K", "K0", "K1", "K2", "R", "spring", "H", "nu", "q"},
    "initial": {"x", "v", "masses", "generator", "n_agents", "dim", "x_half_width",
                "v_half_width", "seed", "velocity_margin", "ring_radius", "swirl_speed",
                "drift", "mass_profile"},
    "run": {"step_h", "horizon_t", "steps_n", "record_every"},
    "topology": {"n_vertices", "edges", "file", "graphs", "graph_files", "signal",
                 "signal_periodic", "window_steps", "contraction_eps"},
    "outputs": {"timeseries", "report", "outcome"},
    "checks": {"conditions", "flocking_tol", "decay_fit", "two_particle"},
    "study": {"Ns", "trials", "horizon_t", "step_h", "seed", "dim", "marginal", "x_low",
              "x_high", "v_low", "v_high", "x_mean", "x_std", "v_mean", "v_std", "output",
              "record_runtime"},
}


def _chain_edges(n: int) -> str:
    return "; ".join(f"{k} {k + 1}" for k in range(n - 1))


PRESETS = {
    "two-particle-critical": """
[scenario]
description = two agents launched exactly at the critical relative speed
[model]
variant = symmetric
kernel = power_plain
beta = 2
K = 1
[initial]
x = 0; 0
v = 0.5; -0.5
[run]
step_h = 0.001
horizon_t = 10
record_every = 10
""",
    "two-particle-supercritical": """
[scenario]
description = two agents launched above the critical relative speed
[model]
variant = symmetric
kernel = power_plain
beta = 2
K = 1
[initial]
x = 0; 0
v = 1; -1
[run]
step_h = 0.001
horizon_t = 10
record_every = 10
""",
    "theorem-T1-demo": """
[scenario]
description = 20 agents in the plane, velocities scaled to half the sufficient-condition threshold
[model]
variant = symmetric
kernel = power_plain
beta = 2
K = 1
[initial]
generator = uniform
n_agents = 20
dim = 2
x_half_width = 1
v_half_width = 1
velocity_margin = 2
seed = 7
[run]
step_h = 0.05
horizon_t = 150
record_every = 10
""",
    "mt-fat-tail": """
[scenario]
description = normalised alignment with a square-non-integrable kernel
[model]
variant = motsch_tadmor
kernel = power_plain
beta = 0.4
K = 1
[initial]
generator = uniform
n_agents = 12
dim = 2
x_half_width = 2
v_half_width = 1
seed = 3
[run]
step_h = 0.01
horizon_t = 30
record_every = 10
""",
    "bonding-ring": """
[scenario]
description = eight agents on a swirling ring with alignment, projection and springs
[model]
variant = bonding
kernel = power_plain
beta = 1
K0 = 1
K1 = 0.5
K2 = 1
R = 1
[initial]
generator = ring
n_agents = 8
ring_radius = 1.5
swirl_speed = 0.3
drift = 0.5, 0.1
[run]
step_h = 0.01
horizon_t = 60
record_every = 10
""",
    "hierarchy-chain": f"""
[scenario]
description = discrete map on a ten-agent leadership chain, h at half the stability bound
[model]
variant = leadership
kernel = power_squared
beta = 0.25
[initial]
generator = uniform
n_agents = 10
dim = 2
x_half_width = 1
v_half_width = 1
seed = 11
[run]
step_h = 0.5
steps_n = 400
[topology]
n_vertices = 10
edges = {_chain_edges(10)}
contraction_eps = 0.5
""",
    "alternating-leaders": """
[scenario]
description = four agents whose leader alternates between the two ends of a chain
[model]
variant = switching
kernel = power_squared
beta = 0.05
[initial]
generator = uniform
n_agents = 4
dim = 2
x_half_width = 1
v_half_width = 1
seed = 5
[run]
step_h = 0.5
steps_n = 200
[topology]
n_vertices = 4
graphs = 0 1; 1 2; 2 3 | 3 2; 2 1; 1 0
signal = 0, 1
""",
    "hydro-weighted": """
[scenario]
description = mass-weighted particle surrogate of the hydrodynamic alignment model
[model]
variant = weighted
kernel = power_plain
beta = 1.5
K = 1
[initial]
generator = uniform
n_agents = 16
dim = 1
x_half_width = 1
v_half_width = 0.2
mass_profile = random
seed = 2
[run]
step_h = 0.01
horizon_t = 40
record_every = 10
""",
    "meanfield-ladder": """
[scenario]
description = self-convergence of empirical measures for N = 50 .. 400
[model]
variant = symmetric
kernel = power_plain
beta = 2
K = 1
[study]
Ns = 50, 100, 200, 400
trials = 20
horizon_t = 2
step_h = 0.05
dim = 1
x_low = -1
x_high = 1
v_low = -1
v_high = 1
seed = 0
""",
}


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


# ---------------------------------------------------------------------------
# config parsing


def _parse_floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _parse_matrix(text: str) -> np.ndarray:
    rows = [_parse_floats(r) for r in text.split(";") if r.strip()]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ConfigurationError(f"malformed matrix {text!r}: rows must have equal length")
    return np.array(rows, dtype=float)


def _parse_edges(text: str) -> list[tuple[int, int]]:
    edges = []
    for item in text.split(";"):
        if item.strip():
            parts = item.split()
            if len(parts) != 2:
                raise ConfigurationError(f"malformed edge {item.strip()!r}")
            edges.append((int(parts[0]), int(parts[1])))
    return edges


class Section:
    """Typed accessor for one config section that tracks missing keys."""

    def __init__(self, cfg: configparser.ConfigParser, name: str):
        self.name = name
        self.data = dict(cfg[name]) if cfg.has_section(name) else {}

    def __contains__(self, key):
        return key in self.data

    def get(self, key, default=None):
        return self.data.get(key, default)

    def require(self, key):
        if key not in self.data:
            raise ConfigurationError(f"[{self.name}] is missing key {key!r}")
        return self.data[key]

    def float(self, key, default=None):
        raw = self.data.get(key)
        if raw is None:
            if default is None:
                self.require(key)
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigurationError(f"[{self.name}] {key} = {raw!r} is not a number") from None

    def int(self, key, default=None):
        raw = self.data.get(key)
        if raw is None:
            if default is None:
                self.require(key)
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigurationError(f"[{self.name}] {key} = {raw!r} is not an integer") from None

    def bool(self, key, default=False):
        raw = self.data.get(key)
        if raw is None:
            return default
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"[{self.name}] {key} = {raw!r} is not a boolean")


def load_config(path: Optional[str] = None, preset: Optional[str] = None,
                text: Optional[str] = None) -> configparser.ConfigParser:
    """Preset text (if any) overlaid by the scenario file; keys are case sensitive."""
    user = configparser.ConfigParser(interpolation=None)
    user.optionxform = str
    if path is not None:
        try:
            user.read_string(Path(path).read_text(), source=str(path))
        except OSError as err:
            raise CliError(EXIT_IO, "io", f"cannot read config {path}: {err.strerror}") from None
    elif text is not None:
        user.read_string(text)
    name = preset or user.get("scenario", "preset", fallback=None)
    cfg = configparser.ConfigParser(interpolation=None)
    cfg.optionxform = str
    if name is not None:
        if name not in PRESETS:
            raise ConfigurationError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}")
        cfg.read_string(PRESETS[name], source=f"<preset {name}>")
        cfg.set("scenario", "name", name)
    for sec in user.sections():
        if not cfg.has_section(sec):
            cfg.add_section(sec)
        for key, val in user[sec].items():
            cfg.set(sec, key, val)
    for sec in cfg.sections():
        if sec not in SCHEMA:
            raise ConfigurationError(f"unknown section [{sec}]")
        unknown = set(cfg[sec]) - SCHEMA[sec]
        if unknown:
            raise ConfigurationError(f"unknown keys in [{sec}]: {', '.join(sorted(unknown))}")
    return cfg


def build_kernel(m: Section) -> Kernel:
    family = m.get("kernel", "power_plain")
    if family == "power_plain":
        return Kernel.power_plain(m.float("beta"))
    if family == "power_squared":
        return Kernel.power_squared(m.float("beta"))
    if family == "constant":
        return Kernel.constant(m.float("c", 1.0))
    if family == "tabulated":
        tail = m.get("tail_exponent")
        return Kernel.tabulated(_parse_floats(m.require("table_r")),
                                _parse_floats(m.require("table_psi")),
                                None if tail is None else float(tail))
    raise ConfigurationError(f"unknown kernel {family!r}")


def _symmetric_margin_scale(x, v, K, kernel, margin):
    """Factor that puts ``|v|_inf`` at ``threshold / margin`` for the symmetric condition."""
    report = analysis.check_symmetric(Ensemble(x, v), K, kernel)
    if math.isinf(report.threshold):
        return 1.0
    return report.threshold / (margin * report.measured)


def build_initial(sec: Section, model_sec: Section, seed: Optional[int]) -> Ensemble:
    gen = sec.get("generator")
    masses = None
    if gen is None:
        x = _parse_matrix(sec.require("x"))
        v = _parse_matrix(sec.require("v"))
        if "masses" in sec:
            masses = np.array(_parse_floats(sec.get("masses")))
        return Ensemble(x, v, masses)
    n = sec.int("n_agents")
    if n < 1:
        raise ConfigurationError("n_agents must be >= 1")
    rng = np.random.default_rng(seed if seed is not None else sec.int("seed", 0))
    if gen == "uniform":
        d = sec.int("dim", 1)
        x = rng.uniform(-1, 1, (n, d)) * sec.float("x_half_width", 1.0)
        v = rng.uniform(-1, 1, (n, d)) * sec.float("v_half_width", 1.0)
    elif gen == "ring":
        theta = 2.0 * np.pi * np.arange(n) / n
        rad = sec.float("ring_radius", 1.0)
        x = rad * np.column_stack([np.cos(theta), np.sin(theta)])
        v = sec.float("swirl_speed", 0.0) * np.column_stack([-np.sin(theta), np.cos(theta)])
        if "drift" in sec:
            drift = np.array(_parse_floats(sec.get("drift")))
            if drift.shape != (2,):
                raise ConfigurationError("ring drift must have two components")
            v = v + drift
    else:
        raise ConfigurationError(f"unknown generator {gen!r}")
    profile = sec.get("mass_profile", "none")
    if profile == "random":
        w = rng.uniform(0.5, 1.5, n)
        masses = w / w.sum()
    elif profile == "equal":
        masses = np.full(n, 1.0 / n)
    elif profile != "none":
        raise ConfigurationError(f"unknown mass_profile {profile!r}")
    if "velocity_margin" in sec:
        margin = sec.float("velocity_margin")
        if not margin > 1:
            raise ConfigurationError("velocity_margin must exceed 1")
        if model_sec.get("variant") != "symmetric":
            raise ConfigurationError("velocity_margin applies to the symmetric model only")
        vbar = v.mean(axis=0)
        scale = _symmetric_margin_scale(x, v, model_sec.float("K", 1.0),
                                        build_kernel(model_sec), margin)
        v = vbar + scale * (v - vbar)
    return Ensemble(x, v, masses)


def _read_graph(text_or_path: str, base: Path) -> Digraph:
    try:
        return Digraph.read(base / text_or_path)
    except OSError as err:
        raise CliError(EXIT_IO, "io", f"cannot read topology {text_or_path}: {err.strerror}") from None


def build_topology(sec: Section, base: Path):
    """``(graph, graphs, signal)`` from the ``[topology]`` section."""
    graph = graphs = signal = None
    if "file" in sec:
        graph = _read_graph(sec.get("file"), base)
    elif "edges" in sec:
        graph = Digraph(sec.int("n_vertices"), _parse_edges(sec.get("edges")))
    if "graph_files" in sec:
        graphs = [_read_graph(p.strip(), base) for p in sec.get("graph_files").split(",")]
    elif "graphs" in sec:
        n = sec.int("n_vertices")
        graphs = [Digraph(n, _parse_edges(block)) for block in sec.get("graphs").split("|")]
    if "signal" in sec:
        pattern = [int(k) for k in _parse_floats(sec.get("signal"))]
        signal = SwitchingSignal(pattern, periodic=sec.bool("signal_periodic", True))
    return graph, graphs, signal


@dataclass
class Scenario:
    name: str
    model: object
    e0: Ensemble
    h: float
    steps: int
    record_every: int = 1
    outputs: dict = field(default_factory=dict)
    conditions: str = "auto"
    flocking_tol: float = 1e-6
    decay_fit: Optional[bool] = None
    two_particle: Optional[bool] = None
    window_steps: Optional[int] = None
    contraction_eps: Optional[float] = None

    @property
    def discrete(self) -> bool:
        return isinstance(self.model, DtModel)


def _tristate(sec: Section, key: str) -> Optional[bool]:
    raw = sec.get(key, "auto")
    return None if raw.strip().lower() == "auto" else sec.bool(key)


def build_scenario(cfg: configparser.ConfigParser, base: Path = Path("."),
                   seed: Optional[int] = None) -> Scenario:
    m = Section(cfg, "model")
    variant = m.get("variant")
    if variant is None:
        raise ConfigurationError("[model] variant is required")
    kernel = build_kernel(m)
    e0 = build_initial(Section(cfg, "initial"), m, seed)
    run = Section(cfg, "run")
    topo = Section(cfg, "topology")
    if variant in CT_VARIANTS:
        if topo.data:
            raise ConfigurationError(f"continuous variant {variant!r} takes no [topology]")
        if variant == "bonding":
            model = CtModel.bonding(m.float("K0", 0.0), m.float("K1", 0.0), m.float("K2", 0.0),
                                    m.float("R", 1.0), kernel, m.get("spring", "unit"))
        else:
            model = CtModel(variant, kernel, K=m.float("K", 1.0))
        model.validate(e0)
        h = run.float("step_h", model.default_step())
        if "steps_n" in run:
            steps = run.int("steps_n")
        else:
            horizon = run.float("horizon_t")
            steps = int(round(horizon / h)) if h > 0 else 0
            if h > 0 and not math.isclose(steps * h, horizon, rel_tol=1e-9, abs_tol=1e-12):
                raise ConfigurationError(f"horizon_t = {horizon} is not a multiple of step_h = {h}")
    elif variant in DT_VARIANTS:
        graph, graphs, signal = build_topology(topo, base)
        h = run.float("step_h")
        if variant == "all_to_all":
            if graph or graphs:
                raise ConfigurationError("all_to_all takes no topology")
            model = DtModel.all_to_all(h, kernel)
        elif variant == "switching":
            if graphs is None or signal is None:
                raise ConfigurationError("switching needs [topology] graphs and signal")
            model = DtModel.switching(h, kernel, graphs, signal)
        else:
            if graph is None:
                raise ConfigurationError(f"{variant} needs [topology] file or edges")
            if variant == "leadership":
                model = DtModel.leadership(h, kernel, graph)
            else:
                q = _parse_matrix(m.require("q"))
                model = DtModel.preference(h, kernel, graph, m.float("H", 1.0), q,
                                           m.float("nu", math.inf))
        n_vert = (graphs[0] if graphs else graph).n_vertices if (graph or graphs) else e0.n_agents
        if n_vert != e0.n_agents:
            raise ConfigurationError(f"topology has {n_vert} vertices, initial data {e0.n_agents} agents")
        steps = run.int("steps_n")
    else:
        raise ConfigurationError(f"unknown variant {variant!r}")
    if steps < 0:
        raise ConfigurationError("number of steps must be >= 0")
    out = Section(cfg, "outputs")
    checks = Section(cfg, "checks")
    conditions = checks.get("conditions", "auto")
    if conditions not in ("auto", "none"):
        raise ConfigurationError("[checks] conditions must be 'auto' or 'none'")
    eps = topo.float("contraction_eps", math.nan) if "contraction_eps" in topo else None
    return Scenario(
        name=Section(cfg, "scenario").get("name", "custom"),
        model=model, e0=e0, h=h, steps=steps,
        record_every=max(1, run.int("record_every", 1)),
        outputs={"timeseries": out.get("timeseries", "timeseries.csv"),
                 "report": out.get("report", "report.txt"),
                 "outcome": out.get("outcome", "outcome.txt")},
        conditions=conditions,
        flocking_tol=checks.float("flocking_tol", 1e-6),
        decay_fit=_tristate(checks, "decay_fit"),
        two_particle=_tristate(checks, "two_particle"),
        window_steps=topo.int("window_steps", 0) or None,
        contraction_eps=eps,
    )


# ---------------------------------------------------------------------------
# reports


def _block(title: str, items: dict) -> str:
    lines = [f"[{title}]"] + [f"{k} = {analysis._fmt(v)}" for k, v in items.items()]
    return "\n".join(lines) + "\n"


def _skipped(name: str, err: Exception) -> str:
    return _block(f"condition {name}", {"holds": "unknown", "error": str(err)})


def condition_reports(sc: Scenario) -> list:
    """ConditionReports (or skip notes as text) for the scenario's initial data."""
    if sc.conditions == "none":
        return []
    model, e0 = sc.model, sc.e0
    try:
        if sc.discrete:
            return [analysis.check_discrete(model.kernel, e0.n_agents,
                                            graph=model.graph,
                                            graphs=model.graphs or None,
                                            window=sc.window_steps)]
        if model.variant == "symmetric":
            return [analysis.check_symmetric(e0, model.K, model.kernel)]
        if model.variant == "motsch_tadmor":
            return [analysis.check_motsch_tadmor(e0, model.kernel)]
        if model.variant == "bonding":
            return [analysis.check_bonding(e0, model.K2, model.R, model.kernel)]
        return [analysis.check_hydro(e0, model.kernel, model.K)]
    except (DegenerateInputError, PositivityError, IndeterminateTailError, NotRootedError,
            ConfigurationError, DomainError) as err:
        name = "discrete_exponent" if sc.discrete else model.variant
        return [_skipped(name, err)]


def _as_text(rep) -> str:
    return rep if isinstance(rep, str) else rep.to_text()


def scenario_header(sc: Scenario) -> str:
    model = sc.model
    items = {"name": sc.name,
             "variant": model.variant,
             "kernel": model.kernel.describe(),
             "n_agents": sc.e0.n_agents,
             "dim": sc.e0.dim,
             "step_h": float(sc.h),
             "steps": sc.steps}
    if sc.discrete:
        items["max_stable_step"] = model.max_stable_step(sc.e0.n_agents)
        g = model.graph
        if g is not None:
            items["hierarchical"] = is_hierarchical(g)
            items["rooted"] = is_rooted(g)
            if is_rooted(g):
                items["depth"] = leader_distance(g)[1]
        elif model.graphs:
            items["graph_roots"] = " ".join(",".join(map(str, roots(g))) or "-" for g in model.graphs)
    return _block("scenario", items)


def two_particle_case(sc: Scenario) -> Optional[oracle2p.TwoParticleCase]:
    """The reduced two-agent case, when the scenario is one."""
    if sc.two_particle is False or sc.discrete:
        return None
    m, e = sc.model, sc.e0
    fits = (m.variant == "symmetric" and e.n_agents == 2 and e.dim == 1
            and m.kernel.family == "power_plain" and m.kernel.amplitude == 1.0)
    if not fits:
        if sc.two_particle:
            raise ConfigurationError("two_particle check needs 2 agents in 1-D, symmetric model, (1+r)^-beta kernel")
        return None
    x = float(e.x[0, 0] - e.x[1, 0])
    v = float(e.v[0, 0] - e.v[1, 0])
    if x < 0 or (x == 0 and v < 0):
        x, v = -x, -v
    if v < 0:
        return None
    return oracle2p.TwoParticleCase(x, v, m.K, m.kernel.beta)


def two_particle_block(case, records) -> tuple[str, dict]:
    cls = oracle2p.classify(case)
    items = {"regime": cls.regime.value, "divergent_tail": cls.divergent_tail,
             "x0": case.x0, "v0": case.v0}
    t = np.array([r.time for r in records])
    dx = np.array([r.Dx for r in records])
    dv = np.array([r.Dv for r in records])
    if not cls.divergent_tail:
        items["critical_velocity"] = oracle2p.critical_velocity(case)
    if cls.regime is oracle2p.Regime.CRITICAL:
        xe, ve = oracle2p.critical_trajectory(case, t)
        items["max_x_error"] = float(np.max(np.abs(dx - xe)))
        items["max_v_error"] = float(np.max(np.abs(dv - ve)))
    elif cls.regime is oracle2p.Regime.SUPERCRITICAL:
        vinf = oracle2p.asymptotic_velocity(case)
        items["v_inf"] = vinf
        items["min_v"] = float(dv.min())
    else:
        items["x_inf"] = oracle2p.limit_separation(case)
    return _block("two_particle", items), items


# ---------------------------------------------------------------------------
# outputs


def _fmt_cell(val) -> str:
    if isinstance(val, (int, np.integer)) and not isinstance(val, bool):
        return str(int(val))
    if isinstance(val, (float, np.floating)):
        return repr(float(val))
    return str(val)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt_cell(c) for c in row])
    return buf.getvalue()


def timeseries_csv(records) -> str:
    return csv_text(DiagnosticsRecord.CSV_COLUMNS, (r.as_row() for r in records))


def write_atomic(out_dir: Path, files: dict) -> list[Path]:
    """Write ``{name: text}`` into ``out_dir``; all files appear or none do."""
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        temps = []
        try:
            for name, text in files.items():
                fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{Path(name).name}.", suffix=".tmp")
                temps.append((Path(tmp), out_dir / name))
                with os.fdopen(fd, "w", newline="\n", encoding="utf-8") as fh:
                    fh.write(text)
            for _, dest in temps:
                if not dest.parent.is_dir():
                    raise FileNotFoundError(f"no directory {dest.parent}")
            done = []
            try:
                for tmp, dest in temps:
                    os.replace(tmp, dest)
                    done.append(dest)
            except OSError:
                for dest in done:
                    dest.unlink(missing_ok=True)
                raise
        finally:
            for tmp, _ in temps:
                if tmp.exists():
                    tmp.unlink()
    except OSError as err:
        raise CliError(EXIT_IO, "io", f"cannot write outputs to {out_dir}: {err}") from None
    return [out_dir / n for n in files]


# ---------------------------------------------------------------------------
# commands


def simulate_scenario(sc: Scenario):
    if sc.discrete:
        eps = sc.contraction_eps
        if eps is not None and sc.model.variant not in ("leadership", "preference"):
            raise ConfigurationError("contraction_eps needs a leadership or preference model")
        if eps is not None and not is_rooted(sc.model.graph):
            raise ConfigurationError("contraction tracking needs a graph rooted at agent 0")
        traj = models_dt.simulate(sc.model, sc.e0, sc.steps, contraction_eps=eps,
                                  store_every=max(sc.steps, 1))
        return traj.records, traj.contraction_margins
    traj = integrate(sc.model, sc.e0, h=sc.h, steps=sc.steps, record_every=sc.record_every,
                     store_every=max(sc.steps, 1))
    return traj.records, None


def run_scenario(sc: Scenario) -> dict:
    """Simulate and assemble output texts ``{filename: text}``."""
    reports = condition_reports(sc)
    case = two_particle_case(sc)
    records, margins = simulate_scenario(sc)
    report = [scenario_header(sc)] + [_as_text(r) for r in reports]
    if margins is not None:
        report.append(_block("contraction", {
            "epsilon": sc.contraction_eps,
            "min_margin": float(margins.min()) if margins.size else math.inf,
            "holds_every_step": bool(np.all(margins >= -1e-12)),
        }))
    label = analysis.classify_outcome(records, tol=sc.flocking_tol)
    outcome = label.to_text()
    sym = next((r for r in reports if isinstance(r, analysis.ConditionReport)
                and r.name == "symmetric"), None)
    want_fit = sc.decay_fit if sc.decay_fit is not None else (sym is not None and sym.holds)
    if want_fit:
        try:
            fit = analysis.fit_records_decay(records)
            items = {"rate": fit.rate, "r_squared": fit.r_squared, "n_points": fit.n_points}
            if sym is not None and sym.holds:
                bound = sym.extras["decay_rate_bound"]
                x_max = max(r.x_sup for r in records)
                items.update(rate_bound=bound, rate_ok=fit.rate >= 0.95 * bound,
                             max_x_sup=x_max, x_M=sym.extras["x_M"],
                             confined=x_max <= sym.extras["x_M"] + 1e-6)
            report.append(_block("decay_fit", items))
        except DomainError as err:
            report.append(_block("decay_fit", {"error": str(err)}))
    if case is not None:
        text, items = two_particle_block(case, records)
        report.append(text)
        common = items["regime"] != oracle2p.Regime.SUPERCRITICAL.value
        outcome += f"  regime = {items['regime']}  common_velocity = {'true' if common else 'false'}"
    return {sc.outputs["timeseries"]: timeseries_csv(records),
            sc.outputs["report"]: "\n".join(report),
            sc.outputs["outcome"]: outcome + "\n"}


def study_from_config(cfg, seed: Optional[int], threads: int):
    m = Section(cfg, "model")
    variant = m.get("variant", "symmetric")
    if variant not in CT_VARIANTS:
        raise ConfigurationError("study needs a continuous model variant")
    if variant == "weighted":
        raise ConfigurationError("study samples equal-mass clouds; weighted model unsupported")
    kernel = build_kernel(m)
    if variant == "bonding":
        model = CtModel.bonding(m.float("K0", 0.0), m.float("K1", 0.0), m.float("K2", 0.0),
                                m.float("R", 1.0), kernel, m.get("spring", "unit"))
    else:
        model = CtModel(variant, kernel, K=m.float("K", 1.0))
    s = Section(cfg, "study")
    if not s.data:
        raise ConfigurationError("study needs a [study] section")
    Ns = [int(n) for n in _parse_floats(s.require("Ns"))]
    trials = s.int("trials")
    if trials < 1:
        raise ConfigurationError(f"trials must be >= 1, got {trials}")
    d = s.int("dim", 1)
    kind = s.get("marginal", "uniform")

    def marg(prefix):
        return Marginal(s.float(f"{prefix}_low"), s.float(f"{prefix}_high"), kind,
                        s.float(f"{prefix}_mean", 0.0), s.float(f"{prefix}_std", 1.0))

    spec = DensitySpec(tuple(marg("x") for _ in range(d)), tuple(marg("v") for _ in range(d)))
    result = convergence_study(spec, model, Ns, s.float("horizon_t"),
                               s.float("step_h", model.default_step()), trials,
                               seed if seed is not None else s.int("seed", 0), workers=threads)
    timed = s.bool("record_runtime", True)
    rows = [(r.N, r.trial, r.distance, r.runtime_s if timed else 0.0, r.kind) for r in result.rows]
    return s.get("output", "study.csv"), csv_text(STUDY_COLUMNS, rows), result


def _say(args, msg):
    if not args.quiet:
        print(msg)


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.preset)
    base = Path(args.config).parent if args.config else Path(".")
    sc = build_scenario(cfg, base, args.seed)
    files = run_scenario(sc)
    paths = write_atomic(Path(args.out), files)
    _say(args, files[sc.outputs["outcome"]].rstrip("\n"))
    for p in paths:
        _say(args, f"wrote {p}")
    return EXIT_OK


def cmd_check(args) -> int:
    cfg = load_config(args.config, args.preset)
    base = Path(args.config).parent if args.config else Path(".")
    sc = build_scenario(cfg, base, args.seed)
    sc.conditions = "auto"
    print(scenario_header(sc), end="")
    for rep in condition_reports(sc):
        print()
        print(_as_text(rep), end="")
    return EXIT_OK


def cmd_study(args) -> int:
    cfg = load_config(args.config, args.preset)
    name, text, result = study_from_config(cfg, args.seed, args.threads)
    paths = write_atomic(Path(args.out), {name: text})
    means = result.mean_distances()
    for key, val in means.items():
        _say(args, f"N = {key}  mean_distance = {val!r}")
    for p in paths:
        _say(args, f"wrote {p}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flockbench",
                                     description="Cucker-Smale flocking scenarios.")
    parser.add_argument("--list-presets", action="store_true", help="print preset names and exit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="scenario INI file")
    common.add_argument("--preset", help="start from an embedded preset")
    common.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, default=None,
                        help="override the seed of generated initial data / study")
    common.add_argument("--threads", type=int, default=1, help="worker processes for study trials")
    common.add_argument("--quiet", action="store_true", help="no progress output on stdout")
    sub = parser.add_subparsers(dest="command")
    sub.add_parser("run", parents=[common], help="simulate a scenario and write outputs")
    sub.add_parser("check", parents=[common], help="evaluate sufficient conditions only")
    sub.add_parser("study", parents=[common], help="mean-field convergence study")
    return parser


COMMANDS = {"run": cmd_run, "check": cmd_check, "study": cmd_study}


def _fail(code: int, kind: str, message: str) -> int:
    print(f"flockbench-error code={code} kind={kind} message={json.dumps(message)}",
          file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_presets:
        print("\n".join(sorted(PRESETS)))
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return _fail(EXIT_VALIDATION, "usage", "missing subcommand (run, check, study)")
    if args.config is None and args.preset is None:
        return _fail(EXIT_VALIDATION, "usage", "give --config PATH or --preset NAME")
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        return _fail(EXIT_VALIDATION, "usage", "seed must be an unsigned 64-bit integer")
    if args.threads < 1:
        return _fail(EXIT_VALIDATION, "usage", "threads must be >= 1")
    try:
        return COMMANDS[args.command](args)
    except CliError as err:
        return _fail(err.code, err.kind, str(err))
    except ModelError as err:
        return _fail(EXIT_MODEL, type(err).__name__, str(err))
    except (ConfigurationError, DomainError, ValueError, configparser.Error) as err:
        return _fail(EXIT_VALIDATION, "validation", str(err))
    except OSError as err:
        return _fail(EXIT_IO, "io", str(err))


if __name__ == "__main__":
    sys.exit(main())
