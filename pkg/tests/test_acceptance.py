"""Acceptance criteria, one test each.

Every test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line with the measured
quantities and wall time, then asserts.  Run with ``pytest tests/test_acceptance.py -v``.
"""

import csv
import math
import time

import numpy as np
import pytest

from oracles import path_distances, random_matrix, rooted_digraphs
from flockbench import analysis, cli, oracle2p
from flockbench.core import Ensemble, Kernel, diameters
from flockbench.models_ct import CtModel, integrate
from flockbench.models_dt import simulate
from flockbench.topology import epsilon_norm, is_rooted, leader_distance

pytestmark = pytest.mark.slow


@pytest.fixture
def verdict(capsys):
    def report(number, title, checks, elapsed, limit, **measured):
        ok = all(checks.values()) and elapsed < limit
        failed = [k for k, v in checks.items() if not v] + (["runtime"] if elapsed >= limit else [])
        detail = "  ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                           for k, v in measured.items())
        line = (f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}  {title}  {detail}  "
                f"time={elapsed:.2f}s/{limit:g}s" + (f"  failed={','.join(failed)}" if failed else ""))
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
    return report


def test_1_two_particle_critical_oracle(verdict):
    case = oracle2p.TwoParticleCase(0.0, 1.0, 1.0, 2.0)
    x0, v0 = oracle2p.as_ensemble_data(case)
    t0 = time.perf_counter()
    traj = integrate(CtModel.symmetric(1.0, Kernel.power_plain(2.0)), Ensemble(x0, v0),
                     h=1e-3, steps=10_000, record_every=10)
    elapsed = time.perf_counter() - t0
    t = traj.series("time")
    xe, ve = oracle2p.critical_trajectory(case, t)
    x_err = float(np.abs(traj.series("Dx") - xe).max())
    v_err = float(np.abs(traj.series("Dv") - ve).max())
    x4, v4 = oracle2p.critical_trajectory(case, 4.0)
    verdict(1, "two-particle critical oracle", {
        "x_err": x_err <= 1e-6, "v_err": v_err <= 1e-6,
        "spot": abs(x4 - 2.0) < 1e-15 and abs(v4 - 1 / 3) < 1e-15,
    }, elapsed, 1.0, max_x_err=x_err, max_v_err=v_err, x4=float(x4), v4=float(v4))


def test_2_critical_decay_exponent(verdict):
    case = oracle2p.TwoParticleCase(0.0, 1.0, 1.0, 2.0)
    t0 = time.perf_counter()
    t, x, v = oracle2p.integrate_reduced(case, 0.05, 1e4, sample_every=20)
    elapsed = time.perf_counter() - t0
    window = (t >= 1e2) & (t <= 1e4)
    slope = float(np.polyfit(np.log(t[window]), np.log(v[window]), 1)[0])
    target = -(1 - 1 / case.beta)
    verdict(2, "critical decay exponent", {"slope": abs(slope - target) <= 0.02},
            elapsed, 5.0, slope=slope, target=target)


def test_3_supercritical_separation(verdict):
    case = oracle2p.TwoParticleCase(0.0, 2.0, 1.0, 2.0)
    t0 = time.perf_counter()
    t, x, v = oracle2p.integrate_reduced(case, 0.01, 1e3, sample_every=1)
    elapsed = time.perf_counter() - t0
    v_inf = oracle2p.asymptotic_velocity(case)
    verdict(3, "supercritical separation", {
        "v_bound": v.min() >= v_inf - 1e-8,
        "x_bound": bool(np.all(x >= v_inf * t - 1e-8)),
        "regime": oracle2p.classify(case).regime is oracle2p.Regime.SUPERCRITICAL,
    }, elapsed, 5.0, v_inf=v_inf, min_v=float(v.min()), min_x_minus_vt=float((x - v_inf * t).min()))


def test_4_symmetric_theorem_demo(verdict):
    cfg = cli.load_config(preset="theorem-T1-demo")
    worst_conf, worst_rate, all_hold = math.inf, math.inf, True
    t0 = time.perf_counter()
    for seed in range(10):
        sc = cli.build_scenario(cfg, seed=seed)
        rep = analysis.check_symmetric(sc.e0, sc.model.K, sc.model.kernel)
        all_hold &= rep.holds and rep.measured <= 0.5 * rep.threshold * (1 + 1e-12)
        traj = integrate(sc.model, sc.e0, h=sc.h, steps=sc.steps, record_every=sc.record_every,
                         store_every=sc.steps)
        x_max = max(r.x_sup for r in traj.records)
        fit = analysis.fit_records_decay(traj.records)
        worst_conf = min(worst_conf, rep.extras["x_M"] + 1e-6 - x_max)
        worst_rate = min(worst_rate, fit.rate / rep.extras["decay_rate_bound"])
    elapsed = time.perf_counter() - t0
    verdict(4, "symmetric sufficient condition, 10 seeds", {
        "condition_2x_margin": all_hold, "confined": worst_conf >= 0, "rate": worst_rate >= 0.95,
    }, elapsed, 30.0, min_xM_slack=worst_conf, min_rate_over_bound=worst_rate)


def test_5_unconditional_regimes(verdict):
    models = {"symmetric_beta0.5": CtModel.symmetric(1.0, Kernel.power_plain(0.5)),
              "mt_beta0.4": CtModel.motsch_tadmor(1.0, Kernel.power_plain(0.4))}
    reached, worst = {}, {}
    t0 = time.perf_counter()
    for name, model in models.items():
        hits = []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            e0 = Ensemble(rng.uniform(-2, 2, (12, 2)), rng.uniform(-1, 1, (12, 2)))
            traj = integrate(model, e0, h=0.02, steps=5000, record_every=25, store_every=5000)
            dv = traj.series("Dv")
            below = np.flatnonzero(dv < 1e-6)
            hits.append(traj.series("time")[below[0]] if below.size else math.inf)
        reached[name] = all(math.isfinite(h) for h in hits)
        worst[name] = max(hits)
    elapsed = time.perf_counter() - t0
    verdict(5, "unconditional regimes, 10 seeds each", reached, elapsed, 60.0,
            **{f"latest_hit_{k}": v for k, v in worst.items()}, horizon=100.0)


def test_6_bonding_ring(verdict):
    sc = cli.build_scenario(cli.load_config(preset="bonding-ring"))
    m = sc.model
    rep = analysis.check_bonding(sc.e0, m.K2, m.R, m.kernel)
    t0 = time.perf_counter()
    traj = integrate(m, sc.e0, h=sc.h, steps=sc.steps, record_every=1, store_every=1)
    elapsed = time.perf_counter() - t0
    diff = traj.x[:, :, None, :] - traj.x[:, None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    n = dist.shape[1]
    dist[:, np.arange(n), np.arange(n)] = np.inf
    min_dist = float(dist.min())
    energy = traj.series("kinetic_energy") + traj.series("potential_energy")
    rise = float(np.diff(energy).max())
    sup_dx = float(traj.series("Dx").max())
    limit = 2 * rep.extras["confinement_radius"]
    final_dv = traj.records[-1].Dv
    verdict(6, "bonding ring", {
        "hypotheses": rep.holds, "no_collision": min_dist > 0, "confined": sup_dx < limit,
        "flocked": final_dv < 1e-5, "energy": rise <= 1e-9,
    }, elapsed, 30.0, min_distance=min_dist, sup_Dx=sup_dx, Dx_limit=limit, final_Dv=final_dv,
        max_energy_rise=rise)


def test_7_discrete_leadership(verdict):
    chain = cli.build_scenario(cli.load_config(preset="hierarchy-chain"))
    alt = cli.build_scenario(cli.load_config(preset="alternating-leaders"))
    m = chain.model
    t0 = time.perf_counter()
    half = math.isclose(m.h, 0.5 * m.max_stable_step(chain.e0.n_agents))
    traj = simulate(m, chain.e0, chain.steps, contraction_eps=0.5, store_every=chain.steps)
    margin = float(traj.contraction_margins.min())
    chain_dv = traj.records[-1].Dv
    n = alt.e0.n_agents
    alt_ok = 2 * alt.model.kernel.beta * (n - 1) ** 2 < 1
    alt_dv = simulate(alt.model, alt.e0, alt.steps, store_every=alt.steps).records[-1].Dv
    elapsed = time.perf_counter() - t0
    verdict(7, "discrete leadership", {
        "half_stability_step": half, "chain_flocked": chain_dv < 1e-6,
        "contraction": margin >= -1e-12, "alternating_hypothesis": alt_ok,
        "alternating_flocked": alt_dv < 1e-6,
    }, elapsed, 30.0, chain_Dv=chain_dv, min_contraction_margin=margin, alternating_Dv=alt_dv)


def test_8_momentum_conservation(verdict):
    rng = np.random.default_rng(8)
    x0, v0 = rng.uniform(-2, 2, (10, 2)), rng.normal(size=(10, 2))
    masses = rng.dirichlet(np.ones(10))
    k = Kernel.power_plain(1.5)
    cases = {"symmetric": (CtModel.symmetric(1.0, k), np.ones(10)),
             "bonding": (CtModel.bonding(1.0, 0.5, 1.0, 0.8, k), np.ones(10)),
             "weighted": (CtModel.weighted(1.0, k), masses)}
    drift = {}
    t0 = time.perf_counter()
    for name, (model, m) in cases.items():
        traj = integrate(model, Ensemble(x0, v0, masses), h=0.01, steps=10_000,
                         record_every=10_000, store_every=100)
        p = np.einsum("i,kij->kj", m, traj.v)
        dp = np.abs(p[1:] - p[0]).max(axis=1)
        drift[name] = float((dp / traj.times[1:]).max())
    elapsed = time.perf_counter() - t0
    verdict(8, "momentum conservation over 1e4 steps",
            {name: d <= 1e-12 for name, d in drift.items()}, elapsed, 10.0,
            **{f"drift_per_time_{k}": v for k, v in drift.items()})


def test_9_meanfield_convergence(verdict, tmp_path):
    t0 = time.perf_counter()
    code = cli.main(["study", "--preset", "meanfield-ladder", "--out", str(tmp_path), "--quiet"])
    elapsed = time.perf_counter() - t0
    with open(tmp_path / "study.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    ladder = [r for r in rows if r["kind"] == "ladder"]
    self_rows = [r for r in rows if r["kind"] == "self"]
    means = {n: np.mean([float(r["distance"]) for r in ladder if int(r["N"]) == n])
             for n in (50, 100, 200, 400)}
    seq = [means[n] for n in (50, 100, 200, 400)] + [np.mean([float(r["distance"]) for r in self_rows])]
    decreasing = sum(b < a for a, b in zip(seq, seq[1:]))
    verdict(9, "mean-field self-convergence", {
        "exit_0": code == 0, "rows": len(ladder) == 80 and len(self_rows) == 20,
        "trend": decreasing >= 3,
    }, elapsed, 300.0, d50=seq[0], d100=seq[1], d200=seq[2], d400=seq[3], self=seq[4],
        decreasing_steps=f"{decreasing}/4")


def test_10_graph_oracles(verdict):
    t0 = time.perf_counter()
    n_graphs, mismatches = 0, 0
    for n in range(1, 6):
        for g, dist in rooted_digraphs(n):
            n_graphs += 1
            if not is_rooted(g) or leader_distance(g)[0].tolist() != dist:
                mismatches += 1
            if n <= 4 and path_distances(g) != dist:
                mismatches += 1
    rng = np.random.default_rng(10)
    worst = -math.inf
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        A, B = random_matrix(rng, n), random_matrix(rng, n)
        ell, eps = rng.integers(1, 6, n), float(rng.uniform(0.05, 0.95))
        worst = max(worst, epsilon_norm(A @ B, ell, eps) - epsilon_norm(A, ell, eps) * epsilon_norm(B, ell, eps))
    elapsed = time.perf_counter() - t0
    verdict(10, "graph machinery oracles", {"leader_distance": mismatches == 0,
                                             "submultiplicative": worst <= 1e-12},
            elapsed, 30.0, rooted_graphs=n_graphs, mismatches=mismatches, max_excess=worst)
