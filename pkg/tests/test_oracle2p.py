import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from flockbench.errors import DivergenceError, DomainError, NotCriticalError
from flockbench.oracle2p import (
    Regime,
    TwoParticleCase,
    as_ensemble_data,
    asymptotic_velocity,
    classify,
    conservation_residual,
    critical_trajectory,
    critical_velocity,
    integrate_reduced,
    limit_separation,
)


def test_critical_velocity_examples():
    assert critical_velocity(TwoParticleCase(0.0, 1.0, 1.0, 2.0)) == 1.0
    assert critical_velocity(TwoParticleCase(1.0, 1.0, 1.0, 2.0)) == 0.5
    assert critical_velocity(TwoParticleCase(1.0, 1.0, 0.0, 2.0)) == 0.0
    assert quad(lambda y: (1 + y) ** -2, 1, np.inf)[0] == pytest.approx(0.5, rel=1e-10)
    with pytest.raises(DivergenceError):
        critical_velocity(TwoParticleCase(0.0, 1.0, 1.0, 1.0))


@given(x0=st.floats(0, 5), K=st.floats(0.1, 5), beta=st.floats(1.1, 4))
def test_critical_velocity_matches_quadrature(x0, K, beta):
    case = TwoParticleCase(x0, 1.0, K, beta)
    num = K * quad(lambda y: (1 + y) ** -beta, x0, np.inf, epsabs=0, epsrel=1e-12, limit=200)[0]
    assert critical_velocity(case) == pytest.approx(num, rel=1e-8)


def test_critical_trajectory_published_values():
    case = TwoParticleCase(0.0, 1.0, 1.0, 2.0)
    x, v = critical_trajectory(case, [0.0, 4.0])
    np.testing.assert_allclose(x, [0.0, 2.0], rtol=0, atol=1e-15)
    np.testing.assert_allclose(v, [1.0, 1 / 3], rtol=1e-15)


@given(x0=st.floats(0, 3), K=st.floats(0.1, 3), beta=st.floats(1.1, 4))
def test_critical_trajectory_starts_at_data_and_conserves(x0, K, beta):
    vc = critical_velocity(TwoParticleCase(x0, 1.0, K, beta))
    case = TwoParticleCase(x0, vc, K, beta)
    x, v = critical_trajectory(case, np.array([0.0, 0.5, 7.0, 300.0]))
    assert x[0] == pytest.approx(x0, abs=1e-12) and v[0] == pytest.approx(vc, rel=1e-12)
    assert np.all(np.diff(x) > 0) and np.all(np.diff(v) < 0)
    assert np.abs(conservation_residual(case, x, v)).max() <= 1e-10 * max(1.0, vc)


def test_not_critical():
    with pytest.raises(NotCriticalError):
        critical_trajectory(TwoParticleCase(0.0, 1.0 + 1e-9, 1.0, 2.0), [1.0])


def test_asymptotic_velocity():
    assert asymptotic_velocity(TwoParticleCase(0.0, 1.5, 1.0, 2.0)) == 0.5
    assert asymptotic_velocity(TwoParticleCase(0.0, 1.0 + 1e-15, 1.0, 2.0)) == (1.0 + 1e-15) - 1.0
    assert asymptotic_velocity(TwoParticleCase(1.0, 0.7, 0.0, 2.0)) == 0.7
    with pytest.raises(DomainError):
        asymptotic_velocity(TwoParticleCase(0.0, 0.5, 1.0, 2.0))


def test_classify_examples():
    assert classify(TwoParticleCase(0.0, 0.5, 1.0, 2.0)).regime is Regime.SUBCRITICAL
    assert classify(TwoParticleCase(0.0, 1.0, 1.0, 2.0)).regime is Regime.CRITICAL
    assert classify(TwoParticleCase(0.0, 2.0, 1.0, 2.0)).regime is Regime.SUPERCRITICAL
    fat = classify(TwoParticleCase(0.0, 100.0, 1.0, 0.7))
    assert fat.regime is Regime.SUBCRITICAL and fat.divergent_tail


def test_case_validation():
    with pytest.raises(DomainError):
        TwoParticleCase(-1.0, 1.0, 1.0, 2.0)
    with pytest.raises(DomainError):
        integrate_reduced(TwoParticleCase(0.0, 1.0, 1.0, 2.0), 0.0, 1.0)


def test_limit_separation():
    # K int_0^{x} (1 + y)^-2 dy = 1 - 1/(1 + x) = 0.5  =>  x = 1
    assert limit_separation(TwoParticleCase(0.0, 0.5, 1.0, 2.0)) == pytest.approx(1.0)
    assert limit_separation(TwoParticleCase(0.0, 1.0, 1.0, 1.0)) == pytest.approx(math.e - 1)
    assert limit_separation(TwoParticleCase(0.5, 0.0, 1.0, 2.0)) == 0.5
    assert limit_separation(TwoParticleCase(0.0, 1.0, 1.0, 2.0)) == math.inf
    assert limit_separation(TwoParticleCase(0.0, 1.0, 0.0, 2.0)) == math.inf


def test_rk4_matches_critical_trajectory():
    case = TwoParticleCase(0.0, 1.0, 1.0, 2.0)
    t, x, v = integrate_reduced(case, 1e-3, 10.0, sample_every=10)
    xe, ve = critical_trajectory(case, t)
    assert t[-1] == pytest.approx(10.0)
    assert np.abs(x - xe).max() <= 1e-6 and np.abs(v - ve).max() <= 1e-6


@settings(max_examples=25)
@given(x0=st.floats(0, 3), v0=st.floats(0.01, 3), K=st.floats(0.1, 3), beta=st.floats(1.1, 4))
def test_rk4_conservation_relation(x0, v0, K, beta):
    case = TwoParticleCase(x0, v0, K, beta)
    t, x, v = integrate_reduced(case, 0.002, 10.0, sample_every=50)
    assert np.abs(conservation_residual(case, x, v)).max() <= 1e-8


def test_supercritical_velocity_stays_above_limit():
    case = TwoParticleCase(0.0, 1.5, 1.0, 2.0)
    t, x, v = integrate_reduced(case, 0.01, 200.0, sample_every=10)
    v_inf = asymptotic_velocity(case)
    assert v.min() >= v_inf - 1e-8
    assert np.all(x >= v_inf * t - 1e-8)


def test_subcritical_approaches_limit_separation():
    case = TwoParticleCase(0.0, 0.5, 1.0, 2.0)
    t, x, v = integrate_reduced(case, 0.01, 100.0, sample_every=100)
    assert x[-1] == pytest.approx(1.0, abs=1e-8) and abs(v[-1]) < 1e-8


def test_ensemble_data_realises_differences():
    case = TwoParticleCase(1.5, 0.8, 1.0, 2.0)
    x, v = as_ensemble_data(case)
    assert x[0, 0] - x[1, 0] == 1.5 and v[0, 0] - v[1, 0] == 0.8
    assert x.sum() == 0.0 and v.sum() == 0.0
