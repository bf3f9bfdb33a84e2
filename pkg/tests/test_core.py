import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from flockbench.core import (
    DiagnosticsRecord,
    Ensemble,
    Kernel,
    diameter_pairs,
    diameters,
    eval_kernel,
    kernel_integral,
    kernel_tail_integral,
    sup_norms,
)
from flockbench.errors import ConfigurationError, DomainError, IndeterminateTailError

finite = st.floats(-50, 50, allow_nan=False)


def kernels():
    return st.one_of(
        st.floats(0, 4).map(Kernel.power_plain),
        st.floats(0, 4).map(Kernel.power_squared),
        st.floats(0.01, 5).map(Kernel.constant),
        st.just(Kernel.tabulated([0, 1, 2], [1, 0.5, 0.2], 2.0)),
        st.just(Kernel.tabulated([0, 0.5, 3], [2, 2, 0])),
    )


def ensembles(max_n=8, max_d=3):
    return st.tuples(st.integers(1, max_n), st.integers(1, max_d), st.integers(0, 2**32 - 1)).map(
        lambda t: Ensemble(*np.random.default_rng(t[2]).normal(size=(2, t[0], t[1])) * 3))


# ---------------------------------------------------------------------------
# containers


class TestEnsemble:
    def test_promotes_one_dimensional_input(self):
        e = Ensemble([0.0, 1.0], [1.0, -1.0])
        assert e.x.shape == (2, 1)
        assert e.n_agents == 2 and e.dim == 1

    def test_arrays_are_read_only(self):
        e = Ensemble([[0.0]], [[1.0]])
        with pytest.raises(ValueError):
            e.x[0, 0] = 3.0

    @pytest.mark.parametrize("x, v", [
        ([[0.0, 1.0]], [[0.0]]),
        ([[np.nan]], [[0.0]]),
        ([[0.0]], [[np.inf]]),
        (np.zeros((0, 2)), np.zeros((0, 2))),
    ])
    def test_rejects_bad_shapes_and_values(self, x, v):
        with pytest.raises(ConfigurationError):
            Ensemble(x, v)

    @pytest.mark.parametrize("masses", [[0.5, 0.6], [1.0, 0.0], [-0.5, 1.5], [1.0]])
    def test_rejects_bad_masses(self, masses):
        with pytest.raises(ConfigurationError):
            Ensemble([0.0, 1.0], [0.0, 0.0], masses)

    def test_masses_tolerate_rounding(self):
        m = np.full(3, 1 / 3)
        e = Ensemble([0.0, 1.0, 2.0], [0.0, 0.0, 0.0], m)
        assert e.masses.sum() == pytest.approx(1.0, abs=1e-12)

    def test_agents_round_trip(self):
        e = Ensemble([[0.0, 1.0], [2.0, 3.0]], [[1.0, 1.0], [0.0, 0.0]], time=2.5)
        back = Ensemble.from_agents(e.agents, time=e.time)
        np.testing.assert_array_equal(back.x, e.x)
        np.testing.assert_array_equal(back.v, e.v)
        assert e[1].x.tolist() == [2.0, 3.0]


# ---------------------------------------------------------------------------
# kernels


class TestKernel:
    @pytest.mark.parametrize("kernel, r, expected", [
        (Kernel.power_plain(2), 0.0, 1.0),
        (Kernel.power_plain(2), 1.0, 0.25),
        (Kernel.power_squared(1), 3.0, 0.1),
        (Kernel.constant(0.7), 12.0, 0.7),
        (Kernel.tabulated([0, 1, 2], [1, 0.5, 0.2]), 1.5, 0.35),
        (Kernel.tabulated([0, 1, 2], [1, 0.5, 0.2]), 9.0, 0.2),
        (Kernel.tabulated([0, 1, 2], [1, 0.5, 0.2], 2.0), 5.0, 0.2 * 0.25),
    ])
    def test_values(self, kernel, r, expected):
        assert eval_kernel(kernel, r) == pytest.approx(expected, rel=1e-15)

    def test_negative_argument_is_a_domain_error(self):
        with pytest.raises(DomainError):
            eval_kernel(Kernel.power_plain(1), -0.1)

    @pytest.mark.parametrize("r, p", [
        ([0.5, 1, 2], [1, 0.5, 0.2]),      # must start at 0
        ([0, 1, 1], [1, 0.5, 0.2]),        # abscissae not increasing
        ([0, 1, 2], [1, 0.5, 0.7]),        # increasing samples
        ([0, 1, 2], [1, -0.5, -0.7]),      # negative samples
        ([0], [1]),                        # too short
    ])
    def test_table_validation(self, r, p):
        with pytest.raises(ConfigurationError):
            Kernel.tabulated(r, p)

    @pytest.mark.parametrize("bad", [
        lambda: Kernel.power_plain(-1),
        lambda: Kernel.constant(0),
        lambda: Kernel("gaussian"),
    ])
    def test_parameter_validation(self, bad):
        with pytest.raises(ConfigurationError):
            bad()

    def test_scaled_multiplies_values(self):
        for k in (Kernel.power_plain(1.5), Kernel.power_squared(0.3), Kernel.constant(2.0),
                  Kernel.tabulated([0, 1], [1, 0.5], 1.0)):
            r = np.linspace(0, 7, 15)
            np.testing.assert_allclose(k.scaled(10.0)(r), 10.0 * k(r), rtol=1e-15)

    @given(kernels(), st.floats(0, 100), st.floats(0, 100))
    def test_non_increasing(self, kernel, r1, r2):
        lo, hi = min(r1, r2), max(r1, r2)
        assert eval_kernel(kernel, lo) >= eval_kernel(kernel, hi)

    @given(kernels(), st.floats(0, 100))
    def test_nonnegative(self, kernel, r):
        assert eval_kernel(kernel, r) >= 0


# ---------------------------------------------------------------------------
# integrals


class TestTailIntegral:
    @pytest.mark.parametrize("kernel, lower, scale, power, expected", [
        (Kernel.power_plain(2), 0, 1, 1, 1.0),
        (Kernel.power_plain(2), 0, 2, 1, 0.5),
        # reference values from 30-digit mpmath quadrature
        (Kernel.power_squared(0.75), 0, 2, 1, 1.3110287771460599),
        (Kernel.power_squared(1), 1, 1, 1, math.pi / 4),
        (Kernel.power_squared(0.4), 0.5, 1, 2, 1.8066889413638005),
        (Kernel.power_plain(1.5), 0.3, 3, 2, 0.046168051708217915),
        (Kernel.tabulated([0, 1, 2], [1, 0.5, 0.2], 2.0), 0, 1, 1, 1.7),
        (Kernel.tabulated([0, 1, 2], [1, 0.5, 0.2], 2.0), 1.5, 1, 2, 0.07875),
    ])
    def test_reference_values(self, kernel, lower, scale, power, expected):
        assert kernel_tail_integral(kernel, lower, scale, power) == pytest.approx(expected, rel=1e-13)

    @pytest.mark.parametrize("kernel, power", [
        (Kernel.power_plain(0.4), 1),
        (Kernel.power_plain(1.0), 1),
        (Kernel.power_plain(0.5), 2),
        (Kernel.power_squared(0.5), 1),
        (Kernel.power_squared(0.25), 2),
        (Kernel.constant(1.0), 1),
        (Kernel.tabulated([0, 1], [1, 0.5], 1.0), 1),
    ])
    def test_divergent(self, kernel, power):
        assert kernel_tail_integral(kernel, 1.0, power=power) == math.inf

    def test_table_with_zero_tail_is_finite(self):
        k = Kernel.tabulated([0, 1, 2], [1, 0.5, 0.0])
        assert kernel_tail_integral(k, 0) == pytest.approx(0.75 + 0.25)

    def test_table_without_tail_model_is_indeterminate(self):
        with pytest.raises(IndeterminateTailError):
            kernel_tail_integral(Kernel.tabulated([0, 1, 2], [1, 0.5, 0.2]), 0)

    @pytest.mark.parametrize("args", [(-1.0, 1.0, 1), (0.0, 0.0, 1), (0.0, 1.0, 3)])
    def test_domain_errors(self, args):
        with pytest.raises(DomainError):
            kernel_tail_integral(Kernel.power_plain(2), *args)

    @given(st.sampled_from(["plain", "squared"]), st.floats(0.8, 4), st.floats(0, 20),
           st.floats(0.1, 5), st.sampled_from([1, 2]))
    def test_matches_quadrature(self, family, beta, lower, scale, power):
        g = beta * power
        if (family == "plain" and g <= 1.05) or (family == "squared" and 2 * g <= 1.1):
            return
        if family == "plain":
            k = Kernel.power_plain(beta)
            f = lambda r: (1 + scale * r) ** (-g)
            # analytic tail beyond the cutoff, written out independently
            tail = lambda c: (1 + scale * c) ** (1 - g) / (scale * (g - 1))
        else:
            k = Kernel.power_squared(beta)
            f = lambda r: (1 + (scale * r) ** 2) ** (-g)
            tail = lambda c: (scale * c) ** (1 - 2 * g) / (scale * (2 * g - 1))
        cut = 1e6
        pts = [lower, lower + 1, lower + 10, lower + 1e2, lower + 1e3, lower + 1e4, cut]
        num = sum(quad(f, a, b, epsabs=0, epsrel=1e-13, limit=200)[0] for a, b in zip(pts, pts[1:]))
        num += tail(cut)
        assert kernel_tail_integral(k, lower, scale, power) == pytest.approx(num, rel=1e-8)


class TestFiniteIntegral:
    def test_reference_value(self):
        val = kernel_integral(Kernel.power_squared(0.6), 0.2, 3.7, scale=1.5)
        assert val == pytest.approx(1.2159193522490005, rel=1e-13)

    def test_signed_and_empty(self):
        k = Kernel.power_plain(2)
        assert kernel_integral(k, 1, 0) == pytest.approx(-0.5)
        assert kernel_integral(k, 2, 2) == 0.0

    @given(kernels(), st.floats(0, 30), st.floats(0, 30), st.floats(0.2, 3))
    def test_matches_quadrature(self, kernel, a, b, scale):
        lo, hi = min(a, b), max(a, b)
        ref = quad(lambda r: float(kernel(scale * r)), lo, hi, epsabs=1e-13, epsrel=1e-12,
                   limit=200, points=[0.5 / scale, 1 / scale, 2 / scale, 3 / scale])[0]
        assert kernel_integral(kernel, lo, hi, scale) == pytest.approx(ref, rel=1e-9, abs=1e-12)


# ---------------------------------------------------------------------------
# diameters and norms


class TestDiameters:
    def test_single_agent(self):
        assert diameters(Ensemble([[1.0, 2.0]], [[3.0, 4.0]])) == (0.0, 0.0)

    def test_two_agents(self):
        assert diameters(Ensemble([0.0, 3.0], [1.0, -1.0])) == (3.0, 2.0)

    def test_identical_agents(self):
        e = Ensemble(np.ones((5, 2)), np.full((5, 2), -2.0))
        assert diameters(e) == (0.0, 0.0)

    def test_tie_break_is_lexicographic(self):
        e = Ensemble([0.0, 1.0, 0.0, 1.0], [0.0, 0.0, 0.0, 0.0])
        assert diameter_pairs(e)[0] == (0, 1)

    @given(ensembles())
    def test_pairs_realise_diameters(self, e):
        (i, j), (k, m) = diameter_pairs(e)
        dx, dv = diameters(e)
        assert np.linalg.norm(e.x[i] - e.x[j]) == pytest.approx(dx, abs=1e-12)
        assert np.linalg.norm(e.v[k] - e.v[m]) == pytest.approx(dv, abs=1e-12)


class TestSupNorms:
    def test_examples(self):
        assert sup_norms(Ensemble([0.0, 2.0], [0.0, 0.0]))[0] == 1.0
        assert sup_norms(Ensemble([0.0, 1.0, 5.0], [0.0, 0.0, 0.0]))[0] == 3.0
        assert sup_norms(Ensemble([0.0, 1.0], [4.0, 4.0]))[1] == 0.0

    @given(ensembles())
    def test_comparable_with_diameters(self, e):
        x_sup, v_sup = sup_norms(e)
        dx, dv = diameters(e)
        assert x_sup <= dx + 1e-12 or e.n_agents == 1
        assert dx <= 2 * x_sup + 1e-12
        assert dv <= 2 * v_sup + 1e-12

    @given(ensembles(), finite, finite)
    def test_translation_invariant(self, e, a, b):
        shifted = Ensemble(e.x + a, e.v + b)
        np.testing.assert_allclose(sup_norms(shifted), sup_norms(e), atol=1e-12)


def test_record_row_order_matches_columns():
    rec = DiagnosticsRecord(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0)
    assert DiagnosticsRecord.CSV_COLUMNS == ("t", "Dx", "Dv", "x_sup", "v_sup", "E_k", "E_p",
                                             "L_plus", "L_minus")
    assert rec.as_row() == (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0)
