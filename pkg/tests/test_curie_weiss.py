import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steinlab import curie_weiss as cw
from steinlab import exact_oracle as eo
from steinlab.rng import make_rng
from steinlab.stein_core import EXACT_TOL


def _brute_delta(config, beta, h):
    """Delta by summing over every move of the transition law."""
    s = np.array(config)
    f0 = cw.f_statistic(s, beta, h)
    acc = 0.0
    for i, v, p in cw.transition_law(s, beta, h):
        t = s.copy()
        t[i] = v
        acc += p * abs(f0 - cw.f_statistic(t, beta, h)) * abs(s[i] - v)
    return 0.5 * acc


class TestConditionalLaw:
    def test_single_spin_uniform(self):
        law = cw.transition_law([1], 3.0, 0.0)
        assert law == [(0, 1, 0.5), (0, -1, 0.5)]

    def test_all_plus_n4(self):
        law = cw.transition_law([1, 1, 1, 1], 1.0, 0.0)
        for _, v, p in law:
            if v == -1:
                assert p * 4 == pytest.approx((1 - math.tanh(0.75)) / 2, rel=1e-14)

    def test_probabilities_sum_to_one(self):
        law = cw.transition_law([1, -1, 1, 1, -1], 0.7, 0.3)
        assert sum(p for _, _, p in law) == pytest.approx(1.0, abs=1e-15)


class TestFStatistic:
    def test_all_plus_n10(self):
        assert cw.f_statistic(np.ones(10), 1.0, 0.0) == pytest.approx(1 - math.tanh(0.9), rel=1e-14)

    def test_alternating_small(self):
        n = 20
        s = np.array([1, -1] * (n // 2))
        assert abs(cw.f_statistic(s, 1.0, 0.0)) <= 1 / n

    def test_from_sum_matches_config(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            s = rng.choice([-1, 1], size=17)
            assert cw.f_from_sum(s.sum(), 17, 0.8, -0.2) == pytest.approx(cw.f_statistic(s, 0.8, -0.2), abs=1e-14)

    def test_exact_mean_zero(self):
        assert abs(eo.cw_pair_law(3, 1.0, 0.0).mean_f()) < EXACT_TOL


class TestDelta:
    @pytest.mark.parametrize("beta,h", [(1.0, 0.0), (0.5, 0.3), (2.0, -0.4)])
    def test_closed_form_matches_brute_force(self, beta, h):
        for config in itertools.product((-1, 1), repeat=5):
            assert cw.delta_exact(config, beta, h) == pytest.approx(_brute_delta(config, beta, h), abs=1e-14)

    def test_envelope_for_every_sum(self):
        # zero violations of the beta = 1 envelope over every reachable spin sum
        for n in (10, 50, 500):
            S = np.arange(-n, n + 1, 2)
            f = np.abs(cw.f_from_sum(S, n, 1.0))
            d = cw.delta_from_sum(S, n, 1.0)
            assert np.all(d <= 6 / n * f ** (2 / 3) + 12 * n ** (-5 / 3) + EXACT_TOL)

    def test_all_plus_n10_envelope(self):
        n = 10
        f = cw.f_statistic(np.ones(n), 1.0)
        d = cw.delta_exact(np.ones(n), 1.0)
        assert d <= 6 / n * abs(f) ** (2 / 3) + 12 * n ** (-5 / 3)

    def test_cubic_inequality(self):
        x = np.linspace(-1, 1, 10_001)
        assert np.all(np.abs(x) ** 3 <= 5 * np.abs(x - np.tanh(x)) + EXACT_TOL)


class TestGlauber:
    def test_pair_record(self):
        s = np.array([1, 1, -1, 1, -1, -1, 1])
        new, pair = cw.glauber_step(s, 1.0, 0.0, make_rng(1))
        assert np.sum(new != s) <= 1
        assert pair.big_f in (-2.0, 0.0, 2.0)
        assert pair.f_x == pytest.approx(cw.f_statistic(s, 1.0))
        assert pair.f_x_prime == pytest.approx(cw.f_statistic(new, 1.0))

    def test_chain_matches_exact_law(self):
        n, samples = 20, 20_000
        chain = cw.CurieWeissChain(n, 1.0, 0.0, make_rng(2))
        sums = chain.sample_sums(samples, 50 * n, n)
        exact = eo.exact_cw_distribution(n, 1.0, 0.0)
        emp_abs = np.mean(np.abs(sums)) / n
        exact_abs = exact.expect(np.abs)
        # seeds 0..4 give gaps below 0.008; one sweep of thinning leaves correlated samples
        assert abs(emp_abs - exact_abs) < 0.02

    def test_chain_sum_consistent(self):
        chain = cw.CurieWeissChain(30, 0.7, 0.1, make_rng(3))
        chain.run(5_000)
        assert chain.S == int(chain.config().sum())

    def test_default_schedule(self):
        assert cw.default_schedule(40) == (2000, 40)
        assert cw.default_schedule(40, 7, 3) == (7, 3)


class TestCriticalTail:
    def test_exact_fit(self):
        t = np.linspace(0.5, 3.0, 26)
        exp = cw.critical_tail_exact(10_000, t)
        assert 0 < exp.fitted_c <= 1 / 12 * 2
        assert np.all(exp.empirical_prob <= 2 * np.exp(-exp.fitted_c * t**4) + 1e-15)
        assert np.all(np.diff(exp.empirical_prob) <= 0)

    def test_sampled_tail_at_zero(self):
        exp = cw.critical_tail_experiment(100, 500, None, None, np.array([0.0, 0.5, 1.0]), make_rng(4))
        assert exp.empirical_prob[0] == 1.0
        assert np.all(np.diff(exp.empirical_prob) <= 0)
        assert exp.fitted_c > 0

    def test_fit_ignores_zero_probabilities(self):
        assert cw.fit_tail_constant([0.0, 1.0], [1.0, 0.0], 4.0) == math.inf


class TestSubcritical:
    def test_values(self):
        assert cw.subcritical_functional(0.0, 0.5) == 0.0
        assert cw.subcritical_functional(0.2, 1.0) == pytest.approx(0.0016, rel=1e-12)

    def test_beta_range(self):
        with pytest.raises(ValueError):
            cw.subcritical_functional(0.1, 1.5)

    def test_exact_tail_bound(self):
        t = np.linspace(0.0, 0.02, 21)
        exp = cw.subcritical_tail_exact(10_000, 0.5, t)
        assert np.all(exp.empirical_prob <= exp.bound_prob + 1e-15)


class TestCwRho:
    three_point = cw.CwRhoSpec((-math.sqrt(3), 0.0, math.sqrt(3)), (1 / 6, 2 / 3, 1 / 6))

    def test_rademacher_h_function(self):
        spec = cw.CwRhoSpec.rademacher()
        s = np.linspace(-2, 2, 9)
        assert np.allclose(cw.cw_rho_h_function(spec, s), s**2 / 2 - np.log(np.cosh(s)), atol=1e-14)
        assert cw.detect_order_k(spec) == 2
        assert cw.h_derivative_at_zero(spec, 4) == pytest.approx(2.0, abs=1e-12)

    def test_h_zero_at_origin(self):
        for spec in (cw.CwRhoSpec.rademacher(), self.three_point):
            assert cw.cw_rho_h_function(spec, 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_order_three(self):
        assert cw.detect_order_k(self.three_point) == 3

    def test_invalid_specs(self):
        with pytest.raises(ValueError):
            cw.CwRhoSpec((-1.0, 2.0), (0.5, 0.5))
        with pytest.raises(ValueError):
            cw.CwRhoSpec((-2.0, 2.0), (0.5, 0.5))
        with pytest.raises(ValueError):
            cw.CwRhoSpec((-1.0, 1.0), (0.3, 0.7))

    def test_rademacher_reduces_to_classical(self):
        spec = cw.CwRhoSpec.rademacher()
        config = np.array([1.0, -1.0, 1.0, 1.0])
        rho = cw.cw_rho_transition_law(spec, config, 4)
        classic = cw.transition_law(config.astype(int), 1.0, 0.0)
        rho_map = {(i, spec.x[b]): p for i, b, p in rho}
        for i, v, p in classic:
            assert rho_map[(i, float(v))] == pytest.approx(p, abs=1e-15)

    def test_single_site_conditional(self):
        spec = self.three_point
        law = cw.cw_rho_conditional(spec, 0.0, 1)
        w = spec.p * np.exp(spec.x**2 / 2)
        assert np.allclose(law, w / w.sum(), atol=1e-15)
        assert law @ spec.x == pytest.approx(0.0, abs=1e-15)

    def test_exact_mean_zero(self):
        law = eo.cw_rho_pair_law(self.three_point, 3)
        assert abs(law.mean_f()) < EXACT_TOL
        assert law.detailed_balance < EXACT_TOL

    def test_glauber_step_record(self):
        spec = self.three_point
        config = np.array([math.sqrt(3), 0.0, 0.0, -math.sqrt(3), 0.0])
        new, pair = cw.cw_rho_glauber_step(spec, config, 5, make_rng(6))
        assert pair.delta_x >= 0
        assert np.sum(new != config) <= 1

    def test_tail_experiment(self):
        exp = cw.cw_rho_tail_experiment(self.three_point, 100, 300, 500, 20, np.array([0.0, 0.5]), make_rng(7))
        assert exp.empirical_prob[0] == 1.0


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.floats(0.0, 2.0), st.floats(-1.0, 1.0))
def test_delta_nonnegative_and_bounded(n, beta, h):
    S = np.arange(-n, n + 1, 2)
    d = cw.delta_from_sum(S, n, beta, h)
    assert np.all(d >= 0)
    # |f - f'| <= (2 + 2 beta)/n and |F| <= 2
    assert np.all(d <= (2 + 2 * beta) / n + 1e-12)
