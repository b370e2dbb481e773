import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steinlab import meanfield as mf
from steinlab.ergm import SubgraphSpec

CRIT_H = math.log(2) - 1.5
CRIT_BETA = 1.5**3


class TestPhi:
    def test_origin(self):
        assert mf.phi(0.0, 2.0, 0.4) == pytest.approx(math.exp(0.4) / (1 + math.exp(0.4)))

    def test_saturation(self):
        assert mf.phi(0.5, 1.0, -50) < 1e-20
        assert mf.phi(0.5, 1.0, 50) == pytest.approx(1.0)

    def test_critical_fixed_point(self):
        assert mf.phi(4 / 9, CRIT_BETA, CRIT_H) == pytest.approx(2 / 3, abs=1e-15)

    def test_vectorised(self):
        u = np.linspace(0, 1, 5)
        assert np.allclose(mf.phi(u, 1.0, 0.2), [mf.phi(float(x), 1.0, 0.2) for x in u])


class TestRoots:
    def test_beta_zero(self):
        h = 0.3
        rep = mf.psi_roots(0.0, h)
        p = math.exp(h) / (1 + math.exp(h))
        assert len(rep.roots) == 1
        assert rep.u_star == pytest.approx(p * p, abs=1e-12)
        assert rep.roots[0].dpsi == pytest.approx(-1.0, abs=1e-9)

    def test_triple_root(self):
        rep = mf.psi_roots(CRIT_BETA, CRIT_H)
        assert len(rep.roots) == 1
        assert rep.roots[0].multiplicity == "triple"
        assert rep.u_star == pytest.approx(4 / 9, abs=1e-6)

    def test_three_roots_inside_coexistence(self):
        h = mf.h0() - 1
        lo, hi = mf.beta_bounds(h)
        rep = mf.psi_roots(0.5 * (lo + hi), h)
        assert len(rep.roots) == 3
        assert not rep.in_region_S

    def test_roots_are_zeros(self):
        for beta, h in ((1.0, 0.0), (5.0, -2.0), (12.0, -3.5)):
            for r in mf.psi_roots(beta, h).roots:
                assert abs(mf.psi(r.u, beta, h)) < 1e-10

    def test_negative_beta(self):
        with pytest.raises(ValueError):
            mf.psi_roots(-1.0, 0.0)


class TestRegion:
    def test_constants(self):
        assert mf.h0() == pytest.approx(CRIT_H)
        assert mf.p0() == pytest.approx(2 / (2 + math.exp(1.5)), abs=1e-15)
        assert round(mf.p0(), 2) == 0.31

    @pytest.mark.parametrize("h", [-6.0, -3.0, CRIT_H, -0.5, 0.0, 2.0])
    def test_low_beta_always_inside(self, h):
        for beta in np.linspace(0, CRIT_BETA, 7):
            rep = mf.region_S_membership(float(beta), h)
            assert rep.in_S or rep.boundary

    def test_critical_point_is_boundary(self):
        # the stability condition is an equality at the triple root, so the point sits on the curve
        rep = mf.region_S_membership(CRIT_BETA, CRIT_H)
        assert rep.boundary and not rep.in_S
        assert mf.region_S_membership(CRIT_BETA - 1e-3, CRIT_H).in_S

    def test_high_field(self):
        assert mf.region_S_membership(100.0, 0.0).in_S

    def test_grid_agreement(self):
        disagreements = 0
        for h in np.linspace(-3.0, 0.0, 100):
            for beta in np.linspace(0.0, 10.0, 100):
                rep = mf.region_S_membership(float(beta), float(h))
                if not rep.boundary:
                    disagreements += rep.closed_form != rep.numeric
        assert disagreements == 0

    def test_two_star_region(self):
        rep = mf.region_S_membership(1.0, 0.0, SubgraphSpec.two_star())
        assert rep.in_S


class TestPhaseCurve:
    def test_critical_point(self):
        h, beta = mf.phase_curve(0.5)
        assert h == pytest.approx(CRIT_H, abs=1e-14)
        assert beta == pytest.approx(CRIT_BETA, abs=1e-12)

    @pytest.mark.parametrize("t", [0.25, 1.0, 2.0])
    def test_curve_is_boundary(self, t):
        h, beta = mf.phase_curve(t)
        eps = 1e-3
        inside = [mf.region_S_membership(beta + s, h).in_S for s in (-eps, eps)]
        assert inside[0] != inside[1] or not all(inside)

    @pytest.mark.parametrize("t", [0.25, 1.0, 2.0])
    def test_inflection_root(self, t):
        h, beta = mf.phase_curve(t)
        v = (1 + t) ** -2
        assert mf.inflection_root(t) == pytest.approx(v)
        assert abs(mf.psi(v, beta, h)) < 1e-12
        assert abs(mf.psi_prime(v, beta, h)) < 1e-9

    def test_invalid_t(self):
        with pytest.raises(ValueError):
            mf.phase_curve(0.0)


class TestRates:
    def test_kl(self):
        assert mf.kl_rate(0.3, 0.3) == 0.0
        assert mf.kl_rate(1.0, 0.5) == pytest.approx(math.log(2))
        expected = 0.6 * math.log(0.6 / 0.35) + 0.4 * math.log(0.4 / 0.65)
        assert mf.kl_rate(0.6, 0.35) == pytest.approx(expected, rel=1e-15)

    def test_energy_beta_zero_minimum(self):
        r = np.linspace(0.01, 0.99, 99)
        e = mf.energy(r, 0.0, 0.3)
        assert r[np.argmin(e)] == pytest.approx(0.3, abs=0.01)

    def test_energy_stationary_at_fixed_point(self):
        beta, h = 2.0, -0.5
        u = mf.psi_roots(beta, h).u_star
        r = mf.phi(u, beta, h)
        p = mf.phi(0.0, beta, h)
        assert abs(mf.energy_prime(r, beta, p)) < 1e-9
        assert mf.rate_stationarity_check(r, beta, p)

    def test_rate_equal_r_p(self):
        res = mf.ld_rate(0.35, 0.35)
        assert res.rate == 0.0 and res.beta == 0.0 and res.admissible

    def test_rate_admissible(self):
        res = mf.ld_rate(0.35, 0.6)
        assert res.admissible
        assert res.rate == pytest.approx(mf.kl_rate(0.6, 0.35) / 2)
        assert res.beta == pytest.approx(2.8458453236510777, rel=1e-9)

    def test_rate_below_p(self):
        with pytest.raises(ValueError):
            mf.ld_rate(0.35, 0.2)

    def test_admissible_full(self):
        assert mf.admissible_r_interval(0.5).full
        assert mf.admissible_r_interval(mf.p0() + 1e-6).full

    def test_admissible_gap(self):
        res = mf.admissible_r_interval(0.2)
        assert not res.full
        assert res.p_prime == pytest.approx(0.24442533645142353, abs=1e-8)
        assert res.p_doubleprime == pytest.approx(0.9916108727549392, abs=1e-8)
        mid = 0.5 * (res.p_prime + res.p_doubleprime)
        assert not mf.ld_rate(0.2, mid).admissible
        assert mf.ld_rate(0.2, 0.5 * (0.2 + res.p_prime)).admissible

    def test_admissible_gap_p01(self):
        res = mf.admissible_r_interval(0.1)
        assert 0.1 < res.p_prime < res.p_doubleprime < 1


class TestFreeEnergy:
    @pytest.mark.parametrize("h", [-2.0, -1.0, 0.0, 1.0, 2.0])
    def test_beta_zero(self, h):
        assert mf.free_energy_limit(0.0, h) == pytest.approx(0.5 * math.log1p(math.exp(h)), abs=1e-12)

    def test_frozen(self):
        assert mf.free_energy_limit(1.0, 0.0) == pytest.approx(0.37268042286639635, abs=1e-12)

    def test_supremum_over_roots(self):
        beta, h = 2.0, -0.5
        vals = [mf.fixed_point_objective(r.u, beta, h) for r in mf.psi_roots(beta, h).roots]
        assert mf.free_energy_limit(beta, h) == pytest.approx(max(vals), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 15.0), st.floats(-4.0, 1.0))
def test_roots_property(beta, h):
    rep = mf.psi_roots(beta, h)
    assert 1 <= len(rep.roots) <= 3
    assert all(0 <= r.u <= 1 for r in rep.roots)
    if beta <= CRIT_BETA:
        rep = mf.region_S_membership(beta, h)
        assert rep.in_S or rep.boundary
