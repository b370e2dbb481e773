import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steinlab import ergm
from steinlab import exact_oracle as eo
from steinlab.rng import make_rng
from steinlab.stein_core import EXACT_TOL


def _brute_triangles(config):
    return sum(config.has_edge(a, b) and config.has_edge(a, c) and config.has_edge(b, c)
               for a, b, c in itertools.combinations(range(config.n), 3))


def _random_graph(n, p, seed):
    return ergm.EdgeConfig.random(n, p, make_rng(seed))


class TestEdgeConfig:
    def test_set_and_query(self):
        g = ergm.EdgeConfig.empty(5)
        g.set_edge(1, 3, 1)
        assert g.has_edge(3, 1) and g.edge_count() == 1
        g.set_edge(3, 1, 0)
        assert g.edge_count() == 0

    def test_round_trips(self):
        g = _random_graph(7, 0.5, 1)
        assert ergm.EdgeConfig.from_adjacency(g.to_adjacency()) == g
        assert ergm.EdgeConfig.from_mask(7, g.to_mask()) == g
        assert hash(g.copy()) == hash(g)

    def test_invalid_pairs(self):
        g = ergm.EdgeConfig.empty(4)
        with pytest.raises(ValueError):
            g.set_edge(2, 2, 1)
        with pytest.raises(IndexError):
            g.has_edge(0, 4)


class TestCounts:
    def test_triangles(self):
        assert ergm.triangle_count(ergm.EdgeConfig.empty(6)) == 0
        assert ergm.triangle_count(ergm.EdgeConfig.complete(5)) == 10

    def test_example_graph(self):
        g = ergm.figure1_graph()
        assert g.edge_count() == 8 and ergm.triangle_count(g) == 3

    def test_triangles_against_brute_force(self):
        for seed in range(10):
            g = _random_graph(8, 0.4, seed)
            assert ergm.triangle_count(g) == _brute_triangles(g)

    def test_wedge_stat(self):
        assert ergm.wedge_stat(ergm.EdgeConfig.empty(5), 0, 1) == 0
        n = 6
        assert ergm.wedge_stat(ergm.EdgeConfig.complete(n), 0, 1) == pytest.approx((n - 2) / n)
        path = ergm.EdgeConfig.from_edges(3, [(0, 2), (1, 2)])
        assert ergm.wedge_stat(path, 0, 1) == pytest.approx(1 / 3)

    def test_wedge_matrix_matches(self):
        g = _random_graph(9, 0.5, 4)
        W = ergm.wedge_matrix(g.to_adjacency())
        for i, j in ergm.pair_list(9):
            assert W[i, j] / 9 == pytest.approx(ergm.wedge_stat(g, i, j))


class TestSingleEdgeDynamics:
    def test_beta_zero_is_bernoulli(self):
        g = _random_graph(6, 0.5, 2)
        h = 0.7
        for (_, _), v, p in ergm.transition_law(g, 0.0, h):
            q = math.exp(h) / (1 + math.exp(h))
            assert p * 15 == pytest.approx(q if v == 1 else 1 - q)

    def test_detailed_balance(self):
        law = eo.ergm_pair_law(3, 1.0, 0.0)
        assert law.detailed_balance < EXACT_TOL
        assert abs(law.mean_f()) < EXACT_TOL
        assert law.variance_residual() < EXACT_TOL

    def test_triangle_functional_mean_zero(self):
        law = eo.ergm_pair_law(4, 1.5, -0.3, functional="triangle")
        assert abs(law.mean_f()) < EXACT_TOL

    @pytest.mark.parametrize("functional", ["edge", "triangle"])
    def test_flip_changes_match_recompute(self, functional):
        g = _random_graph(7, 0.5, 3)
        beta, h = 1.3, -0.2
        fn = ergm.edge_functional if functional == "edge" else ergm.triangle_functional
        D = ergm.flip_f_changes(g, beta, h, functional)
        f0 = fn(g, beta, h)
        for i, j in ergm.pair_list(7):
            t = g.copy()
            t.set_edge(i, j, 1 - g.has_edge(i, j))
            assert D[i, j] == pytest.approx(abs(f0 - fn(t, beta, h)), abs=1e-12)

    @pytest.mark.parametrize("beta", [0.0, 0.5, 1.0, 3.0])
    def test_edge_functional_flip_bound(self, beta):
        # one flip moves the edge functional by at most 1 + beta
        for seed in range(5):
            g = _random_graph(8, 0.5, seed)
            D = ergm.flip_f_changes(g, beta, 0.1)
            assert D.max() <= 1 + beta + 1e-12

    def test_delta_matches_brute_force(self):
        g = _random_graph(5, 0.5, 6)
        beta, h = 1.0, 0.0
        f0 = ergm.edge_functional(g, beta, h)
        acc = 0.0
        for (i, j), v, p in ergm.transition_law(g, beta, h):
            t = g.copy()
            t.set_edge(i, j, v)
            acc += p * abs(f0 - ergm.edge_functional(t, beta, h)) * 10 * abs(g.has_edge(i, j) - v)
        assert ergm.delta_exact(g, beta, h) == pytest.approx(0.5 * acc, abs=1e-12)

    def test_gibbs_step(self):
        g = _random_graph(6, 0.5, 7)
        new, pair = ergm.gibbs_edge_step(g, 1.0, 0.0, make_rng(1))
        assert abs(new.edge_count() - g.edge_count()) <= 1
        assert pair.delta_x == pytest.approx(ergm.delta_exact(g, 1.0, 0.0))


class TestChain:
    def test_incremental_state(self):
        chain = ergm.ErgmChain(12, 1.0, -0.5, make_rng(2))
        chain.run(2_000)
        assert chain.consistent()
        assert np.array_equal(chain.W, ergm.wedge_matrix(chain.adj))

    def test_beta_zero_edge_mean(self):
        chain = ergm.ErgmChain(5, 0.0, 0.0, make_rng(3))
        chain.run(500)
        counts = []
        for _ in range(4000):
            chain.run(10)
            counts.append(int(chain.adj.sum()) // 2)
        assert np.mean(counts) == pytest.approx(5.0, abs=0.15)

    def test_unknown_init(self):
        with pytest.raises(ValueError):
            ergm.ErgmChain(5, 1.0, 0.0, init="star")


class TestTwoEdgePair:
    def test_beta_zero_gap(self):
        g = _random_graph(6, 0.5, 8)
        rep = ergm.pair_resample_bound_check(g, 0, 1, 2, 0.0, 0.3)
        assert rep.lhs == pytest.approx(0.0, abs=1e-15)

    def test_random_n10(self):
        g = _random_graph(10, 0.5, 9)
        for i, j, k in itertools.permutations(range(4), 3):
            rep = ergm.pair_resample_bound_check(g, i, j, k, 2.0, 0.0)
            assert rep.holds and rep.bound == pytest.approx(0.4)

    def test_complete_graph(self):
        g = ergm.EdgeConfig.complete(5)
        for i, j, k in itertools.permutations(range(5), 3):
            assert ergm.pair_resample_bound_check(g, i, j, k, 1.0, 0.0).holds

    def test_law_matches_gibbs_weights(self):
        g = _random_graph(6, 0.5, 10)
        beta, h = 1.7, -0.4
        i, j, k = 0, 1, 4
        law = ergm.two_edge_law(g, i, j, k, beta, h)
        logw = np.empty((2, 2))
        for x in (0, 1):
            for y in (0, 1):
                logw[x, y] = ergm.hamiltonian(ergm.apply_two_edge(g, i, j, k, x, y), beta, h)
        w = np.exp(logw - logw.max())
        assert np.allclose(law, w / w.sum(), atol=1e-14)

    def test_exact_pair_law(self):
        law = eo.two_edge_pair_law(4, 0, 1, 1.0, 0.2)
        assert law.detailed_balance < EXACT_TOL
        assert abs(law.mean_f()) < EXACT_TOL

    @pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
    def test_functional_change_bound(self, beta):
        # one two-edge move shifts f by at most 4 (1 + beta) / n
        n = 7
        for seed in range(3):
            g = _random_graph(n, 0.5, seed)
            f0 = ergm.two_edge_f(g, 0, 1, beta, 0.0)
            for k, x, y, _ in ergm.two_edge_moves(g, 0, 1, beta, 0.0):
                f1 = ergm.two_edge_f(ergm.apply_two_edge(g, 0, 1, k, x, y), 0, 1, beta, 0.0)
                assert abs(f0 - f1) <= 4 * (1 + beta) / n + 1e-12

    def test_step(self):
        g = _random_graph(6, 0.5, 11)
        new, pair = ergm.two_edge_step(g, 0, 1, 1.0, 0.0, make_rng(4))
        assert pair.delta_x == pytest.approx(ergm.two_edge_delta(g, 0, 1, 1.0, 0.0))


class TestMeanfieldResidual:
    def test_complete_graph(self):
        n = 8
        g = ergm.EdgeConfig.complete(n)
        u = (n - 2) / n
        expected = u - u * ergm.phi(u, 1.0, 0.0) ** 2
        assert ergm.meanfield_residual_g(g, 0, 1, 1.0, 0.0) == pytest.approx(expected)

    def test_empty_graph(self):
        n = 8
        g = ergm.EdgeConfig.empty(n)
        assert ergm.meanfield_residual_g(g, 2, 5, 1.0, 0.3) == pytest.approx(-(n - 2) / n * ergm.phi(0.0, 1.0, 0.3) ** 2)

    def test_matrix_matches_scalar(self):
        g = _random_graph(9, 0.5, 12)
        G = ergm.meanfield_residual_matrix(ergm.wedge_matrix(g.to_adjacency()), 1.2, -0.1)
        for i, j in ergm.pair_list(9):
            assert G[i, j] == pytest.approx(ergm.meanfield_residual_g(g, i, j, 1.2, -0.1), abs=1e-14)

    def test_exact_mean_n4(self):
        # beta = 0: edges are fair coins, so E g = E L - (n-2)/n * 1/4 = 0
        dist_states = [ergm.EdgeConfig.from_mask(4, m) for m in range(64)]
        mean = np.mean([ergm.meanfield_residual_g(g, 0, 1, 0.0, 0.0) for g in dist_states])
        assert mean == pytest.approx(0.0, abs=1e-15)

    def test_scaling_run_small(self):
        res = ergm.residual_scaling_run(20, 1.0, 0.0, 3, 2, 1, make_rng(5), probes_per_sample=20)
        assert res.pair_violations == 0 and res.pair_checks == 60
        assert res.mean_abs_g > 0

    def test_doubling_n_shrinks_residual(self):
        # n^(-1/2) predicts a factor sqrt(2) ~ 1.41 between n and 2n
        small = ergm.residual_scaling_run(50, 1.0, 0.0, 40, 10, 1, make_rng(0, 50), probes_per_sample=10)
        large = ergm.residual_scaling_run(100, 1.0, 0.0, 40, 10, 1, make_rng(0, 100), probes_per_sample=10)
        assert 1.2 <= small.mean_abs_g / large.mean_abs_g <= 1.8
        assert small.pair_violations == large.pair_violations == 0


class TestGeneralPattern:
    def test_alpha(self):
        assert ergm.SubgraphSpec.triangle().alpha == 6
        assert ergm.SubgraphSpec.two_star().alpha == 2
        assert ergm.SubgraphSpec.clique(4).alpha == 24

    def test_triangle_counts_agree(self):
        spec = ergm.SubgraphSpec.triangle()
        for seed in range(5):
            g = _random_graph(7, 0.5, seed)
            assert ergm.subgraph_count(g, spec) == ergm.triangle_count(g)

    def test_two_stars_in_triangle(self):
        assert ergm.subgraph_count(ergm.EdgeConfig.complete(3), ergm.SubgraphSpec.two_star()) == 3

    def test_count_delta_against_recount(self):
        for spec in (ergm.SubgraphSpec.triangle(), ergm.SubgraphSpec.two_star(), ergm.SubgraphSpec.clique(4)):
            g = _random_graph(7, 0.5, 13)
            for i, j in ergm.pair_list(7):
                with_e, without = g.copy(), g.copy()
                with_e.set_edge(i, j, 1)
                without.set_edge(i, j, 0)
                diff = ergm.subgraph_count(with_e, spec) - ergm.subgraph_count(without, spec)
                assert ergm.subgraph_count_delta(g, spec, i, j) == diff

    def test_triangle_L_relation(self):
        spec = ergm.SubgraphSpec.triangle()
        for n in (5, 8):
            g = _random_graph(n, 0.5, n)
            for i, j in ergm.pair_list(n):
                assert ergm.general_L(g, spec, i, j) == pytest.approx(ergm.wedge_stat(g, i, j) * n / (n - 2))

    def test_triangle_reduces_to_single_edge_law(self):
        spec = ergm.SubgraphSpec.triangle()
        n, beta, h = 6, 1.2, -0.3
        g = _random_graph(n, 0.5, 14)
        general = ergm.general_transition_law(g, spec, beta * (n - 2) / n, h)
        single = ergm.transition_law(g, beta, h)
        for (a, b) in zip(general, single):
            assert a[0] == b[0] and a[1] == b[1]
            assert a[2] == pytest.approx(b[2], abs=1e-15)

    def test_beta_zero_bernoulli(self):
        g = _random_graph(5, 0.5, 15)
        for _, v, p in ergm.general_transition_law(g, ergm.SubgraphSpec.two_star(), 0.0, 0.0):
            assert p * 10 == pytest.approx(0.5)

    def test_two_star_detailed_balance(self):
        law = eo.general_ergm_pair_law(4, ergm.SubgraphSpec.two_star(), 1.0, 0.0)
        assert law.detailed_balance < EXACT_TOL

    def test_general_chain(self):
        chain = ergm.GeneralErgmChain(8, ergm.SubgraphSpec.two_star(), 1.0, -0.5, make_rng(6))
        chain.run(200)
        assert chain.graph.n == 8


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 8), st.integers(0, 2**20), st.floats(0.0, 3.0), st.floats(-2.0, 2.0))
def test_edge_flip_bound_property(n, seed, beta, h):
    g = _random_graph(n, 0.5, seed)
    assert ergm.flip_f_changes(g, beta, h).max() <= 1 + beta + 1e-12
