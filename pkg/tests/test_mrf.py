import math

import numpy as np
import pytest

from netdesign.graph import Graph, ParameterError
from netdesign.mrf import (
    GammaBox,
    MrfParams,
    conditional_prob_one,
    exact_mrf_dist,
    gibbs_sample,
    mrf_log_unnorm,
    state_table,
    suff_stats,
)


class TestSuffStats:
    def test_zero_vector(self, k3):
        assert suff_stats(np.zeros(3, dtype=int), k3) == (0, 0)

    def test_all_ones_complete(self, k3):
        assert suff_stats(np.ones(3, dtype=int), k3) == (3, 3)

    def test_path_example(self):
        g = Graph.from_edges(3, [(0, 1), (1, 2)])
        assert suff_stats(np.array([1, 1, 0]), g) == (2, 1)

    def test_dimension_mismatch(self, k3):
        with pytest.raises(ParameterError):
            suff_stats(np.array([1, 0]), k3)


class TestLogUnnorm:
    def test_zero_params(self, k3):
        for state in range(8):
            y = np.array([(state >> i) & 1 for i in range(3)])
            assert mrf_log_unnorm(y, k3, MrfParams(0.0, 0.0)) == 0.0

    def test_all_one_k3(self, k3):
        assert mrf_log_unnorm(np.ones(3, dtype=int), k3, MrfParams(1.0, 2.0)) == 9.0

    def test_zero_vector_any_params(self, k3):
        assert mrf_log_unnorm(np.zeros(3, dtype=int), k3, MrfParams(2.5, -1.0)) == 0.0


class TestConditional:
    def test_symmetric_weights(self, k3):
        p = conditional_prob_one(0, np.array([0, 1, 0]), k3, MrfParams(0.0, 0.0))
        assert p == pytest.approx(0.5)

    def test_isolated_node_field_only(self):
        g = Graph.from_edges(2, [])
        p = conditional_prob_one(0, np.array([0, 1]), g, MrfParams(math.log(3.0), 0.7))
        assert p == pytest.approx(0.75)

    def test_one_active_neighbor(self):
        g = Graph.from_edges(2, [(0, 1)])
        p = conditional_prob_one(0, np.array([0, 1]), g, MrfParams(0.0, math.log(2.0)))
        assert p == pytest.approx(2.0 / 3.0)

    def test_matches_exact_table_ratios(self):
        rng = np.random.default_rng(2)
        g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 2)])
        params = MrfParams(0.4, 0.8)
        dist = exact_mrf_dist(g, params)
        for i in range(4):
            for state in range(16):
                y = np.array([(state >> b) & 1 for b in range(4)])
                s_on = state | (1 << i)
                s_off = state & ~(1 << i)
                cond = dist[s_on] / (dist[s_on] + dist[s_off])
                assert conditional_prob_one(i, y, g, params) == pytest.approx(
                    cond, abs=1e-12
                )


class TestExactDist:
    def test_uniform_at_zero_coupling(self):
        g = Graph.from_edges(3, [(0, 1), (1, 2)])
        dist = exact_mrf_dist(g, MrfParams(0.0, 0.0))
        assert np.allclose(dist, 1.0 / 8.0, atol=1e-12)

    def test_single_node_logistic(self):
        g = Graph.from_edges(1, [])
        dist = exact_mrf_dist(g, MrfParams(math.log(3.0), 0.0))
        assert dist[1] == pytest.approx(0.75, abs=1e-12)

    def test_normalization(self):
        rng = np.random.default_rng(0)
        for seed in range(5):
            from netdesign.graph import gen_er

            g = gen_er(5, 0.5, np.random.default_rng(seed))
            dist = exact_mrf_dist(g, MrfParams(0.3, 0.6))
            assert dist.sum() == pytest.approx(1.0, abs=1e-12)

    def test_factorizes_at_zero_interaction(self):
        from netdesign.graph import gen_er

        for n in (3, 4, 5):
            g = gen_er(n, 0.5, np.random.default_rng(n))
            g0 = 0.37
            dist = exact_mrf_dist(g, MrfParams(g0, 0.0))
            p = math.exp(g0) / (1 + math.exp(g0))
            ys = state_table(n)
            expected = (p ** ys.sum(axis=1)) * ((1 - p) ** (n - ys.sum(axis=1)))
            assert np.allclose(dist, expected, atol=1e-12)

    def test_alignment_forced_by_interaction(self):
        # strong positive coupling concentrates on the all-equal states
        g = Graph.from_edges(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])
        base = exact_mrf_dist(g, MrfParams(0.0, 0.0))
        strong = exact_mrf_dist(g, MrfParams(0.0, 3.0))
        agree = [0, 15]
        assert strong[agree].sum() > base[agree].sum()


class TestGibbs:
    def test_marginal_at_zero_coupling(self):
        g = Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
        rng = np.random.default_rng(8)
        n_draws = 4000
        y = gibbs_sample(g, MrfParams(0.0, 0.0), 5, rng)
        ones = 0
        total = 0
        for _ in range(n_draws):
            y = gibbs_sample(g, MrfParams(0.0, 0.0), 3, rng, init=y)
            ones += int(y.sum())
            total += 5
        p = ones / total
        sigma = math.sqrt(0.25 / total)
        assert abs(p - 0.5) < 4 * sigma

    def test_long_run_matches_exact(self):
        g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
        params = MrfParams(0.3, 0.8)
        exact = exact_mrf_dist(g, params)
        rng = np.random.default_rng(21)
        counts = np.zeros(16)
        y = gibbs_sample(g, params, 50, rng)
        for _ in range(40_000):
            y = gibbs_sample(g, params, 2, rng, init=y)
            state = int(sum(y[i] << i for i in range(4)))
            counts[state] += 1
        emp = counts / counts.sum()
        tv = 0.5 * np.abs(emp - exact).sum()
        assert tv < 0.02

    def test_detailed_balance_single_site(self):
        # random-site Gibbs kernel is reversible w.r.t. the exact distribution
        g = Graph.from_edges(4, [(0, 1), (0, 2), (1, 3), (2, 3)])
        params = MrfParams(-0.4, 0.9)
        pi = exact_mrf_dist(g, params)
        n = 4
        for state in range(16):
            y = np.array([(state >> b) & 1 for b in range(n)])
            for i in range(n):
                flipped = state ^ (1 << i)
                p1 = conditional_prob_one(i, y, g, params)
                move_to = p1 if (flipped >> i) & 1 else 1 - p1
                y2 = y.copy()
                y2[i] ^= 1
                p1_back = conditional_prob_one(i, y2, g, params)
                move_back = p1_back if (state >> i) & 1 else 1 - p1_back
                lhs = pi[state] * move_to / n
                rhs = pi[flipped] * move_back / n
                assert lhs == pytest.approx(rhs, abs=1e-12)


class TestGammaBox:
    def test_default_box(self):
        box = GammaBox()
        assert box.contains(MrfParams(0.0, 0.5))
        assert not box.contains(MrfParams(2.0, 0.5))
        assert not box.contains(MrfParams(0.0, -0.1))

    def test_point_box(self):
        box = GammaBox(0.3, 0.3, 0.5, 0.5)
        assert box.is_point
        assert box.point_params() == MrfParams(0.3, 0.5)

    def test_bad_bounds(self):
        with pytest.raises(ParameterError):
            GammaBox(1.0, -1.0, 1.0)
        with pytest.raises(ParameterError):
            GammaBox(0.0, 1.0, -0.5)
