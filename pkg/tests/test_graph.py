import math

import numpy as np
import pytest

from netdesign.graph import (
    BetaErPrior,
    ErdosRenyi,
    Graph,
    GridPrior,
    ParameterError,
    Sbm,
    SizeError,
    enumerate_graphs,
    gen_er,
    gen_sbm,
    graph_log_prob,
    pair_index,
    read_edge_list,
    write_edge_list,
)


class TestGenEr:
    def test_zero_probability_forces_empty(self):
        g = gen_er(4, 0.0, np.random.default_rng(0))
        assert g.n_edges == 0

    def test_probability_one_forces_complete(self):
        g = gen_er(4, 1.0, np.random.default_rng(0))
        assert g.n_edges == 6

    def test_mean_edge_count_matches_binomial(self):
        # C(4,2) * 0.3 = 1.8, CLT bound over 10^5 draws
        rng = np.random.default_rng(123)
        r = 100_000
        total = sum(gen_er(4, 0.3, rng).n_edges for _ in range(r))
        mean = total / r
        sigma = math.sqrt(6 * 0.3 * 0.7 / r)
        assert abs(mean - 1.8) < 3 * sigma

    def test_edge_count_binomial_four_sigma(self):
        rng = np.random.default_rng(5)
        r = 100_000
        n, alpha = 5, 0.4
        m = 10
        total = sum(gen_er(n, alpha, rng).n_edges for _ in range(r))
        mean = total / r
        sigma = math.sqrt(m * alpha * (1 - alpha) / r)
        assert abs(mean - m * alpha) < 4 * sigma

    def test_invalid_probability_rejected(self):
        with pytest.raises(ParameterError):
            gen_er(4, 1.5, np.random.default_rng(0))
        with pytest.raises(ParameterError):
            gen_er(0, 0.5, np.random.default_rng(0))

    def test_generated_graphs_are_valid(self):
        for seed in range(25):
            g = gen_er(7, 0.5, np.random.default_rng(seed))
            assert np.array_equal(g.adj, g.adj.T)
            assert not np.any(np.diag(g.adj))
            assert int(g.degrees.sum()) == 2 * g.n_edges


class TestGenSbm:
    def test_single_block_is_er(self):
        # K=1 degenerates to ER: edge count matches the binomial mean
        model = Sbm(beta=(1.0,), alpha_mat=((0.3,),))
        rng = np.random.default_rng(7)
        r = 40_000
        total = 0
        for _ in range(r):
            g, blocks = gen_sbm(4, model, rng)
            assert set(blocks) == {0}
            total += g.n_edges
        sigma = math.sqrt(6 * 0.3 * 0.7 / r)
        assert abs(total / r - 1.8) < 4 * sigma

    def test_identity_blocks_separate_components(self):
        model = Sbm(beta=(0.5, 0.5), alpha_mat=((1.0, 0.0), (0.0, 1.0)))
        rng = np.random.default_rng(11)
        for _ in range(50):
            g, blocks = gen_sbm(6, model, rng)
            for i in range(6):
                for j in range(i + 1, 6):
                    assert g.adj[i, j] == (blocks[i] == blocks[j])

    def test_within_block_frequency(self):
        model = Sbm(beta=(0.5, 0.5), alpha_mat=((0.9, 0.1), (0.1, 0.9)))
        rng = np.random.default_rng(13)
        hits = 0
        trials = 0
        for _ in range(100_000):
            g, blocks = gen_sbm(4, model, rng)
            for i in range(4):
                for j in range(i + 1, 4):
                    if blocks[i] == blocks[j]:
                        trials += 1
                        hits += bool(g.adj[i, j])
        freq = hits / trials
        sigma = math.sqrt(0.9 * 0.1 / trials)
        assert abs(freq - 0.9) < 3 * sigma

    def test_bad_parameters(self):
        with pytest.raises(ParameterError):
            Sbm(beta=(0.5, 0.6), alpha_mat=((0.5, 0.5), (0.5, 0.5)))
        with pytest.raises(ParameterError):
            Sbm(beta=(0.5, 0.5), alpha_mat=((0.5, 0.2), (0.3, 0.5)))


class TestGraphLogProb:
    def test_empty_graph_fair_pairs(self):
        g = Graph.from_edges(3, [])
        assert graph_log_prob(g, ErdosRenyi(0.5)) == pytest.approx(3 * math.log(0.5))

    def test_complete_graph_certain(self):
        g = Graph.from_edges(3, [(0, 1), (0, 2), (1, 2)])
        assert graph_log_prob(g, ErdosRenyi(1.0)) == 0.0

    def test_degenerate_alpha_contradiction(self):
        g = Graph.from_edges(3, [(0, 1)])
        assert graph_log_prob(g, ErdosRenyi(0.0)) == float("-inf")
        assert graph_log_prob(g, ErdosRenyi(1.0)) == float("-inf")

    @pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5])
    @pytest.mark.parametrize("n", [3, 4, 5])
    def test_normalizes_over_enumeration(self, n, alpha):
        total = sum(
            math.exp(graph_log_prob(g, ErdosRenyi(alpha))) for g in enumerate_graphs(n)
        )
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_sbm_log_prob_needs_blocks(self):
        g = Graph.from_edges(3, [(0, 1)])
        model = Sbm(beta=(1.0,), alpha_mat=((0.5,),))
        with pytest.raises(ParameterError):
            graph_log_prob(g, model)
        lp = graph_log_prob(g, model, blocks=np.zeros(3, dtype=int))
        assert lp == pytest.approx(3 * math.log(0.5))


class TestEnumeration:
    def test_counts(self):
        assert sum(1 for _ in enumerate_graphs(2)) == 2
        assert sum(1 for _ in enumerate_graphs(3)) == 8
        assert sum(1 for _ in enumerate_graphs(4)) == 64

    def test_ascending_bitmask_order(self):
        masks = [g.edge_bitmask() for g in enumerate_graphs(3)]
        assert masks == list(range(8))

    def test_size_guard(self):
        with pytest.raises(SizeError):
            list(enumerate_graphs(9))

    def test_pair_index_is_lexicographic(self):
        assert pair_index(4) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


class TestSerialization:
    def test_round_trip(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            g = gen_er(6, 0.5, rng)
            assert read_edge_list(write_edge_list(g)) == g

    def test_reject_bad_lines(self):
        with pytest.raises(ParameterError):
            read_edge_list("3\n2 1\n")


class TestPriors:
    def test_beta_prior_positive_shapes(self):
        with pytest.raises(ParameterError):
            BetaErPrior(0.0, 1.0)

    def test_grid_prior_weights(self):
        with pytest.raises(ParameterError):
            GridPrior(models=(ErdosRenyi(0.2),), weights=(0.5,))
        p = GridPrior(models=(ErdosRenyi(0.2), ErdosRenyi(0.4)), weights=(0.3, 0.7))
        assert sum(p.weights) == pytest.approx(1.0)
