import math
from collections import Counter

import numpy as np
import pytest

from netdesign.graph import Graph, ParameterError, gen_er
from netdesign.designs import (
    ConsistencyError,
    CurveRds,
    Ego,
    LinkTracing,
    Rds,
    SampleTrace,
    SequentialRds,
    Snowball,
    SwitchRds,
    enumerate_traces,
    is_ignorable,
    observed_data,
    referral_schedule,
    rds_log_likelihood,
    run_design,
    run_design_from_seeds,
    trace_from_json,
    trace_to_json,
)


class TestReferralSchedule:
    def test_constant_families(self):
        assert referral_schedule(Rds(m=3, w0=2, target_n=10), 5) == 3
        assert referral_schedule(LinkTracing(s=1, r=2, w=3, target_n=10), 2) == 2

    def test_curve_identity(self):
        d = CurveRds(eta=1.0, c_max=6, w_max=6, w0=1, target_n=10)
        assert referral_schedule(d, 3) == 3

    def test_curve_power(self):
        d = CurveRds(eta=2.0, c_max=6, w_max=6, w0=1, target_n=10)
        # 6 * (3/6)^2 = 1.5, ceiling 2
        assert referral_schedule(d, 3) == 2

    def test_curve_integral_values_stay_exact(self):
        d = CurveRds(eta=1.0, c_max=6, w_max=6, w0=1, target_n=10)
        assert [referral_schedule(d, x) for x in range(1, 7)] == [1, 2, 3, 4, 5, 6]

    def test_curve_domain_error(self):
        d = CurveRds(eta=1.0, c_max=6, w_max=6, w0=1, target_n=10)
        with pytest.raises(ParameterError):
            referral_schedule(d, 7)
        with pytest.raises(ParameterError):
            referral_schedule(d, 0)

    def test_switch_levels(self):
        d = SwitchRds(lambda_lo=2, lambda_hi=5, switch_wave=3, w0=1, target_n=10)
        assert [referral_schedule(d, w) for w in (1, 2, 3)] == [2, 2, 5]


class TestRunDesign:
    def test_ego_census(self, path4):
        y = np.array([1, 0, 1, 0])
        tr = run_design(Ego(target_n=4), path4, y, np.random.default_rng(0))
        assert sorted(tr.nodes) == [0, 1, 2, 3]
        obs = observed_data(tr, path4, y)
        assert len(obs.pair_status) == 6
        assert obs.pair_status[(0, 1)] and not obs.pair_status[(0, 2)]

    def test_snowball_all_seeds(self, path4):
        y = np.zeros(4, dtype=int)
        tr = run_design(Snowball(s=4, k=2), path4, y, np.random.default_rng(0))
        assert sorted(tr.nodes) == [0, 1, 2, 3]
        assert tr.waves == [0, 0, 0, 0]

    def test_path_chain_deterministic(self, path4):
        y = np.zeros(4, dtype=int)
        des = Rds(m=1, w0=1, target_n=4)
        for seed in range(20):
            tr = run_design_from_seeds(des, path4, y, [0], np.random.default_rng(seed))
            assert tr.nodes == [0, 1, 2, 3]
            assert tr.waves == [0, 1, 2, 3]
            assert tr.recruiter_pos == [-1, 0, 1, 2]
            ll = rds_log_likelihood(tr, path4, des, include_seed_term=False)
            assert ll == pytest.approx(0.0, abs=1e-14)

    def test_star_two_referral_likelihood(self, star13):
        y = np.zeros(4, dtype=int)
        des = Rds(m=2, w0=1, target_n=3)
        tr = run_design_from_seeds(des, star13, y, [0], np.random.default_rng(1))
        assert tr.nodes[0] == 0 and len(tr.nodes) == 3
        ll = rds_log_likelihood(tr, star13, des, include_seed_term=False)
        assert ll == pytest.approx(math.log(1.0 / 3.0), abs=1e-12)

    def test_reported_degrees_match_truth(self, cycle6):
        y = np.zeros(6, dtype=int)
        tr = run_design(Rds(m=2, w0=2, target_n=5), cycle6, y, np.random.default_rng(3))
        for v, d in tr.reported_degrees.items():
            assert d == cycle6.degree(v)

    def test_link_tracing_no_degrees(self, cycle6):
        y = np.zeros(6, dtype=int)
        tr = run_design(
            LinkTracing(s=1, r=2, w=2, target_n=6), cycle6, y, np.random.default_rng(3)
        )
        assert tr.reported_degrees == {}

    def test_target_exceeds_population(self, k3):
        with pytest.raises(ParameterError):
            run_design(Rds(m=1, w0=1, target_n=4), k3, np.zeros(3, dtype=int),
                       np.random.default_rng(0))

    def test_sequential_design_not_runnable(self, k3):
        d = SequentialRds(w0_grid=(1,), m_grid=(1,), target_n=2)
        with pytest.raises(ParameterError):
            run_design(d, k3, np.zeros(3, dtype=int), np.random.default_rng(0))

    def test_determinism_same_seed(self, cycle6):
        y = np.array([0, 1, 1, 0, 1, 0])
        des = SwitchRds(lambda_lo=1, lambda_hi=2, switch_wave=2, w0=2, target_n=5)
        t1 = run_design(des, cycle6, y, np.random.default_rng(99))
        t2 = run_design(des, cycle6, y, np.random.default_rng(99))
        assert t1.structure_key() == t2.structure_key()
        assert t1.responses == t2.responses

    def test_reseed_on_stall(self):
        # two isolated edges: a single chain must stall and re-seed
        g = Graph.from_edges(4, [(0, 1), (2, 3)])
        des = Rds(m=1, w0=1, target_n=4)
        tr = run_design(des, g, np.zeros(4, dtype=int), np.random.default_rng(0))
        assert tr.exhausted
        assert len(tr.nodes) == 4
        assert sum(1 for r in tr.recruiter_pos if r == -1) == 2

    def test_trace_invariants_across_designs(self, cycle6, prism6):
        designs = [
            Rds(m=2, w0=1, target_n=5),
            LinkTracing(s=2, r=1, w=2, target_n=6),
            Snowball(s=1, k=2),
            Ego(target_n=3),
            CurveRds(eta=1.5, c_max=3, w_max=4, w0=1, target_n=5),
            SwitchRds(lambda_lo=1, lambda_hi=3, switch_wave=2, w0=1, target_n=5),
        ]
        for g in (cycle6, prism6):
            y = np.zeros(6, dtype=int)
            for des in designs:
                for seed in range(30):
                    tr = run_design(des, g, y, np.random.default_rng(seed))
                    tr.validate(g)
                    if not isinstance(des, Snowball):
                        assert len(tr) <= des.target_n


class TestLikelihood:
    @pytest.mark.parametrize(
        "design",
        [
            Rds(m=1, w0=1, target_n=3),
            Rds(m=2, w0=1, target_n=4),
            Rds(m=2, w0=2, target_n=4),
            LinkTracing(s=1, r=2, w=2, target_n=6),
            LinkTracing(s=2, r=1, w=1, target_n=6),
            CurveRds(eta=2.0, c_max=3, w_max=3, w0=1, target_n=4),
            SwitchRds(lambda_lo=1, lambda_hi=2, switch_wave=2, w0=1, target_n=4),
        ],
    )
    def test_trace_probabilities_sum_to_one(self, design, cycle6):
        total = 0.0
        for tr, p in enumerate_traces(design, cycle6):
            ll = rds_log_likelihood(tr, cycle6, design)
            assert math.exp(ll) == pytest.approx(p, rel=1e-10)
            total += p
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_sum_to_one_with_reseeding(self):
        g = Graph.from_edges(4, [(0, 1), (2, 3)])
        design = Rds(m=1, w0=1, target_n=4)
        total = sum(p for _, p in enumerate_traces(design, g))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_mc_frequency_matches_likelihood(self, star13):
        # frequency of one specific trace over many runs vs exp(log-likelihood)
        des = Rds(m=2, w0=1, target_n=3)
        y = np.zeros(4, dtype=int)
        target = run_design_from_seeds(des, star13, y, [0], np.random.default_rng(8))
        key = target.structure_key()
        p_exact = math.exp(rds_log_likelihood(target, star13, des))
        rng = np.random.default_rng(17)
        runs = 200_000
        hits = sum(
            1
            for _ in range(runs)
            if run_design(des, star13, y, rng).structure_key() == key
        )
        freq = hits / runs
        sigma = math.sqrt(p_exact * (1 - p_exact) / runs)
        assert abs(freq - p_exact) < 4 * sigma

    def test_inconsistent_trace_raises(self, path4):
        des = Rds(m=1, w0=1, target_n=3)
        bad = SampleTrace(
            n_nodes=4, nodes=[0, 2, 3], waves=[0, 1, 2], recruiter_pos=[-1, 0, 1]
        )
        with pytest.raises(ConsistencyError):
            rds_log_likelihood(bad, path4, des)  # edge (0,2) absent

    def test_impossible_batch_size_gives_zero(self, star13):
        # center seed with budget 2 must recruit two leaves, not one
        des = Rds(m=2, w0=1, target_n=3)
        tr = SampleTrace(
            n_nodes=4, nodes=[0, 1], waves=[0, 1], recruiter_pos=[-1, 0],
        )
        assert rds_log_likelihood(tr, star13, des) == float("-inf")


class TestObservedData:
    def test_rds_sees_tree_only(self, cycle6):
        y = np.zeros(6, dtype=int)
        des = Rds(m=2, w0=1, target_n=4)
        tr = run_design(des, cycle6, y, np.random.default_rng(2))
        obs = observed_data(tr, cycle6, y)
        assert set(obs.pair_status) == {
            (min(u, v), max(u, v)) for u, v in tr.recruitment_edges()
        }
        assert all(obs.pair_status.values())

    def test_snowball_k3_sees_all_pairs(self, k3):
        y = np.zeros(3, dtype=int)
        des = Snowball(s=1, k=1)
        tr = run_design(des, k3, y, np.random.default_rng(0))
        obs = observed_data(tr, k3, y)
        assert len(obs.pair_status) == 3

    def test_ego_census_full_information(self, path4):
        y = np.zeros(4, dtype=int)
        tr = run_design(Ego(target_n=4), path4, y, np.random.default_rng(0))
        obs = observed_data(tr, path4, y)
        for (i, j), status in obs.pair_status.items():
            assert status == bool(path4.adj[i, j])

    def test_snowball_observes_nonedges_of_sampled_rows(self):
        g = Graph.from_edges(4, [(0, 1)])
        des = Snowball(s=1, k=1)
        tr = run_design_from_seeds_snowball(g, [0], des)
        obs = observed_data(tr, g, np.zeros(4, dtype=int))
        # rows of nodes 0 and 1 fully observed, pair (2,3) not
        assert (2, 3) not in obs.pair_status
        assert obs.pair_status[(0, 2)] is False


def run_design_from_seeds_snowball(g, seeds, des):
    from netdesign.designs import run_snowball_from_seeds

    tr = run_snowball_from_seeds(des, g, seeds)
    tr.responses = {v: 0 for v in tr.nodes}
    return tr


class TestIgnorability:
    def test_tags(self):
        ok, why = is_ignorable(Ego(target_n=3))
        assert ok and why
        ok, _ = is_ignorable(Snowball(s=1, k=2))
        assert ok
        for d in (
            Rds(m=2, w0=1, target_n=4),
            LinkTracing(s=1, r=1, w=1, target_n=4),
            CurveRds(eta=1.0, c_max=2, w_max=2, w0=1, target_n=4),
            SwitchRds(lambda_lo=1, lambda_hi=2, switch_wave=1, w0=1, target_n=4),
        ):
            ok, why = is_ignorable(d)
            assert not ok and "adjusted degree" in why


class TestTraceJson:
    def test_round_trip(self, cycle6):
        y = np.array([1, 0, 0, 1, 1, 0])
        tr = run_design(Rds(m=2, w0=2, target_n=5), cycle6, y, np.random.default_rng(4))
        back = trace_from_json(trace_to_json(tr))
        assert back.structure_key() == tr.structure_key()
        assert back.responses == tr.responses
        assert back.reported_degrees == tr.reported_degrees
        assert back.exhausted == tr.exhausted
