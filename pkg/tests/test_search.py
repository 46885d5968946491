import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from discrete_xp import inequalities as ineq
from discrete_xp import search as sr
from discrete_xp import walsh as w
from discrete_xp.search import SearchConfig

FAST = SearchConfig(restarts=2, iterations=8, coords_per_iteration=64, seed=3, constraint="mean_zero")


class TestConfig:
    @pytest.mark.parametrize("kw", [{"restarts": 0}, {"step": 0.0}, {"tol": 0.0}, {"decay": 1.0},
                                    {"iterations": 0}, {"constraint": "box"}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SearchConfig(**kw)


class TestLinearSearch:
    @pytest.mark.parametrize("n,k", [(2, 1), (5, 3), (8, 2), (12, 12)])
    def test_p2_constant_objective(self, n, k):
        res = sr.maximize_linear_ratio(n, k, 2.0, SearchConfig(restarts=2, iterations=5))
        assert abs(res.best_ratio - 1 / math.sqrt(2)) <= 1e-6

    @pytest.mark.parametrize("p", [2.0, 3.0, 6.0])
    def test_single_coefficient(self, p):
        res = sr.maximize_linear_ratio(1, 1, p, SearchConfig(restarts=1, iterations=3))
        assert res.best_ratio ** p == pytest.approx(0.5, rel=1e-12)

    def test_dominates_structured_seeds(self):
        res = sr.maximize_linear_ratio(8, 2, 4.0, SearchConfig(seed=1))
        assert res.best_ratio >= ineq.linear_xp(np.eye(8)[0], 4.0, 2).ratio
        assert res.best_ratio >= ineq.linear_xp(np.ones(8), 4.0, 2).ratio

    def test_soundness_and_normalization(self):
        res = sr.maximize_linear_ratio(6, 3, 4.0, SearchConfig(restarts=2, iterations=10))
        assert abs(ineq.linear_xp(res.argmax, 4.0, 3).ratio - res.best_ratio) <= 1e-10
        assert np.sum(np.abs(res.argmax) ** 4) == pytest.approx(1.0, rel=1e-12)

    def test_bounds(self):
        with pytest.raises(ValueError):
            sr.maximize_linear_ratio(21, 2, 4.0)


class TestChaosEvaluator:
    @given(st.integers(1, 6), st.integers(0, 2**31), st.data())
    def test_matches_reference(self, n, seed, data):
        k = data.draw(st.integers(1, n))
        p = data.draw(st.sampled_from([2.0, 3.0, 4.0]))
        rng = np.random.default_rng(seed)
        h = w.random_cube_function(n, rng, mean_zero=True)
        ev = sr.ChaosXpEvaluator(n, k, p)
        assert ev.ratio(h.values) == pytest.approx(ineq.chaos_xp(h, p, k).ratio, rel=1e-12)

    @given(st.integers(2, 6), st.integers(0, 2**31), st.data())
    def test_incremental_moves(self, n, seed, data):
        k = data.draw(st.integers(1, n))
        rng = np.random.default_rng(seed)
        ev = sr.ChaosXpEvaluator(n, k, 4.0)
        ev.load(rng.standard_normal(1 << n))
        for _ in range(5):
            b, t = int(rng.integers(0, 1 << n)), float(rng.normal())
            v = ev.try_move(b, t)
            ev.commit(v)
        h = w.CubeFunction(n, ev.h - ev.h.mean())
        assert abs(ev.h.mean()) <= 1e-12
        assert ev.value == pytest.approx(ineq.chaos_xp(h, 4.0, k).ratio, rel=1e-10)

    @pytest.mark.parametrize("c", [-1.0, 2.0, 0.25, -8.0])
    def test_scale_invariance_exact(self, c):
        h = w.random_cube_function(5, np.random.default_rng(0), mean_zero=True).values
        ev = sr.ChaosXpEvaluator(5, 2, 4.0)
        assert ev.ratio(c * h) == ev.ratio(h)

    def test_scale_invariance_generic(self):
        h = w.random_cube_function(5, np.random.default_rng(0), mean_zero=True).values
        ev = sr.ChaosXpEvaluator(5, 2, 3.0)
        assert ev.ratio(-3.7 * h) == pytest.approx(ev.ratio(h), rel=1e-13)

    def test_bounds(self):
        with pytest.raises(ValueError):
            sr.ChaosXpEvaluator(13, 2, 4.0)
        with pytest.raises(ValueError):
            sr.ChaosXpEvaluator(4, 2, 1.5)


class TestChaosSearch:
    def test_soundness(self):
        res = sr.maximize_chaos_ratio(5, 2, 4.0, FAST)
        h = res.argmax_function()
        assert abs(h.mean) <= 1e-12
        assert abs(ineq.chaos_xp(h, 4.0, 2).ratio - res.best_ratio) <= 1e-10
        assert np.isfinite(res.best_ratio) and res.best_ratio > 0

    def test_dominates_structured_seeds(self):
        n, k, p = 5, 2, 4.0
        res = sr.maximize_chaos_ratio(n, k, p, FAST)
        lin = sr.maximize_linear_ratio(n, k, p, SearchConfig(restarts=2, iterations=8, seed=3))
        lifted = w.CubeFunction(n, sr.lift_linear(lin.argmax))
        assert res.best_ratio >= ineq.chaos_xp(lifted, p, k).ratio
        assert res.best_ratio >= ineq.chaos_xp(w.walsh_character(n, [1]), p, k).ratio
        assert res.best_ratio >= ineq.chaos_xp(w.walsh_character(n, [1, 2]), p, k).ratio

    def test_lift_scales_gradient_by_two_to_the_p(self):
        # degree-1 lifts pay 2^p more in the gradient term than the linear form does
        a = np.array([0.3, -1.2, 0.7, 2.0])
        p, k = 4.0, 2
        chaos = ineq.chaos_xp(w.CubeFunction(4, sr.lift_linear(a)), p, k)
        lin = ineq.linear_xp(a, p, k)
        assert chaos.rhs_terms["gradient"] == pytest.approx(2 ** p * lin.rhs_terms["gradient"], rel=1e-13)
        assert chaos.rhs_terms["diagonal"] == pytest.approx(lin.rhs_terms["diagonal"], rel=1e-13)
        assert chaos.lhs == pytest.approx(lin.lhs, rel=1e-13)
        assert chaos.ratio <= lin.ratio

    @pytest.mark.parametrize("n,k", [(3, 1), (4, 2), (6, 3)])
    def test_p2_matches_level_oracle(self, n, k):
        res = sr.maximize_chaos_ratio(n, k, 2.0, FAST)
        oracle = sr.chaos_p2_level_oracle(n, k, grid=12)
        assert abs(res.best_ratio - oracle) <= 1e-6
        assert oracle == pytest.approx(1 / math.sqrt(5), rel=1e-14)

    def test_monotone_trajectories(self):
        res = sr.maximize_chaos_ratio(4, 2, 4.0, FAST)
        assert len(res.trajectories) == len(res.restart_best)
        for traj, best in zip(res.trajectories, res.restart_best):
            assert all(b >= a for a, b in zip(traj, traj[1:]))
            assert traj[-1] == pytest.approx(best, rel=1e-12)
        assert res.best_ratio == pytest.approx(max(res.restart_best), rel=1e-12)

    def test_reproducible(self):
        a = sr.maximize_chaos_ratio(4, 2, 3.0, FAST)
        b = sr.maximize_chaos_ratio(4, 2, 3.0, FAST)
        assert a.best_ratio == b.best_ratio
        assert np.array_equal(a.argmax, b.argmax)
        assert a.restart_best == b.restart_best and a.trajectories == b.trajectories

    def test_seed_changes_random_restarts(self):
        a = sr.maximize_chaos_ratio(4, 2, 3.0, FAST)
        b = sr.maximize_chaos_ratio(4, 2, 3.0, SearchConfig(**{**FAST.__dict__, "seed": 99}))
        assert a.restart_best[-1] != b.restart_best[-1]

    def test_exhausted_flag(self):
        res = sr.maximize_chaos_ratio(3, 1, 4.0, SearchConfig(restarts=1, iterations=1, constraint="mean_zero"))
        assert res.exhausted
        res = sr.maximize_linear_ratio(3, 1, 2.0, SearchConfig(restarts=1, iterations=200))
        assert not res.exhausted


class TestLevelOracle:
    def test_compositions(self):
        comps = list(sr._compositions(3, 2))
        assert comps == [[0, 3], [1, 2], [2, 1], [3, 0]]

    def test_grid_invariance(self):
        assert sr.chaos_p2_level_oracle(4, 2, 4) == pytest.approx(sr.chaos_p2_level_oracle(4, 2, 10), rel=1e-14)


class TestSweep:
    def test_rules(self):
        assert sr.k_for_rule("half", 5) == 3 and sr.k_for_rule("sqrt", 10) == 4
        assert sr.k_for_rule(("fixed", 2), 7) == 2
        with pytest.raises(ValueError):
            sr.k_for_rule(("fixed", 9), 7)
        with pytest.raises(ValueError):
            sr.k_for_rule("third", 7)

    def test_single_entry_echoes_search(self):
        table = sr.constant_sweep([4], "half", 4.0, FAST)
        direct = sr.maximize_chaos_ratio(4, 2, 4.0, FAST)
        assert len(table) == 1 and table[0].best_ratio == direct.best_ratio

    @pytest.mark.parametrize("rule", ["half", "sqrt", ("fixed", 1)])
    def test_p2_linear_entries(self, rule):
        table = sr.constant_sweep(range(2, 7), rule, 2.0, SearchConfig(restarts=1, iterations=4), objective="linear")
        assert all(abs(r.best_ratio - 1 / math.sqrt(2)) <= 1e-6 for r in table)

    def test_p2_chaos_bounded_by_spectral_max(self):
        table = sr.constant_sweep([3, 4], "half", 2.0, FAST)
        for r in table:
            assert r.best_ratio <= sr.chaos_p2_level_oracle(r.n, r.k, 8) + 1e-12

    def test_csv(self):
        table = sr.constant_sweep([2, 3], "sqrt", 2.0, SearchConfig(restarts=1, iterations=2), objective="linear")
        lines = sr.sweep_to_csv(table, "sqrt").strip().split("\n")
        assert lines[0] == ",".join(sr.SWEEP_COLUMNS)
        assert lines[1].startswith("2,2,2.0,sqrt,")
        assert len(lines) == 3

    def test_bad_objective(self):
        with pytest.raises(ValueError):
            sr.constant_sweep([3], "half", 2.0, objective="metric")
