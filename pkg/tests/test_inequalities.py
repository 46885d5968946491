import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import gamma

from discrete_xp import inequalities as ineq
from discrete_xp import torus as tor
from discrete_xp import walsh as w
from discrete_xp.walsh import CubeFunction

seeds = st.integers(0, 2**32 - 1)


def char(n, A):
    return w.walsh_character(n, A)


def mz(n, seed):
    return w.random_cube_function(n, np.random.default_rng(seed), mean_zero=True)


def brute_linear(a, p, k):
    """Literal sums over all subsets and all 2^n sign vectors."""
    n = len(a)
    signs = list(itertools.product((1, -1), repeat=n))
    subsets = list(itertools.combinations(range(n), k))
    lhs = sum(abs(sum(e[j] * a[j] for j in S)) ** p for S in subsets for e in signs) / (len(signs) * len(subsets))
    grad = (k / n) * sum(abs(x) ** p for x in a)
    diag = (k / n) ** (p / 2) * sum(abs(sum(e[j] * a[j] for j in range(n))) ** p for e in signs) / len(signs)
    return lhs ** (1 / p), grad, diag


def laplacian_matrix(n):
    """Pointwise Delta = (1/2) sum_j d_j as a dense matrix, built without any transform."""
    N = 1 << n
    L = np.zeros((N, N))
    for b in range(N):
        for j in range(n):
            L[b, b] += 0.5
            L[b, b ^ (1 << j)] -= 0.5
    return L


class TestReport:
    def test_ratio_recomputed(self):
        rep = ineq.InequalityReport("x", {}, 3.0, {"a": 4.0, "b": 5.0}, rhs_root=2.0, rhs_scale=2.0)
        assert rep.rhs == 6.0 and rep.ratio == 0.5
        assert ineq.InequalityReport("x", {}, 0.0, {"a": 0.0}).ratio == 0.0

    def test_negative_term_rejected(self):
        with pytest.raises(ValueError):
            ineq.InequalityReport("x", {}, 1.0, {"a": -1.0})

    def test_json_round_trip_and_consistency(self):
        rep = ineq.linear_xp([1.0, 2.0, -1.0], 4.0, 2)
        d = json.loads(rep.to_json())
        back = ineq.InequalityReport.from_dict(d)
        assert back.ratio == rep.ratio
        d["ratio"] = rep.ratio * 1.01
        with pytest.raises(ValueError):
            ineq.InequalityReport.from_dict(d)
        assert "wall_time" not in json.loads(rep.to_json(include_time=False))

    def test_csv(self):
        reps = [ineq.linear_xp([1.0, 1.0], 2.0, 1), ineq.linear_xp([1.0, 0.0], 2.0, 1)]
        text = ineq.reports_to_csv(reps)
        lines = text.strip().split("\n")
        assert len(lines) == 3
        assert lines[0].split(",")[:2] == ["name", "mode"]
        assert "ratio" in lines[0]


class TestLinear:
    def test_example_ones(self):
        rep = ineq.linear_xp([1.0, 1.0], 2.0, 1)
        assert rep.lhs == pytest.approx(1.0, rel=1e-15)
        assert math.sqrt(sum(rep.rhs_terms.values())) == pytest.approx(math.sqrt(2), rel=1e-15)
        assert rep.ratio == pytest.approx(1 / math.sqrt(2), rel=1e-15)

    @pytest.mark.parametrize("n,k,p", [(1, 1, 2.0), (3, 2, 3.0), (5, 2, 4.0), (6, 6, 7.0)])
    def test_unit_vector_closed_form(self, n, k, p):
        rep = ineq.linear_xp(np.eye(n)[0], p, k)
        want = (k / n) / ((k / n) + (k / n) ** (p / 2))
        assert rep.ratio ** p == pytest.approx(want, rel=1e-12)

    def test_single_coefficient(self):
        for p in (2.0, 3.0, 5.5):
            assert ineq.linear_xp([2.5], p, 1).ratio ** p == pytest.approx(0.5, rel=1e-13)

    def test_zero(self):
        rep = ineq.linear_xp(np.zeros(4), 3.0, 2)
        assert rep.lhs == 0 and rep.rhs == 0 and rep.ratio == 0

    @given(st.integers(1, 7), seeds, st.data(), st.sampled_from([2.0, 3.0, 4.0]))
    def test_matches_brute_force(self, n, seed, data, p):
        k = data.draw(st.integers(1, n))
        a = np.random.default_rng(seed).standard_normal(n)
        rep = ineq.linear_xp(a, p, k)
        lhs, grad, diag = brute_linear(a, p, k)
        assert rep.lhs == pytest.approx(lhs, rel=1e-12)
        assert rep.rhs_terms["gradient"] == pytest.approx(grad, rel=1e-12)
        assert rep.rhs_terms["diagonal"] == pytest.approx(diag, rel=1e-12)

    @given(st.integers(1, 12), seeds, st.data())
    def test_p2_closed_form(self, n, seed, data):
        k = data.draw(st.integers(1, n))
        a = np.random.default_rng(seed).standard_normal(n)
        assert abs(ineq.linear_xp(a, 2.0, k).ratio - 1 / math.sqrt(2)) <= 1e-10

    def test_errors(self):
        with pytest.raises(ValueError):
            ineq.linear_xp([1.0, 1.0], 1.5, 1)
        with pytest.raises(ValueError):
            ineq.linear_xp([1.0, 1.0], 2.0, 3)


class TestChaos:
    def test_example_character(self):
        rep = ineq.chaos_xp(char(2, [1]), 2.0, 1)
        assert rep.lhs ** 2 == pytest.approx(0.5, rel=1e-15)
        assert rep.rhs_terms["gradient"] == pytest.approx(2.0, rel=1e-15)
        assert rep.rhs_terms["diagonal"] == pytest.approx(0.5, rel=1e-15)
        assert rep.ratio == pytest.approx(1 / math.sqrt(5), rel=1e-14)

    def test_top_character_vanishes(self):
        assert ineq.chaos_xp(char(4, [1, 2, 3, 4]), 3.0, 3).lhs == 0.0

    @given(st.integers(1, 8), seeds, st.data())
    def test_p2_spectral_oracle(self, n, seed, data):
        k = data.draw(st.integers(1, n))
        h = mz(n, seed)
        rep = ineq.chaos_xp(h, 2.0, k)
        assert rep.lhs ** 2 == pytest.approx(ineq.chaos_lhs_spectral_p2(h, k), rel=1e-12)
        c = w.walsh_transform(h).coeffs
        grad = (k / n) * 4 * np.sum(w.popcounts(n) * c * c)
        assert rep.rhs_terms["gradient"] == pytest.approx(grad, rel=1e-12)

    def test_marginals_match_averaging_operator(self):
        h = mz(5, 3)
        p, k = 3.0, 2
        want = np.mean([
            w.p_norm(w.average_over(h, w.full_mask(5) ^ S), p) ** p for S in tor.k_subsets(5, k)
        ]) ** (1 / p)
        assert ineq.chaos_xp(h, p, k).lhs == pytest.approx(want, rel=1e-13)

    def test_refined(self):
        rep = ineq.chaos_xp(mz(4, 0), 4.0, 2, refined=True)
        e = rep.extra
        assert e["gradient_prefactor"] == pytest.approx(4 ** 2.5 / math.sqrt(math.log(4)))
        assert e["diagonal_prefactor"] == pytest.approx(4 ** 4 / math.log(4))
        assert e["prefactored_ratio"] < e["bare_ratio"]
        assert e["diagonal_term"] == pytest.approx(math.sqrt(0.5) * w.p_norm(mz(4, 0), 4.0))

    def test_mean_zero_required(self):
        with pytest.raises(w.MeanZeroError):
            ineq.chaos_xp(CubeFunction(2, [1.0, 0.0, 0.0, 0.0]), 2.0, 1)

    def test_scale_invariance(self):
        h = mz(5, 8)
        a = ineq.chaos_xp(h, 4.0, 2).ratio
        b = ineq.chaos_xp(-3.5 * h, 4.0, 2).ratio
        assert a == pytest.approx(b, rel=1e-14)


class TestMetric:
    def test_constant(self):
        rep = ineq.metric_xp(tor.constant(4, 2), 2.0, 1)
        assert rep.lhs == 0 and rep.ratio == 0

    def test_cosine_sum_example(self):
        rep = ineq.metric_xp(tor.cosine_sum(4, 2), 2.0, 1)
        # long term 2, gradient and diagonal terms 2 - sqrt 2, weights k/n = 1/2, scale m = 1
        assert rep.lhs == pytest.approx(math.sqrt(2), rel=1e-14)
        assert rep.ratio == pytest.approx(math.sqrt(2) / math.sqrt(2 - math.sqrt(2)), rel=1e-13)
        assert rep.params["m"] == 1 and rep.rhs_scale == 1.0

    def test_hypothesis_flag(self):
        assert ineq.metric_xp(tor.cosine_sum(4, 2), 2.0, 1).flags["hypothesis_violated"]
        assert not ineq.metric_xp(tor.cosine_sum(4, 1), 2.0, 1).flags["hypothesis_violated"]

    def test_generic_scaling(self):
        rep = ineq.metric_xp(tor.random_dense(2, 2, 0), 2.0, 1, theorem_scaling=False)
        assert rep.rhs_scale == 2.0

    def test_monte_carlo_report(self):
        f = tor.random_dense(4, 2, 1)
        ex = ineq.metric_xp(f, 3.0, 1)
        mc = ineq.metric_xp(f, 3.0, 1, mode="monte_carlo", budget=40_000, seed=5)
        assert mc.mode == "monte_carlo" and mc.seed == 5 and set(mc.stderr) == {"long_term", "gradient", "diagonal"}
        assert abs(mc.extra["long_term"] - ex.extra["long_term"]) <= 3 * mc.stderr["long_term"]

    def test_smoothed(self):
        f = tor.random_dense(4, 2, 3)
        rep = ineq.smoothed_xp(f, 2.0, 1)
        st_ = tor.smoothed_difference_stats(f, 2.0, 1)
        assert rep.lhs == pytest.approx(math.sqrt(st_.long_term), rel=1e-15)
        assert rep.ratio > 0


class TestRiesz:
    def test_square_examples(self):
        rep = ineq.lust_piquard_square(char(3, [1]), 5.0)
        assert rep.lhs == pytest.approx(1.0) and rep.ratio == pytest.approx(1.0)
        rep = ineq.lust_piquard_square(mz(8, 1), 4.0)
        assert rep.extra["lower_envelope"] == 4 ** -1.5 and rep.extra["upper_envelope"] == 4.0
        assert 0 < rep.ratio < np.inf

    @given(st.integers(1, 10), seeds)
    def test_square_p2(self, n, seed):
        assert abs(ineq.lust_piquard_square(mz(n, seed), 2.0).ratio - 1) <= 1e-12

    @given(st.integers(1, 9), seeds)
    def test_randomized_p2_full(self, n, seed):
        rep = ineq.randomized_riesz(mz(n, seed), 2.0, w.full_mask(n))
        assert abs(rep.ratio - 2) <= 2e-12

    @pytest.mark.parametrize("p", [2.0, 3.0, 7.0])
    def test_randomized_single_character(self, p):
        rep = ineq.randomized_riesz(char(3, [1]), p, [1])
        assert rep.lhs == pytest.approx(2.0, rel=1e-15)
        assert rep.rhs == pytest.approx(1.0, rel=1e-15)

    def test_randomized_disjoint_support(self):
        rep = ineq.randomized_riesz(char(3, [1]), 4.0, [2, 3])
        assert rep.lhs == 0 and rep.rhs == 0 and rep.ratio == 0

    def test_randomized_matches_brute_force(self):
        h = mz(4, 2)
        p = 3.0
        S = [1, 3]
        D = {j: w.partial_derivative(h, j).values for j in S}
        want = np.mean([np.mean(np.abs(sum(d * D[j] for d, j in zip(ds, S))) ** p)
                        for ds in itertools.product((1, -1), repeat=len(S))]) ** (1 / p)
        assert ineq.randomized_riesz(h, p, S).lhs == pytest.approx(want, rel=1e-13)

    def test_randomized_monte_carlo(self):
        h = mz(6, 4)
        ex = ineq.randomized_riesz(h, 4.0, w.full_mask(6))
        mc = ineq.randomized_riesz(h, 4.0, w.full_mask(6), mode="monte_carlo", budget=3000, seed=1)
        assert abs(mc.lhs - ex.lhs) <= 3 * mc.stderr["lhs"]
        with pytest.raises(ValueError, match="seed"):
            ineq.randomized_riesz(h, 4.0, 1, mode="monte_carlo")


class TestJensen:
    def test_examples(self):
        rep = ineq.jensen_contraction(char(2, [1, 2]), [1], 0.5, 3.0)
        assert rep.lhs == 0.0 and rep.rhs == pytest.approx(1 / math.sqrt(2), rel=1e-15)
        for alpha, p in ((-1.7, 1.0), (0.3, 2.5), (2.0, 6.0)):
            rep = ineq.jensen_contraction(char(3, [1]), [1], alpha, p)
            assert rep.lhs == pytest.approx(1.0, rel=1e-15) and rep.rhs == pytest.approx(1.0, rel=1e-15)

    @given(st.integers(1, 10), seeds, st.data())
    def test_no_violations(self, n, seed, data):
        h = mz(n, seed)
        S = data.draw(st.integers(0, (1 << n) - 1))
        alpha = data.draw(st.floats(-2, 2))
        p = data.draw(st.sampled_from([1.0, 2.0, 2.5, 4.0]))
        rep = ineq.jensen_contraction(h, S, alpha, p)
        assert not rep.flags["violation"]
        assert rep.lhs <= rep.rhs + 1e-12 * max(1.0, rep.rhs)


class TestInverseLaplacianProbe:
    def test_small_example(self):
        rep = ineq.inverse_laplacian_probe(2.0, 1.0, 2)
        assert rep.lhs == pytest.approx(0.75, rel=1e-15)

    def test_small_example_by_linear_algebra(self):
        n, p, alpha = 3, 2.0, 1.0
        f = ineq.point_mass_test_function(n, p).values
        g = np.linalg.pinv(laplacian_matrix(n)) @ (f - f.mean())
        want = np.mean(np.abs(g) ** 2) ** 0.5
        assert ineq.inverse_laplacian_probe(p, alpha, n).lhs == pytest.approx(want, rel=1e-12)

    def test_point_mass_normalization(self):
        for n, p in ((3, 4.0), (6, 2.5)):
            f = ineq.point_mass_test_function(n, p)
            assert w.p_norm(f, p / (p - 1)) == pytest.approx(1.0, rel=1e-13)
            assert np.allclose(w.walsh_transform(f).coeffs, 2.0 ** (-n / p), rtol=1e-13)

    def test_zero_input(self):
        assert ineq.inverse_laplacian_norm(CubeFunction(3, np.zeros(8)), 0.7, 1.5) == 0.0

    @pytest.mark.parametrize("n", [4, 8, 16])
    def test_above_envelope(self, n):
        rep = ineq.inverse_laplacian_probe(4.0, 0.5, n)
        env = 2.0 ** (-n / 4) * math.log(n) ** 0.5 / (2 ** 0.5 * gamma(1.5))
        assert rep.rhs == pytest.approx(env, rel=1e-14)
        assert rep.lhs >= env
        assert rep.flags["half_cube_count_ok"] and rep.flags["pointwise_bound_ok"]
        assert not rep.flags["below_envelope"]

    def test_flags_and_errors(self):
        assert ineq.inverse_laplacian_probe(4.0, 0.5, 4).flags["alpha_in_range"]
        assert not ineq.inverse_laplacian_probe(4.0, 3.0, 4).flags["alpha_in_range"]
        with pytest.raises(ValueError):
            ineq.inverse_laplacian_probe(4.0, 0.5, 1)
        with pytest.raises(ValueError):
            ineq.inverse_laplacian_probe(4.0, 0.0, 4)


class TestTsPerturbation:
    def test_constant_and_empty(self):
        assert ineq.ts_perturbation(tor.constant(2, 2), 3, 2.0).lhs == 0.0
        assert ineq.ts_perturbation(tor.random_dense(2, 2, 1), 0, 2.0).lhs == 0.0

    @given(st.integers(1, 2), st.integers(1, 4), seeds, st.data())
    def test_factor_two(self, r, n, seed, data):
        f = tor.random_dense(r, n, seed)
        S = data.draw(st.integers(0, (1 << n) - 1))
        p = data.draw(st.sampled_from([1.0, 2.0, 4.0]))
        rep = ineq.ts_perturbation(f, S, p)
        assert not rep.flags["violation"]
        assert rep.rhs == pytest.approx(2 * tor.diagonal_moment(f, p) ** (1 / p), rel=1e-14)
