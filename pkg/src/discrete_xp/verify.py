"""Seeded property suites: exact identities, explicit-constant inequalities, MC consistency.

Every check draws from its own stream ``SeedSequence([seed, index])`` and the
report contains no timings, so a suite run is a pure function of
``(suite, n_max, seed)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import inequalities as ineq
from . import torus as tor
from . import walsh as w

SUITES = ("walsh", "torus", "inequalities-exact", "inequalities-mc")
IDENTITY_RTOL = 1e-12
QUADRATURE_RTOL = 1e-8
FOURIER_TS_TOL = 1e-10
INEQ_SLACK = 1e-12
CAMPAIGN_TRIALS = 1000


@dataclass
class CheckResult:
    name: str
    passed: bool
    trials: int
    # "error": worst must stay <= tolerance; "slack": worst (rhs - lhs, scaled) must stay >= -tolerance;
    # "count": worst is the number of passing repetitions, tolerance the minimum required
    metric: str
    worst: float
    tolerance: float
    failures: int


def _rel_err(x: np.ndarray, y: np.ndarray) -> float:
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    scale = max(float(np.max(np.abs(y))), float(np.max(np.abs(x))), 1e-300)
    return float(np.max(np.abs(x - y))) / scale


def _error_check(name: str, errors, tol: float) -> CheckResult:
    errors = np.asarray(errors, dtype=np.float64)
    bad = int(np.sum(~(errors <= tol)))
    return CheckResult(name, bad == 0, int(errors.size), "error", float(errors.max()), tol, bad)


def _slack_check(name: str, slacks, tol: float = INEQ_SLACK) -> CheckResult:
    slacks = np.asarray(slacks, dtype=np.float64)
    bad = int(np.sum(~(slacks >= -tol)))
    return CheckResult(name, bad == 0, int(slacks.size), "slack", float(slacks.min()), tol, bad)


def _rel_slack(lhs: float, rhs: float) -> float:
    return (rhs - lhs) / max(1.0, abs(rhs))


def _rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def _mean_zero(n: int, rng: np.random.Generator) -> w.CubeFunction:
    return w.random_cube_function(n, rng, mean_zero=True)


def _random_subset(n: int, rng: np.random.Generator) -> int:
    return int(rng.integers(0, 1 << n))


# ---------------------------------------------------------------------------
# walsh suite

def _walsh_checks(n_max: int, seed: int) -> list[CheckResult]:
    trials = 100
    out = []

    rng = _rng(seed, 0)
    errs_rt, errs_pars = [], []
    for _ in range(trials):
        n = int(rng.integers(1, n_max + 1))
        h = w.random_cube_function(n, rng)
        spec = w.walsh_transform(h)
        errs_rt.append(_rel_err(w.inverse_walsh_transform(spec).values, h.values))
        lhs = float(np.mean(h.values ** 2))
        errs_pars.append(abs(lhs - float(np.sum(spec.coeffs ** 2))) / lhs)
    out.append(_error_check("transform_round_trip", errs_rt, IDENTITY_RTOL))
    out.append(_error_check("parseval", errs_pars, IDENTITY_RTOL))

    rng = _rng(seed, 1)
    errs = []
    for _ in range(trials):
        n = int(rng.integers(1, min(n_max, 8) + 1))
        h = w.random_cube_function(n, rng)
        errs.append(_rel_err(w.walsh_transform(h).coeffs, w.walsh_transform_direct(h).coeffs))
    out.append(_error_check("fast_vs_direct_transform", errs, IDENTITY_RTOL))

    rng = _rng(seed, 2)
    errs = []
    for _ in range(trials):
        n = int(rng.integers(1, n_max + 1))
        h = _mean_zero(n, rng)
        j = int(rng.integers(1, n + 1))
        half_inv = w.apply_to_function(h, w.Multiplier.fractional_laplacian(w.full_mask(n), -0.5))
        rhs = 0.5 * w.partial_derivative(half_inv, j).values
        errs.append(_rel_err(w.riesz_transform(h, j).values, rhs))
    out.append(_error_check("riesz_derivative_identity", errs, IDENTITY_RTOL))

    rng = _rng(seed, 3)
    errs = []
    for _ in range(trials):
        n = int(rng.integers(1, n_max + 1))
        h = w.random_cube_function(n, rng)
        s, t = rng.uniform(0, 2, size=2)
        two = w.apply_to_function(h, w.Multiplier.heat(s), w.Multiplier.heat(t))
        one = w.apply_to_function(h, w.Multiplier.heat(s + t))
        errs.append(_rel_err(two.values, one.values))
    out.append(_error_check("heat_semigroup", errs, IDENTITY_RTOL))

    rng = _rng(seed, 4)
    errs = []
    alphas = (-1.0, -0.5, 0.5, 1.0, 2.0)
    for i in range(trials):
        n = int(rng.integers(1, n_max + 1))
        h = _mean_zero(n, rng)
        S = _random_subset(n, rng)
        alpha = alphas[i % len(alphas)]
        comp = w.Multiplier.average(w.full_mask(n) ^ S)
        lhs = w.apply_to_function(
            h, comp, w.Multiplier.fractional_laplacian(S, alpha),
            w.Multiplier.fractional_laplacian(w.full_mask(n), -alpha),
        )
        rhs = w.apply_to_function(h, comp)
        errs.append(float(np.max(np.abs(lhs.values - rhs.values))) / max(float(np.max(np.abs(h.values))), 1e-300))
    out.append(_error_check("averaged_laplacian_identity", errs, IDENTITY_RTOL))

    rng = _rng(seed, 5)
    errs = []
    for i in range(20):
        n = int(rng.integers(1, min(n_max, 8) + 1))
        h = _mean_zero(n, rng)
        alpha = (0.5, 1.0)[i % 2]
        quad = w.inverse_laplacian_quadrature(h, alpha).values
        spectral = w.apply_to_function(h, w.Multiplier.fractional_laplacian(w.full_mask(n), -alpha)).values
        errs.append(_rel_err(quad, spectral))
    out.append(_error_check("quadrature_vs_spectral", errs, QUADRATURE_RTOL))

    rng = _rng(seed, 6)
    errs = []
    for _ in range(trials):
        n = int(rng.integers(1, n_max + 1))
        h = w.random_cube_function(n, rng)
        S = _random_subset(n, rng)
        e1 = w.average_over(h, S)
        e2 = w.average_over(e1, S)
        spectral = w.apply_to_function(h, w.Multiplier.average(S))
        span = float(np.max(np.abs(h.values)))
        out_of_range = max(0.0, float(np.max(e1.values - h.values.max())), float(np.max(h.values.min() - e1.values)))
        errs.append(max(_rel_err(e2.values, e1.values), _rel_err(spectral.values, e1.values), out_of_range / span))
    out.append(_error_check("averaging_operator", errs, IDENTITY_RTOL))
    return out


# ---------------------------------------------------------------------------
# torus suite

def _torus_checks(n_max: int, seed: int) -> list[CheckResult]:
    out = []
    rng = _rng(seed, 10)
    errs = []
    for _ in range(100):
        r = int(rng.integers(1, 5))
        n = int(rng.integers(1, min(n_max, 3) + 1))
        f = tor.random_dense(r, n, int(rng.integers(0, 2**31)))
        S = _random_subset(n, rng)
        errs.append(_rel_err(tor.t_s_average(f, S).data, tor.t_s_average_fourier(f, S).data))
    out.append(_error_check("smoothing_direct_vs_characters", errs, FOURIER_TS_TOL))

    rng = _rng(seed, 11)
    errs = []
    for _ in range(100):
        r = int(rng.integers(1, 5))
        n = int(rng.integers(1, min(n_max, 3) + 1))
        f = tor.random_dense(r, n, int(rng.integers(0, 2**31)))
        g = tor.t_s_average(f, _random_subset(n, rng)).data
        span = float(np.max(np.abs(f.data)))
        bad = max(0.0, float(g.max() - f.data.max()), float(f.data.min() - g.min()))
        errs.append(max(bad, abs(float(g.mean() - f.data.mean()))) / span)
    out.append(_error_check("smoothing_is_averaging", errs, IDENTITY_RTOL))

    rng = _rng(seed, 12)
    errs = []
    for _ in range(100):
        r = int(rng.integers(1, 5))
        n = int(rng.integers(1, min(n_max, 4) + 1))
        f = tor.random_dense(r, n, int(rng.integers(0, 2**31)))
        h = tor.chaos_lift(f, rng.integers(0, 2 * r, size=n))
        odd = h.values + h.values[::-1]  # index complement = negated signs
        errs.append(max(abs(h.mean), float(np.max(np.abs(odd)))))
    out.append(_error_check("chaos_lift_odd", errs, IDENTITY_RTOL))

    out.append(_ts_factor_two(n_max, seed))
    out.append(_mc_vs_exact_stats(n_max, seed))
    return out


def _ts_factor_two(n_max: int, seed: int) -> CheckResult:
    rng = _rng(seed, 13)
    slacks = []
    for p in (1.0, 2.0, 4.0):
        for _ in range(CAMPAIGN_TRIALS):
            r = int(rng.integers(1, 3))
            n = int(rng.integers(1, min(n_max, 4) + 1))
            f = tor.random_dense(r, n, int(rng.integers(0, 2**31)))
            rep = ineq.ts_perturbation(f, _random_subset(n, rng), p)
            slacks.append(_rel_slack(rep.lhs, rep.rhs))
    return _slack_check("ts_factor_two", slacks)


def _mc_vs_exact_stats(n_max: int, seed: int, reps: int = 20, need: int = 18) -> CheckResult:
    rng = _rng(seed, 14)
    passes = 0
    for rep in range(reps):
        r = int(rng.integers(1, 3))
        n = int(rng.integers(1, min(n_max, 3) + 1))
        k = int(rng.integers(1, n + 1))
        p = float(rng.choice([1.0, 2.0, 4.0]))
        f = tor.random_dense(r, n, int(rng.integers(0, 2**31)))
        ex = tor.difference_stats(f, p, k, "exact")
        mc = tor.difference_stats(f, p, k, "monte_carlo", budget=20_000, seed=seed * 1000 + rep)
        ok = all(
            abs(getattr(mc, t) - getattr(ex, t)) <= 3 * mc.stderr[t] + 1e-12
            for t in ("long_term", "gradient_term", "diagonal_term")
        )
        passes += ok
    return CheckResult("mc_difference_stats_within_3se", passes >= need, reps, "count", float(passes), float(need),
                       reps - passes)


# ---------------------------------------------------------------------------
# inequalities suites

def _point_mass(n: int, rng: np.random.Generator) -> w.CubeFunction:
    v = np.zeros(1 << n)
    v[int(rng.integers(0, 1 << n))] = 1.0
    return w.CubeFunction(n, v)


def _inequality_exact_checks(n_max: int, seed: int) -> list[CheckResult]:
    out = []
    nm = min(n_max, 10)

    rng = _rng(seed, 20)
    slacks = []
    for p in (2.0, 3.0, 4.0, 6.0):
        for i in range(CAMPAIGN_TRIALS):
            n = int(rng.integers(1, nm + 1))
            h = _point_mass(n, rng) if i % 5 == 0 else w.random_cube_function(n, rng)
            k = int(rng.integers(0, n + 1))
            lhs = w.p_norm(w.apply_to_function(h, w.Multiplier.rademacher_projection(k)), p)
            slacks.append(_rel_slack(lhs, p ** (k / 2) * w.p_norm(h, p)))
    out.append(_slack_check("bonami_bound", slacks))

    rng = _rng(seed, 21)
    slacks = []
    for p in (1.0, 2.0, 2.5, 4.0):
        for _ in range(CAMPAIGN_TRIALS):
            n = int(rng.integers(1, nm + 1))
            h = _mean_zero(n, rng)
            rep = ineq.jensen_contraction(h, _random_subset(n, rng), float(rng.uniform(-2, 2)), p)
            slacks.append(_rel_slack(rep.lhs, rep.rhs))
    out.append(_slack_check("jensen_contraction", slacks))

    rng = _rng(seed, 22)
    errs = []
    for _ in range(100):
        n = int(rng.integers(1, nm + 1))
        k = int(rng.integers(1, n + 1))
        a = rng.standard_normal(n)
        errs.append(abs(ineq.linear_xp(a, 2.0, k).ratio - 1 / math.sqrt(2)))
    out.append(_error_check("linear_p2_closed_form", errs, 1e-10))

    rng = _rng(seed, 23)
    errs = []
    for _ in range(100):
        n = int(rng.integers(1, min(nm, 8) + 1))
        k = int(rng.integers(1, n + 1))
        h = _mean_zero(n, rng)
        rep = ineq.chaos_xp(h, 2.0, k)
        spec = ineq.chaos_lhs_spectral_p2(h, k)
        c = w.walsh_transform(h).coeffs
        grad = (k / n) * 4 * float(np.sum(w.popcounts(n) * c * c))
        errs.append(max(abs(rep.lhs ** 2 - spec) / spec, abs(rep.rhs_terms["gradient"] - grad) / grad))
    out.append(_error_check("chaos_p2_spectral", errs, IDENTITY_RTOL))

    rng = _rng(seed, 24)
    errs_sq, errs_rr = [], []
    for _ in range(100):
        n = int(rng.integers(1, nm + 1))
        h = _mean_zero(n, rng)
        errs_sq.append(abs(ineq.lust_piquard_square(h, 2.0).ratio - 1.0))
        errs_rr.append(abs(ineq.randomized_riesz(h, 2.0, w.full_mask(n)).ratio - 2.0) / 2.0)
    out.append(_error_check("square_function_p2", errs_sq, IDENTITY_RTOL))
    out.append(_error_check("randomized_riesz_p2", errs_rr, IDENTITY_RTOL))
    return out


def _inequality_mc_checks(n_max: int, seed: int) -> list[CheckResult]:
    out = []
    nm = min(n_max, 8)
    rng = _rng(seed, 30)
    passes, reps = 0, 20
    for rep in range(reps):
        n = int(rng.integers(2, nm + 1))
        h = _mean_zero(n, rng)
        S = _random_subset(n, rng) or 1
        p = float(rng.choice([2.0, 3.0, 4.0]))
        ex = ineq.randomized_riesz(h, p, S)
        mc = ineq.randomized_riesz(h, p, S, mode="monte_carlo", budget=2000, seed=seed * 1000 + rep)
        passes += abs(mc.lhs - ex.lhs) <= 3 * mc.stderr["lhs"] + 1e-12
    out.append(CheckResult("mc_randomized_riesz_within_3se", passes >= 18, reps, "count", float(passes), 18.0,
                           reps - passes))

    rng = _rng(seed, 31)
    passes = 0
    for rep in range(reps):
        n = int(rng.integers(1, min(n_max, 3) + 1))
        k = int(rng.integers(1, n + 1))
        f = tor.random_dense(4, n, int(rng.integers(0, 2**31)))
        ex = ineq.metric_xp(f, 2.0, k)
        mc = ineq.metric_xp(f, 2.0, k, mode="monte_carlo", budget=20_000, seed=seed * 1000 + rep)
        ok = abs(mc.extra["long_term"] - ex.extra["long_term"]) <= 3 * mc.stderr["long_term"] + 1e-12
        ok &= all(abs(mc.rhs_terms[t] - ex.rhs_terms[t]) <= 3 * mc.stderr[t] + 1e-12 for t in ("gradient", "diagonal"))
        passes += ok
    out.append(CheckResult("mc_metric_xp_within_3se", passes >= 18, reps, "count", float(passes), 18.0,
                           reps - passes))

    rng = _rng(seed, 32)
    errs = []
    for _ in range(10):
        f = tor.random_dense(4, 2, int(rng.integers(0, 2**31)))
        s = int(rng.integers(0, 2**31))
        a = ineq.metric_xp(f, 2.0, 1, mode="monte_carlo", budget=5000, seed=s)
        b = ineq.metric_xp(f, 2.0, 1, mode="monte_carlo", budget=5000, seed=s)
        errs.append(0.0 if a.to_json(include_time=False) == b.to_json(include_time=False) else 1.0)
    out.append(_error_check("mc_reproducible", errs, 0.0))
    return out


_RUNNERS = {
    "walsh": _walsh_checks,
    "torus": _torus_checks,
    "inequalities-exact": _inequality_exact_checks,
    "inequalities-mc": _inequality_mc_checks,
}


def run_suite(suite: str, n_max: int = 12, seed: int = 0) -> dict:
    """Run a suite (or ``"all"``); the returned dict is the JSON report body."""
    if suite != "all" and suite not in _RUNNERS:
        raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES + ('all',))}")
    if not 1 <= n_max <= 14:
        raise ValueError(f"n_max must be in 1..14, got {n_max}")
    names = SUITES if suite == "all" else (suite,)
    checks = []
    for name in names:
        for c in _RUNNERS[name](n_max, seed):
            d = asdict(c)
            d["suite"] = name
            checks.append(d)
    failures = [c["name"] for c in checks if not c["passed"]]
    return {
        "suite": suite,
        "n_max": n_max,
        "seed": seed,
        "passed": not failures,
        "failures": failures,
        "checks": checks,
    }


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"
