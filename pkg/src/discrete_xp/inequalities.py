"""Both sides of the hypercube and torus inequalities, as structured reports.

Ratios never carry a guessed constant: ``ratio = lhs / rhs`` with
``rhs = rhs_scale * (sum of rhs_terms) ** (1 / rhs_root)``.  When the right
side vanishes the ratio is reported as 0.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from math import comb

import numpy as np
from scipy.special import gamma

from . import torus as tor
from .walsh import (
    CubeFunction,
    MeanZeroError,
    Multiplier,
    apply_to_function,
    fractional_laplacian_weights,
    full_mask,
    fwht,
    p_norm,
    partial_derivative,
    popcounts,
    require_mean_zero,
    riesz_square_function,
    subset_mask,
    walsh_transform,
)

MAX_LINEAR_N = 24
MAX_CHAOS_N = 20
SUBSET_BUDGET = 1 << 20
EXACT_SIGN_BUDGET = 1 << 26
VIOLATION_SLACK = 1e-12


@dataclass
class InequalityReport:
    name: str
    params: dict
    lhs: float
    rhs_terms: dict
    mode: str = "exact"
    rhs_root: float = 1.0
    rhs_scale: float = 1.0
    ratio: float = field(default=float("nan"))
    stderr: dict | None = None
    seed: int | None = None
    wall_time: float = 0.0
    flags: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for key, val in self.rhs_terms.items():
            if val < 0:
                raise ValueError(f"rhs term {key!r} is negative: {val}")
        self.ratio = self.recompute_ratio()

    @property
    def rhs(self) -> float:
        return self.rhs_scale * sum(self.rhs_terms.values()) ** (1.0 / self.rhs_root)

    def recompute_ratio(self) -> float:
        rhs = self.rhs
        return 0.0 if rhs == 0 else self.lhs / rhs

    def to_dict(self, include_time: bool = True) -> dict:
        d = asdict(self)
        d["rhs"] = self.rhs
        if not include_time:
            d.pop("wall_time")
        return d

    def to_json(self, include_time: bool = True) -> str:
        return json.dumps(self.to_dict(include_time), sort_keys=True, default=_jsonable)

    def csv_row(self) -> dict:
        row = {"name": self.name, "mode": self.mode}
        row.update({f"param_{k}": _jsonable(v) for k, v in sorted(self.params.items())})
        row["lhs"] = self.lhs
        row.update({f"rhs_{k}": v for k, v in self.rhs_terms.items()})
        row.update({"rhs": self.rhs, "ratio": self.ratio, "seed": self.seed})
        if self.stderr:
            row.update({f"stderr_{k}": v for k, v in self.stderr.items()})
        return row

    @classmethod
    def from_dict(cls, d: dict) -> InequalityReport:
        d = dict(d)
        d.pop("rhs", None)
        ratio = d.pop("ratio", None)
        rep = cls(**d)
        if ratio is not None and not math.isclose(rep.ratio, ratio, rel_tol=1e-12, abs_tol=0.0):
            raise ValueError("stored ratio is inconsistent with stored lhs/rhs fields")
        return rep


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def reports_to_csv(reports, fh=None) -> str:
    rows = [r.csv_row() for r in reports]
    cols: list[str] = []
    for row in rows:
        cols += [c for c in row if c not in cols]
    buf = fh or io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue() if fh is None else ""


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def _check_p(p: float, lo: float):
    if not p >= lo:
        raise ValueError(f"p must be >= {lo}, got {p}")


def _check_k(k, n):
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k!r}")


# ---------------------------------------------------------------------------
# linear (first-degree chaos) inequality

def _sign_sums(a: np.ndarray) -> np.ndarray:
    """All ``sum_j eps_j a_j`` over sign vectors, in bitmask order."""
    sums = np.zeros(1)
    for x in a:
        sums = np.concatenate([sums + x, sums - x])
    return sums


class LinearXpEvaluator:
    """Cached evaluator of the linear X_p ratio for fixed ``(n, k, p)``.

    Subsets are enumerated in colex order; only signs inside ``S`` matter and
    ``eps`` / ``-eps`` give equal terms, so each subset costs ``2**(k-1)``.
    """

    def __init__(self, n: int, k: int, p: float):
        if not 1 <= n <= MAX_LINEAR_N:
            raise ValueError(f"n must be in 1..{MAX_LINEAR_N}, got {n}")
        _check_k(k, n)
        _check_p(p, 2)
        self.n, self.k, self.p = n, k, float(p)
        masks = list(tor.k_subsets(n, k))
        self.members = np.array([[j for j in range(n) if S >> j & 1] for S in masks], dtype=np.int64)
        b = np.arange(1 << (k - 1))[:, None]
        # first sign fixed to +1
        self.signs = np.hstack([np.ones((b.shape[0], 1)), 1 - 2 * ((b >> np.arange(k - 1)) & 1)]).T

    def terms(self, a) -> tuple[float, float, float]:
        """Return ``(lhs**p, gradient, diagonal)`` with the k/n weights applied."""
        a = np.asarray(a, dtype=np.float64)
        n, k, p = self.n, self.k, self.p
        top = float(np.max(np.abs(a))) if a.size else 0.0
        if top == 0:
            return 0.0, 0.0, 0.0
        total = 0.0
        chunk = max(1, (1 << 22) // self.signs.shape[1])
        for i in range(0, len(self.members), chunk):
            sub = a[self.members[i:i + chunk]]
            total += float(np.sum(np.abs(sub @ self.signs) ** p))
        lhs_p = total / (len(self.members) * self.signs.shape[1])
        grad = (k / n) * float(np.sum(np.abs(a) ** p))
        diag = (k / n) ** (p / 2) * float(np.mean(np.abs(_sign_sums(a)) ** p))
        return lhs_p, grad, diag

    def ratio(self, a) -> float:
        lhs_p, grad, diag = self.terms(a)
        rhs_p = grad + diag
        return 0.0 if rhs_p == 0 else lhs_p ** (1 / self.p) / rhs_p ** (1 / self.p)


def linear_xp(a, p: float, k: int) -> InequalityReport:
    a = np.asarray(a, dtype=np.float64)
    n = a.size
    with _Timer() as t:
        ev = LinearXpEvaluator(n, k, p)
        lhs_p, grad, diag = ev.terms(a)
    return InequalityReport(
        "linear_xp", {"n": n, "k": k, "p": p, "a": a.tolist()}, lhs_p ** (1 / p),
        {"gradient": grad, "diagonal": diag}, rhs_root=p, wall_time=t.elapsed,
    )


# ---------------------------------------------------------------------------
# chaos inequality on the cube

def _marginal_norms_p(h: CubeFunction, k: int, p: float) -> float:
    """``mean_{|S|=k} ||E_{[n] minus S} h||_p^p``: average the complement coordinates away."""
    n = h.n
    # axis n-1-j of the C-order reshape carries coordinate j+1
    grid = h.values.reshape((2,) * n)
    total, count = 0.0, 0
    for S in tor.k_subsets(n, k):
        drop = tuple(n - 1 - j for j in range(n) if not S >> j & 1)
        marg = grid.mean(axis=drop) if drop else grid
        total += float(np.mean(np.abs(marg) ** p))
        count += 1
    return total / count


def chaos_lhs_spectral_p2(h: CubeFunction, k: int) -> float:
    """``lhs**2`` at p = 2 from the spectrum: ``sum_A hat_h(A)^2 C(n-|A|, k-|A|) / C(n, k)``."""
    n = h.n
    c = walsh_transform(h).coeffs
    pc = popcounts(n)
    w = np.array([comb(n - a, k - a) if a <= k else 0 for a in range(n + 1)], dtype=np.float64) / comb(n, k)
    return float(np.sum(c * c * w[pc]))


def chaos_xp(h: CubeFunction, p: float, k: int, refined: bool = False) -> InequalityReport:
    _check_p(p, 2)
    n = h.n
    if n > MAX_CHAOS_N:
        raise ValueError(f"chaos_xp limited to n <= {MAX_CHAOS_N}")
    _check_k(k, n)
    if comb(n, k) > SUBSET_BUDGET:
        raise tor.BudgetError(f"C(n, k) = {comb(n, k)} exceeds subset budget {SUBSET_BUDGET}")
    require_mean_zero(h)
    with _Timer() as t:
        lhs = _marginal_norms_p(h, k, p) ** (1 / p)
        dsum = sum(p_norm(partial_derivative(h, j), p) ** p for j in range(1, n + 1))
        hp = p_norm(h, p)
    terms = {"gradient": (k / n) * dsum, "diagonal": (k / n) ** (p / 2) * hp ** p}
    extra = {}
    if refined:
        t1 = (k / n) ** (1 / p) * dsum ** (1 / p)
        t2 = math.sqrt(k / n) * hp
        pre1 = p ** 2.5 / math.sqrt(math.log(p))
        pre2 = p ** 4 / math.log(p)
        extra = {
            "gradient_term": t1,
            "diagonal_term": t2,
            "gradient_prefactor": pre1,
            "diagonal_prefactor": pre2,
            "bare_ratio": 0.0 if t1 + t2 == 0 else lhs / (t1 + t2),
            "prefactored_ratio": 0.0 if t1 + t2 == 0 else lhs / (pre1 * t1 + pre2 * t2),
        }
    return InequalityReport(
        "chaos_xp", {"n": n, "k": k, "p": p, "refined": refined}, lhs, terms,
        rhs_root=p, wall_time=t.elapsed, extra=extra,
    )


# ---------------------------------------------------------------------------
# metric inequality on the torus

def metric_xp(
    f: tor.TorusFunction,
    p: float,
    k: int,
    mode: str = "exact",
    budget: int | None = None,
    seed: int | None = None,
    theorem_scaling: bool = True,
) -> InequalityReport:
    """Metric X_p inequality; ``theorem_scaling`` uses shift ``r = 4m`` and scale ``m``."""
    _check_p(p, 2)
    m = tor.scale_parameter(f.r, theorem_scaling)
    n = f.n
    with _Timer() as t:
        st = tor.difference_stats(f, p, k, mode, budget, seed)
    wg, wd = k / n, (k / n) ** (p / 2)
    stderr = None
    if st.stderr is not None:
        stderr = {
            "long_term": st.stderr["long_term"],
            "gradient": wg * st.stderr["gradient_term"],
            "diagonal": wd * st.stderr["diagonal_term"],
        }
    return InequalityReport(
        "metric_xp",
        {"r": f.r, "n": n, "k": k, "p": p, "m": m, "theorem_scaling": theorem_scaling},
        st.long_term ** (1 / p),
        {"gradient": wg * st.gradient_term, "diagonal": wd * st.diagonal_term},
        mode=st.mode, rhs_root=p, rhs_scale=float(m), stderr=stderr, seed=seed,
        wall_time=t.elapsed,
        flags={"hypothesis_violated": bool(m < math.sqrt(n / k))},
        extra={"long_term": st.long_term, "sample_count": st.sample_count},
    )


def smoothed_xp(
    f: tor.TorusFunction,
    p: float,
    k: int,
    mode: str = "exact",
    budget: int | None = None,
    seed: int | None = None,
    theorem_scaling: bool = True,
) -> InequalityReport:
    """Smoothed (T-operator) form; both sides are p-th powers, so the ratio is taken after the p-th root."""
    _check_p(p, 2)
    st = tor.smoothed_difference_stats(f, p, k, mode, budget, seed, theorem_scaling)
    n = f.n
    return InequalityReport(
        "smoothed_xp", {"r": f.r, "n": n, "k": k, "p": p, "theorem_scaling": theorem_scaling},
        st.long_term ** (1 / p),
        {"gradient": (k / n) * st.gradient_term, "diagonal": (k / n) ** (p / 2) * st.diagonal_term},
        mode=st.mode, rhs_root=p, stderr=st.stderr, seed=seed,
    )


# ---------------------------------------------------------------------------
# Riesz-transform inequalities

def lust_piquard_square(h: CubeFunction, p: float) -> InequalityReport:
    _check_p(p, 2)
    require_mean_zero(h)
    with _Timer() as t:
        sq = p_norm(riesz_square_function(h), p)
        hp = p_norm(h, p)
    return InequalityReport(
        "lust_piquard_square", {"n": h.n, "p": p}, sq, {"h_norm": hp}, wall_time=t.elapsed,
        extra={"lower_envelope": p ** -1.5, "upper_envelope": p},
    )


def randomized_riesz(
    h: CubeFunction,
    p: float,
    S,
    mode: str = "exact",
    budget: int | None = None,
    seed: int | None = None,
) -> InequalityReport:
    """Compare ``(E_delta ||sum_{j in S} delta_j d_j h||_p^p)^{1/p}`` with ``||Delta_S^{1/2} h||_p``."""
    _check_p(p, 2)
    require_mean_zero(h)
    n = h.n
    S = subset_mask(S, n)
    coords = [j + 1 for j in range(n) if S >> j & 1]
    with _Timer() as t:
        D = np.array([partial_derivative(h, j).values for j in coords]).reshape(len(coords), 1 << n)
        stderr = None
        if not coords:
            lhs_p = 0.0
        elif mode == "exact":
            if (1 << len(coords)) * (1 << n) > EXACT_SIGN_BUDGET:
                raise tor.BudgetError("exact sign enumeration exceeds budget; use monte_carlo")
            # signs outside S do not enter the sum
            lhs_p = float(np.mean([np.mean(np.abs(d @ D) ** p) for d in _signs(len(coords))]))
        elif mode == "monte_carlo":
            if seed is None:
                raise ValueError("Monte Carlo evaluation requires an explicit seed")
            budget = budget or 1000
            rng = np.random.default_rng(seed)
            draws = 1 - 2 * rng.integers(0, 2, size=(budget, len(coords)))
            vals = np.array([np.mean(np.abs(d @ D) ** p) for d in draws])
            lhs_p = float(vals.mean())
            se = float(vals.std(ddof=1) / math.sqrt(budget))
            # delta-method error of the p-th root
            stderr = {"lhs": se * (lhs_p ** (1 / p - 1) / p if lhs_p > 0 else 0.0)}
        else:
            raise ValueError(f"unknown mode {mode!r}")
        rhs = p_norm(apply_to_function(h, Multiplier.fractional_laplacian(S, 0.5)), p)
    return InequalityReport(
        "randomized_riesz", {"n": n, "p": p, "S": S}, lhs_p ** (1 / p), {"laplacian_norm": rhs},
        mode=mode, stderr=stderr, seed=seed if mode == "monte_carlo" else None, wall_time=t.elapsed,
    )


def _signs(k: int) -> np.ndarray:
    b = np.arange(1 << k)[:, None]
    return (1 - 2 * ((b >> np.arange(k)) & 1)).astype(np.float64)


def jensen_contraction(h: CubeFunction, S, alpha: float, p: float) -> InequalityReport:
    """``||E_{[n] minus S} h||_p <= ||Delta_S^alpha Delta^{-alpha} h||_p``; constant 1 is exact."""
    _check_p(p, 1)
    require_mean_zero(h)
    n = h.n
    S = subset_mask(S, n)
    with _Timer() as t:
        lhs = p_norm(apply_to_function(h, Multiplier.average(full_mask(n) ^ S)), p)
        rhs = p_norm(
            apply_to_function(
                h, Multiplier.fractional_laplacian(S, alpha), Multiplier.fractional_laplacian(full_mask(n), -alpha)
            ),
            p,
        )
    violated = lhs > rhs + VIOLATION_SLACK * max(1.0, rhs)
    return InequalityReport(
        "jensen_contraction", {"n": n, "S": S, "alpha": alpha, "p": p}, lhs, {"laplacian_ratio_norm": rhs},
        wall_time=t.elapsed, flags={"violation": bool(violated)}, extra={"slack": rhs - lhs},
    )


# ---------------------------------------------------------------------------
# negative powers of the Laplacian

def inverse_laplacian_norm(h: CubeFunction, alpha: float, q: float) -> float:
    """``||Delta^{-alpha} (h - mean)||_q`` via the spectral multiplier."""
    c = walsh_transform(h).coeffs.copy()
    c[0] = 0.0
    w = fractional_laplacian_weights(h.n, full_mask(h.n), -alpha)
    return p_norm(fwht(c * w), q)


def point_mass_test_function(n: int, p: float) -> CubeFunction:
    """``2**(n/p*) * 1_{(1,...,1)}``, unit norm in L_{p*}; every Walsh coefficient equals ``2**(-n/p)``."""
    v = np.zeros(1 << n)
    v[0] = 2.0 ** (n * (1 - 1 / p))
    return CubeFunction(n, v)


def inverse_laplacian_probe(p: float, alpha: float, n: int) -> InequalityReport:
    _check_p(p, 2)
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if not 2 <= n <= MAX_CHAOS_N:
        raise ValueError(f"n must be in 2..{MAX_CHAOS_N} (log n must be positive)")
    q = p / (p - 1)
    with _Timer() as t:
        f = point_mass_test_function(n, p)
        c = walsh_transform(f).coeffs.copy()
        c[0] = 0.0
        g = fwht(c * fractional_laplacian_weights(n, full_mask(n), -alpha))
        value = p_norm(g, q)
    envelope = 2.0 ** (-n / p) * math.log(n) ** alpha / (2 ** alpha * gamma(1 + alpha))
    pointwise = envelope / 2
    # kappa = number of +1 coordinates = n - popcount(point index)
    kappa = n - popcounts(n)
    low = kappa <= n / 2
    count_ok = int(low.sum()) >= 1 << (n - 1)
    pointwise_ok = bool(np.all(np.abs(g[low]) >= pointwise * (1 - 1e-12)))
    target = math.log(p) ** alpha / (2 ** alpha * gamma(1 + alpha))
    return InequalityReport(
        "inverse_laplacian_probe", {"n": n, "p": p, "alpha": alpha}, value, {"envelope": envelope},
        wall_time=t.elapsed,
        flags={
            "alpha_in_range": bool(alpha <= (5 + math.log(p)) / 4),
            "half_cube_count_ok": bool(count_ok),
            "pointwise_bound_ok": pointwise_ok,
            "below_envelope": bool(value < envelope),
        },
        extra={
            "pointwise_bound": pointwise,
            "rigorous_norm_bound": pointwise * 0.5 ** (1 / q),
            "two_sided_target": target,
            "low_kappa_points": int(low.sum()),
        },
    )


# ---------------------------------------------------------------------------
# smoothing perturbation on the torus

def ts_perturbation(f: tor.TorusFunction, S, p: float) -> InequalityReport:
    """``||f - T_S f||_p <= 2 (E|f(x + eps) - f(x)|^p)^{1/p}``; the factor 2 is exact."""
    _check_p(p, 1)
    if not f.is_dense:
        raise TypeError("ts_perturbation requires dense backing")
    S = subset_mask(S, f.n)
    with _Timer() as t:
        diff = f.data - tor.t_s_average(f, S).data
        lhs = p_norm(diff, p)
        diag = tor.diagonal_moment(f, p)
    rep = InequalityReport(
        "ts_perturbation", {"r": f.r, "n": f.n, "S": S, "p": p}, lhs, {"diagonal": diag},
        rhs_root=p, rhs_scale=2.0, wall_time=t.elapsed,
    )
    rep.flags["violation"] = bool(lhs > rep.rhs + VIOLATION_SLACK * max(1.0, rep.rhs))
    return rep


__all__ = [
    "InequalityReport",
    "LinearXpEvaluator",
    "MeanZeroError",
    "chaos_lhs_spectral_p2",
    "chaos_xp",
    "inverse_laplacian_norm",
    "inverse_laplacian_probe",
    "jensen_contraction",
    "linear_xp",
    "lust_piquard_square",
    "metric_xp",
    "point_mass_test_function",
    "randomized_riesz",
    "reports_to_csv",
    "smoothed_xp",
    "ts_perturbation",
]
