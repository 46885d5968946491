"""Derivative-free search for extremal lhs/rhs ratios and dimension sweeps.

Both objectives are scale invariant, so iterates are renormalized freely.
The optimizer is coordinate ascent with a doubling line search per
coordinate and random restarts; restarts always include structured seeds.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import asdict, dataclass, field
from math import comb

import numpy as np

from . import torus as tor
from .inequalities import LinearXpEvaluator
from .walsh import CubeFunction, popcounts, walsh_character

MAX_CHAOS_SEARCH_N = 12
IMPROVE_RTOL = 1e-12


@dataclass(frozen=True)
class SearchConfig:
    restarts: int = 4
    iterations: int = 40
    step: float = 0.5
    decay: float = 0.5
    tol: float = 1e-6
    seed: int = 0
    constraint: str = "none"
    coords_per_iteration: int | None = None

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.step > 0:
            raise ValueError("step must be > 0")
        if not 0 < self.decay < 1:
            raise ValueError("decay must lie in (0, 1)")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.constraint not in ("none", "mean_zero"):
            raise ValueError(f"unknown constraint {self.constraint!r}")


@dataclass
class SearchResult:
    best_ratio: float
    argmax: np.ndarray
    restart_best: list
    iterations_used: int
    exhausted: bool
    config: SearchConfig
    n: int
    k: int
    p: float
    objective: str
    trajectories: list = field(default_factory=list, repr=False)

    def argmax_function(self) -> CubeFunction:
        if self.objective != "chaos":
            raise TypeError("argmax is a coefficient vector for the linear objective")
        return CubeFunction(self.n, self.argmax)

    def summary(self) -> dict:
        return {
            "objective": self.objective,
            "n": self.n,
            "k": self.k,
            "p": self.p,
            "best_ratio": self.best_ratio,
            "restart_best": list(self.restart_best),
            "iterations_used": self.iterations_used,
            "exhausted": self.exhausted,
            "config": asdict(self.config),
            "argmax": self.argmax.tolist(),
        }


# ---------------------------------------------------------------------------
# chaos objective with cheap single-point moves

class ChaosXpEvaluator:
    """Chaos X_p ratio for mean-zero ``h`` with O(C(n,k) 2^k) single-point updates.

    State holds the marginals ``E_{[n] minus S} h`` for every k-subset, all
    partial derivatives, and ``h`` itself.  A move adds ``t (e_b - 1/2^n)``
    to ``h``, which keeps the mean at zero.
    """

    def __init__(self, n: int, k: int, p: float):
        if not 1 <= n <= MAX_CHAOS_SEARCH_N:
            raise ValueError(f"chaos search needs 1 <= n <= {MAX_CHAOS_SEARCH_N}, got {n}")
        if not 1 <= k <= n:
            raise ValueError(f"k must be in 1..{n}, got {k}")
        if p < 2:
            raise ValueError(f"p must be >= 2, got {p}")
        self.n, self.k, self.p = n, k, float(p)
        self.N = 1 << n
        idx = np.arange(self.N)
        masks = list(tor.k_subsets(n, k))
        cells = np.zeros((len(masks), self.N), dtype=np.int64)
        for s, S in enumerate(masks):
            for i, j in enumerate(j for j in range(n) if S >> j & 1):
                cells[s] |= ((idx >> j) & 1) << i
        self.cells = cells
        self.flat = cells + (np.arange(len(masks)) << k)[:, None]
        self.flips = idx[None, :] ^ (1 << np.arange(n))[:, None]
        self.wg = k / n
        self.wd = (k / n) ** (p / 2)

    def _pow(self, x):
        return np.abs(x) ** self.p

    def load(self, h: np.ndarray) -> float:
        h = np.asarray(h, dtype=np.float64)
        self.h = h - h.mean()
        C = self.cells.shape[0]
        self.M = np.bincount(self.flat.ravel(), weights=np.tile(self.h, C), minlength=C << self.k)
        self.M = self.M.reshape(C, 1 << self.k) / (1 << (self.n - self.k))
        self.D = self.h[None, :] - self.h[self.flips]
        self.Dp = self._pow(self.D)
        self.L = float(np.mean(self._pow(self.M)))
        self.G = float(self.Dp.sum()) / self.N
        self.H = float(np.mean(self._pow(self.h)))
        self.value = self._ratio(self.L, self.G, self.H)
        return self.value

    def _ratio(self, L, G, H) -> float:
        rhs = self.wg * G + self.wd * H
        return 0.0 if rhs <= 0 else (L / rhs) ** (1 / self.p)

    def ratio(self, h: np.ndarray) -> float:
        return ChaosXpEvaluator.load(self, h)

    def _trial(self, b: int, t: float):
        s = np.arange(self.cells.shape[0])
        M = self.M - t / self.N
        M[s, self.cells[:, b]] += t / (1 << (self.n - self.k))
        L = float(np.mean(self._pow(M)))
        j = np.arange(self.n)
        partner = self.flips[:, b]
        old = self.Dp[j, b].sum() + self.Dp[j, partner].sum()
        new_b = self.D[j, b] + t
        new_partner = self.D[j, partner] - t
        G = self.G + (float(self._pow(new_b).sum() + self._pow(new_partner).sum()) - old) / self.N
        h = self.h - t / self.N
        h[b] += t
        H = float(np.mean(self._pow(h)))
        return self._ratio(L, G, H), (M, G, h, new_b, new_partner)

    def try_move(self, b: int, t: float) -> float:
        val, self._pending = self._trial(b, t)
        self._pending_b = b
        return val

    def commit(self, value: float):
        M, G, h, new_b, new_partner = self._pending
        b = self._pending_b
        j = np.arange(self.n)
        partner = self.flips[:, b]
        self.M, self.G, self.h = M, G, h
        self.D[j, b] = new_b
        self.D[j, partner] = new_partner
        self.Dp[j, b] = self._pow(new_b)
        self.Dp[j, partner] = self._pow(new_partner)
        self.L = float(np.mean(self._pow(M)))
        self.H = float(np.mean(self._pow(h)))
        self.value = value


def _better(v: float, best: float) -> bool:
    return v > best + IMPROVE_RTOL * max(abs(best), 1e-300)


def _ascend_chaos(ev: ChaosXpEvaluator, h0: np.ndarray, cfg: SearchConfig, rng: np.random.Generator):
    h0 = h0 / max(np.sqrt(np.mean(h0 * h0)), 1e-300)
    best = ev.load(h0)
    traj = [best]
    step = cfg.step
    per_iter = min(ev.N, cfg.coords_per_iteration or ev.N)
    iters = 0
    for iters in range(1, cfg.iterations + 1):
        improved = False
        for b in rng.permutation(ev.N)[:per_iter]:
            for sgn in (1.0, -1.0):
                t = sgn * step
                v = ev.try_move(int(b), t)
                if not _better(v, best):
                    continue
                ev.commit(v)
                best = v
                improved = True
                # doubling line search along the accepted coordinate
                while True:
                    t *= 2
                    v = ev.try_move(int(b), t)
                    if not _better(v, best):
                        break
                    ev.commit(v)
                    best = v
                break
        # renormalize (ratio unchanged) and refresh caches against drift
        h = ev.h / max(np.sqrt(np.mean(ev.h * ev.h)), 1e-300)
        best = ev.load(h)
        traj.append(max(traj[-1], best))
        if not improved:
            step *= cfg.decay
            if step < cfg.tol:
                return ev.h.copy(), best, traj, iters, False
    return ev.h.copy(), best, traj, iters, True


# ---------------------------------------------------------------------------
# linear objective

def _normalize_p(a: np.ndarray, p: float) -> np.ndarray:
    s = np.sum(np.abs(a) ** p) ** (1 / p)
    return a / s if s > 0 else a


def _ascend_linear(ev: LinearXpEvaluator, a0: np.ndarray, cfg: SearchConfig, rng: np.random.Generator):
    p = ev.p
    a = _normalize_p(np.asarray(a0, dtype=np.float64), p)
    best = ev.ratio(a)
    traj = [best]
    step = cfg.step
    n = a.size
    iters = 0
    for iters in range(1, cfg.iterations + 1):
        improved = False
        for i in rng.permutation(n):
            for sgn in (1.0, -1.0):
                t = sgn * step
                y = a.copy()
                y[i] += t
                y = _normalize_p(y, p)
                v = ev.ratio(y)
                if not _better(v, best):
                    continue
                a, best, improved = y, v, True
                while True:
                    t *= 2
                    y = a.copy()
                    y[i] += t
                    y = _normalize_p(y, p)
                    v = ev.ratio(y)
                    if not _better(v, best):
                        break
                    a, best = y, v
                break
        if not improved:
            # finite-difference ascent fallback before shrinking the step
            h = 1e-6
            base = best
            grad = np.array([(ev.ratio(_normalize_p(a + h * e, p)) - base) / h for e in np.eye(n)])
            gn = np.linalg.norm(grad)
            if gn > 0:
                y = _normalize_p(a + step * grad / gn, p)
                v = ev.ratio(y)
                if _better(v, best):
                    a, best, improved = y, v, True
        traj.append(best)
        if not improved:
            step *= cfg.decay
            if step < cfg.tol:
                return a, best, traj, iters, False
    return a, best, traj, iters, True


def _run_restarts(seeds, ascend, ev, cfg: SearchConfig):
    """Run every seed with its own RNG stream; lowest index wins ties."""
    streams = np.random.SeedSequence(cfg.seed).spawn(len(seeds))
    outcomes = [ascend(ev, x0, cfg, np.random.default_rng(ss)) for x0, ss in zip(seeds, streams)]
    best_i = 0
    for i, out in enumerate(outcomes):
        if out[1] > outcomes[best_i][1]:
            best_i = i
    return outcomes, best_i


def maximize_linear_ratio(n: int, k: int, p: float, config: SearchConfig | None = None) -> SearchResult:
    cfg = config or SearchConfig()
    if not 1 <= n <= 20:
        raise ValueError(f"linear search needs 1 <= n <= 20, got {n}")
    ev = LinearXpEvaluator(n, k, p)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
    seeds = [np.eye(n)[0], np.ones(n)] + [rng.standard_normal(n) for _ in range(cfg.restarts)]
    outcomes, bi = _run_restarts(seeds, _ascend_linear, ev, cfg)
    a = outcomes[bi][0]
    return SearchResult(
        best_ratio=ev.ratio(a),
        argmax=a,
        restart_best=[o[1] for o in outcomes],
        iterations_used=sum(o[3] for o in outcomes),
        exhausted=any(o[4] for o in outcomes),
        config=cfg,
        n=n, k=k, p=float(p), objective="linear",
        trajectories=[o[2] for o in outcomes],
    )


def lift_linear(a: np.ndarray) -> np.ndarray:
    """Point values of the degree-1 chaos ``sum_j a_j eps_j``."""
    n = len(a)
    b = np.arange(1 << n)[:, None]
    return (1 - 2 * ((b >> np.arange(n)) & 1)) @ np.asarray(a, dtype=np.float64)


def maximize_chaos_ratio(n: int, k: int, p: float, config: SearchConfig | None = None) -> SearchResult:
    cfg = config or SearchConfig(constraint="mean_zero")
    ev = ChaosXpEvaluator(n, k, p)
    lin = maximize_linear_ratio(n, k, p, SearchConfig(
        restarts=min(cfg.restarts, 2), iterations=cfg.iterations, step=cfg.step,
        decay=cfg.decay, tol=cfg.tol, seed=cfg.seed,
    ))
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(2)[1])
    seeds = [lift_linear(lin.argmax), walsh_character(n, [1]).values]
    if k > 1:
        seeds.append(walsh_character(n, range(1, k + 1)).values)
    seeds += [rng.standard_normal(1 << n) for _ in range(cfg.restarts)]
    outcomes, bi = _run_restarts(seeds, _ascend_chaos, ev, cfg)
    h = outcomes[bi][0]
    h = h - h.mean()
    return SearchResult(
        best_ratio=ChaosXpEvaluator(n, k, p).ratio(h),
        argmax=h,
        restart_best=[o[1] for o in outcomes],
        iterations_used=sum(o[3] for o in outcomes),
        exhausted=any(o[4] for o in outcomes),
        config=cfg,
        n=n, k=k, p=float(p), objective="chaos",
        trajectories=[o[2] for o in outcomes],
    )


# ---------------------------------------------------------------------------
# p = 2 level-weight oracle

def chaos_p2_level_oracle(n: int, k: int, grid: int = 20) -> float:
    """Brute-force max of the p = 2 chaos ratio over spectral mass per level ``|A| = l``.

    At p = 2 the ratio squared is ``sum_l w_l c_l / sum_l w_l d_l`` with
    ``c_l = C(n-l, k-l)/C(n,k)`` and ``d_l = (k/n)(4l + 1)``; the weights
    ``w_l`` range over a simplex grid with ``grid`` subdivisions.
    """
    levels = list(range(1, n + 1))
    c = np.array([comb(n - l, k - l) / comb(n, k) if l <= k else 0.0 for l in levels])
    d = np.array([(k / n) * (4 * l + 1) for l in levels])
    best = 0.0
    for parts in _compositions(grid, len(levels)):
        w = np.array(parts, dtype=np.float64)
        best = max(best, float(w @ c / (w @ d)))
    return math.sqrt(best)


def _compositions(total: int, slots: int):
    """Nonzero weight vectors with nonnegative integer entries summing to ``total``."""
    for cut in itertools.combinations(range(total + slots - 1), slots - 1):
        prev, parts = -1, []
        for c_ in cut:
            parts.append(c_ - prev - 1)
            prev = c_
        parts.append(total + slots - 2 - prev)
        yield parts


# ---------------------------------------------------------------------------
# sweeps

def k_for_rule(rule, n: int) -> int:
    if isinstance(rule, tuple) and rule[0] == "fixed":
        k = int(rule[1])
    elif rule == "half":
        k = math.ceil(n / 2)
    elif rule == "sqrt":
        k = math.ceil(math.sqrt(n))
    else:
        raise ValueError(f"unknown k rule {rule!r}; use ('fixed', k), 'half' or 'sqrt'")
    if not 1 <= k <= n:
        raise ValueError(f"rule {rule!r} gives k={k} outside 1..{n}")
    return k


def rule_name(rule) -> str:
    return f"fixed{rule[1]}" if isinstance(rule, tuple) else rule


def constant_sweep(n_range, k_rule, p: float, config: SearchConfig | None = None, objective: str = "chaos"):
    """One search per ``n``; returns a list of SearchResult in the order of ``n_range``."""
    search = {"chaos": maximize_chaos_ratio, "linear": maximize_linear_ratio}.get(objective)
    if search is None:
        raise ValueError(f"objective must be 'chaos' or 'linear', got {objective!r}")
    return [search(n, k_for_rule(k_rule, n), p, config) for n in n_range]


SWEEP_COLUMNS = ("n", "k", "p", "rule", "best_ratio", "restarts", "seed")


def sweep_to_csv(results, k_rule) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in results:
        w.writerow([r.n, r.k, r.p, rule_name(k_rule), repr(r.best_ratio), r.config.restarts, r.config.seed])
    return buf.getvalue()


__all__ = [
    "ChaosXpEvaluator",
    "SearchConfig",
    "SearchResult",
    "chaos_p2_level_oracle",
    "constant_sweep",
    "k_for_rule",
    "lift_linear",
    "maximize_chaos_ratio",
    "maximize_linear_ratio",
    "popcounts",
    "sweep_to_csv",
]
