"""Real functions on the discrete torus Z_{2r}^n and the smoothing/lift machinery.

A single half-period ``r`` covers both normalizations: the X_p definition on
``Z_{2m}`` (take ``r = m``) and the L_p theorem on ``Z_{8m}`` (take
``r = 4m``).  The long shift is always ``r * eps_S``.

Dense tables use a little-endian mixed-radix index,
``idx = sum_j x_j (2r)**(j-1)``, i.e. ``x_1`` varies fastest.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .walsh import MAX_N, CubeFunction, full_mask, subset_mask

EXACT_WORK_LIMIT = 1 << 26
MAX_SMOOTHING_SUBSET = 20
MC_BLOCK = 4096


class BudgetError(ValueError):
    """Exact evaluation would exceed the work bound."""


@dataclass(frozen=True)
class TorusFunction:
    """Function on Z_{2r}^n, backed either by a dense table or a deterministic callable."""

    r: int
    n: int
    data: np.ndarray | None = field(default=None, repr=False)
    oracle: Callable | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.r, (int, np.integer)) or self.r < 1:
            raise ValueError(f"half-period r must be a positive integer, got {self.r!r}")
        if not isinstance(self.n, (int, np.integer)) or not 1 <= self.n <= MAX_N:
            raise ValueError(f"dimension n must be in 1..{MAX_N}, got {self.n!r}")
        if (self.data is None) == (self.oracle is None):
            raise ValueError("exactly one of data / oracle must be given")
        if self.data is not None:
            arr = np.array(self.data, dtype=np.float64).reshape(-1)
            if arr.size != self.size:
                raise ValueError(f"dense data must have (2r)^n = {self.size} entries, got {arr.size}")
            if not np.all(np.isfinite(arr)):
                raise ValueError("dense data contains NaN or Inf")
            arr.setflags(write=False)
            object.__setattr__(self, "data", arr)

    @property
    def period(self) -> int:
        return 2 * self.r

    @property
    def size(self) -> int:
        return self.period ** self.n

    @property
    def is_dense(self) -> bool:
        return self.data is not None

    def grid(self) -> np.ndarray:
        """Dense values as an n-dim array with axis ``j-1`` holding ``x_j``."""
        self._need_dense()
        return self.data.reshape((self.period,) * self.n, order="F")

    @classmethod
    def from_grid(cls, r: int, grid: np.ndarray) -> TorusFunction:
        return cls(r, grid.ndim, data=np.asarray(grid).reshape(-1, order="F"))

    def _need_dense(self):
        if not self.is_dense:
            raise TypeError("operation requires dense backing")

    def index(self, points: np.ndarray) -> np.ndarray:
        pts = np.mod(np.asarray(points, dtype=np.int64), self.period)
        radix = self.period ** np.arange(self.n, dtype=np.int64)
        return pts @ radix

    def __call__(self, points) -> np.ndarray | float:
        """Evaluate at one point (length-n) or a batch of points (shape (m, n)); coordinates wrap."""
        pts = np.asarray(points, dtype=np.int64)
        single = pts.ndim == 1
        pts = np.atleast_2d(np.mod(pts, self.period))
        if self.is_dense:
            out = self.data[self.index(pts)]
        else:
            out = np.array([float(self.oracle(tuple(int(c) for c in p))) for p in pts])
        return float(out[0]) if single else out

    def to_dense(self) -> TorusFunction:
        if self.is_dense:
            return self
        if self.size > EXACT_WORK_LIMIT:
            raise BudgetError(f"(2r)^n = {self.size} too large to tabulate")
        return TorusFunction(self.r, self.n, data=self(all_points(self.r, self.n)))

    def to_json(self) -> str:
        self._need_dense()
        return json.dumps({"r": self.r, "n": self.n, "data": self.data.tolist()})

    @classmethod
    def from_json(cls, text: str) -> TorusFunction:
        obj = json.loads(text)
        try:
            return cls(obj["r"], obj["n"], data=obj["data"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed torus JSON: {exc}") from None


def all_points(r: int, n: int) -> np.ndarray:
    """All points of Z_{2r}^n in dense index order, shape ((2r)^n, n)."""
    P = 2 * r
    idx = np.arange(P ** n, dtype=np.int64)[:, None]
    return (idx // P ** np.arange(n, dtype=np.int64)) % P


def _shift(grid: np.ndarray, offset) -> np.ndarray:
    """``g(x) = f(x + offset)`` on the grid."""
    axes = [a for a, o in enumerate(offset) if o]
    if not axes:
        return grid
    return np.roll(grid, [-int(offset[a]) for a in axes], axis=axes)


def _coords(S: int, n: int) -> list[int]:
    return [j for j in range(n) if S >> j & 1]


# ---------------------------------------------------------------------------
# generators

def constant(r: int, n: int, c: float = 1.0) -> TorusFunction:
    return TorusFunction(r, n, data=np.full((2 * r) ** n, float(c)))


def coordinate_cosine(r: int, n: int, j: int = 1, freq: int = 1) -> TorusFunction:
    x = all_points(r, n)
    return TorusFunction(r, n, data=np.cos(2 * math.pi * freq * x[:, j - 1] / (2 * r)))


def cosine_sum(r: int, n: int, coeffs=None) -> TorusFunction:
    """``sum_j a_j cos(2 pi x_j / 2r)``; ``coeffs`` defaults to all ones."""
    a = np.ones(n) if coeffs is None else np.asarray(coeffs, dtype=np.float64)
    if a.size != n:
        raise ValueError(f"need {n} coefficients, got {a.size}")
    x = all_points(r, n)
    return TorusFunction(r, n, data=np.cos(2 * math.pi * x / (2 * r)) @ a)


def sawtooth(r: int, n: int, j: int = 1) -> TorusFunction:
    """Tent profile in ``x_j``: distance from 0 on the cycle Z_{2r}."""
    x = all_points(r, n)[:, j - 1]
    return TorusFunction(r, n, data=np.minimum(x, 2 * r - x).astype(np.float64))


def random_dense(r: int, n: int, seed: int) -> TorusFunction:
    rng = np.random.default_rng(seed)
    return TorusFunction(r, n, data=rng.standard_normal((2 * r) ** n))


def random_trig(r: int, n: int, seed: int, terms: int = 8, max_freq: int = 2) -> TorusFunction:
    """Random real trigonometric polynomial with ``terms`` frequencies in ``[-max_freq, max_freq]^n``."""
    rng = np.random.default_rng(seed)
    x = all_points(r, n)
    freqs = rng.integers(-max_freq, max_freq + 1, size=(terms, n))
    amp = rng.standard_normal(terms)
    phase = rng.uniform(0, 2 * math.pi, size=terms)
    vals = np.cos(2 * math.pi * (x @ freqs.T) / (2 * r) + phase) @ amp
    return TorusFunction(r, n, data=vals)


GENERATORS = {
    "constant": constant,
    "cosine": coordinate_cosine,
    "cosine-sum": cosine_sum,
    "sawtooth": sawtooth,
    "random": random_dense,
    "random-trig": random_trig,
}


def make_generator(name: str, r: int, n: int, **params) -> TorusFunction:
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise ValueError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}") from None
    return gen(r, n, **params)


# ---------------------------------------------------------------------------
# smoothing and lift

def t_s_average(f: TorusFunction, S) -> TorusFunction:
    """``T_S f(x)``: average of ``f(x + 2 delta_S)`` over signs ``delta``."""
    if not f.is_dense:
        raise TypeError("t_s_average requires dense backing")
    S = subset_mask(S, f.n)
    coords = _coords(S, f.n)
    if len(coords) > MAX_SMOOTHING_SUBSET:
        raise BudgetError(f"|S| = {len(coords)} exceeds {MAX_SMOOTHING_SUBSET}")
    g = f.grid()
    # the average factorizes over coordinates
    for a in coords:
        g = 0.5 * (np.roll(g, -2, axis=a) + np.roll(g, 2, axis=a))
    return TorusFunction.from_grid(f.r, g)


def t_s_average_fourier(f: TorusFunction, S) -> TorusFunction:
    """Same operator via characters: frequency ``xi`` is scaled by ``prod_{j in S} cos(4 pi xi_j / 2r)``."""
    S = subset_mask(S, f.n)
    P = f.period
    g = np.fft.fftn(f.grid())
    xi = np.arange(P)
    for a in _coords(S, f.n):
        shape = [1] * f.n
        shape[a] = P
        g = g * np.cos(4 * math.pi * xi / P).reshape(shape)
    return TorusFunction.from_grid(f.r, np.real(np.fft.ifftn(g)))


def chaos_lift(f: TorusFunction, x) -> CubeFunction:
    """``h_x(eps) = f(x + 2 eps) - f(x - 2 eps)`` as a cube function (odd, hence mean-zero)."""
    x = np.asarray(x, dtype=np.int64)
    if x.shape != (f.n,):
        raise ValueError(f"point must have {f.n} coordinates")
    b = np.arange(1 << f.n)[:, None]
    eps = 1 - 2 * ((b >> np.arange(f.n)) & 1)
    return CubeFunction(f.n, f(x + 2 * eps) - f(x - 2 * eps))


# ---------------------------------------------------------------------------
# difference statistics

def k_subsets(n: int, k: int):
    """Bitmasks of k-subsets of [n] in colexicographic (= increasing integer) order."""
    if k == 0:
        yield 0
        return
    v = (1 << k) - 1
    limit = 1 << n
    while v < limit:
        yield v
        c = v & -v
        r_ = v + c
        v = (((r_ ^ v) >> 2) // c) | r_


@dataclass
class DifferenceStats:
    p: float
    long_term: float
    gradient_term: float
    diagonal_term: float
    mode: str
    sample_count: int | None = None
    stderr: dict | None = None

    def __post_init__(self):
        if self.mode not in ("exact", "monte_carlo"):
            raise ValueError(f"mode must be 'exact' or 'monte_carlo', got {self.mode!r}")
        if (self.stderr is None) != (self.mode == "exact"):
            raise ValueError("stderr is present iff mode is monte_carlo")


def _check_k(k: int, n: int):
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k!r}")


def _check_mode(mode: str, seed):
    if mode not in ("exact", "monte_carlo"):
        raise ValueError(f"mode must be 'exact' or 'monte_carlo', got {mode!r}")
    if mode == "monte_carlo" and seed is None:
        raise ValueError("Monte Carlo evaluation requires an explicit seed")


def _exact_budget(f: TorusFunction):
    work = f.size * (1 << f.n)
    if work > EXACT_WORK_LIMIT:
        raise BudgetError(f"exact mode needs (2r)^n * 2^n = {work} > {EXACT_WORK_LIMIT} work units")
    if not f.is_dense:
        raise TypeError("exact mode requires dense backing")


def scale_parameter(r: int, theorem_scaling: bool) -> float:
    """``m`` multiplying the right side: ``r/4`` for the Z_{8m} normalization, else ``r``."""
    if theorem_scaling:
        if r % 4:
            raise ValueError(f"theorem_scaling needs r divisible by 4 (r = 4m), got r={r}")
        return r // 4
    return r


def _gradient_diagonal_exact(f: TorusFunction, p: float) -> tuple[float, float]:
    g = f.grid()
    grad = 0.0
    for a in range(f.n):
        grad += float(np.mean(np.abs(np.roll(g, -1, axis=a) - g) ** p))
    diag = 0.0
    for b in range(1 << f.n):
        eps = [1 - 2 * (b >> a & 1) for a in range(f.n)]
        diag += float(np.mean(np.abs(_shift(g, eps) - g) ** p))
    return grad, diag / (1 << f.n)


def _long_exact(f: TorusFunction, p: float, k: int, smoothed: bool) -> float:
    g = f.grid()
    total, count = 0.0, 0
    for S in k_subsets(f.n, k):
        base = t_s_average(f, full_mask(f.n) ^ S).grid() if smoothed else g
        # r * eps_j == -r * eps_j mod 2r, so every sign pattern gives the same shift
        shifted = _shift(base, [f.r if S >> a & 1 else 0 for a in range(f.n)])
        total += float(np.mean(np.abs(shifted - base) ** p))
        count += 1
    return total / count


def _random_k_subsets(rng: np.random.Generator, size: int, n: int, k: int) -> np.ndarray:
    """Boolean (size, n) indicator rows of uniformly random k-subsets."""
    keys = rng.random((size, n))
    order = np.argsort(keys, axis=1)[:, :k]
    ind = np.zeros((size, n), dtype=bool)
    np.put_along_axis(ind, order, True, axis=1)
    return ind


def _smoothed_at(f: TorusFunction, pts: np.ndarray, comp: np.ndarray) -> np.ndarray:
    """``T_{comp} f`` at each row of ``pts``; ``comp`` is a boolean coordinate mask per row."""
    size, n = pts.shape
    acc = np.zeros(size)
    # averaging over all 2^n sign vectors; coordinates outside comp do not move
    for b in range(1 << n):
        signs = 1 - 2 * ((b >> np.arange(n)) & 1)
        acc += f(pts + 2 * signs * comp)
    return acc / (1 << n)


def _mc_block(f: TorusFunction, p: float, k: int, size: int, rng: np.random.Generator, smoothed: bool):
    n, P = f.n, f.period
    x = rng.integers(0, P, size=(size, n))
    S = _random_k_subsets(rng, size, n, k)
    eps = 1 - 2 * rng.integers(0, 2, size=(size, n))
    j = rng.integers(0, n, size=size)
    shift = f.r * eps * S
    if smoothed:
        comp = ~S
        long_vals = np.abs(_smoothed_at(f, x + shift, comp) - _smoothed_at(f, x, comp)) ** p
    else:
        long_vals = np.abs(f(x + shift) - f(x)) ** p
    fx = f(x)
    step = np.zeros((size, n), dtype=np.int64)
    step[np.arange(size), j] = 1
    # n * |f(x + e_J) - f(x)|^p with J uniform is unbiased for sum_j
    grad_vals = n * np.abs(f(x + step) - fx) ** p
    diag_vals = np.abs(f(x + eps) - fx) ** p
    return long_vals, grad_vals, diag_vals


def _monte_carlo(f: TorusFunction, p: float, k: int, budget: int, seed: int, smoothed: bool):
    if not isinstance(budget, (int, np.integer)) or budget < 2:
        raise ValueError(f"Monte Carlo budget must be an integer >= 2, got {budget!r}")
    blocks = -(-budget // MC_BLOCK)
    streams = np.random.SeedSequence(seed).spawn(blocks)
    sums = np.zeros(3)
    sumsq = np.zeros(3)
    # one RNG stream per block, reduced in block order: scheduling cannot change the result
    for i, ss in enumerate(streams):
        size = min(MC_BLOCK, budget - i * MC_BLOCK)
        vals = np.vstack(_mc_block(f, p, k, size, np.random.default_rng(ss), smoothed))
        sums += vals.sum(axis=1)
        sumsq += (vals * vals).sum(axis=1)
    mean = sums / budget
    var = np.maximum(sumsq / budget - mean * mean, 0.0) * budget / (budget - 1)
    err = np.sqrt(var / budget)
    return mean, err


def difference_stats(
    f: TorusFunction,
    p: float,
    k: int,
    mode: str = "exact",
    budget: int | None = None,
    seed: int | None = None,
) -> DifferenceStats:
    """The three expectations entering the metric X_p inequality.

    ``long_term`` averages ``|f(x + r eps_S) - f(x)|^p`` over uniform k-subsets
    ``S``, points ``x`` and signs; ``gradient_term`` is
    ``sum_j E|f(x + e_j) - f(x)|^p``; ``diagonal_term`` is ``E|f(x + eps) - f(x)|^p``.
    """
    _check_k(k, f.n)
    _check_mode(mode, seed)
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if mode == "exact":
        _exact_budget(f)
        grad, diag = _gradient_diagonal_exact(f, p)
        return DifferenceStats(p, _long_exact(f, p, k, False), grad, diag, "exact")
    mean, err = _monte_carlo(f, p, k, budget or 100_000, seed, smoothed=False)
    return DifferenceStats(
        p, *map(float, mean), "monte_carlo", budget or 100_000,
        {"long_term": float(err[0]), "gradient_term": float(err[1]), "diagonal_term": float(err[2])},
    )


def smoothed_difference_stats(
    f: TorusFunction,
    p: float,
    k: int,
    mode: str = "exact",
    budget: int | None = None,
    seed: int | None = None,
    theorem_scaling: bool = True,
) -> DifferenceStats:
    """As :func:`difference_stats`, with ``T_{[n] minus S} f`` in the long term, divided by ``m**p``."""
    if not f.is_dense:
        raise TypeError("smoothed_difference_stats requires dense backing")
    m = scale_parameter(f.r, theorem_scaling)
    _check_k(k, f.n)
    _check_mode(mode, seed)
    if mode == "exact":
        _exact_budget(f)
        grad, diag = _gradient_diagonal_exact(f, p)
        return DifferenceStats(p, _long_exact(f, p, k, True) / m ** p, grad, diag, "exact")
    budget = budget or 100_000
    mean, err = _monte_carlo(f, p, k, budget, seed, smoothed=True)
    return DifferenceStats(
        p, float(mean[0]) / m ** p, float(mean[1]), float(mean[2]), "monte_carlo", budget,
        {"long_term": float(err[0]) / m ** p, "gradient_term": float(err[1]), "diagonal_term": float(err[2])},
    )


def diagonal_moment(f: TorusFunction, p: float) -> float:
    """``E_{x, eps} |f(x + eps) - f(x)|^p`` (exact)."""
    _exact_budget(f)
    return _gradient_diagonal_exact(f, p)[1]
