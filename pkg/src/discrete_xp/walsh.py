"""Fourier-Walsh calculus on the discrete hypercube {-1,1}^n.

Points and frequencies share one bitmask encoding: bit ``j-1`` of a point
index is set iff ``eps_j = -1``, and bit ``j-1`` of a frequency index is set
iff ``j`` belongs to the subset ``A``.  With this convention the Walsh
character is ``W_A(b) = (-1)**popcount(A & b)`` and the transform is the
plain (unnormalized) Hadamard butterfly.

Normalization: ``hat_h(A) = 2**-n * sum_eps h(eps) W_A(eps)`` and
``h = sum_A hat_h(A) W_A``.  All norms use the normalized counting measure.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

MAX_N = 24
DIRECT_MAX_N = 10
MEAN_ZERO_TOL = 1e-12


class DimensionError(ValueError):
    pass


class MeanZeroError(ValueError):
    """Raised when an operation requires a mean-zero function."""


def _check_n(n: int) -> int:
    if not isinstance(n, (int, np.integer)) or n < 1 or n > MAX_N:
        raise DimensionError(f"dimension n must be an integer in [1, {MAX_N}], got {n!r}")
    return int(n)


def _as_vector(data, n: int, what: str) -> np.ndarray:
    arr = np.array(data, dtype=np.float64).reshape(-1)
    if arr.size != 1 << n:
        raise ValueError(f"{what} must have 2**n = {1 << n} entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains NaN or Inf")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CubeFunction:
    """Real function on {-1,1}^n stored pointwise in bitmask order."""

    n: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "n", _check_n(self.n))
        object.__setattr__(self, "values", _as_vector(self.values, self.n, "values"))

    def __len__(self):
        return self.values.size

    def __add__(self, other: CubeFunction) -> CubeFunction:
        _same_n(self, other)
        return CubeFunction(self.n, self.values + other.values)

    def __sub__(self, other: CubeFunction) -> CubeFunction:
        _same_n(self, other)
        return CubeFunction(self.n, self.values - other.values)

    def __mul__(self, c: float) -> CubeFunction:
        return CubeFunction(self.n, self.values * float(c))

    __rmul__ = __mul__

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "repr": "point", "data": self.values.tolist()})


@dataclass(frozen=True)
class WalshSpectrum:
    """Walsh coefficients ``hat_h(A)`` indexed by subset bitmask."""

    n: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "n", _check_n(self.n))
        object.__setattr__(self, "coeffs", _as_vector(self.coeffs, self.n, "coeffs"))

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "repr": "walsh", "data": self.coeffs.tolist()})


def _same_n(a, b):
    if a.n != b.n:
        raise DimensionError(f"dimension mismatch: {a.n} vs {b.n}")


def from_json(text: str) -> CubeFunction | WalshSpectrum:
    obj = json.loads(text)
    try:
        n, kind, data = obj["n"], obj["repr"], obj["data"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed cube JSON: {exc}") from None
    if kind == "point":
        return CubeFunction(n, data)
    if kind == "walsh":
        return WalshSpectrum(n, data)
    raise ValueError(f"unknown repr {kind!r}; expected 'point' or 'walsh'")


# ---------------------------------------------------------------------------
# bit helpers

@lru_cache(maxsize=None)
def popcounts(n: int) -> np.ndarray:
    """``|A|`` for every bitmask ``A`` in ``range(2**n)``."""
    counts = np.zeros(1, dtype=np.int64)
    for _ in range(n):
        counts = np.concatenate([counts, counts + 1])
    counts.setflags(write=False)
    return counts


def subset_mask(S, n: int) -> int:
    """Bitmask of a subset given as an int mask or an iterable of 1-based coordinates."""
    if isinstance(S, (int, np.integer)):
        mask = int(S)
    else:
        mask = 0
        for j in S:
            if not 1 <= j <= n:
                raise ValueError(f"coordinate {j} outside 1..{n}")
            mask |= 1 << (j - 1)
    if mask < 0 or mask >= 1 << n:
        raise ValueError(f"subset mask {mask} outside [0, 2**{n})")
    return mask


def full_mask(n: int) -> int:
    return (1 << n) - 1


def _check_coordinate(j: int, n: int) -> int:
    if not isinstance(j, (int, np.integer)) or not 1 <= j <= n:
        raise ValueError(f"coordinate j must be in 1..{n}, got {j!r}")
    return int(j)


def sign_vectors(n: int) -> np.ndarray:
    """(2**n, n) array of sign vectors in bitmask order."""
    b = np.arange(1 << n)[:, None]
    return 1 - 2 * ((b >> np.arange(n)) & 1)


def walsh_character(n: int, A) -> CubeFunction:
    A = subset_mask(A, n)
    b = np.arange(1 << n)
    return CubeFunction(n, 1.0 - 2.0 * (popcounts(n)[b & A] & 1))


# ---------------------------------------------------------------------------
# transforms

def fwht(x: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard butterfly, O(N log N); returns a new array."""
    y = np.array(x, dtype=np.float64)
    N = y.size
    h = 1
    while h < N:
        y = y.reshape(-1, 2, h)
        a = y[:, 0, :].copy()
        y[:, 0, :] += y[:, 1, :]
        y[:, 1, :] = a - y[:, 1, :]
        h *= 2
    return y.reshape(N)


def walsh_transform(h: CubeFunction) -> WalshSpectrum:
    return WalshSpectrum(h.n, fwht(h.values) / (1 << h.n))


def inverse_walsh_transform(spec: WalshSpectrum) -> CubeFunction:
    return CubeFunction(spec.n, fwht(spec.coeffs))


def walsh_transform_direct(h: CubeFunction) -> WalshSpectrum:
    """O(4^n) direct summation; independent check on the butterfly."""
    if h.n > DIRECT_MAX_N:
        raise DimensionError(f"direct transform limited to n <= {DIRECT_MAX_N}")
    N = 1 << h.n
    idx = np.arange(N)
    chars = 1.0 - 2.0 * (popcounts(h.n)[idx[:, None] & idx[None, :]] & 1)
    return WalshSpectrum(h.n, chars @ h.values / N)


# ---------------------------------------------------------------------------
# norms and pointwise operators

def p_norm(h: CubeFunction | np.ndarray, p: float) -> float:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    v = h.values if isinstance(h, CubeFunction) else np.asarray(h)
    a = np.abs(v)
    if p == 2:
        return float(math.sqrt(np.mean(a * a)))
    top = a.max()
    if top == 0:
        return 0.0
    # rescale to avoid overflow for large p
    return float(top * np.mean((a / top) ** p) ** (1.0 / p))


def partial_derivative(h: CubeFunction, j: int) -> CubeFunction:
    """Undivided difference ``h(eps) - h(eps with eps_j flipped)``."""
    j = _check_coordinate(j, h.n)
    idx = np.arange(1 << h.n)
    return CubeFunction(h.n, h.values - h.values[idx ^ (1 << (j - 1))])


def average_over(h: CubeFunction, S) -> CubeFunction:
    """Average out the coordinates in ``S``; the result ignores them."""
    S = subset_mask(S, h.n)
    v = h.values.copy()
    idx = np.arange(1 << h.n)
    for j in range(h.n):
        if S >> j & 1:
            v = 0.5 * (v + v[idx ^ (1 << j)])
    return CubeFunction(h.n, v)


def require_mean_zero(h: CubeFunction, tol: float = MEAN_ZERO_TOL) -> None:
    scale = max(1.0, float(np.max(np.abs(h.values))))
    if abs(h.mean) > tol * scale:
        raise MeanZeroError(f"function must be mean-zero (mean = {h.mean:.3e})")


# ---------------------------------------------------------------------------
# multipliers

FAMILIES = (
    "rademacher_projection",
    "fractional_laplacian",
    "heat",
    "riesz",
    "average",
    "identity_minus_rad0",
)


@dataclass(frozen=True)
class Multiplier:
    """Diagonal operator in the Walsh basis.

    ``params`` per family: rademacher_projection ``k``; fractional_laplacian
    ``S`` (mask) and ``alpha``; heat ``s``; riesz ``j``; average ``S``;
    identity_minus_rad0 none.
    """

    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown multiplier family {self.family!r}")

    @classmethod
    def rademacher_projection(cls, k: int):
        return cls("rademacher_projection", {"k": k})

    @classmethod
    def fractional_laplacian(cls, S, alpha: float):
        return cls("fractional_laplacian", {"S": S, "alpha": float(alpha)})

    @classmethod
    def heat(cls, s: float):
        return cls("heat", {"s": float(s)})

    @classmethod
    def riesz(cls, j: int):
        return cls("riesz", {"j": j})

    @classmethod
    def average(cls, S):
        return cls("average", {"S": S})

    @classmethod
    def identity_minus_rad0(cls):
        return cls("identity_minus_rad0", {})

    def weights(self, n: int) -> np.ndarray:
        return multiplier_weights(self, n)


def fractional_laplacian_weights(n: int, S: int, alpha: float) -> np.ndarray:
    """``|A cap S|**alpha`` on frequencies meeting ``S``, zero elsewhere."""
    counts = popcounts(n)[np.arange(1 << n) & S].astype(np.float64)
    w = np.zeros(1 << n)
    hit = counts > 0
    w[hit] = counts[hit] ** alpha
    return w


def multiplier_weights(M: Multiplier, n: int) -> np.ndarray:
    n = _check_n(n)
    pc = popcounts(n)
    fam, prm = M.family, M.params
    if fam == "rademacher_projection":
        k = prm["k"]
        if not 0 <= k <= n:
            raise ValueError(f"Rad_k needs 0 <= k <= n, got k={k}")
        return (pc == k).astype(np.float64)
    if fam == "fractional_laplacian":
        return fractional_laplacian_weights(n, subset_mask(prm["S"], n), prm["alpha"])
    if fam == "heat":
        s = prm["s"]
        if s < 0:
            raise ValueError(f"heat time must be >= 0, got {s}")
        return np.exp(-s * pc)
    if fam == "riesz":
        j = _check_coordinate(prm["j"], n)
        contains = (np.arange(1 << n) >> (j - 1)) & 1
        w = np.zeros(1 << n)
        w[contains == 1] = 1.0 / np.sqrt(pc[contains == 1])
        return w
    if fam == "average":
        S = subset_mask(prm["S"], n)
        return ((np.arange(1 << n) & S) == 0).astype(np.float64)
    # identity_minus_rad0
    w = np.ones(1 << n)
    w[0] = 0.0
    return w


def apply_multiplier(spec: WalshSpectrum, M: Multiplier) -> WalshSpectrum:
    return WalshSpectrum(spec.n, spec.coeffs * multiplier_weights(M, spec.n))


def apply_to_function(h: CubeFunction, *multipliers: Multiplier) -> CubeFunction:
    """Apply multipliers right-to-left (last one acts first) to a point-valued function."""
    spec = walsh_transform(h)
    for M in reversed(multipliers):
        spec = apply_multiplier(spec, M)
    return inverse_walsh_transform(spec)


def riesz_transform(h: CubeFunction, j: int) -> CubeFunction:
    return apply_to_function(h, Multiplier.riesz(j))


def riesz_square_function(h: CubeFunction) -> CubeFunction:
    """Pointwise ``sqrt(sum_j (R_j h)**2)`` for mean-zero ``h``."""
    spec = walsh_transform(h)
    if abs(spec.coeffs[0]) > MEAN_ZERO_TOL * max(1.0, float(np.max(np.abs(h.values)))):
        raise MeanZeroError(f"square function needs mean-zero input (mean = {spec.coeffs[0]:.3e})")
    total = np.zeros(1 << h.n)
    for j in range(1, h.n + 1):
        rj = fwht(spec.coeffs * multiplier_weights(Multiplier.riesz(j), h.n))
        total += rj * rj
    return CubeFunction(h.n, np.sqrt(total))


# ---------------------------------------------------------------------------
# heat-semigroup quadrature for negative Laplacian powers

HEAT_CUTOFF = 53 * math.log(2.0)


@dataclass(frozen=True)
class Quadrature:
    """Composite Gauss-Legendre rule on ``[0, T]``.

    For non-integer ``alpha`` integration runs in ``t = s**frac(alpha)`` so
    the weight ``s**(alpha-1)`` becomes smooth; integer ``alpha`` runs in ``s``.
    Panels are graded geometrically towards 0.
    """

    nodes: int = 512
    cutoff: float = HEAT_CUTOFF
    points_per_panel: int = 16
    tol: float = 1e-10

    def __post_init__(self):
        if self.nodes < 2 * self.points_per_panel or self.nodes % self.points_per_panel:
            raise ValueError("nodes must be a multiple of points_per_panel and hold >= 2 panels")
        if self.cutoff <= 0:
            raise ValueError("cutoff must be positive")


class QuadratureError(RuntimeError):
    pass


def _graded_rule(tmax: float, panels: int, per_panel: int):
    x, w = np.polynomial.legendre.leggauss(per_panel)
    # half the panels uniform on [tmax/u, tmax]; the first uniform cell is split geometrically towards 0
    u = panels // 2
    first = tmax / u
    geometric = first * 0.5 ** np.arange(panels - u - 1, -1, -1)
    edges = np.concatenate([[0.0], geometric, first * np.arange(2, u + 1)])
    t, wt = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        t.append(0.5 * (b - a) * x + 0.5 * (a + b))
        wt.append(0.5 * (b - a) * w)
    return np.concatenate(t), np.concatenate(wt)


def noise_operator(h: CubeFunction, rho: float) -> np.ndarray:
    """Pointwise ``e^{-s Delta} h`` with ``rho = e^{-s}``, one coordinate at a time."""
    v = h.values.copy()
    idx = np.arange(1 << h.n)
    a, b = 0.5 * (1 + rho), 0.5 * (1 - rho)
    for j in range(h.n):
        v = a * v + b * v[idx ^ (1 << j)]
    return v


def _heat_integral(h: CubeFunction, alpha: float, panels: int, per_panel: int, cutoff: float):
    frac = alpha - math.floor(alpha)
    if frac > 0:
        # s = t**(1/frac): s^(alpha-1) ds = t^(floor(alpha)/frac) dt / frac
        t, w = _graded_rule(cutoff ** frac, panels, per_panel)
        s = t ** (1.0 / frac)
        w = w * t ** (math.floor(alpha) / frac) / frac
    else:
        s, w = _graded_rule(cutoff, panels, per_panel)
        w = w * s ** (alpha - 1)
    centered = h - CubeFunction(h.n, np.full(1 << h.n, h.mean))
    acc = np.zeros(1 << h.n)
    for si, wi in zip(s, w):
        acc += wi * noise_operator(centered, math.exp(-si))
    return acc / special.gamma(alpha)


def inverse_laplacian_quadrature(h: CubeFunction, alpha: float, quad: Quadrature | None = None) -> CubeFunction:
    """``Delta^{-alpha}(I - Rad_0) h`` from the heat-semigroup integral.

    Independent of the Walsh transform: the semigroup is applied pointwise.
    Raises :class:`QuadratureError` when the self-estimated error (coarse vs
    fine rule, plus the analytic tail past the cutoff) exceeds ``quad.tol``.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    quad = quad or Quadrature()
    panels = quad.nodes // quad.points_per_panel
    fine = _heat_integral(h, alpha, panels, quad.points_per_panel, quad.cutoff)
    coarse = _heat_integral(h, alpha, panels, quad.points_per_panel // 2, quad.cutoff)
    scale = max(float(np.max(np.abs(fine))), 1e-300)
    # smallest nonzero eigenvalue is 1, so the tail is at most Gamma(alpha, T)/Gamma(alpha) * sup|h - mean|
    tail = special.gammaincc(alpha, quad.cutoff) * float(np.max(np.abs(h.values - h.mean)))
    err = float(np.max(np.abs(fine - coarse))) + tail
    if err > quad.tol * scale:
        raise QuadratureError(f"quadrature error estimate {err:.2e} exceeds tolerance {quad.tol * scale:.2e}")
    return CubeFunction(h.n, fine)


# ---------------------------------------------------------------------------
# random inputs

def random_cube_function(n: int, rng: np.random.Generator, mean_zero: bool = False) -> CubeFunction:
    v = rng.standard_normal(1 << n)
    if mean_zero:
        v -= v.mean()
    return CubeFunction(n, v)
