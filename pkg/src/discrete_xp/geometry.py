"""Closed-form embedding consequences: grid distortion, phase transition, snowflakes.

Implicit constants (the ``≍_{p,q}`` factors) are dropped; every function
returns the structural quantity with constant 1.  Exponents are exact
:class:`fractions.Fraction` values when ``p`` and ``q`` are given as ints or
Fractions.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class EmbeddingParams:
    p: float
    q: float
    m: int = 1
    n: int = 1
    theta: float | None = None

    def __post_init__(self):
        _check_pq(self.p, self.q, strict_q=False)
        if not isinstance(self.m, (int, np.integer)) or self.m < 1:
            raise ValueError(f"grid size m must be a positive integer, got {self.m!r}")
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError(f"dimension n must be a positive integer, got {self.n!r}")
        if self.theta is not None and not 0 < self.theta <= 1:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")


def _check_pq(p, q, strict_q: bool):
    if not p > 2:
        raise ValueError(f"p must exceed 2, got {p}")
    if strict_q and not 2 < q < p:
        raise ValueError(f"need 2 < q < p, got q={q}, p={p}")
    if not strict_q and not 2 <= q < p:
        raise ValueError(f"need 2 <= q < p, got q={q}, p={p}")


def _exact(x):
    return Fraction(x) if isinstance(x, (int, Fraction)) else float(x)


def n_exponent(p, q):
    """``(p-q)(q-2) / (q^2 (p-2))``."""
    p, q = _exact(p), _exact(q)
    return (p - q) * (q - 2) / (q * q * (p - 2))


def m_exponent(p, q):
    """``1 - 2/q``."""
    q = _exact(q)
    return 1 - 2 / q


def threshold_exponent(p, q):
    """``(p-q) / (q (p-2))``."""
    p, q = _exact(p), _exact(q)
    return (p - q) / (q * (p - 2))


def grid_distortion_value(params: EmbeddingParams) -> float:
    p, q = params.p, params.q
    return min(params.n ** float(n_exponent(p, q)), params.m ** float(m_exponent(p, q)))


def phase_transition_threshold(p, q, n: int) -> float:
    _check_pq(p, q, strict_q=True)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return n ** float(threshold_exponent(p, q))


def critical_snowflake_exponent(p, q):
    _check_pq(p, q, strict_q=True)
    return _exact(q) / _exact(p)


def _grid_terms(p: float, q: float, n: int, k: np.ndarray) -> np.ndarray:
    return k ** (1 / q) / (k + k ** (p / 2) * float(n) ** (p / q - p / 2)) ** (1 / p)


def grid_lower_bound(params: EmbeddingParams, k_min: int | None = None) -> tuple[float, int]:
    """Maximize ``k^{1/q} / (k + k^{p/2} n^{p/q - p/2})^{1/p}`` over integers ``k`` in ``[ceil(n/16m^2), n]``.

    ``k_min`` overrides the lower end of the range (``k_min=1`` is the
    unconstrained-``m`` surrogate).  Ties go to the smallest ``k``.
    """
    p, q, m, n = float(params.p), float(params.q), params.m, params.n
    lo = max(1, -(-n // (16 * m * m))) if k_min is None else max(1, int(k_min))
    if lo > n:
        raise ValueError("empty k range")
    k = np.arange(lo, n + 1, dtype=np.float64)
    vals = _grid_terms(p, q, n, k)
    i = int(np.argmax(vals))
    return float(vals[i]), lo + i


@dataclass(frozen=True)
class SnowflakeBound:
    """``value`` is the lower bound on the Lipschitz constant, the reciprocal of ``product``."""

    value: float
    k: int
    product: float


def snowflake_bound(p, q, theta: float, n: int) -> SnowflakeBound:
    """Bound on ``L`` for a bi-theta-Hoelder embedding, from the minimizing ``k`` in ``[n]``.

    ``product = n^{(1-theta)/2} min_k (k + k^{p/2} n^{p(theta/q - 1/2)})^{1/p} k^{theta(1/2-1/q) - 1/2}``
    satisfies ``1 ≲ L * product``, so ``value = 1 / product`` grows without bound
    in ``n`` exactly when ``theta > q/p``.
    """
    _check_pq(p, q, strict_q=True)
    if not 0 < theta <= 1:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    p, q = float(p), float(q)
    k = np.arange(1, n + 1, dtype=np.float64)
    inner = (k + k ** (p / 2) * float(n) ** (p * (theta / q - 0.5))) ** (1 / p)
    vals = inner * k ** (theta * (0.5 - 1 / q) - 0.5)
    i = int(np.argmin(vals))
    product = float(n) ** ((1 - theta) / 2) * float(vals[i])
    return SnowflakeBound(1.0 / product, i + 1, product)


GEOMETRY_COLUMNS = (
    "p", "q", "m", "n", "theta",
    "n_exponent", "m_exponent", "threshold_exponent",
    "distortion", "phase_threshold", "grid_lower_bound", "grid_k",
    "critical_theta", "snowflake_bound", "snowflake_k",
)


def geometry_row(p, q, m: int, n: int, theta: float | None = None) -> dict:
    """One CSV row of every calculator at a grid point; inapplicable cells are None."""
    params = EmbeddingParams(p, q, m, n, theta)
    row = dict.fromkeys(GEOMETRY_COLUMNS)
    lb, kstar = grid_lower_bound(params)
    row.update({
        "p": p, "q": q, "m": m, "n": n, "theta": theta,
        "n_exponent": float(n_exponent(p, q)),
        "m_exponent": float(m_exponent(p, q)),
        "distortion": grid_distortion_value(params),
        "grid_lower_bound": lb,
        "grid_k": kstar,
    })
    if q > 2:
        row["threshold_exponent"] = float(threshold_exponent(p, q))
        row["phase_threshold"] = phase_transition_threshold(p, q, n)
        row["critical_theta"] = float(critical_snowflake_exponent(p, q))
        if theta is not None:
            sb = snowflake_bound(p, q, theta, n)
            row.update({"snowflake_bound": sb.value, "snowflake_k": sb.k})
    return row
