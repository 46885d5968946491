import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from discrete_xp import geometry as geo
from discrete_xp.geometry import EmbeddingParams


def brute_grid(p, q, n, lo):
    best, arg = -1.0, None
    for k in range(lo, n + 1):
        v = k ** (1 / q) / (k + k ** (p / 2) * n ** (p / q - p / 2)) ** (1 / p)
        if v > best:
            best, arg = v, k
    return best, arg


def brute_snowflake_product(p, q, theta, n):
    vals = [
        (k + k ** (p / 2) * n ** (p * (theta / q - 0.5))) ** (1 / p) * k ** (theta * (0.5 - 1 / q) - 0.5)
        for k in range(1, n + 1)
    ]
    i = min(range(n), key=vals.__getitem__)
    return n ** ((1 - theta) / 2) * vals[i], i + 1


class TestExponents:
    def test_four_three_exact(self):
        assert geo.n_exponent(4, 3) == Fraction(1, 18)
        assert geo.m_exponent(4, 3) == Fraction(1, 3)
        assert geo.threshold_exponent(4, 3) == Fraction(1, 6)
        assert geo.critical_snowflake_exponent(4, 3) == Fraction(3, 4)
        assert geo.critical_snowflake_exponent(6, 3) == Fraction(1, 2)
        assert float(geo.critical_snowflake_exponent(4, 3)) == 0.75

    def test_float_inputs(self):
        assert geo.n_exponent(4.0, 3.0) == pytest.approx(1 / 18, rel=1e-15)


class TestDistortion:
    def test_plug_in(self):
        v = geo.grid_distortion_value(EmbeddingParams(4, 3, m=2, n=2**18))
        assert v == pytest.approx(2 ** (1 / 3), rel=1e-15)

    def test_q_two_is_one(self):
        assert geo.grid_distortion_value(EmbeddingParams(5, 2, m=77, n=999)) == 1.0

    def test_domain(self):
        with pytest.raises(ValueError):
            EmbeddingParams(3, 3)
        with pytest.raises(ValueError):
            EmbeddingParams(2, 2)
        with pytest.raises(ValueError):
            EmbeddingParams(4, 3, m=0)
        with pytest.raises(ValueError):
            EmbeddingParams(4, 3, theta=1.5)

    @given(st.integers(1, 10**6), st.integers(1, 10**4), st.integers(1, 100), st.integers(1, 100))
    def test_monotone(self, n, m, dn, dm):
        a = geo.grid_distortion_value(EmbeddingParams(4, 3, m, n))
        assert geo.grid_distortion_value(EmbeddingParams(4, 3, m + dm, n)) >= a
        assert geo.grid_distortion_value(EmbeddingParams(4, 3, m, n + dn)) >= a

    @pytest.mark.parametrize("p,q,n", [(4, 3, 2**18), (6, 4, 2**16), (5, 3, 10**6)])
    def test_phase_transition_consistency(self, p, q, n):
        t = geo.phase_transition_threshold(p, q, n)
        n_term = n ** float(geo.n_exponent(p, q))
        above = EmbeddingParams(p, q, math.ceil(t * (1 + 1e-9)), n)
        below = EmbeddingParams(p, q, max(1, math.floor(t * (1 - 1e-9))), n)
        assert geo.grid_distortion_value(above) == pytest.approx(n_term, rel=1e-15)
        assert geo.grid_distortion_value(below) < n_term


class TestThreshold:
    def test_examples(self):
        assert geo.phase_transition_threshold(6, 4, 2**16) == pytest.approx(4.0, rel=1e-15)
        assert geo.phase_transition_threshold(4, 3, 1) == 1.0
        assert geo.phase_transition_threshold(4, 3, 2**12) == pytest.approx(4.0, rel=1e-15)
        with pytest.raises(ValueError):
            geo.phase_transition_threshold(4, 2, 10)


class TestGridLowerBound:
    def test_n_one(self):
        v, k = geo.grid_lower_bound(EmbeddingParams(4, 3, 1, 1))
        assert k == 1 and v == pytest.approx(2 ** -0.25, rel=1e-15)

    def test_frozen_enumeration(self):
        v, k = geo.grid_lower_bound(EmbeddingParams(4, 3, 729, 729))
        bv, bk = brute_grid(4.0, 3.0, 729, 1)
        assert k == bk == 41
        assert v == pytest.approx(bv, rel=1e-14)
        assert v == pytest.approx(1.2300703543127773, rel=1e-14)

    @given(st.integers(1, 3000), st.integers(1, 20))
    def test_range_inclusion(self, n, m):
        finite, _ = geo.grid_lower_bound(EmbeddingParams(4, 3, m, n))
        free, _ = geo.grid_lower_bound(EmbeddingParams(4, 3, m, n), k_min=1)
        assert free >= finite
        lo = -(-n // (16 * m * m))
        assert finite == pytest.approx(brute_grid(4.0, 3.0, n, lo)[0], rel=1e-13)


class TestSnowflake:
    def test_n_one(self):
        sb = geo.snowflake_bound(4, 3, 0.9, 1)
        assert sb.k == 1
        assert sb.product == pytest.approx(2 ** 0.25, rel=1e-15)
        assert sb.value == pytest.approx(2 ** -0.25, rel=1e-15)

    @pytest.mark.parametrize("theta", [0.75, 0.9, 1.0])
    def test_matches_enumeration(self, theta):
        for n in (2**6, 2**10):
            sb = geo.snowflake_bound(4, 3, theta, n)
            prod, k = brute_snowflake_product(4.0, 3.0, theta, n)
            assert sb.k == k and sb.product == pytest.approx(prod, rel=1e-13)

    def test_trend(self):
        ns = (2**6, 2**12, 2**18)
        one = [geo.snowflake_bound(4, 3, 1.0, n).value for n in ns]
        crit = [geo.snowflake_bound(4, 3, 0.75, n).value for n in ns]
        assert one[0] < one[1] < one[2]
        for i in range(2):
            assert crit[i + 1] / crit[i] < one[i + 1] / one[i]

    def test_domain(self):
        with pytest.raises(ValueError):
            geo.snowflake_bound(4, 3, 0.0, 8)
        with pytest.raises(ValueError):
            geo.snowflake_bound(4, 4, 0.5, 8)


class TestRow:
    def test_columns(self):
        row = geo.geometry_row(4, 3, 2, 64, 1.0)
        assert tuple(row) == geo.GEOMETRY_COLUMNS
        assert row["n_exponent"] == 1 / 18 and row["critical_theta"] == 0.75
        row = geo.geometry_row(4, 2, 2, 64)
        assert row["phase_threshold"] is None and row["snowflake_bound"] is None

    def test_bit_reproducible(self):
        assert geo.geometry_row(5, 3, 3, 500, 0.8) == geo.geometry_row(5, 3, 3, 500, 0.8)
