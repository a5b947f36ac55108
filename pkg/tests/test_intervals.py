"""Interval core: spec examples, soundness vs rationals, monotonicity."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from certiprop.errors import NumericError, ValidationError
from certiprop.intervals import (Interval, IntervalMatrix, IntervalVector,
                                 hull, iv_add, iv_matvec, iv_mul, mid, rad,
                                 point_matvec_enclosure)

vals = st.floats(min_value=-1e12, max_value=1e12, allow_nan=False)


def ivs(draw_lo, draw_hi):
    lo, hi = sorted((draw_lo, draw_hi))
    return Interval(lo, hi)


interval_st = st.builds(lambda a, b: ivs(a, b), vals, vals)


class TestConstruction:
    def test_rejects_inverted(self):
        with pytest.raises(ValidationError):
            Interval(2.0, 1.0)

    def test_rejects_nan_and_inf(self):
        with pytest.raises(NumericError):
            Interval(float("nan"), 1.0)
        with pytest.raises(NumericError):
            Interval(0.0, float("inf"))

    def test_immutable(self):
        iv = Interval(0.0, 1.0)
        with pytest.raises(AttributeError):
            iv.lo = 5.0


class TestAdd:
    def test_exact_integer_endpoints(self):
        assert iv_add(Interval(1, 2), Interval(3, 4)) == Interval(4, 6)

    def test_additive_identity(self):
        a = Interval(-1.25, 7.5)
        assert iv_add(Interval(0, 0), a) == a

    def test_decimal_enclosure(self):
        # compare against extended-precision sum of 0.1 + 0.2
        r = iv_add(Interval(0.1, 0.1), Interval(0.2, 0.2))
        exact = Fraction(0.1) + Fraction(0.2)
        assert Fraction(r.lo) <= exact <= Fraction(r.hi)
        assert r.width() <= 2 ** -50


class TestMul:
    def test_endpoint_enumeration(self):
        assert iv_mul(Interval(-1, 2), Interval(3, 4)) == Interval(-4, 8)

    def test_absorbing_zero(self):
        assert iv_mul(Interval(0, 0), Interval(-3.7, 11.1)) == Interval(0, 0)

    def test_symmetric_square(self):
        assert iv_mul(Interval(-1, 1), Interval(-1, 1)) == Interval(-1, 1)


class TestMidRad:
    def test_simple(self):
        assert mid(Interval(1, 3)) == 2.0
        assert rad(Interval(1, 3)) == 1.0

    def test_degenerate(self):
        assert mid(Interval(5.5)) == 5.5
        assert rad(Interval(5.5)) == 0.0

    def test_nonrepresentable_midpoint_still_encloses(self):
        a = Interval(0.1, 0.30000000000000004)
        m, r = mid(a), rad(a)
        assert Fraction(m) - Fraction(r) <= Fraction(a.lo)
        assert Fraction(m) + Fraction(r) >= Fraction(a.hi)

    @given(interval_st)
    def test_mid_rad_enclose(self, a):
        m, r = mid(a), rad(a)
        assert m - r <= a.lo and a.hi <= m + r


class TestHull:
    def test_disjoint(self):
        a = IntervalVector([0.0], [1.0])
        b = IntervalVector([2.0], [3.0])
        assert hull(a, b)[0] == Interval(0, 3)

    def test_idempotent(self):
        v = IntervalVector([-1.0, 2.0], [0.5, 2.5])
        h = hull(v, v)
        assert np.array_equal(h.lo, v.lo) and np.array_equal(h.hi, v.hi)

    def test_overlapping(self):
        a = IntervalVector([-1.0], [0.0])
        b = IntervalVector([0.0], [1.0])
        assert hull(a, b)[0] == Interval(-1, 1)

    def test_dim_mismatch(self):
        with pytest.raises(ValidationError):
            hull(IntervalVector([0.0], [1.0]), IntervalVector([0, 0], [1, 1]))


class TestMatvec:
    def test_identity_within_one_ulp(self):
        v = IntervalVector([-1.5, 0.25, 3.0], [1.5, 0.75, 4.0])
        A = IntervalMatrix.from_point(np.eye(3))
        r = iv_matvec(A, v)
        for i in range(3):
            assert r.lo[i] <= v.lo[i] <= np.nextafter(r.lo[i], np.inf)
            assert np.nextafter(r.hi[i], -np.inf) <= v.hi[i] <= r.hi[i]

    def test_zero_matrix(self):
        v = IntervalVector([-1.0, 2.0], [1.0, 3.0])
        r = iv_matvec(IntervalMatrix.from_point(np.zeros((2, 2))), v)
        assert np.all(r.lo == 0.0) and np.all(r.hi == 0.0)

    def test_corner_enumeration_case(self):
        # [[1,1],[1,-1]] on the unit box: corners give ([-2,2],[-2,2])
        A = IntervalMatrix.from_point(np.array([[1.0, 1.0], [1.0, -1.0]]))
        v = IntervalVector([-1.0, -1.0], [1.0, 1.0])
        r = iv_matvec(A, v)
        assert r[0] == Interval(-2, 2) and r[1] == Interval(-2, 2)

    def test_dim_mismatch(self):
        with pytest.raises(ValidationError):
            iv_matvec(IntervalMatrix.from_point(np.eye(3)),
                      IntervalVector([0.0], [1.0]))


class TestProperties:
    @given(interval_st, interval_st, interval_st, interval_st)
    def test_containment_monotonicity(self, a, b, c, d):
        big_a = Interval(min(a.lo, c.lo), max(a.hi, c.hi))
        big_b = Interval(min(b.lo, d.lo), max(b.hi, d.hi))
        assert iv_add(a, b).is_subset(iv_add(big_a, big_b))
        assert iv_mul(a, b).is_subset(iv_mul(big_a, big_b))

    @given(interval_st, interval_st, st.floats(0, 1), st.floats(0, 1))
    def test_soundness_vs_rational_oracle(self, a, b, ta, tb):
        xa = Fraction(a.lo) + Fraction(ta) * (Fraction(a.hi) - Fraction(a.lo))
        xb = Fraction(b.lo) + Fraction(tb) * (Fraction(b.hi) - Fraction(b.lo))
        s = iv_add(a, b)
        p = iv_mul(a, b)
        assert Fraction(s.lo) <= xa + xb <= Fraction(s.hi)
        assert Fraction(p.lo) <= xa * xb <= Fraction(p.hi)

    @given(interval_st, interval_st)
    def test_outward_rounding_never_shrinks(self, a, b):
        s = iv_add(a, b)
        exact_w = (Fraction(a.hi) - Fraction(a.lo)) + (Fraction(b.hi) - Fraction(b.lo))
        assert Fraction(s.hi) - Fraction(s.lo) >= exact_w

    def test_matvec_soundness_random_rational(self):
        rng = np.random.default_rng(7)
        A = rng.normal(size=(3, 3))
        v = IntervalVector(rng.normal(size=3) - 1.0, rng.normal(size=3) + 1.0)
        r = point_matvec_enclosure(A, v)
        for _ in range(30):
            x = [Fraction(float(lo)) + Fraction(float(rng.random())) *
                 (Fraction(float(hi)) - Fraction(float(lo)))
                 for lo, hi in zip(v.lo, v.hi)]
            y = [sum(Fraction(A[i, j]) * x[j] for j in range(3)) for i in range(3)]
            for i in range(3):
                assert Fraction(float(r.lo[i])) <= y[i] <= Fraction(float(r.hi[i]))


class TestDivExp:
    def test_div_by_zero_interval_rejected(self):
        with pytest.raises(NumericError):
            Interval(1.0) / Interval(-1.0, 1.0)

    def test_div_encloses(self):
        r = Interval(1.0, 2.0) / Interval(3.0, 4.0)
        assert Fraction(r.lo) <= Fraction(1, 4)
        assert Fraction(r.hi) >= Fraction(2, 3)

    def test_exp_monotone_enclosure(self):
        r = Interval(0.0, 1.0).exp()
        assert r.lo <= 1.0 <= r.hi
        assert r.lo <= np.e <= r.hi * (1 + 1e-15)
