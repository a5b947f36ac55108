"""Outward-rounded interval scalars, vectors and matrices.

Every operation returns an enclosure of the exact real result; endpoints are
directed-rounded via :mod:`certiprop.roundops`.  Values are immutable and all
operations are pure, so instances can be shared freely across threads.

NaN and infinite endpoints are rejected at construction: a certification
result must never silently degrade into an unbounded or undefined set.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from . import roundops as rp
from .errors import NumericError, ValidationError

__all__ = [
    "Interval", "IntervalVector", "IntervalMatrix",
    "iv_add", "iv_mul", "iv_matvec", "hull", "mid", "rad",
]


def _check_finite(arr) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError("non-finite interval endpoint")


class Interval:
    """Closed real interval [lo, hi] with lo <= hi."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: float, hi: float | None = None):
        if hi is None:
            hi = lo
        lo = float(lo)
        hi = float(hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise NumericError("non-finite interval endpoint")
        if lo > hi:
            raise ValidationError(f"inverted interval endpoints: [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, *a):
        raise AttributeError("Interval is immutable")

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"

    def __eq__(self, other):
        return isinstance(other, Interval) and self.lo == other.lo and self.hi == other.hi

    def __hash__(self):
        return hash((self.lo, self.hi))

    # -- set queries ------------------------------------------------------

    def width(self) -> float:
        return float(rp.sub_ru(self.hi, self.lo))

    def mag(self) -> float:
        """sup |x| over the interval."""
        return max(abs(self.lo), abs(self.hi))

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def is_subset(self, other: "Interval") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def intersect(self, other: "Interval") -> "Interval":
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            raise ValidationError("empty intersection")
        return Interval(lo, hi)

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        other = _as_interval(other)
        return Interval(rp.s_add_rd(self.lo, other.lo),
                        rp.s_add_ru(self.hi, other.hi))

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-_as_interval(other))

    def __rsub__(self, other):
        return _as_interval(other) + (-self)

    def __mul__(self, other):
        other = _as_interval(other)
        lo, hi = rp.s_mul_bracket4(self.lo, self.hi, other.lo, other.hi)
        return Interval(lo, hi)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_interval(other)
        if other.lo <= 0.0 <= other.hi:
            raise NumericError("interval division by an interval containing zero")
        cands = []
        for x in (self.lo, self.hi):
            for y in (other.lo, other.hi):
                cands.append(rp.div_bounds(x, y))
        return Interval(min(c[0] for c in cands), max(c[1] for c in cands))

    def __rtruediv__(self, other):
        return _as_interval(other) / self

    def exp(self) -> "Interval":
        lo, _ = rp.exp_bounds(self.lo)
        _, hi = rp.exp_bounds(self.hi)
        return Interval(lo, hi)

    def relu(self) -> "Interval":
        return Interval(max(self.lo, 0.0), max(self.hi, 0.0))


def _as_interval(x) -> Interval:
    if isinstance(x, Interval):
        return x
    return Interval(float(x))


class IntervalVector:
    """Vector of intervals stored as paired lo/hi float64 arrays."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=np.float64)).copy()
        hi = np.atleast_1d(np.asarray(hi, dtype=np.float64)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValidationError("IntervalVector needs matching 1-d endpoint arrays")
        _check_finite(lo)
        _check_finite(hi)
        if np.any(lo > hi):
            raise ValidationError("inverted interval endpoints in vector")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, *a):
        raise AttributeError("IntervalVector is immutable")

    @classmethod
    def from_intervals(cls, items: Iterable[Interval]) -> "IntervalVector":
        items = list(items)
        return cls([iv.lo for iv in items], [iv.hi for iv in items])

    @classmethod
    def from_points(cls, x) -> "IntervalVector":
        x = np.asarray(x, dtype=np.float64)
        return cls(x, x)

    @classmethod
    def from_center_radius(cls, center, radius) -> "IntervalVector":
        center = np.asarray(center, dtype=np.float64)
        radius = np.asarray(radius, dtype=np.float64)
        if np.any(radius < 0):
            raise ValidationError("negative radius")
        return cls(rp.sub_rd(center, radius), rp.add_ru(center, radius))

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def __len__(self):
        return self.dim

    def __getitem__(self, i) -> Interval:
        return Interval(float(self.lo[i]), float(self.hi[i]))

    def __repr__(self):
        return f"IntervalVector(lo={self.lo!r}, hi={self.hi!r})"

    def widths(self) -> np.ndarray:
        return np.asarray(rp.sub_ru(self.hi, self.lo))

    def max_width(self) -> float:
        return float(self.widths().max()) if self.dim else 0.0

    def mid(self) -> np.ndarray:
        m = self.lo + 0.5 * (self.hi - self.lo)
        # keep the midpoint inside the interval despite rounding
        return np.clip(m, self.lo, self.hi)

    def rad(self) -> np.ndarray:
        """Upper bound r with [mid - r, mid + r] containing the vector."""
        m = self.mid()
        return np.maximum(rp.sub_ru(m, self.lo), rp.sub_ru(self.hi, m))

    def mag(self) -> np.ndarray:
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def contains_point(self, x) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(self.lo <= x) and np.all(x <= self.hi))

    def is_subset(self, other: "IntervalVector") -> bool:
        return bool(np.all(other.lo <= self.lo) and np.all(self.hi <= other.hi))

    def intersect_box(self, lo: float, hi: float) -> "IntervalVector":
        return IntervalVector(np.clip(self.lo, lo, hi), np.clip(self.hi, lo, hi))

    def __add__(self, other: "IntervalVector") -> "IntervalVector":
        if self.dim != other.dim:
            raise ValidationError("dimension mismatch in interval add")
        lo, hi = rp.i_add(self.lo, self.hi, other.lo, other.hi)
        return IntervalVector(lo, hi)


class IntervalMatrix:
    """Rectangular row-major grid of intervals (paired lo/hi arrays)."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        lo = np.asarray(lo, dtype=np.float64).copy()
        hi = np.asarray(hi, dtype=np.float64).copy()
        if lo.shape != hi.shape or lo.ndim != 2:
            raise ValidationError("IntervalMatrix needs matching 2-d endpoint arrays")
        _check_finite(lo)
        _check_finite(hi)
        if np.any(lo > hi):
            raise ValidationError("inverted interval endpoints in matrix")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, *a):
        raise AttributeError("IntervalMatrix is immutable")

    @classmethod
    def from_point(cls, A) -> "IntervalMatrix":
        A = np.asarray(A, dtype=np.float64)
        return cls(A, A)

    @classmethod
    def enclosing_product(cls, A, B) -> "IntervalMatrix":
        """Rigorous enclosure of the exact product of two point matrices."""
        lo, hi = rp.i_matmul_point(A, B)
        return cls(lo, hi)

    @property
    def rows(self) -> int:
        return self.lo.shape[0]

    @property
    def cols(self) -> int:
        return self.lo.shape[1]

    def __getitem__(self, idx) -> Interval:
        return Interval(float(self.lo[idx]), float(self.hi[idx]))

    def contains_matrix(self, A) -> bool:
        A = np.asarray(A, dtype=np.float64)
        return bool(np.all(self.lo <= A) and np.all(A <= self.hi))

    def matmul(self, other: "IntervalMatrix") -> "IntervalMatrix":
        if self.cols != other.rows:
            raise ValidationError("dimension mismatch in interval matmul")
        lo, hi = rp.i_matmul(self.lo, self.hi, other.lo, other.hi)
        return IntervalMatrix(lo, hi)

    def matvec(self, v: IntervalVector) -> IntervalVector:
        if self.cols != v.dim:
            raise ValidationError("dimension mismatch in interval matvec")
        lo, hi = rp.i_matvec(self.lo, self.hi, v.lo, v.hi)
        return IntervalVector(lo, hi)


# ---------------------------------------------------------------------------
# spec-level operations
# ---------------------------------------------------------------------------

def iv_add(a: Interval, b: Interval) -> Interval:
    return a + b


def iv_mul(a: Interval, b: Interval) -> Interval:
    return a * b


def iv_matvec(A: IntervalMatrix, v: IntervalVector) -> IntervalVector:
    return A.matvec(v)


def hull(a: IntervalVector, b: IntervalVector) -> IntervalVector:
    """Componentwise smallest box containing both vectors."""
    if a.dim != b.dim:
        raise ValidationError("dimension mismatch in hull")
    return IntervalVector(np.minimum(a.lo, b.lo), np.maximum(a.hi, b.hi))


def mid(a: Interval) -> float:
    m = a.lo + 0.5 * (a.hi - a.lo)
    return float(min(max(m, a.lo), a.hi))


def rad(a: Interval) -> float:
    """Radius rounded up so that [mid - rad, mid + rad] contains a."""
    m = mid(a)
    return float(max(rp.sub_ru(m, a.lo), rp.sub_ru(a.hi, m)))


def point_matvec_enclosure(W, v: IntervalVector) -> IntervalVector:
    """Tight enclosure of W @ v for a point matrix W."""
    W = np.asarray(W, dtype=np.float64)
    if W.shape[1] != v.dim:
        raise ValidationError("dimension mismatch in matvec")
    lo, hi = rp.i_matvec_point(W, v.lo, v.hi)
    return IntervalVector(lo, hi)


def hull_many(vectors: Sequence[IntervalVector]) -> IntervalVector:
    out = vectors[0]
    for v in vectors[1:]:
        out = hull(out, v)
    return out
