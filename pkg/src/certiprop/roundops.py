"""Directed-rounding primitives on top of round-to-nearest IEEE-754 doubles.

Hardware rounding modes are not touched.  Instead every elementary result is
bracketed by at most one representable float on each side, using error-free
transformations to keep exact results exact:

* Knuth's branch-free 2Sum recovers the exact residual of a float addition.
* Dekker's split product recovers the exact residual of a float product
  (guarded against over/underflow; outside the guard we fall back to an
  unconditional one-ulp bracket, which is always valid for a single
  correctly-rounded operation).

On top of these come rigorous reductions (sums, dot products, matrix
products).  Small contractions bracket every elementary product and reduce
pairwise with directed rounding (exactness-preserving); large ones use
a-priori Higham-style error bounds gamma_n = n*u/(1-n*u).

All array functions accept and return float64 ndarrays (scalars work via
0-d arrays).  Intervals are represented as (lo, hi) array pairs.
"""

from __future__ import annotations

from fractions import Fraction
import math

import numpy as np

from .errors import NumericError

UNIT = 2.0 ** -53
_SPLITTER = 134217729.0  # 2**27 + 1, Veltkamp splitting constant
_TINY = 1e-290           # below this magnitude Dekker residuals may be corrupted
_BIG = 2.0 ** 996        # above this the splitter overflows

_INF = np.inf


def nudge_up(x):
    return np.nextafter(x, _INF)


def nudge_down(x):
    return np.nextafter(x, -_INF)


def two_sum(a, b):
    """Exact residual of float addition: a + b == s + e exactly."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        s = a + b
        ap = s - b
        bp = s - ap
        e = (a - ap) + (b - bp)
    return s, e


def two_prod(a, b):
    """Dekker product: a * b == p + e exactly where ok, else e is unusable.

    Returns (p, e, ok).  Where ok is False the caller must fall back to the
    unconditional one-ulp bracket around p.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    p = a * b
    with np.errstate(over="ignore", invalid="ignore"):
        ca = _SPLITTER * a
        ah = ca - (ca - a)
        al = a - ah
        cb = _SPLITTER * b
        bh = cb - (cb - b)
        bl = b - bh
        e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    ok = ((np.abs(p) >= _TINY) | (a == 0.0) | (b == 0.0)) \
        & (np.abs(a) < _BIG) & (np.abs(b) < _BIG) & np.isfinite(e)
    return p, e, ok


def add_rd(a, b):
    """Largest float <= the exact a + b."""
    s, e = two_sum(a, b)
    return np.where(e < 0.0, nudge_down(s), s)


def add_ru(a, b):
    """Smallest float >= the exact a + b."""
    s, e = two_sum(a, b)
    return np.where(e > 0.0, nudge_up(s), s)


def sub_rd(a, b):
    return add_rd(a, np.negative(b))


def sub_ru(a, b):
    return add_ru(a, np.negative(b))


def mul_rd(a, b):
    p, e, ok = two_prod(a, b)
    return np.where(ok & (e >= 0.0), p, nudge_down(p))


def mul_ru(a, b):
    p, e, ok = two_prod(a, b)
    return np.where(ok & (e <= 0.0), p, nudge_up(p))


# -- scalar fast paths (pure Python floats, no ndarray wrapping) -----------

def s_add_rd(a: float, b: float) -> float:
    s = a + b
    ap = s - b
    e = (a - ap) + (b - (s - ap))
    return math.nextafter(s, -math.inf) if e < 0.0 else s


def s_add_ru(a: float, b: float) -> float:
    s = a + b
    ap = s - b
    e = (a - ap) + (b - (s - ap))
    return math.nextafter(s, math.inf) if e > 0.0 else s


def s_prod_bracket(a: float, b: float) -> tuple[float, float]:
    p = a * b
    if (abs(p) >= _TINY or a == 0.0 or b == 0.0) and abs(a) < _BIG and abs(b) < _BIG:
        ca = _SPLITTER * a
        ah = ca - (ca - a)
        al = a - ah
        cb = _SPLITTER * b
        bh = cb - (cb - b)
        bl = b - bh
        e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
        lo = math.nextafter(p, -math.inf) if e < 0.0 else p
        hi = math.nextafter(p, math.inf) if e > 0.0 else p
        return lo, hi
    if p == 0.0:
        # nonzero times nonzero underflowed; the true product is one-signed
        if math.copysign(1.0, a) == math.copysign(1.0, b):
            return 0.0, 5e-324
        return -5e-324, 0.0
    return math.nextafter(p, -math.inf), math.nextafter(p, math.inf)


def s_mul_bracket4(alo, ahi, blo, bhi) -> tuple[float, float]:
    l1, h1 = s_prod_bracket(alo, blo)
    l2, h2 = s_prod_bracket(alo, bhi)
    l3, h3 = s_prod_bracket(ahi, blo)
    l4, h4 = s_prod_bracket(ahi, bhi)
    return min(l1, l2, l3, l4), max(h1, h2, h3, h4)


def div_bounds(a: float, b: float) -> tuple[float, float]:
    """Directed rounding of the scalar quotient a / b (b != 0).

    The residual sign is decided exactly with rational arithmetic, so exact
    quotients stay exact.  Scalar only; division appears outside hot loops.
    """
    if b == 0.0:
        raise ZeroDivisionError("division by zero")
    q = a / b
    if not math.isfinite(q):
        raise NumericError("overflow in division")
    r = Fraction(a) - Fraction(q) * Fraction(b)
    if r == 0:
        return q, q
    # true - q = r / b
    if (r > 0) == (b > 0):
        return q, math.nextafter(q, math.inf)
    return math.nextafter(q, -math.inf), q


def gamma_up(n: int) -> float:
    """Upper bound on Higham's gamma_n = n*u / (1 - n*u)."""
    nu = n * UNIT
    if nu >= 0.5:
        raise NumericError("accumulation length too large for rigorous bound")
    return math.nextafter(nu / math.nextafter(1.0 - nu, 0.0), math.inf)


def sum_bounds(x, axis=-1):
    """Directed bounds on the exact sum along ``axis`` (any summation order)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[axis]
    s = x.sum(axis=axis)
    t = np.abs(x).sum(axis=axis)
    err = mul_ru(gamma_up(n + 2), nudge_up(t))
    return add_rd(s, -err), add_ru(s, err)


def _tree_reduce(x, axis, op):
    x = np.moveaxis(np.asarray(x, dtype=np.float64), axis, -1)
    if x.shape[-1] == 0:
        return np.zeros(x.shape[:-1])
    while x.shape[-1] > 1:
        if x.shape[-1] % 2:
            x = np.concatenate([x, np.zeros(x.shape[:-1] + (1,))], axis=-1)
        x = op(x[..., 0::2], x[..., 1::2])
    return x[..., 0]


def tree_sum_rd(x, axis=-1):
    """Largest float <= the exact sum (pairwise directed reduction)."""
    return _tree_reduce(x, axis, add_rd)


def tree_sum_ru(x, axis=-1):
    """Smallest float >= the exact sum (pairwise directed reduction)."""
    return _tree_reduce(x, axis, add_ru)


def abs_sum_ru(x, axis=-1):
    """Tight upper bound on sum of |x| along ``axis`` (exactness-preserving)."""
    return tree_sum_ru(np.abs(np.asarray(x, dtype=np.float64)), axis)


def exp_bounds(x: float) -> tuple[float, float]:
    """Two-ulp bracket around exp(x).

    libm's exp is assumed faithfully rounded (< 1 ulp error; true for glibc
    >= 2.28); a second ulp of slack is added as margin.  Cross-checked
    against mpmath in the test suite.
    """
    v = math.exp(x)
    if not math.isfinite(v):
        raise NumericError("overflow in exp")
    lo = math.nextafter(math.nextafter(v, -math.inf), -math.inf)
    hi = math.nextafter(math.nextafter(v, math.inf), math.inf)
    return max(lo, 0.0), hi


# ---------------------------------------------------------------------------
# interval kernels on (lo, hi) ndarray pairs
# ---------------------------------------------------------------------------

def i_add(alo, ahi, blo, bhi):
    return add_rd(alo, blo), add_ru(ahi, bhi)


def i_sub(alo, ahi, blo, bhi):
    return sub_rd(alo, bhi), sub_ru(ahi, blo)


def i_neg(lo, hi):
    return np.negative(hi), np.negative(lo)


def _prod_bracket(a, b):
    p, e, ok = two_prod(a, b)
    lo = np.where(ok & (e >= 0.0), p, nudge_down(p))
    hi = np.where(ok & (e <= 0.0), p, nudge_up(p))
    # products of nonzeros that underflow to zero are strictly one-signed:
    # keep the zero-side endpoint at 0 (also preserves containment
    # monotonicity against wider inputs whose products hit 0 exactly)
    uz = ~ok & (p == 0.0)
    if np.any(uz):
        neg = np.asarray(np.signbit(a) ^ np.signbit(b))
        lo = np.where(uz & ~neg, 0.0, lo)
        hi = np.where(uz & neg, 0.0, hi)
    return lo, hi


def i_scale(c, lo, hi):
    """Point array times interval array (broadcasting)."""
    l1, h1 = _prod_bracket(c, lo)
    l2, h2 = _prod_bracket(c, hi)
    return np.minimum(l1, l2), np.maximum(h1, h2)


def i_mul(alo, ahi, blo, bhi):
    l1, h1 = _prod_bracket(alo, blo)
    l2, h2 = _prod_bracket(alo, bhi)
    l3, h3 = _prod_bracket(ahi, blo)
    l4, h4 = _prod_bracket(ahi, bhi)
    lo = np.minimum(np.minimum(l1, l2), np.minimum(l3, l4))
    hi = np.maximum(np.maximum(h1, h2), np.maximum(h3, h4))
    return lo, hi


# Above this many broadcast elements the contraction kernels fall back to a
# k-loop, trading numpy-call overhead for memory.
_TENSOR_LIMIT = 4_000_000


def i_matvec_point(W, vlo, vhi):
    """Tight enclosure of W @ v for a point matrix and interval vector.

    Every product and partial sum is individually bracketed (broadcast
    brackets plus a pairwise directed reduction), so exact arithmetic stays
    exact.
    """
    W = np.asarray(W, dtype=np.float64)
    rows, cols = W.shape
    if rows * cols <= _TENSOR_LIMIT:
        tlo, thi = i_scale(W, vlo[None, :], vhi[None, :])
        return tree_sum_rd(tlo, axis=1), tree_sum_ru(thi, axis=1)
    acc_lo = np.zeros(rows)
    acc_hi = np.zeros(rows)
    for k in range(cols):
        tlo, thi = i_scale(W[:, k], vlo[k], vhi[k])
        acc_lo = add_rd(acc_lo, tlo)
        acc_hi = add_ru(acc_hi, thi)
    return acc_lo, acc_hi


def i_matvec(Alo, Ahi, vlo, vhi):
    """Enclosure of A @ v for interval matrix and interval vector."""
    Alo = np.asarray(Alo, dtype=np.float64)
    Ahi = np.asarray(Ahi, dtype=np.float64)
    rows, cols = Alo.shape
    if rows * cols <= _TENSOR_LIMIT:
        tlo, thi = i_mul(Alo, Ahi, vlo[None, :], vhi[None, :])
        return tree_sum_rd(tlo, axis=1), tree_sum_ru(thi, axis=1)
    acc_lo = np.zeros(rows)
    acc_hi = np.zeros(rows)
    for k in range(cols):
        tlo, thi = i_mul(Alo[:, k], Ahi[:, k], vlo[k], vhi[k])
        acc_lo = add_rd(acc_lo, tlo)
        acc_hi = add_ru(acc_hi, thi)
    return acc_lo, acc_hi


def i_matmul_point(A, B):
    """Tight interval enclosure of the exact product of two point matrices."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    rows, inner = A.shape
    cols = B.shape[1]
    if rows * inner * cols <= _TENSOR_LIMIT:
        tlo, thi = _prod_bracket(A[:, :, None], B[None, :, :])
        return tree_sum_rd(tlo, axis=1), tree_sum_ru(thi, axis=1)
    acc_lo = np.zeros((rows, cols))
    acc_hi = np.zeros((rows, cols))
    for k in range(inner):
        tlo, thi = _prod_bracket(A[:, k, None], B[None, k, :])
        acc_lo = add_rd(acc_lo, tlo)
        acc_hi = add_ru(acc_hi, thi)
    return acc_lo, acc_hi


def i_matmul(Alo, Ahi, Blo, Bhi):
    """Enclosure of the product of two interval matrices."""
    Alo = np.asarray(Alo, dtype=np.float64)
    Ahi = np.asarray(Ahi, dtype=np.float64)
    Blo = np.asarray(Blo, dtype=np.float64)
    Bhi = np.asarray(Bhi, dtype=np.float64)
    rows, inner = Alo.shape
    cols = Blo.shape[1]
    if rows * inner * cols <= _TENSOR_LIMIT // 2:
        tlo, thi = i_mul(Alo[:, :, None], Ahi[:, :, None],
                         Blo[None, :, :], Bhi[None, :, :])
        return tree_sum_rd(tlo, axis=1), tree_sum_ru(thi, axis=1)
    acc_lo = np.zeros((rows, cols))
    acc_hi = np.zeros((rows, cols))
    for k in range(inner):
        tlo, thi = i_mul(Alo[:, k, None], Ahi[:, k, None],
                         Blo[None, k, :], Bhi[None, k, :])
        acc_lo = add_rd(acc_lo, tlo)
        acc_hi = add_ru(acc_hi, thi)
    return acc_lo, acc_hi


def matmul_with_err(A, B):
    """Fast path: C = fl(A @ B) plus an entrywise bound on |C - A@B|.

    Uses the a-priori bound |fl(A@B) - A@B| <= gamma_k * |A|@|B| valid for
    any summation order (BLAS included).
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    k = A.shape[-1]
    C = A @ B
    if not np.all(np.isfinite(C)):
        raise NumericError("overflow in matrix product")
    P = np.abs(A) @ np.abs(B)
    E = mul_ru(gamma_up(k + 3), nudge_up(P))
    return C, E


# Threshold (in multiply counts) below which affine-layer propagation uses
# the tight k-loop product instead of the Higham bound.  Both are sound.
TIGHT_MATMUL_LIMIT = 30_000


def matvec_point_err(W, x, b=None):
    """y = fl(W @ x + b) plus an entrywise deviation bound from the exact value.

    Tight (exactness-preserving) below TIGHT_MATMUL_LIMIT, Higham bound above.
    """
    W = np.asarray(W, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    y = W @ x if b is None else W @ x + b
    if not np.all(np.isfinite(y)):
        raise NumericError("overflow in matrix-vector product")
    k = W.shape[1]
    if W.shape[0] * k <= TIGHT_MATMUL_LIMIT:
        lo, hi = i_matvec_point(W, x, x)
        if b is not None:
            lo = add_rd(lo, b)
            hi = add_ru(hi, b)
        dev = np.maximum(np.maximum(sub_ru(hi, y), sub_ru(y, lo)), 0.0)
        return y, dev
    mag = np.abs(W) @ np.abs(x)
    if b is not None:
        mag = mag + np.abs(b)
    return y, mul_ru(gamma_up(k + 3), nudge_up(mag))


def matmul_enclosure(A, B):
    """C = fl(A@B) with entrywise deviation bound, tight when affordable."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    work = A.shape[0] * A.shape[1] * B.shape[1]
    if work <= TIGHT_MATMUL_LIMIT:
        lo, hi = i_matmul_point(A, B)
        C = A @ B
        if not np.all(np.isfinite(C)):
            raise NumericError("overflow in matrix product")
        # the max covers C drifting to either side of the exact bracket
        E = np.maximum(sub_ru(hi, C), sub_ru(C, lo))
        return C, E
    return matmul_with_err(A, B)
