"""Rigorous softmax enclosures shared by the affine and doubleton propagators.

The linearization is first-order Taylor at a point: softmax(x) + J(x) h with
the softmax Jacobian J, and the error is bounded through the closed form of
the Jacobian derivative

    dJ_ij/dz_c = d_ijc s_i - d_ij s_i s_c - d_ic s_i s_j - d_jc s_i s_j
                 + 2 s_i s_j s_c

evaluated in interval arithmetic over the input set.  Component products
s_i s_c and s_i s_j s_c are evaluated both directly (products of component
enclosures) and through dependency-reduced quotient forms (a single fraction
whose denominator carries the coefficient differences), and intersected.

Everything is shifted by the maximum entry before exponentiation; the shift
is carried as an interval so the enclosures stay sound in floating point.
When exponentials overflow, enclosures degrade gracefully to [0, 1], which
is always sound for softmax components.
"""

from __future__ import annotations

import numpy as np

from . import roundops as rp
from .errors import NumericError
from .intervals import Interval, IntervalVector

# Dependency-reduced triple products cost O(m^3) per product; beyond this
# output dimension only direct products are used (still sound).
DEP_TRIPLE_MAX_M = 6

# Memory budget (in float64 elements) for one chunk of vectorized
# dependency-reduced product evaluation.
_CHUNK_FLOATS = 4_000_000

_UNIT = Interval(0.0, 1.0)


def softmax_point(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - np.max(z))
    return e / e.sum()


def softmax_jacobian_point(z: np.ndarray) -> np.ndarray:
    s = softmax_point(z)
    return np.diag(s) - np.outer(s, s)


def _np_exp_bounds(lo: np.ndarray, hi: np.ndarray):
    """Vectorized two-ulp exp bracket; raises on overflow."""
    with np.errstate(over="raise"):
        try:
            el = np.exp(lo)
            eh = np.exp(hi)
        except FloatingPointError:
            raise NumericError("overflow in exp") from None
    if not (np.all(np.isfinite(el)) and np.all(np.isfinite(eh))):
        raise NumericError("overflow in exp")
    el = np.maximum(rp.nudge_down(rp.nudge_down(el)), 0.0)
    eh = rp.nudge_up(rp.nudge_up(eh))
    return el, eh


def _interval_div(num: Interval, den_lo: float, den_hi: float) -> Interval:
    return (num / Interval(max(den_lo, 5e-324), den_hi)).intersect(_UNIT)


def softmax_interval_at_point(x: np.ndarray) -> list:
    """Tiny enclosures of the exact softmax components at a point."""
    r = float(np.max(x))
    shifted = [Interval(float(v)) - r for v in x]
    exps = [iv.exp() for iv in shifted]
    out = []
    for i, e in enumerate(exps):
        den = e
        for j, ej in enumerate(exps):
            if j != i:
                den = den + ej
        out.append(_interval_div(e, den.lo, den.hi))
    return out


def softmax_enclosure_box(z: IntervalVector) -> list:
    """Direct interval evaluation of softmax over a box of logits."""
    r = float(np.max(z.hi)) if z.dim else 0.0
    shifted = [z[i] - r for i in range(z.dim)]
    try:
        exps = [iv.exp() for iv in shifted]
    except NumericError:
        return [Interval(0.0, 1.0) for _ in range(z.dim)]
    out = []
    for i, e in enumerate(exps):
        den = e
        for j, ej in enumerate(exps):
            if j != i:
                den = den + ej
        out.append(_interval_div(e, den.lo, den.hi))
    return out


def jacobian_interval(s: list) -> tuple:
    """(lo, hi) arrays enclosing J given componentwise softmax enclosures."""
    m = len(s)
    lo = np.empty((m, m))
    hi = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            if i == j:
                v = s[i] * (Interval(1.0) - s[i])
            else:
                v = -(s[i] * s[j])
            lo[i, j] = v.lo
            hi[i, j] = v.hi
    return lo, hi


def _intersect_tensors(a_lo, a_hi, b_lo, b_hi):
    lo = np.maximum(a_lo, b_lo)
    hi = np.minimum(a_hi, b_hi)
    if np.any(lo > hi):
        # two valid enclosures of one quantity always overlap
        raise NumericError("disjoint enclosures of the same softmax product")
    return lo, hi


def _direct_products(s_lo, s_hi):
    p2 = rp.i_mul(s_lo[:, None], s_hi[:, None], s_lo[None, :], s_hi[None, :])
    p2 = (np.clip(p2[0], 0.0, 1.0), np.clip(p2[1], 0.0, 1.0))
    p3 = rp.i_mul(p2[0][:, :, None], p2[1][:, :, None],
                  s_lo[None, None, :], s_hi[None, None, :])
    p3 = (np.clip(p3[0], 0.0, 1.0), np.clip(p3[1], 0.0, 1.0))
    return p2, p3


class SoftmaxEnclosures:
    """Component and product enclosures of softmax over an input set.

    ``singles`` are Interval enclosures of the components; pair and triple
    products are stored as (m,m) and (m,m,m) tensors.  Over an affine set
    x + L t the dependency-reduced quotient forms are intersected in.
    """

    def __init__(self, singles, p2, p3):
        self.singles = singles
        self._p2 = p2
        self._p3 = p3

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_box(cls, z: IntervalVector) -> "SoftmaxEnclosures":
        singles = softmax_enclosure_box(z)
        s_lo = np.array([s.lo for s in singles])
        s_hi = np.array([s.hi for s in singles])
        p2, p3 = _direct_products(s_lo, s_hi)
        return cls(singles, p2, p3)

    @classmethod
    def from_affine(cls, x: np.ndarray, L: np.ndarray) -> "SoftmaxEnclosures":
        m, n = L.shape
        r = float(np.max(x))
        ylo = rp.sub_rd(x, r)
        yhi = rp.sub_ru(x, r)
        w = rp.abs_sum_ru(L, axis=1) if n else np.zeros(m)
        # pairwise coefficient and center sums, bracketed
        psl, psh = rp.i_add(L[:, None, :], L[:, None, :],
                            L[None, :, :], L[None, :, :])
        ysl, ysh = rp.i_add(ylo[:, None], yhi[:, None],
                            ylo[None, :], yhi[None, :])

        singles = cls._affine_singles(m, n, L, ylo, yhi, w)
        s_lo = np.array([s.lo for s in singles])
        s_hi = np.array([s.hi for s in singles])
        p2, p3 = _direct_products(s_lo, s_hi)
        try:
            p2 = cls._reduced_pairs(m, n, psl, psh, ysl, ysh, p2)
        except NumericError:
            pass
        if m <= DEP_TRIPLE_MAX_M:
            try:
                p3 = cls._reduced_triples(m, n, L, psl, psh, ysl, ysh,
                                          ylo, yhi, p3)
            except NumericError:
                pass
        return cls(singles, p2, p3)

    @staticmethod
    def _affine_singles(m, n, L, ylo, yhi, w):
        def reduced(i):
            dl, dh = rp.i_sub(L, L, L[i], L[i])
            s_up = rp.abs_sum_ru(np.maximum(np.abs(dl), np.abs(dh)), axis=1) \
                if n else np.zeros(m)
            tlo, thi = _np_exp_bounds(rp.sub_rd(ylo, s_up), rp.add_ru(yhi, s_up))
            num = Interval(float(ylo[i]), float(yhi[i])).exp()
            return _interval_div(num, float(rp.sum_bounds(tlo)[0]),
                                 float(rp.sum_bounds(thi)[1]))

        def direct(i):
            args_lo = rp.sub_rd(ylo, w)
            args_hi = rp.add_ru(yhi, w)
            tlo, thi = _np_exp_bounds(args_lo, args_hi)
            num = Interval(float(args_lo[i]), float(args_hi[i])).exp()
            return _interval_div(num, float(rp.sum_bounds(tlo)[0]),
                                 float(rp.sum_bounds(thi)[1]))

        out = []
        for i in range(m):
            try:
                out.append(reduced(i).intersect(direct(i)))
            except NumericError:
                out.append(Interval(0.0, 1.0))
        return out

    @staticmethod
    def _reduced_pairs(m, n, psl, psh, ysl, ysh, direct):
        keys = [(i, c) for i in range(m) for c in range(i, m)]
        red_lo = np.empty((len(keys),))
        red_hi = np.empty((len(keys),))
        chunk = max(1, _CHUNK_FLOATS // (m * m * max(n, 1)))
        for start in range(0, len(keys), chunk):
            part = keys[start:start + chunk]
            ki = np.array([k[0] for k in part])
            kc = np.array([k[1] for k in part])
            dl, dh = rp.i_sub(psl[None, :, :, :], psh[None, :, :, :],
                              psl[ki, kc][:, None, None, :],
                              psh[ki, kc][:, None, None, :])
            s_up = rp.abs_sum_ru(np.maximum(np.abs(dl), np.abs(dh)), axis=3) \
                if n else np.zeros((len(part), m, m))
            tlo, thi = _np_exp_bounds(rp.sub_rd(ysl[None], s_up),
                                      rp.add_ru(ysh[None], s_up))
            den_lo = rp.sum_bounds(tlo.reshape(len(part), -1), axis=1)[0]
            den_hi = rp.sum_bounds(thi.reshape(len(part), -1), axis=1)[1]
            for idx, (i, c) in enumerate(part):
                num = Interval(float(ysl[i, c]), float(ysh[i, c])).exp()
                v = _interval_div(num, float(den_lo[idx]), float(den_hi[idx]))
                red_lo[start + idx] = v.lo
                red_hi[start + idx] = v.hi
        p2_lo = direct[0].copy()
        p2_hi = direct[1].copy()
        for idx, (i, c) in enumerate(keys):
            lo, hi = _intersect_tensors(
                np.float64(p2_lo[i, c]), np.float64(p2_hi[i, c]),
                np.float64(red_lo[idx]), np.float64(red_hi[idx]))
            p2_lo[i, c] = p2_lo[c, i] = lo
            p2_hi[i, c] = p2_hi[c, i] = hi
        return p2_lo, p2_hi

    @staticmethod
    def _reduced_triples(m, n, L, psl, psh, ysl, ysh, ylo, yhi, direct):
        keys = [(i, c, q) for i in range(m) for c in range(i, m)
                for q in range(c, m)]
        p3_lo = direct[0].copy()
        p3_hi = direct[1].copy()
        for (i, c, q) in keys:
            base_l, base_h = rp.i_add(psl[i, c], psh[i, c], L[q], L[q])
            lo_parts, hi_parts = [], []
            for s_idx in range(m):
                cl, ch = rp.i_add(psl, psh, L[s_idx], L[s_idx])
                dl, dh = rp.i_sub(cl, ch, base_l, base_h)
                s_up = rp.abs_sum_ru(np.maximum(np.abs(dl), np.abs(dh)), axis=2) \
                    if n else np.zeros((m, m))
                al, ah = rp.i_add(ysl, ysh, ylo[s_idx], yhi[s_idx])
                tlo, thi = _np_exp_bounds(rp.sub_rd(al, s_up),
                                          rp.add_ru(ah, s_up))
                lo_parts.append(tlo.ravel())
                hi_parts.append(thi.ravel())
            den_lo = float(rp.sum_bounds(np.concatenate(lo_parts))[0])
            den_hi = float(rp.sum_bounds(np.concatenate(hi_parts))[1])
            num = (Interval(float(ysl[i, c]), float(ysh[i, c]))
                   + Interval(float(ylo[q]), float(yhi[q]))).exp()
            v = _interval_div(num, den_lo, den_hi)
            for key in {(i, c, q), (i, q, c), (c, i, q),
                        (c, q, i), (q, i, c), (q, c, i)}:
                lo, hi = _intersect_tensors(
                    np.float64(p3_lo[key]), np.float64(p3_hi[key]),
                    np.float64(v.lo), np.float64(v.hi))
                p3_lo[key] = lo
                p3_hi[key] = hi
        return p3_lo, p3_hi

    # -- products and derivative bounds --------------------------------------

    def pair(self, i, c) -> Interval:
        return Interval(float(self._p2[0][i, c]), float(self._p2[1][i, c]))

    def triple(self, i, c, r) -> Interval:
        return Interval(float(self._p3[0][i, c, r]), float(self._p3[1][i, c, r]))

    def dj_entry(self, i: int, j: int, c: int) -> Interval:
        """Enclosure of dJ_ij/dz_c over the input set."""
        acc = 2.0 * self.triple(i, j, c)
        if i == j == c:
            acc = acc + self.singles[i]
        if i == j:
            acc = acc - self.pair(i, c)
        if i == c:
            acc = acc - self.pair(i, j)
        if j == c:
            acc = acc - self.pair(i, j)
        return acc

    def taylor_errors(self, weights: np.ndarray) -> np.ndarray:
        """Upper bound on |h^T D^2 g_i h| with |h_j| <= weights_j.

        Interval evaluation of the second-derivative quadratic form.  The
        1/2 of the Lagrange remainder is deliberately dropped (a factor-two
        conservative bound that keeps the evaluation a plain quadratic form).
        """
        m = len(self.singles)
        p2_lo, p2_hi = self._p2
        dj_lo = 2.0 * self._p3[0]
        dj_hi = 2.0 * self._p3[1]
        idx = np.arange(m)
        # i == j: subtract s_i s_c
        dj_lo[idx, idx, :], dj_hi[idx, idx, :] = rp.i_sub(
            dj_lo[idx, idx, :], dj_hi[idx, idx, :], p2_lo, p2_hi)
        # i == c: subtract s_i s_j
        dj_lo[idx, :, idx], dj_hi[idx, :, idx] = rp.i_sub(
            dj_lo[idx, :, idx], dj_hi[idx, :, idx], p2_lo, p2_hi)
        # j == c: subtract s_i s_j
        lo_s, hi_s = rp.i_sub(dj_lo[:, idx, idx], dj_hi[:, idx, idx],
                              p2_lo, p2_hi)
        dj_lo[:, idx, idx] = lo_s
        dj_hi[:, idx, idx] = hi_s
        # i == j == c: add s_i
        s_lo = np.array([s.lo for s in self.singles])
        s_hi = np.array([s.hi for s in self.singles])
        dj_lo[idx, idx, idx], dj_hi[idx, idx, idx] = rp.i_add(
            dj_lo[idx, idx, idx], dj_hi[idx, idx, idx], s_lo, s_hi)
        mag = np.maximum(np.abs(dj_lo), np.abs(dj_hi))
        terms = rp.mul_ru(rp.mul_ru(mag, weights[None, :, None]),
                          weights[None, None, :])
        return rp.sum_bounds(terms.reshape(m, -1), axis=1)[1]


def commit_point_linearization(x: np.ndarray):
    """Committed float softmax value and Jacobian at x, with enclosures.

    Returns (x0, J, s_enclosures, (J_lo, J_hi)); x0 and J are the plain-float
    values actually stored, the enclosures bound the exact quantities.
    """
    x0 = softmax_point(x)
    J = softmax_jacobian_point(x)
    s_at_x = softmax_interval_at_point(x)
    j_lo, j_hi = jacobian_interval(s_at_x)
    return x0, J, s_at_x, (j_lo, j_hi)
