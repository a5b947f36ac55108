"""Doubleton arithmetic propagation: sets x + C r + Q q.

The C r part carries the (exact) linear image of the input box; Q q stores
accumulated nonlinear and rounding errors in an adapted coordinate frame.
Affine layers map all three components exactly, with floating-point product
errors pushed into appended error columns of Q.

Nonlinear layers use a per-coordinate linearization f(z) = x0 + L(z - x) + e
and recoordinate the error part: choosing a new frame Q~ and a left inverse
A, the new error coordinates are q~ = (A L Q) q + A Delta, with the matrix
product evaluated before touching the interval vector.  A is stored as a
rigorous interval enclosure of inv(Q~), so Q~ A contains the identity by
construction and the recoordination is sound with float frames.

Strategies for the frame: S1 takes Q~ = LQ itself (square, well conditioned
only), S2 an orthonormal factor from QR, S3 QR after sorting columns by
column norm times interval width; hybrid tries S1 and falls back to S3.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import roundops as rp
from . import softmax_bounds as smb
from .errors import NumericError, SingularMatrixError, ValidationError
from .intervals import Interval, IntervalMatrix, IntervalVector
from .network import Conv2D, Dense, NetworkSpec, InputRegion, ReLU, Softmax
from .report import METHOD_DA, BoundReport

__all__ = [
    "Doubleton", "Linearization", "RecoordResult",
    "db_from_region", "db_affine", "db_nonlinear",
    "db_relu_linearize", "db_softmax_linearize", "db_forward",
    "db_strategy3_permutation", "STRATEGIES",
]

STRATEGIES = ("s1", "s2", "s3", "hybrid")
_COND_LIMIT = 1e8
_TIGHT_COLS = 48  # hull matvecs switch to the fast bound above this width


class Doubleton:
    """Set {x + C rho + Q kappa : rho in r, kappa in q} with 0 in r and q."""

    def __init__(self, x, C, r: IntervalVector, Q, q: IntervalVector,
                 n_err: int = 0):
        self.x = np.asarray(x, dtype=np.float64)
        self.C = np.asarray(C, dtype=np.float64)
        self.Q = np.asarray(Q, dtype=np.float64)
        self.r = r
        self.q = q
        self.n_err = int(n_err)
        n = self.x.shape[0]
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.C))
                and np.all(np.isfinite(self.Q))):
            raise NumericError("non-finite doubleton component")
        if self.C.shape != (n, r.dim) or self.Q.shape != (n, q.dim):
            raise ValidationError("doubleton component shapes disagree")
        if np.any(r.lo > 0) or np.any(r.hi < 0) or np.any(q.lo > 0) or np.any(q.hi < 0):
            raise ValidationError("doubleton interval parts must contain zero")

    @property
    def dim(self) -> int:
        return self.x.shape[0]

    def hull(self) -> IntervalVector:
        """Outward-rounded interval hull x + C r + Q q."""
        lo = self.x.copy()
        hi = self.x.copy()
        for M, v in ((self.C, self.r), (self.Q, self.q)):
            if v.dim == 0:
                continue
            tlo, thi = _point_matvec_box(M, v)
            lo = rp.add_rd(lo, tlo)
            hi = rp.add_ru(hi, thi)
        return IntervalVector(lo, hi)


def _point_matvec_box(M, v: IntervalVector):
    """Enclosure of M @ v; tight k-loop for narrow M, mid/rad bound otherwise."""
    if M.shape[1] <= _TIGHT_COLS:
        return rp.i_matvec_point(M, v.lo, v.hi)
    c = v.mid()
    rad = v.rad()
    k = M.shape[1]
    mc = M @ c
    absM = np.abs(M)
    err_c = rp.mul_ru(rp.gamma_up(k + 3), rp.nudge_up(absM @ np.abs(c)))
    rv = rp.mul_ru(rp.nudge_up(absM @ rad), rp.nudge_up(1.0 + rp.gamma_up(k + 3)))
    total = rp.add_ru(rv, err_c)
    return rp.sub_rd(mc, total), rp.add_ru(mc, total)


def _abs_matvec_up(E, mag):
    """Upper bound on E @ mag for nonnegative E and mag."""
    if E.shape[1] == 0:
        return np.zeros(E.shape[0])
    k = E.shape[1]
    return rp.mul_ru(rp.nudge_up(E @ mag), rp.nudge_up(1.0 + rp.gamma_up(k + 3)))


def _unit_box(k: int) -> IntervalVector:
    ones = np.ones(k)
    return IntervalVector(-ones, ones)


def _zero_box(k: int) -> IntervalVector:
    z = np.zeros(k)
    return IntervalVector(z, z)


def db_from_region(region: InputRegion) -> Doubleton:
    n = region.dim
    return Doubleton(region.center.copy(), np.diag(region.radius), _unit_box(n),
                     np.eye(n), _zero_box(n))


# ---------------------------------------------------------------------------
# affine layers
# ---------------------------------------------------------------------------

def db_affine(W, b, X: Doubleton) -> Doubleton:
    """Exact affine image: x~ = Wx + b, C~ = WC, Q~ = WQ.

    Product rounding is bounded entrywise and appended to Q as a diagonal
    block of error columns (widths carried by fresh [-1,1] entries of q).
    """
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if W.shape[1] != X.dim:
        raise ValidationError(
            f"affine layer expects input dim {W.shape[1]}, got {X.dim}")
    x_new, dev_x = rp.matvec_point_err(W, X.x, b)
    Cn, EC = rp.matmul_enclosure(W, X.C)
    Qn, EQ = rp.matmul_enclosure(W, X.Q)
    err = rp.add_ru(dev_x, rp.add_ru(_abs_matvec_up(EC, X.r.mag()),
                                     _abs_matvec_up(EQ, X.q.mag())))
    rows = np.nonzero(err > 0.0)[0]
    if len(rows):
        block = np.zeros((W.shape[0], len(rows)))
        block[rows, np.arange(len(rows))] = err[rows]
        Qn = np.hstack([Qn, block])
        q_new = IntervalVector(np.concatenate([X.q.lo, -np.ones(len(rows))]),
                               np.concatenate([X.q.hi, np.ones(len(rows))]))
    else:
        q_new = X.q
    return Doubleton(x_new, Cn, X.r, Qn, q_new, X.n_err + len(rows))


# ---------------------------------------------------------------------------
# recoordination
# ---------------------------------------------------------------------------

@dataclass
class RecoordResult:
    Q_new: np.ndarray        # committed frame (point matrix)
    A: IntervalMatrix        # rigorous enclosure of inv(Q_new)
    q_new: IntervalVector


def verify_left_inverse(result: RecoordResult) -> bool:
    """Interval containment Q_new * A contains Id (spec invariant)."""
    d = result.Q_new.shape[0]
    prod = IntervalMatrix.from_point(result.Q_new).matmul(result.A)
    return prod.contains_matrix(np.eye(d))


def _inverse_enclosure(Qn: np.ndarray, A_pt: np.ndarray) -> IntervalMatrix:
    """Interval matrix containing inv(Qn), built around the approximation A_pt.

    With R = Id - A_pt Qn and beta = ||R||_inf < 1, the Neumann series gives
    |inv(Qn) - A_pt| <= beta/(1-beta) * colmax|A_pt| entrywise.
    """
    d = Qn.shape[0]
    rl, rh = rp.i_matmul_point(A_pt, Qn)
    rl, rh = rp.i_sub(np.eye(d), np.eye(d), rl, rh)
    rmag = np.maximum(np.abs(rl), np.abs(rh))
    beta = float(np.max(rp.tree_sum_ru(rmag, axis=1))) if d else 0.0
    if beta >= 1.0:
        raise SingularMatrixError("frame matrix too ill-conditioned to invert")
    rho = rp.div_bounds(beta, float(rp.nudge_down(np.float64(1.0 - beta))))[1]
    colmax = np.max(np.abs(A_pt), axis=0, keepdims=True)
    pad = rp.mul_ru(np.full((d, d), rho), np.broadcast_to(colmax, (d, d)))
    return IntervalMatrix(rp.sub_rd(A_pt, pad), rp.add_ru(A_pt, pad))


def db_strategy3_permutation(LQ, q: IntervalVector, Delta: IntervalVector):
    """Column order for pivoted QR: decreasing column norm times q width."""
    LQ = np.asarray(LQ, dtype=np.float64)
    if LQ.shape[1] != q.dim:
        raise ValidationError("permutation: column count must match q")
    metric = np.linalg.norm(LQ, axis=0) * q.widths()
    return np.argsort(-metric, kind="stable")


def _recoordinate(M: np.ndarray, q: IntervalVector, Delta: IntervalVector,
                  strategy: str) -> RecoordResult:
    d, k = M.shape
    if strategy == "s1":
        if d != k:
            raise SingularMatrixError("Strategy 1 needs a square LQ")
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > _COND_LIMIT:
            raise SingularMatrixError(f"Strategy 1: LQ condition {cond:.3g}")
        Qn = M
        A_pt = np.linalg.inv(M)
    elif strategy in ("s2", "s3"):
        if k == 0:
            Qn = np.eye(d)
        else:
            cols = M if strategy == "s2" else M[:, db_strategy3_permutation(M, q, Delta)]
            Qn, _ = np.linalg.qr(cols, mode="complete")
        A_pt = Qn.T
    else:
        raise ValidationError(f"unknown strategy {strategy!r}")
    A = _inverse_enclosure(Qn, A_pt)
    if k:
        P = A.matmul(IntervalMatrix.from_point(M))
        q_new = P.matvec(q) + A.matvec(Delta)
    else:
        q_new = A.matvec(Delta)
    return RecoordResult(Qn, A, q_new)


# ---------------------------------------------------------------------------
# nonlinear layers
# ---------------------------------------------------------------------------

@dataclass
class Linearization:
    """f(z) = x0 + L (z - x) + e(z) with e enclosed over the current set."""
    x0: np.ndarray
    L: np.ndarray
    e: IntervalVector


def db_relu_linearize(X: Doubleton) -> Linearization:
    """Chord linearization of ReLU over the coordinate hulls."""
    h = X.hull()
    n = X.dim
    slopes = np.zeros(n)
    x0 = np.zeros(n)
    e_lo = np.zeros(n)
    e_hi = np.zeros(n)
    for i in range(n):
        lo, hi = float(h.lo[i]), float(h.hi[i])
        if lo >= 0.0:
            slopes[i] = 1.0
            x0[i] = X.x[i]
        elif hi <= 0.0:
            pass  # zero map with zero error
        else:
            c = min(max(hi / (hi - lo), 0.0), 1.0)
            slopes[i] = c
            x0[i] = c * X.x[i]
            ic = Interval(c)
            ixi = Interval(float(X.x[i]))
            ix0 = Interval(float(x0[i]))
            at_lo = ic * ixi - ic * Interval(lo) - ix0
            at_kink = ic * ixi - ix0
            at_hi = Interval(hi) - ix0 - ic * (Interval(hi) - ixi)
            e_lo[i] = min(at_lo.lo, at_kink.lo, at_hi.lo)
            e_hi[i] = max(at_lo.hi, at_kink.hi, at_hi.hi)
    return Linearization(x0, np.diag(slopes), IntervalVector(e_lo, e_hi))


def _affine_cover(X: Doubleton):
    """Point center and generator matrix with {x + Cr + Qq} inside
    {center + G t : t in [-1,1]^cols}, rigorously.

    Lets the softmax machinery exploit the doubleton's affine structure
    (dependency-reduced quotient enclosures) instead of its plain hull.
    """
    mids = np.concatenate([X.r.mid(), X.q.mid()])
    rads = np.concatenate([X.r.rad(), X.q.rad()])
    M = np.hstack([X.C, X.Q])
    center, dev = rp.matvec_point_err(M, mids, X.x)
    G = M * rads[None, :]
    g_lo, g_hi = rp.i_scale(M, rads[None, :], rads[None, :])
    g_dev = np.maximum(rp.sub_ru(g_hi, G), rp.sub_ru(G, g_lo))
    dev = rp.add_ru(dev, rp.abs_sum_ru(g_dev, axis=1))
    rows = np.nonzero(dev > 0.0)[0]
    if len(rows):
        block = np.zeros((X.dim, len(rows)))
        block[rows, np.arange(len(rows))] = dev[rows]
        G = np.hstack([G, block])
    return center, G


def db_softmax_linearize(X: Doubleton) -> Linearization:
    """First-order softmax at the doubleton center, second-order error.

    The remainder is bounded over an affine cover of the set, so the
    dependency-reduced product enclosures apply exactly as in the affine
    propagator.
    """
    if X.dim < 2:
        raise ValidationError("softmax needs at least 2 entries")
    x_pt, G = _affine_cover(X)
    x0, L, s_at_x, (j_lo, j_hi) = smb.commit_point_linearization(x_pt)
    enc = smb.SoftmaxEnclosures.from_affine(x_pt, G)
    w = rp.abs_sum_ru(G, axis=1) if G.shape[1] else np.zeros(X.dim)
    e_taylor = enc.taylor_errors(w)
    s_lo = np.array([s.lo for s in s_at_x])
    s_hi = np.array([s.hi for s in s_at_x])
    d_lo = rp.sub_rd(s_lo, x0)
    d_hi = rp.sub_ru(s_hi, x0)
    # the linearization anchor is X.x: fold in L (X.x - x_pt) and the
    # Jacobian commit error over the generator span
    jdiff = IntervalMatrix(rp.sub_rd(j_lo, L), rp.sub_ru(j_hi, L))
    span = IntervalVector(-w, w)
    lin_part = jdiff.matvec(span)
    sh_lo, sh_hi = rp.i_matvec_point(L, rp.sub_rd(X.x, x_pt), rp.sub_ru(X.x, x_pt))
    e_lo = rp.add_rd(rp.add_rd(rp.add_rd(d_lo, lin_part.lo), sh_lo), -e_taylor)
    e_hi = rp.add_ru(rp.add_ru(rp.add_ru(d_hi, lin_part.hi), sh_hi), e_taylor)
    return Linearization(x0, L, IntervalVector(e_lo, e_hi))


def db_nonlinear(X: Doubleton, lin: Linearization, strategy: str = "hybrid",
                 ) -> Doubleton:
    """Apply a linearized nonlinear map and recoordinate the error part.

    The caller guarantees f(z) - x0 - L(z - x) stays in lin.e over X; all
    floating-point commit errors of this routine are folded into Delta so
    they flow through A Delta into the new q.
    """
    d, n = lin.L.shape
    if n != X.dim:
        raise ValidationError("linearization dimension mismatch")
    mid_e = lin.e.mid()
    x_new = lin.x0 + mid_e
    xb_lo, xb_hi = rp.i_add(lin.x0, lin.x0, mid_e, mid_e)
    dev_x = np.maximum(np.maximum(rp.sub_ru(xb_hi, x_new),
                                  rp.sub_ru(x_new, xb_lo)), 0.0)
    d_lo = rp.sub_rd(lin.e.lo, mid_e)
    d_hi = rp.sub_ru(lin.e.hi, mid_e)
    d_lo = rp.sub_rd(d_lo, dev_x)
    d_hi = rp.add_ru(d_hi, dev_x)

    Cn, EC = rp.matmul_enclosure(lin.L, X.C)
    ec = _abs_matvec_up(EC, X.r.mag())
    d_lo = rp.sub_rd(d_lo, ec)
    d_hi = rp.add_ru(d_hi, ec)

    # fold trailing rounding-error columns of Q into Delta
    k_main = X.Q.shape[1] - X.n_err
    Q_main = X.Q[:, :k_main]
    q_main = IntervalVector(X.q.lo[:k_main], X.q.hi[:k_main])
    if X.n_err:
        Me, Ee = rp.matmul_enclosure(lin.L, X.Q[:, k_main:])
        mag_err = IntervalVector(X.q.lo[k_main:], X.q.hi[k_main:]).mag()
        bound = _abs_matvec_up(rp.add_ru(np.abs(Me), Ee), mag_err)
        d_lo = rp.sub_rd(d_lo, bound)
        d_hi = rp.add_ru(d_hi, bound)

    M, EM = rp.matmul_enclosure(lin.L, Q_main)
    em = _abs_matvec_up(EM, q_main.mag())
    d_lo = rp.sub_rd(d_lo, em)
    d_hi = rp.add_ru(d_hi, em)
    Delta = IntervalVector(np.minimum(d_lo, 0.0), np.maximum(d_hi, 0.0))

    if strategy == "hybrid":
        try:
            rec = _recoordinate(M, q_main, Delta, "s1")
        except SingularMatrixError:
            rec = _recoordinate(M, q_main, Delta, "s3")
    else:
        rec = _recoordinate(M, q_main, Delta, strategy)
    return Doubleton(x_new, Cn, X.r, rec.Q_new, rec.q_new, n_err=0)


# ---------------------------------------------------------------------------
# forward driver
# ---------------------------------------------------------------------------

def db_forward(spec: NetworkSpec, region: InputRegion,
               strategy: str = "hybrid", with_softmax: bool = True,
               collect_layers: list | None = None) -> BoundReport:
    if strategy not in STRATEGIES:
        raise ValidationError(f"unknown strategy {strategy!r}")
    if region.dim != spec.input_dim:
        raise ValidationError(
            f"region dim {region.dim} does not match network input {spec.input_dim}")
    t0 = time.perf_counter()
    X = db_from_region(region)
    applied_softmax = False

    def nonlinear(x, lin):
        if strategy != "s1":
            return db_nonlinear(x, lin, strategy)
        try:
            return db_nonlinear(x, lin, "s1")
        except SingularMatrixError:
            # the documented caller-side switch when LQ is not invertible
            return db_nonlinear(x, lin, "s3")

    for layer in spec.propagation_layers(with_softmax):
        if isinstance(layer, Dense):
            X = db_affine(layer.W, layer.b, X)
        elif isinstance(layer, ReLU):
            X = nonlinear(X, db_relu_linearize(X))
        elif isinstance(layer, Softmax):
            X = nonlinear(X, db_softmax_linearize(X))
            applied_softmax = True
        elif isinstance(layer, Conv2D):
            raise ValidationError("conv layers must be lowered before propagation")
        if collect_layers is not None:
            box = X.hull()
            collect_layers.append(box.intersect_box(0.0, 1.0)
                                  if applied_softmax else box)
    box = X.hull()
    if applied_softmax:
        box = box.intersect_box(0.0, 1.0)
    return BoundReport(METHOD_DA, box, wall_time=time.perf_counter() - t0,
                       metadata={"strategy": strategy})
