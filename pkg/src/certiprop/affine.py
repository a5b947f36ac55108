"""Affine arithmetic propagation.

Sets are ranges of affine maps over the unit cube: every coordinate is a
center plus a sparse combination of shared noise symbols, each ranging in
[-1, 1].  Affine layers are exact up to floating point; the accumulated
rounding of each output coordinate is absorbed into one fresh symbol.

ReLU uses the chord construction: given A(t) = a0 + sum a_i t_i with
S = sum |a_i|, M = a0 + S and tau = (a0 + S) / (2S), the replacement is

    c   = tau * M / (2S)         (slope scaling, b_i = c * a_i)
    D+  = M (1 - tau)            D- = c a0 - tau M / 2
    b0  = (tau M + D+ + D-) / 2  b_{n+1} = (D+ - D-) / 2

The committed fresh-symbol coefficient is additionally capped from below by
an outward-rounded evaluation of sup |ReLU(a) - b0 - c (a - a0)| over the
enclosed input range (the sup of a piecewise-linear function sits at the
range endpoints or the kink), plus the commit error of the b_i, so the
enclosure stays sound even where the closed-form derivation is exact only
in real arithmetic.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import roundops as rp
from . import softmax_bounds as smb
from .errors import NumericError, ValidationError
from .intervals import Interval, IntervalVector
from .network import Conv2D, Dense, NetworkSpec, InputRegion, ReLU, Softmax
from .report import METHOD_AA, BoundReport

__all__ = [
    "SymbolContext", "AffineForm", "AffineVector", "ReluLinearization",
    "aa_affine", "aa_relu_scalar", "aa_softmax", "aa_condense", "aa_forward",
    "relu_linearization",
]


class SymbolContext:
    """Allocator of globally unique noise-symbol ids for one propagation."""

    def __init__(self):
        self._next = 0
        self.origin = {}

    def fresh(self, tag: str = "") -> int:
        i = self._next
        self._next += 1
        self.origin[i] = tag
        return i

    def fresh_block(self, count: int, tag: str = "") -> list:
        return [self.fresh(tag) for _ in range(count)]

    @property
    def count(self) -> int:
        return self._next


class AffineForm:
    """Scalar affine form: center plus sparse symbol coefficients."""

    __slots__ = ("center", "coeffs")

    def __init__(self, center: float, coeffs: dict | None = None):
        self.center = float(center)
        self.coeffs = {int(k): float(v) for k, v in (coeffs or {}).items() if v != 0.0}

    def __repr__(self):
        return f"AffineForm({self.center!r}, {self.coeffs!r})"

    def radius_upper(self) -> float:
        if not self.coeffs:
            return 0.0
        vals = np.fromiter(self.coeffs.values(), dtype=np.float64)
        return float(rp.abs_sum_ru(vals))

    def range_interval(self) -> Interval:
        s = self.radius_upper()
        return Interval(float(rp.sub_rd(self.center, s)),
                        float(rp.add_ru(self.center, s)))

    def evaluate(self, assignment: dict) -> float:
        """Plain float evaluation at a symbol assignment (testing aid)."""
        return self.center + sum(a * assignment.get(i, 0.0)
                                 for i, a in self.coeffs.items())


class AffineVector:
    """Vector of affine forms over one shared symbol context.

    Stored densely: centers (n,) and a coefficient matrix (n, m) whose
    columns correspond to ``symbols``.  The joint range is the zonotope
    {centers + coeffs @ t : t in [-1,1]^m}.
    """

    def __init__(self, centers, symbols, coeffs, ctx: SymbolContext):
        self.centers = np.asarray(centers, dtype=np.float64)
        self.symbols = list(symbols)
        self.coeffs = np.asarray(coeffs, dtype=np.float64).reshape(
            self.centers.shape[0], len(self.symbols))
        self.ctx = ctx
        if not (np.all(np.isfinite(self.centers)) and np.all(np.isfinite(self.coeffs))):
            raise NumericError("non-finite affine form")
        if any(self.symbols[i] >= self.symbols[i + 1]
               for i in range(len(self.symbols) - 1)):
            raise ValidationError("symbol ids must be strictly increasing")

    @classmethod
    def from_region(cls, region: InputRegion, ctx: SymbolContext) -> "AffineVector":
        n = region.dim
        ids = ctx.fresh_block(n, "input")
        return cls(region.center.copy(), ids, np.diag(region.radius), ctx)

    @property
    def dim(self) -> int:
        return self.centers.shape[0]

    @property
    def num_symbols(self) -> int:
        return len(self.symbols)

    def form(self, i: int) -> AffineForm:
        row = self.coeffs[i]
        return AffineForm(self.centers[i],
                          {s: row[j] for j, s in enumerate(self.symbols) if row[j] != 0.0})

    def ranges(self) -> IntervalVector:
        if self.num_symbols:
            s = rp.abs_sum_ru(self.coeffs, axis=1)
        else:
            s = np.zeros(self.dim)
        return IntervalVector(rp.sub_rd(self.centers, s),
                              rp.add_ru(self.centers, s))

    def append_columns(self, rows, values, tag: str):
        """New vector with one fresh symbol per (row, value) entry."""
        if not len(rows):
            return self
        ids = self.ctx.fresh_block(len(rows), tag)
        block = np.zeros((self.dim, len(rows)))
        block[np.asarray(rows), np.arange(len(rows))] = values
        return AffineVector(self.centers, self.symbols + ids,
                            np.hstack([self.coeffs, block]), self.ctx)


# ---------------------------------------------------------------------------
# affine layers
# ---------------------------------------------------------------------------

def aa_affine(W, b, v: AffineVector) -> AffineVector:
    """Exact affine image; per-coordinate rounding goes into a fresh symbol."""
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if W.shape[1] != v.dim:
        raise ValidationError(
            f"affine layer expects input dim {W.shape[1]}, got {v.dim}")
    centers, dev_c = rp.matvec_point_err(W, v.centers, b)
    if v.num_symbols:
        K, E = rp.matmul_enclosure(W, v.coeffs)
        row_err = rp.abs_sum_ru(E, axis=1)
    else:
        K = np.zeros((W.shape[0], 0))
        row_err = np.zeros(W.shape[0])
    e = rp.add_ru(row_err, dev_c)
    out = AffineVector(centers, v.symbols, K, v.ctx)
    rows = np.nonzero(e > 0.0)[0]
    return out.append_columns(rows, e[rows], "round")


# ---------------------------------------------------------------------------
# ReLU
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReluLinearization:
    """Coefficient block of the affine ReLU replacement (mixed-sign case)."""
    S: float
    M: float
    tau: float
    c: float
    D_plus: float
    D_minus: float
    b0: float
    b_new: float           # (D_plus - D_minus) / 2, the closed-form value
    b_new_applied: float   # rigorous outward-rounded sup actually committed


def _relu_block(a0: float, S: float):
    tau = (a0 + S) / (2.0 * S)
    tau = min(max(tau, 0.0), 1.0)
    M = a0 + S
    c = 0.5 * tau * M / S
    c = min(max(c, 0.0), 1.0)
    D_plus = M * (1.0 - tau)
    D_minus = c * a0 - 0.5 * tau * M
    b0 = 0.5 * (tau * M + D_plus + D_minus)
    b_new = 0.5 * (D_plus - D_minus)
    return tau, M, c, D_plus, D_minus, b0, b_new


def _rigorous_sup(a0, c, b0, lo, hi, eta) -> float:
    """Outward sup of |ReLU(a) - b0 - c (a - a0)| over [lo, hi], plus eta.

    Piecewise linear in a, so the sup is attained at lo, hi or the kink 0;
    each candidate is evaluated in interval arithmetic.
    """
    ia0 = Interval(a0)
    ic = Interval(c)
    ib0 = Interval(b0)
    offset = ic * ia0 - ib0
    cands = []
    if lo < 0.0:
        # ReLU(a) - b0 - c(a - a0) = -c a + (c a0 - b0), single occurrence of a
        neg = -(ic * Interval(lo, min(hi, 0.0))) + offset
        cands.append(neg.mag())
    if hi > 0.0:
        # (1 - c) a + (c a0 - b0)
        pos = (Interval(1.0) - ic) * Interval(max(lo, 0.0), hi) + offset
        cands.append(pos.mag())
    if lo <= 0.0 <= hi:
        cands.append(offset.mag())
    return float(rp.add_ru(np.float64(max(cands)), np.float64(eta)))


def _linearize_mixed(a0, row, S, lo, hi) -> ReluLinearization:
    tau, M, c, D_plus, D_minus, b0, b_new = _relu_block(a0, S)
    committed = c * row
    br_lo, br_hi = rp.i_scale(np.float64(c), row, row)
    dev = np.maximum(rp.sub_ru(br_hi, committed), rp.sub_ru(committed, br_lo))
    eta = float(rp.abs_sum_ru(dev)) if row.size else 0.0
    applied = max(b_new, _rigorous_sup(a0, c, b0, lo, hi, eta))
    return ReluLinearization(S, M, tau, c, D_plus, D_minus, b0, b_new, applied)


def relu_linearization(a0: float, row: np.ndarray) -> ReluLinearization | None:
    """Coefficient block for a form with the given center and coefficients.

    Returns None when the enclosed range has definite sign (no
    linearization is performed there).
    """
    row = np.asarray(row, dtype=np.float64)
    S = float(rp.abs_sum_ru(row)) if row.size else 0.0
    lo = float(rp.sub_rd(np.float64(a0), np.float64(S)))
    hi = float(rp.add_ru(np.float64(a0), np.float64(S)))
    if lo >= 0.0 or hi <= 0.0:
        return None
    return _linearize_mixed(a0, row, S, lo, hi)


def _relu_row(a0: float, row: np.ndarray, S=None, lo=None, hi=None):
    """Returns (kind, new_center, new_row, fresh_coeff, linearization)."""
    if S is None:
        S = float(rp.abs_sum_ru(row)) if row.size else 0.0
        lo = float(rp.sub_rd(np.float64(a0), np.float64(S)))
        hi = float(rp.add_ru(np.float64(a0), np.float64(S)))
    if lo >= 0.0:
        return "pos", a0, row, 0.0, None
    if hi <= 0.0:
        return "neg", 0.0, np.zeros_like(row), 0.0, None
    lin = _linearize_mixed(a0, row, S, lo, hi)
    return "mixed", lin.b0, lin.c * row, lin.b_new_applied, lin


def aa_relu_scalar(form: AffineForm, ctx: SymbolContext) -> AffineForm:
    """ReLU of a single affine form; mixed ranges gain one fresh symbol."""
    ids = sorted(form.coeffs)
    row = np.array([form.coeffs[i] for i in ids], dtype=np.float64)
    kind, center, new_row, fresh, _ = _relu_row(form.center, row)
    coeffs = {i: v for i, v in zip(ids, new_row)}
    if kind == "mixed" and fresh > 0.0:
        coeffs[ctx.fresh("relu")] = fresh
    return AffineForm(center, coeffs)


def _relu_vector(v: AffineVector) -> AffineVector:
    centers = v.centers.copy()
    coeffs = v.coeffs.copy()
    if v.num_symbols:
        S_all = rp.abs_sum_ru(v.coeffs, axis=1)
    else:
        S_all = np.zeros(v.dim)
    lo_all = rp.sub_rd(v.centers, S_all)
    hi_all = rp.add_ru(v.centers, S_all)
    rows = []
    freshes = []
    for i in range(v.dim):
        kind, center, new_row, fresh, _ = _relu_row(
            v.centers[i], v.coeffs[i], float(S_all[i]),
            float(lo_all[i]), float(hi_all[i]))
        centers[i] = center
        coeffs[i] = new_row
        if kind == "mixed" and fresh > 0.0:
            rows.append(i)
            freshes.append(fresh)
    out = AffineVector(centers, v.symbols, coeffs, v.ctx)
    return out.append_columns(rows, freshes, "relu")


# ---------------------------------------------------------------------------
# softmax
# ---------------------------------------------------------------------------

def aa_softmax(v: AffineVector, ctx: SymbolContext) -> AffineVector:
    """Softmax linearized at the centers, second-order error per output.

    The fresh coefficient also absorbs the commit error of the float center
    softmax(x) and of the float Jacobian product J(x) @ L.
    """
    if v.dim < 2:
        raise ValidationError("softmax needs at least 2 entries")
    x = v.centers
    K = v.coeffs
    enc = smb.SoftmaxEnclosures.from_affine(x, K)
    w = rp.abs_sum_ru(K, axis=1) if v.num_symbols else np.zeros(v.dim)
    e_taylor = enc.taylor_errors(w)
    x0, J, s_at_x, (j_lo, j_hi) = smb.commit_point_linearization(x)
    if v.num_symbols:
        newK = J @ K
        enc_lo, enc_hi = rp.i_matmul(j_lo, j_hi, K, K)
        devK = np.maximum(rp.sub_ru(enc_hi, newK), rp.sub_ru(newK, enc_lo))
        e_lin = rp.abs_sum_ru(devK, axis=1)
    else:
        newK = np.zeros((v.dim, 0))
        e_lin = np.zeros(v.dim)
    e_cen = np.array([max(rp.sub_ru(np.float64(s.hi), np.float64(x0[i])),
                          rp.sub_ru(np.float64(x0[i]), np.float64(s.lo)))
                      for i, s in enumerate(s_at_x)])
    e = rp.add_ru(rp.add_ru(e_taylor, np.maximum(e_cen, 0.0)), e_lin)
    out = AffineVector(x0, v.symbols, newK, v.ctx)
    rows = np.nonzero(e > 0.0)[0]
    return out.append_columns(rows, e[rows], "softmax")


# ---------------------------------------------------------------------------
# condensation
# ---------------------------------------------------------------------------

def aa_condense(v: AffineVector, budget: int) -> AffineVector:
    """Collapse the smallest symbols into one fresh symbol per coordinate.

    Symbols are ranked by total absolute coefficient across entries; enough
    smallest ones are folded so the result has at most ``budget`` symbols.
    Per-coordinate ranges never shrink.
    """
    if budget < v.dim:
        raise ValidationError("condense budget must be at least the vector dim")
    if v.num_symbols <= budget:
        return v
    totals = np.abs(v.coeffs).sum(axis=0)
    keep_count = budget - v.dim
    order = np.argsort(totals, kind="stable")
    drop = np.sort(order[: v.num_symbols - keep_count])
    keep = np.sort(order[v.num_symbols - keep_count:])
    dropped_mass = rp.abs_sum_ru(v.coeffs[:, drop], axis=1)
    kept = AffineVector(v.centers, [v.symbols[j] for j in keep],
                        v.coeffs[:, keep], v.ctx)
    rows = np.nonzero(dropped_mass > 0.0)[0]
    return kept.append_columns(rows, dropped_mass[rows], "condense")


# ---------------------------------------------------------------------------
# forward driver
# ---------------------------------------------------------------------------

def aa_forward(spec: NetworkSpec, region: InputRegion,
               with_softmax: bool = True,
               condense_budget: int | None = None,
               collect_layers: list | None = None) -> BoundReport:
    if region.dim != spec.input_dim:
        raise ValidationError(
            f"region dim {region.dim} does not match network input {spec.input_dim}")
    t0 = time.perf_counter()
    ctx = SymbolContext()
    v = AffineVector.from_region(region, ctx)
    applied_softmax = False
    for layer in spec.propagation_layers(with_softmax):
        if isinstance(layer, Dense):
            v = aa_affine(layer.W, layer.b, v)
        elif isinstance(layer, ReLU):
            v = _relu_vector(v)
        elif isinstance(layer, Softmax):
            v = aa_softmax(v, ctx)
            applied_softmax = True
        elif isinstance(layer, Conv2D):
            raise ValidationError("conv layers must be lowered before propagation")
        if condense_budget is not None:
            v = aa_condense(v, max(condense_budget, v.dim))
        if collect_layers is not None:
            box = v.ranges()
            collect_layers.append(box.intersect_box(0.0, 1.0)
                                  if applied_softmax else box)
    box = v.ranges()
    if applied_softmax:
        box = box.intersect_box(0.0, 1.0)
    return BoundReport(METHOD_AA, box, wall_time=time.perf_counter() - t0,
                       metadata={"symbols": ctx.count})
