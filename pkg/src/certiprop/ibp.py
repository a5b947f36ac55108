"""Classical interval bound propagation (the comparison baseline).

The affine step uses the mid/rad form W*mid + b +- |W|*rad, which is the
optimal per-layer box for an interval input, evaluated with outward rounding
throughout.
"""

from __future__ import annotations

import time

import numpy as np

from . import roundops as rp
from .errors import ValidationError
from .intervals import Interval, IntervalVector
from .network import Conv2D, Dense, NetworkSpec, InputRegion, ReLU, Softmax
from .report import METHOD_IBP, BoundReport

__all__ = ["ibp_affine", "ibp_relu", "ibp_softmax", "ibp_forward"]


def ibp_affine(W, b, x: IntervalVector) -> IntervalVector:
    """Optimal interval image of an affine map: W*mid + b +- |W|*rad."""
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if W.shape[1] != x.dim:
        raise ValidationError(
            f"affine layer expects input dim {W.shape[1]}, got {x.dim}")
    m = x.mid()
    r = x.rad()
    mid_lo, mid_hi = rp.i_matvec_point(W, m, m)
    mid_lo = rp.add_rd(mid_lo, b)
    mid_hi = rp.add_ru(mid_hi, b)
    _, rad_hi = rp.i_matvec_point(np.abs(W), r, r)
    return IntervalVector(rp.sub_rd(mid_lo, rad_hi), rp.add_ru(mid_hi, rad_hi))


def ibp_relu(x: IntervalVector) -> IntervalVector:
    """ReLU([lo, hi]) = [ReLU(lo), ReLU(hi)], exact (no rounding needed)."""
    return IntervalVector(np.maximum(x.lo, 0.0), np.maximum(x.hi, 0.0))


def ibp_softmax(x: IntervalVector) -> IntervalVector:
    """Componentwise monotone softmax bound with a max-magnitude shift.

    s_i is increasing in z_i and decreasing in every z_j (j != i), so the
    true per-coordinate range is attained at the two opposite corners; both
    corner values are evaluated in interval arithmetic after shifting all
    entries by R = max |z| for stability.
    """
    m = x.dim
    shift = float(np.max(x.mag())) if m else 0.0
    los = np.empty(m)
    his = np.empty(m)
    ivs = [x[i] - shift for i in range(m)]
    for i in range(m):
        num_lo = Interval(ivs[i].lo).exp()
        den_lo = num_lo
        for j in range(m):
            if j != i:
                den_lo = den_lo + Interval(ivs[j].hi).exp()
        num_hi = Interval(ivs[i].hi).exp()
        den_hi = num_hi
        for j in range(m):
            if j != i:
                den_hi = den_hi + Interval(ivs[j].lo).exp()
        los[i] = max(0.0, (num_lo / den_lo).lo)
        his[i] = min(1.0, (num_hi / den_hi).hi)
    return IntervalVector(los, his)


def ibp_forward(spec: NetworkSpec, region: InputRegion,
                with_softmax: bool = True,
                collect_layers: list | None = None) -> BoundReport:
    """Layer-by-layer IBP over the input box (the naive iterated approach)."""
    if region.dim != spec.input_dim:
        raise ValidationError(
            f"region dim {region.dim} does not match network input {spec.input_dim}")
    t0 = time.perf_counter()
    box = IntervalVector.from_center_radius(region.center, region.radius)
    for layer in spec.propagation_layers(with_softmax):
        if isinstance(layer, Dense):
            box = ibp_affine(layer.W, layer.b, box)
        elif isinstance(layer, ReLU):
            box = ibp_relu(box)
        elif isinstance(layer, Softmax):
            box = ibp_softmax(box)
        elif isinstance(layer, Conv2D):
            raise ValidationError("conv layers must be lowered before propagation")
        if collect_layers is not None:
            collect_layers.append(box)
    return BoundReport(METHOD_IBP, box, wall_time=time.perf_counter() - t0)
