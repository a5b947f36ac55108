"""Non-certified reference bounds: sampled lower bound and exact hulls.

The lower bound hulls forward images of points sampled uniformly in the
input box with a counter-based generator (Philox), so results are
reproducible across platforms and thread counts.  Exact hulls for
linear-only networks come from the composed product map evaluated in
extended precision (80-bit long double) or exact rationals.
"""

from __future__ import annotations

import itertools
import time
from fractions import Fraction

import numpy as np

from .errors import ValidationError
from .intervals import IntervalVector
from .network import NetworkSpec, InputRegion, eval_batch, lower_conv
from .report import METHOD_EXACT, METHOD_LB, BoundReport

__all__ = ["lb_sample", "exact_hull_linear", "exact_hull_corners",
           "philox_rng", "corner_hull_fraction", "product_hull_fraction"]


def philox_rng(seed: int, stream: tuple = ()) -> np.random.Generator:
    """Counter-based generator; (seed, stream) fully determines the output."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(v) for v in stream))
    return np.random.Generator(np.random.Philox(ss))


def lb_sample(spec: NetworkSpec, region: InputRegion, n_samples: int = 1000,
              seed: int = 0, with_softmax: bool = True,
              stream: tuple = ()) -> BoundReport:
    """Hull of forward images of uniform samples (an under-approximation)."""
    if n_samples < 1:
        raise ValidationError("n_samples must be at least 1")
    if region.dim != spec.input_dim:
        raise ValidationError(
            f"region dim {region.dim} does not match network input {spec.input_dim}")
    t0 = time.perf_counter()
    rng = philox_rng(seed, stream)
    u = rng.random((n_samples, region.dim))
    pts = region.center + (2.0 * u - 1.0) * region.radius
    outs = eval_batch(spec, pts, with_softmax)
    box = IntervalVector(outs.min(axis=0), outs.max(axis=0))
    return BoundReport(METHOD_LB, box, wall_time=time.perf_counter() - t0,
                       metadata={"seed": seed, "samples": n_samples})


def _require_linear(spec: NetworkSpec) -> NetworkSpec:
    if not spec.is_linear_only:
        raise ValidationError("exact hulls are available for linear-only networks")
    return lower_conv(spec) if spec.has_conv else spec


def _compose_longdouble(spec: NetworkSpec):
    W = np.eye(spec.input_dim, dtype=np.longdouble)
    b = np.zeros(spec.input_dim, dtype=np.longdouble)
    for layer in spec.layers:
        Wl = layer.W.astype(np.longdouble)
        b = Wl @ b + layer.b.astype(np.longdouble)
        W = Wl @ W
    return W, b


def exact_hull_linear(spec: NetworkSpec, region: InputRegion) -> BoundReport:
    """Optimal box of a linear-only network from the composed product map.

    mid = W_total c + b_total and rad = |W_total| r, evaluated in 80-bit
    long double; endpoints are rounded two ulps outward after conversion,
    which dominates the extended-precision accumulation error at the sizes
    this artifact handles.
    """
    spec = _require_linear(spec)
    if region.dim != spec.input_dim:
        raise ValidationError("region dim does not match network input")
    t0 = time.perf_counter()
    W, b = _compose_longdouble(spec)
    mid = W @ region.center.astype(np.longdouble) + b
    rad = np.abs(W) @ region.radius.astype(np.longdouble)
    lo = (mid - rad).astype(np.float64)
    hi = (mid + rad).astype(np.float64)
    for _ in range(2):
        lo = np.nextafter(lo, -np.inf)
        hi = np.nextafter(hi, np.inf)
    return BoundReport(METHOD_EXACT, IntervalVector(lo, hi),
                       wall_time=time.perf_counter() - t0)


def product_hull_fraction(spec: NetworkSpec, region: InputRegion):
    """Exact rational (mid, rad) of the composed linear map."""
    spec = _require_linear(spec)
    n = spec.input_dim
    W = [[Fraction(1) if i == j else Fraction(0) for j in range(n)] for i in range(n)]
    b = [Fraction(0)] * n
    for layer in spec.layers:
        Wl = [[Fraction(v) for v in row] for row in layer.W]
        bl = [Fraction(v) for v in layer.b]
        b = [sum((Wl[i][j] * b[j] for j in range(len(b))), bl[i])
             for i in range(len(Wl))]
        W = [[sum(Wl[i][k] * W[k][j] for k in range(len(W)))
              for j in range(n)] for i in range(len(Wl))]
    center = [Fraction(v) for v in region.center]
    radius = [Fraction(v) for v in region.radius]
    mid = [sum(W[i][j] * center[j] for j in range(n)) + b[i] for i in range(len(W))]
    rad = [sum(abs(W[i][j]) * radius[j] for j in range(n)) for i in range(len(W))]
    return mid, rad


def corner_hull_fraction(spec: NetworkSpec, region: InputRegion):
    """Exact rational hull over all 2^dim input-box corners (linear nets)."""
    from .network import eval_rational

    spec = _require_linear(spec)
    n = region.dim
    if n > 20:
        raise ValidationError("corner enumeration limited to dim <= 20")
    center = [Fraction(v) for v in region.center]
    radius = [Fraction(v) for v in region.radius]
    los = None
    his = None
    for signs in itertools.product((-1, 1), repeat=n):
        x = [center[i] + signs[i] * radius[i] for i in range(n)]
        y = eval_rational(spec, x)
        if los is None:
            los = list(y)
            his = list(y)
        else:
            los = [min(a, v) for a, v in zip(los, y)]
            his = [max(a, v) for a, v in zip(his, y)]
    return los, his


def exact_hull_corners(spec: NetworkSpec, region: InputRegion) -> BoundReport:
    """Brute-force corner hull (exact rationals, outward-rounded endpoints)."""
    t0 = time.perf_counter()
    los, his = corner_hull_fraction(spec, region)
    lo = np.nextafter(np.array([float(v) for v in los]), -np.inf)
    hi = np.nextafter(np.array([float(v) for v in his]), np.inf)
    return BoundReport(METHOD_EXACT, IntervalVector(lo, hi),
                       wall_time=time.perf_counter() - t0)
