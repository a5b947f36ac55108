"""Experiment harness: wrapping growth, sphere-moment statistics,
decision-boundary sweeps and masked-input variants.

Trials and grid points parallelize over a thread pool; every task derives
its own counter-based generator from (seed, indices) and results are reduced
in index order, so numbers are identical for any thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .affine import aa_forward
from .doubleton import db_forward
from .errors import ValidationError
from .ibp import ibp_forward
from .network import Dense, NetworkSpec, InputRegion, eval_point
from .oracle import lb_sample, philox_rng
from .report import metadata_comment

__all__ = [
    "haar_orthogonal", "run_wrapping", "WrappingStats",
    "lemma_e_closed", "lemma_v_closed", "lemma_stats", "LemmaStats",
    "boundary_points", "run_sweep", "SweepResult", "mask_inputs",
    "write_wrapping_csv", "write_lemma_csv", "write_sweep_csv", "run_indexed",
]

_EXACT_GAMMA_LIMIT = 4096


def run_indexed(fn, items, threads: int | None = None) -> list:
    """Apply fn over items on a thread pool, results in item order."""
    if threads is not None and threads < 1:
        raise ValidationError("thread count must be positive")
    if threads == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Haar-random orthogonal matrices
# ---------------------------------------------------------------------------

def _haar(n: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def haar_orthogonal(n: int, seed: int) -> np.ndarray:
    """Orthogonal matrix from the Haar measure (QR with sign-fixed diagonal).

    Without fixing the signs of R's diagonal the distribution of plain QR
    output is not rotation invariant.
    """
    if n < 1:
        raise ValidationError("dimension must be positive")
    return _haar(n, philox_rng(seed))


# ---------------------------------------------------------------------------
# wrapping growth
# ---------------------------------------------------------------------------

@dataclass
class WrappingStats:
    """Per-layer growth of method widths on orthogonal stacks.

    ``plain_ratio`` holds mean consecutive hull-width ratios per method;
    ``per_layer_ratio`` the same after dividing out the exact optimal hull
    (the per-layer wrapping factor: ~sqrt(2n/pi) for IBP beyond the first
    layer, 1 for methods that are exact through affine maps).
    """
    n: int
    k: int
    trials: int
    per_layer_ratio: dict
    plain_ratio: dict
    predicted_ratio: float
    E_R_closed: float
    V_R_closed: float | None
    rows: list = field(default_factory=list)


_WRAP_METHODS = {
    "ibp": lambda spec, region, coll: ibp_forward(spec, region, collect_layers=coll),
    "aa": lambda spec, region, coll: aa_forward(spec, region, collect_layers=coll),
    "da": lambda spec, region, coll: db_forward(spec, region, collect_layers=coll),
}


def run_wrapping(n: int, k: int, trials: int, seed: int = 0,
                 methods: tuple = ("ibp", "aa", "da"),
                 threads: int | None = None) -> WrappingStats:
    """Propagate [-1,1]^n through k random orthogonal layers, many trials."""
    if n < 2 or k < 1 or trials < 1:
        raise ValidationError("need n >= 2, k >= 1, trials >= 1")
    for m in methods:
        if m not in _WRAP_METHODS:
            raise ValidationError(f"unknown wrapping method {m!r}")

    def one_trial(t: int):
        rng = philox_rng(seed, (t,))
        us = [_haar(n, rng) for _ in range(k)]
        spec = NetworkSpec(tuple(Dense(u, np.zeros(n)) for u in us), n)
        region = InputRegion.from_eps(np.zeros(n), 1.0)
        prod = np.eye(n, dtype=np.longdouble)
        opt_w = []
        for u in us:
            prod = u.astype(np.longdouble) @ prod
            opt_w.append(float(2.0 * np.abs(prod).sum(axis=1).mean()))
        widths = {}
        for m in methods:
            boxes = []
            _WRAP_METHODS[m](spec, region, boxes)
            widths[m] = [float(b.widths().mean()) for b in boxes]
        return opt_w, widths

    results = run_indexed(one_trial, list(range(trials)), threads)

    rows = []
    plain = {m: np.zeros((trials, k)) for m in methods}
    excess = {m: np.zeros((trials, k)) for m in methods}
    for t, (opt_w, widths) in enumerate(results):
        prev_opt = 2.0
        for i in range(k):
            rows.append((n, k, t, i + 1, "opt", opt_w[i] / prev_opt))
            prev_opt = opt_w[i]
        for m in methods:
            w = [2.0] + widths[m]
            o = [2.0] + opt_w
            for i in range(k):
                plain[m][t, i] = w[i + 1] / w[i]
                excess[m][t, i] = (w[i + 1] / o[i + 1]) / (w[i] / o[i])
                rows.append((n, k, t, i + 1, m, plain[m][t, i]))

    e_closed = lemma_e_closed(n)
    v_closed = lemma_v_closed(n) if n >= 3 else None
    return WrappingStats(
        n=n, k=k, trials=trials,
        per_layer_ratio={m: excess[m].mean(axis=0) for m in methods},
        plain_ratio={m: plain[m].mean(axis=0) for m in methods},
        predicted_ratio=math.sqrt(2.0 * n / math.pi),
        E_R_closed=e_closed, V_R_closed=v_closed, rows=rows)


# ---------------------------------------------------------------------------
# sphere moments (closed forms and Monte Carlo)
# ---------------------------------------------------------------------------

def lemma_e_closed(n: int) -> float:
    """E(R) = (2n/(n-1)) Gamma(n/2) / (sqrt(pi) Gamma((n-1)/2)).

    The sqrt(pi) always cancels against the half-integer Gamma, leaving a
    rational number (n odd) or a rational divided by pi (n even); small n
    are evaluated exactly so e.g. n=3 yields exactly 1.5.
    """
    if n < 2:
        if n == 1:
            return 1.0
        raise ValidationError("dimension must be at least 1")
    if n <= _EXACT_GAMMA_LIMIT:
        if n % 2:
            m = (n - 1) // 2
            frac = Fraction(2 * n, n - 1) * Fraction(
                math.factorial(2 * m),
                4 ** m * math.factorial(m) * math.factorial(m - 1))
            return float(frac)
        m = n // 2
        frac = Fraction(2 * n, n - 1) * Fraction(
            math.factorial(m - 1) * 4 ** (m - 1) * math.factorial(m - 1),
            math.factorial(2 * (m - 1)))
        return float(frac) / math.pi
    log_e = (math.log(2.0 * n / (n - 1.0)) + math.lgamma(n / 2.0)
             - 0.5 * math.log(math.pi) - math.lgamma((n - 1) / 2.0))
    return math.exp(log_e)


def lemma_v_closed(n: int) -> float:
    """V(R) = E(R^2) - E(R)^2 with E(R^2) = 1 + 2(n-1)/pi.

    E(R^2) = 1 + n(n-1) E|V_1 V_2| and the sphere integral gives
    E|V_1 V_2| = (4/(n(n-2))) * S_{n-3}/S_{n-1} = 2/(pi n), hence
    1 + 2(n-1)/pi; Monte Carlo confirms this (and refutes the commonly
    quoted (2/pi)(n - 1/(n-2)) variant, which agrees only at n = 3).
    """
    if n < 3:
        raise ValidationError("variance closed form needs n >= 3")
    er2 = 1.0 + 2.0 * (n - 1) / math.pi
    e = lemma_e_closed(n)
    return er2 - e * e


@dataclass
class LemmaStats:
    n: int
    n_samples: int
    E_hat: float
    V_hat: float
    E_closed: float
    V_closed: float | None
    se_E: float
    se_V: float


def lemma_stats(n: int, n_samples: int, seed: int = 0) -> LemmaStats:
    """Monte-Carlo moments of R = sum |V_i| on the unit sphere vs closed forms."""
    if n < 2:
        raise ValidationError("dimension must be at least 2")
    if n_samples < 2:
        raise ValidationError("need at least 2 samples")
    rng = philox_rng(seed, (0,))
    g = rng.standard_normal((n_samples, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = np.abs(g).sum(axis=1)
    e_hat = float(r.mean())
    v_hat = float(r.var(ddof=1))
    se_e = float(r.std(ddof=1) / math.sqrt(n_samples))
    m4 = float(((r - e_hat) ** 4).mean())
    se_v = math.sqrt(max(m4 - v_hat ** 2, 0.0) / n_samples)
    return LemmaStats(n=n, n_samples=n_samples, E_hat=e_hat, V_hat=v_hat,
                      E_closed=lemma_e_closed(n),
                      V_closed=lemma_v_closed(n) if n >= 3 else None,
                      se_E=se_e, se_V=se_v)


# ---------------------------------------------------------------------------
# decision-boundary points and sweeps
# ---------------------------------------------------------------------------

def boundary_points(spec: NetworkSpec, class_reps: list, seed: int = 0,
                    tol: float = 1e-6):
    """Points near the decision boundary on segments between class reps.

    One representative is drawn as the base; every segment to another
    representative whose predicted class differs is bisected on the argmax
    flip until the parameter bracket is below tol.  Returns (points,
    skipped_indices); segments with matching classes are skipped.
    """
    reps = [np.asarray(p, dtype=np.float64) for p in class_reps]
    if len(reps) < 2:
        raise ValidationError("need at least 2 class representatives")
    classes = [int(np.argmax(eval_point(spec, p, with_softmax=False))) for p in reps]
    rng = philox_rng(seed, (1,))
    base = int(rng.integers(len(reps)))
    points = []
    skipped = []
    for j in range(len(reps)):
        if j == base:
            continue
        if classes[j] == classes[base]:
            skipped.append(j)
            continue
        lo_t, hi_t = 0.0, 1.0
        while hi_t - lo_t > tol:
            mid_t = 0.5 * (lo_t + hi_t)
            p = (1.0 - mid_t) * reps[base] + mid_t * reps[j]
            if int(np.argmax(eval_point(spec, p, with_softmax=False))) == classes[base]:
                lo_t = mid_t
            else:
                hi_t = mid_t
        t = 0.5 * (lo_t + hi_t)
        points.append((1.0 - t) * reps[base] + t * reps[j])
    return points, skipped


@dataclass
class SweepResult:
    eps_grid: list
    methods: list
    means: dict           # method -> np.ndarray over eps grid
    metadata: dict = field(default_factory=dict)


def run_sweep(spec: NetworkSpec, points: list, eps_grid: list, methods: list,
              n_samples: int = 1000, seed: int = 0, with_softmax: bool = False,
              db_strategy: str = "hybrid",
              threads: int | None = None) -> SweepResult:
    """Mean (over points) of the max output width, per eps and method."""
    if not len(eps_grid):
        raise ValidationError("empty eps grid")
    if not len(points):
        raise ValidationError("no evaluation points")
    known = {"ibp", "aa", "da", "lb"}
    for m in methods:
        if m not in known:
            raise ValidationError(f"unknown sweep method {m!r}")

    def max_width(method, region, ei, pi):
        if method == "ibp":
            rep = ibp_forward(spec, region, with_softmax)
        elif method == "aa":
            rep = aa_forward(spec, region, with_softmax)
        elif method == "da":
            rep = db_forward(spec, region, db_strategy, with_softmax)
        else:
            rep = lb_sample(spec, region, n_samples, seed, with_softmax,
                            stream=(ei, pi))
        return rep.max_width

    tasks = [(ei, pi) for ei in range(len(eps_grid)) for pi in range(len(points))]

    def one(task):
        ei, pi = task
        region = InputRegion.from_eps(points[pi], eps_grid[ei])
        return {m: max_width(m, region, ei, pi) for m in methods}

    results = run_indexed(one, tasks, threads)
    means = {m: np.zeros(len(eps_grid)) for m in methods}
    for (ei, _pi), res in zip(tasks, results):
        for m in methods:
            means[m][ei] += res[m]
    for m in methods:
        means[m] /= len(points)
    return SweepResult(list(eps_grid), list(methods), means)


def mask_inputs(points: list, fraction: float, seed: int = 0) -> list:
    """Zero a deterministic per-seed subset of coordinates of each point."""
    if not 0.0 <= fraction <= 1.0:
        raise ValidationError("mask fraction must be in [0, 1]")
    out = []
    for i, p in enumerate(points):
        p = np.asarray(p, dtype=np.float64).copy()
        count = int(round(fraction * p.shape[0]))
        idx = philox_rng(seed, (2, i)).permutation(p.shape[0])[:count]
        p[idx] = 0.0
        out.append(p)
    return out


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

def _write_csv(path, metadata: dict, header: str, rows: list) -> None:
    lines = [metadata_comment(metadata), header]
    lines += [",".join(str(v) if not isinstance(v, float) else repr(v) for v in row)
              for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def write_wrapping_csv(stats: WrappingStats, path, metadata: dict) -> None:
    _write_csv(path, metadata, "n,k,trial,layer,method,width_ratio", stats.rows)


def write_lemma_csv(stats_list: list, path, metadata: dict) -> None:
    rows = [(s.n, s.E_hat, s.E_closed, s.V_hat,
             s.V_closed if s.V_closed is not None else "",
             s.se_E) for s in stats_list]
    _write_csv(path, metadata, "n,E_hat,E_closed,V_hat,V_closed,stderr", rows)


def write_sweep_csv(result: SweepResult, path, metadata: dict) -> None:
    rows = []
    for ei, eps in enumerate(result.eps_grid):
        for m in result.methods:
            rows.append((repr(float(eps)), m, repr(float(result.means[m][ei]))))
    _write_csv(path, metadata, "eps,method,mean_max_diameter", rows)
