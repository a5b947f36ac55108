"""Acceptance suite: one test per criterion, with pinned tolerances.

Each test prints a PASS/FAIL line.  One check, the variance asymptote
against the commonly quoted 1 + 1/pi, is expected to fail: that constant
contradicts the exact variance formula, which Monte Carlo confirms (see the
corrected-asymptote companion test).
"""

import json
import math
import time
from pathlib import Path

import numpy as np

from conftest import random_linear_net, random_relu_net
from certiprop.affine import SymbolContext, AffineVector, aa_forward, aa_softmax, relu_linearization
from certiprop.cli import main as cli_main
from certiprop.doubleton import STRATEGIES, db_forward
from certiprop.experiments import (boundary_points, haar_orthogonal,
                                   lemma_e_closed, lemma_stats, lemma_v_closed,
                                   run_sweep, run_wrapping)
from certiprop.ibp import ibp_forward
from certiprop.network import Dense, NetworkSpec, InputRegion
from certiprop.oracle import exact_hull_linear, lb_sample


def report(name: str, ok: bool, detail: str = ""):
    # visible with pytest -s (how the README says to run this module)
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else ""),
          flush=True)
    return ok


def test_criterion_1_wrapping_growth():
    """n=64, k=5, >=100 trials: IBP grows ~sqrt(2n/pi) per layer, AA/DA do not."""
    t0 = time.perf_counter()
    stats = run_wrapping(64, 5, 100, seed=0)
    elapsed = time.perf_counter() - t0
    pred = math.sqrt(2 * 64 / math.pi)
    ibp_mean = float(np.mean(stats.plain_ratio["ibp"]))
    aa_dev = float(np.max(np.abs(stats.per_layer_ratio["aa"] - 1.0)))
    da_dev = float(np.max(np.abs(stats.per_layer_ratio["da"] - 1.0)))
    ok = (abs(ibp_mean - pred) < 0.1 * pred and aa_dev < 1e-6 and da_dev < 1e-6
          and elapsed < 60.0)
    assert report("wrapping growth law (n=64, k=5, 100 trials)", ok,
                  f"ibp={ibp_mean:.3f} vs {pred:.3f}, aa_dev={aa_dev:.2e}, "
                  f"da_dev={da_dev:.2e}, {elapsed:.1f}s")


def test_criterion_2_moments():
    """E(3)=1.5 exactly; Monte Carlo matches closed E and V within 3 s.e."""
    t0 = time.perf_counter()
    ok = lemma_e_closed(3) == 1.5
    for n in (3, 10, 100):
        s = lemma_stats(n, 100000, seed=0)
        ok &= abs(s.E_hat - s.E_closed) < 3 * s.se_E
        ok &= abs(s.V_hat - s.V_closed) < 3 * s.se_V
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 30.0
    assert report("sphere moments: closed forms vs Monte Carlo", ok,
                  f"{elapsed:.1f}s")


def test_criterion_2_variance_asymptote_as_stated():
    """Check |V_closed - (1 + 1/pi)| < 2/n for n >= 50, as commonly quoted.

    Expected to fail: that asymptote contradicts the exact moment formulas
    it derives from; the true limit is 1 - 3/pi (Monte Carlo agrees with
    the exact V used here, see test_criterion_2_moments).
    """
    devs = {n: abs(lemma_v_closed(n) - (1 + 1 / math.pi)) for n in (50, 100, 1000)}
    ok = all(dev < 2.0 / n for n, dev in devs.items())
    report("variance asymptote as commonly quoted (known defect)", ok, str(devs))
    assert ok, (
        "unattainable as stated: V(R) -> 1 - 3/pi ~ 0.045 follows from the "
        f"exact moment formulas (deviations {devs})")


def test_criterion_2_variance_asymptote_corrected():
    """The exact V(R) does converge, to 1 - 3/pi, at the stated 2/n rate."""
    ok = all(abs(lemma_v_closed(n) - (1 - 3 / math.pi)) < 2.0 / n
             for n in (50, 100, 1000))
    assert report("variance asymptote, corrected constant 1 - 3/pi", ok)


def test_criterion_3_linear_exactness():
    """AA/DA equal the extended-precision hull on 50 linear nets; IBP wraps."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    ok = True
    worst = 0.0
    specs = []
    for _ in range(30):
        n_layers = int(rng.integers(3, 9))
        dims = [int(rng.integers(4, 65)) for _ in range(n_layers + 1)]
        specs.append(random_linear_net(rng, dims))
    ortho_specs = []
    for _ in range(20):
        n = int(rng.integers(8, 65))
        spec = NetworkSpec(tuple(
            Dense(haar_orthogonal(n, seed=int(rng.integers(2 ** 31))), np.zeros(n))
            for _ in range(5)), n)
        ortho_specs.append(spec)
        specs.append(spec)
    for spec in specs:
        region = InputRegion.from_eps(rng.normal(size=spec.input_dim), 0.1)
        exact = exact_hull_linear(spec, region).widths
        for rep in (aa_forward(spec, region), db_forward(spec, region)):
            rel = float(np.max(np.abs(rep.widths - exact) / exact))
            worst = max(worst, rel)
            ok &= rel <= 1e-9
    wrapped = 0
    for spec in ortho_specs:
        region = InputRegion.from_eps(np.zeros(spec.input_dim), 1.0)
        ratio = ibp_forward(spec, region).max_width / \
            exact_hull_linear(spec, region).max_width
        wrapped += ratio > 2.0
    elapsed = time.perf_counter() - t0
    ok &= wrapped >= 0.9 * len(ortho_specs)
    ok &= elapsed < 60.0
    assert report("linear exactness (50 nets) and IBP wrapping ratio", ok,
                  f"worst rel dev {worst:.2e}, wrapped {wrapped}/20, {elapsed:.1f}s")


def test_criterion_4_soundness_sweep():
    """100 random nets x 10 regions x 1000 samples: LB inside every box."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    violations = 0
    checked = 0
    for net_i in range(100):
        depth = int(rng.integers(2, 5))
        dims = [int(rng.integers(3, 13)) for _ in range(depth + 1)]
        spec = random_relu_net(rng, dims, softmax=net_i % 3 == 0)
        for reg_i in range(10):
            center = rng.normal(size=dims[0]) * 0.5
            region = InputRegion.from_eps(center, float(rng.uniform(1e-3, 0.2)))
            lb = lb_sample(spec, region, 1000, seed=net_i * 100 + reg_i)
            boxes = [ibp_forward(spec, region).box, aa_forward(spec, region).box]
            boxes += [db_forward(spec, region, s).box for s in STRATEGIES]
            checked += len(boxes)
            violations += sum(not lb.box.is_subset(b) for b in boxes)
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 300.0
    assert report("soundness sweep (1000 regions, all methods/strategies)", ok,
                  f"{checked} containments, {violations} violations, {elapsed:.0f}s")


def test_criterion_5_relu_enclosure():
    """1000 random mixed-sign forms: grid ReLU values within B(t) +- b_new."""
    t0 = time.perf_counter()
    lin = relu_linearization(0.0, np.array([1.0]))
    ok = (lin.b0 == 0.375 and lin.c == 0.25 and lin.b_new == 0.375)
    rng = np.random.default_rng(11)
    grids = {n: np.stack(np.meshgrid(*([np.linspace(-1, 1, 101)] * n)),
                         axis=-1).reshape(-1, n) for n in (1, 2, 3)}
    count = 0
    while count < 1000:
        n = int(rng.integers(1, 4))
        row = rng.normal(size=n)
        s = float(np.abs(row).sum())
        a0 = float(rng.uniform(-0.8, 0.8)) * s
        lin = relu_linearization(a0, row)
        if lin is None:
            continue
        count += 1
        a_vals = a0 + grids[n] @ row
        relu_vals = np.maximum(a_vals, 0.0)
        approx = lin.b0 + lin.c * (a_vals - a0)
        slack = 8e-16 * max(1.0, s)  # grid-oracle float drift
        ok &= bool(np.all(np.abs(relu_vals - approx)
                          <= lin.b_new_applied + slack))
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60.0
    assert report("affine ReLU enclosure (1000 forms, dense grid)", ok,
                  f"{elapsed:.1f}s")


def test_criterion_6_softmax_enclosure():
    """200 random affine logit vectors: sampled softmax inside aa_softmax."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(13)
    ok = True
    for _ in range(200):
        m = int(rng.integers(2, 6))
        n = int(rng.integers(1, 4))
        x = rng.normal(size=m) * 2.0
        L = rng.normal(size=(m, n))
        L *= rng.uniform(0.2, 1.0) / np.maximum(np.abs(L).sum(axis=1, keepdims=True), 1e-9)
        ctx = SymbolContext()
        v = AffineVector(x, ctx.fresh_block(n), L, ctx)
        out = aa_softmax(v, ctx)
        box = out.ranges().intersect_box(0.0, 1.0)
        ts = rng.uniform(-1.0, 1.0, size=(10000, n))
        z = x[None, :] + ts @ L.T
        e = np.exp(z - z.max(axis=1, keepdims=True))
        vals = e / e.sum(axis=1, keepdims=True)
        ok &= bool(np.all(vals >= box.lo[None, :] - 1e-12)
                   and np.all(vals <= box.hi[None, :] + 1e-12))
        # dependency-reduced products never wider than direct after intersection
        from certiprop.softmax_bounds import SoftmaxEnclosures
        enc = SoftmaxEnclosures.from_affine(x, L)
        for i in range(m):
            for c in range(m):
                direct = enc.singles[i] * enc.singles[c]
                pr = enc.pair(i, c)
                ok &= pr.lo >= direct.lo - 1e-15 and pr.hi <= direct.hi + 1e-15
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 120.0
    assert report("softmax enclosure (200 cases, sampled oracle)", ok,
                  f"{elapsed:.1f}s")


def test_criterion_7_figure_reproduction(digits_mlp, digits_points):
    """Desk-scale boundary sweep: LB <= AA <= IBP, AA/IBP < 0.5 at 1e-2."""
    t0 = time.perf_counter()
    pts, _ = boundary_points(digits_mlp, digits_points, seed=0)
    grid = [1e-4, 1e-3, 1e-2, 1e-1]
    res = run_sweep(digits_mlp, pts, grid, ["ibp", "aa", "lb"],
                    n_samples=1000, seed=0, with_softmax=False)
    order = (np.all(res.means["lb"] <= res.means["aa"] + 1e-12)
             and np.all(res.means["aa"] <= res.means["ibp"] + 1e-12))
    ratio = float(res.means["aa"][2] / res.means["ibp"][2])
    elapsed = time.perf_counter() - t0
    ok = bool(order and ratio < 0.5)
    assert report("qualitative boundary sweep on digits MLP", ok,
                  f"LB<=AA<=IBP={order}, AA/IBP@1e-2={ratio:.4f}, {elapsed:.0f}s")


def test_criterion_8_determinism(tmp_path):
    """Identical flags+seed give byte-identical files, threads varied."""
    model = tmp_path / "m.json"
    rng = np.random.default_rng(3)
    w = rng.normal(size=(6, 4))
    doc = {"input_dim": 4, "layers": [
        {"type": "dense", "W": [[repr(float(v)) for v in r] for r in w],
         "b": ["0.01"] * 6},
        {"type": "relu"},
        {"type": "dense", "W": [[repr(float(v)) for v in r] for r in np.eye(6)],
         "b": ["0"] * 6},
        {"type": "softmax"}]}
    model.write_text(json.dumps(doc))
    region = tmp_path / "r.json"
    region.write_text(json.dumps({"center": [0.1, -0.2, 0.3, 0.0], "eps": 0.05}))
    points = tmp_path / "p.json"
    points.write_text(json.dumps([[0.1, -0.2, 0.3, 0.0]]))

    ok = True
    runs = [
        ["propagate", "--model", str(model), "--input", str(region),
         "--method", "lb", "--seed", "4", "--out", str(tmp_path / "a.csv")],
        ["compare", "--model", str(model), "--input", str(region), "--with-da",
         "--samples", "200", "--seed", "4", "--out", str(tmp_path / "b.csv")],
        ["wrapping", "--dim", "8", "--layers", "2", "--trials", "4", "--seed",
         "4", "--no-figure", "--out", str(tmp_path / "c.csv")],
        ["sweep", "--model", str(model), "--points", str(points), "--eps-grid",
         "1e-3,1e-2", "--methods", "ibp,aa,lb", "--samples", "100", "--seed",
         "4", "--no-figure", "--out", str(tmp_path / "d.csv")],
    ]
    for argv in runs:
        out = Path(argv[argv.index("--out") + 1])
        blobs = []
        for threads in ("1", "4"):
            assert cli_main(["--threads", threads] + argv) == 0
            blobs.append(out.read_bytes())
        ok &= blobs[0] == blobs[1]
    assert report("CLI byte determinism across repeated runs and threads", ok)
