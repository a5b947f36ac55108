"""Command-line entry point binding loaders, propagators and experiments.

Exit codes: 0 success, 2 validation error (bad flags, files, dimensions),
3 numeric failure.  Identical flags and seed produce byte-identical output
files regardless of --threads; wall-clock timings are embedded only with
--timing.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .affine import aa_forward
from .doubleton import STRATEGIES, db_forward
from .errors import NumericError, ValidationError
from .ibp import ibp_forward
from .network import InputRegion, load_network, load_region, lower_conv
from .oracle import lb_sample
from .report import write_multi_report, write_report
from . import experiments as exps

_METHODS = ("ibp", "aa", "da", "lb")


def _flags_metadata(args: argparse.Namespace) -> dict:
    # threads is excluded: it must not influence output bytes (determinism
    # across --threads is an acceptance requirement)
    skip = {"func", "timing", "threads"}
    out = {}
    for k, v in vars(args).items():
        if k in skip or v is None:
            continue
        out[k] = ",".join(str(x) for x in v) if isinstance(v, list) else str(v)
    return out


def _threads(args) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("CERTIPROP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"bad CERTIPROP_THREADS value {env!r}") from None
    return os.cpu_count()


def _load_model(args):
    spec = load_network(args.model)
    return lower_conv(spec) if spec.has_conv else spec


def _load_region(args) -> InputRegion:
    region = load_region(args.input)
    if args.eps is not None:
        region = InputRegion.from_eps(region.center, args.eps)
    return region


def _run_method(method, spec, region, args):
    soft = args.softmax == "on"
    if method == "ibp":
        return ibp_forward(spec, region, soft)
    if method == "aa":
        return aa_forward(spec, region, soft, args.condense_budget)
    if method == "da":
        return db_forward(spec, region, args.db_strategy, soft)
    return lb_sample(spec, region, args.samples, args.seed, soft)


def cmd_propagate(args) -> int:
    spec = _load_model(args)
    region = _load_region(args)
    report = _run_method(args.method, spec, region, args)
    report.metadata.update(_flags_metadata(args))
    write_report(report, args.out, with_timing=args.timing)
    print(f"{report.method} max_width={report.max_width!r} -> {args.out}",
          file=sys.stderr)
    return 0


def cmd_compare(args) -> int:
    spec = _load_model(args)
    region = _load_region(args)
    methods = ["ibp", "aa"] + (["da"] if args.with_da else []) + ["lb"]
    reports = [_run_method(m, spec, region, args) for m in methods]
    lb = reports[-1]
    checks = [(f"lb_subset_{r.method.lower()}", lb.box.is_subset(r.box))
              for r in reports[:-1]]
    write_multi_report(reports, args.out, _flags_metadata(args), checks,
                       with_timing=args.timing)
    for name, ok in checks:
        print(f"{name}: {'ok' if ok else 'VIOLATED'}", file=sys.stderr)
    return 0


def _figure_path(out) -> Path:
    return Path(out).with_suffix(".png")


def cmd_wrapping(args) -> int:
    methods = tuple(args.methods.split(","))
    stats = exps.run_wrapping(args.dim, args.layers, args.trials, args.seed,
                              methods, threads=_threads(args))
    meta = _flags_metadata(args)
    exps.write_wrapping_csv(stats, args.out, meta)
    if not args.no_figure:
        from .figures import render_wrapping
        render_wrapping(stats, _figure_path(args.out))
    for m in methods:
        mean_plain = float(np.mean(stats.plain_ratio[m]))
        mean_excess = float(np.mean(stats.per_layer_ratio[m]))
        print(f"{m}: mean width ratio {mean_plain:.4f}, "
              f"excess-over-optimal {mean_excess:.6f} "
              f"(predicted sqrt(2n/pi)={stats.predicted_ratio:.4f})",
              file=sys.stderr)
    return 0


def cmd_lemma_stats(args) -> int:
    dims = [int(v) for v in str(args.dim).split(",")]
    stats_list = [exps.lemma_stats(n, args.samples, args.seed) for n in dims]
    meta = _flags_metadata(args)
    exps.write_lemma_csv(stats_list, args.out, meta)
    if not args.no_figure:
        from .figures import render_lemma
        render_lemma(stats_list, _figure_path(args.out))
    for s in stats_list:
        print(f"n={s.n}: E_hat={s.E_hat:.6f} E_closed={s.E_closed:.6f} "
              f"V_hat={s.V_hat:.6f} V_closed={s.V_closed}", file=sys.stderr)
    return 0


def _load_points(path) -> list:
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"points file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"cannot parse {p}: {exc}") from None
    pts = doc["points"] if isinstance(doc, dict) else doc
    if not isinstance(pts, list) or not pts:
        raise ValidationError("points file must hold a nonempty list of vectors")
    return [np.asarray(v, dtype=np.float64) for v in pts]


def cmd_sweep(args) -> int:
    spec = _load_model(args)
    points = _load_points(args.points)
    if args.mask_fraction is not None:
        points = exps.mask_inputs(points, args.mask_fraction, args.seed)
    grid = [float(v) for v in args.eps_grid.split(",") if v.strip()]
    if not grid:
        raise ValidationError("empty eps grid")
    methods = [m for m in args.methods.split(",") if m]
    result = exps.run_sweep(spec, points, grid, methods, args.samples,
                            args.seed, args.softmax == "on",
                            args.db_strategy, threads=_threads(args))
    meta = _flags_metadata(args)
    exps.write_sweep_csv(result, args.out, meta)
    if not args.no_figure:
        from .figures import render_sweep
        render_sweep(result, _figure_path(args.out))
    for m in methods:
        print(f"{m}: {['%.3g' % v for v in result.means[m]]}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="certiprop",
        description="Certified set propagation through feedforward networks")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: CERTIPROP_THREADS or all cores)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--timing", action="store_true",
                        help="embed wall time in outputs (breaks byte determinism)")
        sp.add_argument("--out", required=True)

    sp = sub.add_parser("propagate", help="propagate one region with one method")
    sp.add_argument("--model", required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--eps", type=float, default=None)
    sp.add_argument("--method", required=True, choices=_METHODS)
    sp.add_argument("--db-strategy", choices=STRATEGIES, default="hybrid")
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--softmax", choices=("on", "off"), default="on")
    sp.add_argument("--condense-budget", type=int, default=None)
    common(sp)
    sp.set_defaults(func=cmd_propagate)

    sp = sub.add_parser("compare", help="run all methods and check containment")
    sp.add_argument("--model", required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--eps", type=float, default=None)
    sp.add_argument("--with-da", action="store_true",
                    help="include doubleton arithmetic (costly on wide nets)")
    sp.add_argument("--db-strategy", choices=STRATEGIES, default="hybrid")
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--softmax", choices=("on", "off"), default="on")
    sp.add_argument("--condense-budget", type=int, default=None)
    common(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("wrapping", help="orthogonal-stack wrapping growth")
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--layers", type=int, required=True)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--methods", default="ibp,aa,da")
    sp.add_argument("--no-figure", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_wrapping)

    sp = sub.add_parser("lemma-stats", help="sphere moment statistics")
    sp.add_argument("--dim", required=True,
                    help="dimension or comma list of dimensions")
    sp.add_argument("--samples", type=int, default=100000)
    sp.add_argument("--no-figure", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_lemma_stats)

    sp = sub.add_parser("sweep", help="eps sweep of mean max output diameter")
    sp.add_argument("--model", required=True)
    sp.add_argument("--points", required=True)
    sp.add_argument("--eps-grid", default="1e-4,1e-3,1e-2,1e-1")
    sp.add_argument("--methods", default="ibp,aa,lb")
    sp.add_argument("--db-strategy", choices=STRATEGIES, default="hybrid")
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--softmax", choices=("on", "off"), default="off")
    sp.add_argument("--mask-fraction", type=float, default=None)
    sp.add_argument("--no-figure", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
