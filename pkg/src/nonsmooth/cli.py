"""Command-line interface.

Subcommands::

    eval        evaluate an expression at a point
    subdiff     print a subdifferential (exact or sampled) as JSON
    classify    d-/l-/C-stationarity report for a point
    solve       run a solver (subgrad | proj-subgrad | mm) and dump a trace
    experiment  run the lspar or recovery experiment from a config
    gallery     run the worked-example gallery and print a pass/fail table

Exit codes: 0 on success, 1 when a gallery expectation fails, 2 on usage
errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from typing import Optional

import numpy as np

from . import experiments
from .expr import evaluate, parse_expr
from .gallery import run_gallery
from .polyhedra import Ball, Box
from .sampled import as_gradient_oracle, gradient_sampling
from .solvers import (
    Constant,
    Diminishing,
    Geometric,
    MMParams,
    Polyak,
    mm_lspar,
    oracle_from_expr,
    projected_subgradient,
    subgradient_method,
)
from .stationarity import classify
from .subdiff import bouligand, clarke, frechet, limiting

__all__ = ["main"]


def _load_expr(spec: str):
    text = spec
    if not spec.lstrip().startswith("("):
        with open(spec) as fh:
            text = fh.read()
    return parse_expr(text)


def _parse_point(text: str) -> np.ndarray:
    parts = [p for p in text.replace(",", " ").split() if p]
    return np.array([float(p) for p in parts])


def _parse_schedule(text: str):
    kind, _, rest = text.partition(":")
    args = [float(v) for v in rest.split(",") if v] if rest else []
    kind = kind.lower()
    if kind == "constant":
        return Constant(*args)
    if kind == "diminishing":
        return Diminishing(*args)
    if kind == "geometric":
        return Geometric(*args)
    if kind == "polyak":
        return Polyak(*args)
    raise argparse.ArgumentTypeError(f"unknown schedule kind {kind!r}")


def _cmd_eval(args) -> int:
    e = _load_expr(args.expr)
    x = _parse_point(args.point)
    print(repr(evaluate(e, x)))
    return 0


def _cmd_subdiff(args) -> int:
    e = _load_expr(args.expr)
    x = _parse_point(args.point)
    ops = {
        "frechet": frechet,
        "limiting": limiting,
        "clarke": clarke,
        "bouligand": bouligand,
    }
    if args.sampled:
        if args.which != "clarke":
            print("sampled mode supports --which clarke only", file=sys.stderr)
            return 2
        ss = gradient_sampling(
            as_gradient_oracle(e), x, radius=args.radius, seed=args.seed
        )
    else:
        ss = ops[args.which](e, x)
    print(json.dumps(ss.to_json(), indent=2))
    if ss.is_empty:
        print(f"# {args.which} subdifferential at {x.tolist()}: empty set", file=sys.stderr)
    else:
        ncomp = len(ss.set.components)
        print(
            f"# {args.which} subdifferential at {x.tolist()}: "
            f"{ncomp} component(s), exactness={ss.exactness}",
            file=sys.stderr,
        )
    return 0


def _cmd_classify(args) -> int:
    e = _load_expr(args.expr)
    x = _parse_point(args.point)
    rep = classify(e, x, tol=args.tol)
    print(json.dumps(rep.to_json(), indent=2))
    return 0


def _write_trace(path: str, trace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "f", "step", "dist_ref", "wall_ms"])
        steps = list(trace.steps) + [float("nan")] * (
            len(trace.objectives) - len(trace.steps)
        )
        for i, f in enumerate(trace.objectives):
            dist = "" if trace.dists is None else repr(float(trace.dists[i]))
            wall = "" if trace.walls is None else f"{1e3 * trace.walls[i]:.3f}"
            w.writerow([i, repr(float(f)), repr(float(steps[i])), dist, wall])


def _cmd_solve(args) -> int:
    if args.problem == "lspar":
        ds = experiments.gen_lspar_data(args.N, args.sigma, args.seed)
        from .rng import make_rng

        W0 = make_rng(args.seed, 22).standard_normal(experiments.LSPAR_TRUE_W.shape)
        if args.method == "mm":
            trace, cert = mm_lspar(ds, W0, MMParams())
            print(
                f"mm: {trace.termination} after {trace.iterations} outer iterations, "
                f"f={trace.objectives[-1]!r}, d-stationary={cert.is_d_stationary}"
            )
        else:
            from .solvers import lspar_oracle

            trace = subgradient_method(
                lspar_oracle(ds), W0, _parse_schedule(args.schedule), max_iter=args.iters
            )
            print(
                f"subgrad: {trace.termination}, f={trace.objectives[-1]!r}, "
                f"best={trace.best_f!r}"
            )
    else:
        if args.expr is None or args.x0 is None:
            print("solve with --method subgrad/proj-subgrad needs --expr and --x0", file=sys.stderr)
            return 2
        e = _load_expr(args.expr)
        x0 = _parse_point(args.x0)
        oracle = oracle_from_expr(e)
        schedule = _parse_schedule(args.schedule)
        if args.method == "proj-subgrad":
            if args.box is not None:
                bounds = _parse_point(args.box)
                half = bounds.size // 2
                projector = Box(bounds[:half], bounds[half:])
            elif args.ball is not None:
                vals = _parse_point(args.ball)
                projector = Ball(vals[:-1], float(vals[-1]))
            else:
                print("proj-subgrad needs --box 'lo.. hi..' or --ball 'center.. r'", file=sys.stderr)
                return 2
            trace = projected_subgradient(oracle, projector, x0, schedule, max_iter=args.iters)
        else:
            trace = subgradient_method(oracle, x0, schedule, max_iter=args.iters)
        print(
            f"{args.method}: {trace.termination}, f={trace.objectives[-1]!r}, "
            f"best={trace.best_f!r}, x={trace.final_x.tolist()}"
        )
    if args.trace:
        _write_trace(args.trace, trace)
        print(f"trace written to {args.trace}")
    return 0


def _cmd_experiment(args) -> int:
    overrides = {}
    if args.config:
        with open(args.config) as fh:
            overrides.update(experiments.parse_config(fh.read()))
    for kv in args.set or []:
        overrides.update(experiments.parse_config(kv))
    if args.family == "lspar":
        known = {
            "N_list": tuple,
            "trials": int,
            "root_seed": int,
            "noise_sigma": float,
            "subgrad_iters": int,
            "jobs": int,
        }
        kwargs = {}
        for key, cast in known.items():
            if key in overrides:
                v = overrides[key]
                kwargs[key] = tuple(v) if cast is tuple and isinstance(v, list) else (
                    (v,) if cast is tuple else cast(v)
                )
        cfg = experiments.LsparExperimentConfig(out_dir=args.out, **kwargs)
        summary = experiments.run_lspar_experiment(cfg)
        for N in cfg.N_list:
            s = summary["per_N"][N]
            print(
                f"N={N}: wins mm={s['wins']['mm']} subgrad={s['wins']['subgrad']}, "
                f"median mm={s['median_final']['mm']:.3e} "
                f"subgrad={s['median_final']['subgrad']:.3e}, "
                f"frac(mm <= subgrad)={s['frac_mm_not_worse']:.3f}"
            )
    else:
        fields = ("kind", "n", "m", "outlier_frac", "alpha0", "q", "iters", "seed", "warm_start", "r")
        kwargs = {k: overrides[k] for k in fields if k in overrides}
        cfg = experiments.RecoveryConfig(out_dir=args.out, **kwargs)
        out = experiments.run_recovery_experiment(cfg)
        print(
            f"{out['kind']}: final distance {out['final_distance']:.3e}, "
            f"log-slope {out['slope']:.4f} (R^2 {out['r_squared']:.3f})"
        )
    return 0


def _cmd_gallery(args) -> int:
    rows = run_gallery()
    width = max(len(name) for name, *_ in rows)
    passed = 0
    for name, ok, detail, note in rows:
        flag = "PASS" if ok else "FAIL"
        passed += ok
        print(f"{flag}  {name:<{width}}  {detail}")
        if note:
            print(f"      {'':<{width}}  note: {note}")
    print(f"{passed}/{len(rows)} examples passed")
    return 0 if passed == len(rows) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nonsmooth",
        description="subdifferentials, stationarity tests, and subgradient/MM solvers",
    )
    sub = p.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("eval", help="evaluate an expression at a point")
    pe.add_argument("--expr", required=True, help="expression file or inline s-expression")
    pe.add_argument("--point", required=True, help="comma- or space-separated coordinates")
    pe.set_defaults(func=_cmd_eval)

    ps = sub.add_parser("subdiff", help="compute a subdifferential")
    ps.add_argument("--expr", required=True)
    ps.add_argument("--point", required=True)
    ps.add_argument(
        "--which",
        required=True,
        choices=["frechet", "limiting", "clarke", "bouligand"],
    )
    mode = ps.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", default=True)
    mode.add_argument("--sampled", action="store_true", default=False)
    ps.add_argument("--seed", type=int, default=42)
    ps.add_argument("--radius", type=float, default=0.1)
    ps.set_defaults(func=_cmd_subdiff)

    pc = sub.add_parser("classify", help="stationarity report")
    pc.add_argument("--expr", required=True)
    pc.add_argument("--point", required=True)
    pc.add_argument("--tol", type=float, default=1e-8)
    pc.set_defaults(func=_cmd_classify)

    pv = sub.add_parser("solve", help="run a solver")
    pv.add_argument("--method", required=True, choices=["subgrad", "proj-subgrad", "mm"])
    pv.add_argument("--expr", help="objective expression (subgrad/proj-subgrad)")
    pv.add_argument("--x0", help="start point")
    pv.add_argument("--problem", choices=["lspar"], help="built-in problem family")
    pv.add_argument("--N", type=int, default=10)
    pv.add_argument("--sigma", type=float, default=0.1)
    pv.add_argument("--schedule", default="diminishing:1", help="kind:params, e.g. geometric:0.1,0.98")
    pv.add_argument("--iters", type=int, default=1000)
    pv.add_argument("--seed", type=int, default=42)
    pv.add_argument("--box", help="projector box 'lo... hi...'")
    pv.add_argument("--ball", help="projector ball 'center... radius'")
    pv.add_argument("--trace", help="write iteration trace CSV here")
    pv.set_defaults(func=_cmd_solve)

    px = sub.add_parser("experiment", help="run an experiment family")
    px.add_argument("family", choices=["lspar", "recovery"])
    px.add_argument("--config", help="flat key=value config file")
    px.add_argument("--out", help="output directory for CSV/SVG artifacts")
    px.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override a config key (repeatable)",
    )
    px.set_defaults(func=_cmd_experiment)

    pg = sub.add_parser("gallery", help="run the worked-example gallery")
    pg.set_defaults(func=_cmd_gallery)
    return p


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
