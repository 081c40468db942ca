"""Command-line interface: ``pqdual <subcommand> ...``.

Exit codes: 0 success, 1 a mathematical finding (persistent inequality
violation, solver did not converge), 2 bad input.
"""
from __future__ import annotations

import argparse
import csv
import datetime
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bodyio import body_to_spec, dumps, load_body, load_directions, load_measure
from .errors import MaxItersExceeded, ParseError, PQDualError, SolverError
from .geometry import Ball, Ellipsoid, HPolytope, PolytopeV, polar
from .inequalities import THEOREMS, fuzz_campaign
from .measures import MeasureParams, curvature_measure_polytope
from .quadrature import auto_grid
from .quermass import dual_quermass, lp_mixed_quermass_paper, pq_mixed_quermass
from .solver import SolveConfig, TargetMeasure, measure_of, solve

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_FINDING, EXIT_INPUT = 0, 1, 2


# -- output ----------------------------------------------------------------


def _meta(args):
    return {"version": __version__, "command": args.command, "threads": args.threads,
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat()}


def _emit(args, payload):
    if not args.no_meta:
        payload = dict(payload, meta=_meta(args))
    text = dumps(payload)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _say(args, msg):
    if not args.quiet:
        print(msg, file=sys.stderr if not args.out else sys.stdout)


def _write_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def _grid_kw(args):
    return {"resolution": args.resolution}


# -- subcommands -----------------------------------------------------------


def cmd_eval(args):
    body = load_body(args.body)
    X = load_directions(args.directions)
    U = X / np.linalg.norm(X, axis=1)[:, None]
    if args.op == "support":
        vals = body.support(X).tolist()
    elif args.op == "radial":
        vals = body.radial(X).tolist()
    elif args.op == "polar-check":
        vals = (polar(body).radial(U) * body.support(U) - 1.0).tolist()
    else:
        P = body.as_polytope()
        if P is None:
            raise ParseError(f"{args.body}: gauss needs a polytopal body")
        vals = [int(i) for i in P.gauss_index(U)]
    _emit(args, {"op": args.op, "directions": X.tolist(), "values": vals,
                 "error_estimate": 0.0})
    return EXIT_OK


def _q_body(args, dim):
    return load_body(args.q_body) if args.q_body else Ball(1.0, dim)


def cmd_measure(args):
    M = load_body(args.body)
    Q = _q_body(args, M.dim)
    prm = MeasureParams(args.p, args.q, args.j, Q)
    grid = auto_grid(M.dim, [M, Q], args.resolution, level=args.level)
    mu = curvature_measure_polytope(M, prm, grid=grid, estimate_error=True)
    out = mu.to_dict()
    out["params"] = prm.as_dict()
    out["total_mass"] = mu.total
    if args.p == 0:
        W = dual_quermass(M, Q, args.q, args.j, grid=grid)
        out["dual_quermass"] = {"value": W.value, "error_estimate": W.error_estimate}
    _emit(args, out)
    _say(args, f"total mass: {mu.total:.15g}")
    if args.p == 0:
        _say(args, f"W_{{q,j}}(M,Q) cross-check: {out['dual_quermass']['value']:.15g}")
    return EXIT_OK


def cmd_quermass(args):
    M = load_body(args.body)
    N = load_body(args.n_body) if args.n_body else M
    Q = _q_body(args, M.dim)
    if args.kind == "dual":
        res = dual_quermass(M, Q, args.q, args.j, **_grid_kw(args))
    elif args.kind == "pq":
        res = pq_mixed_quermass(M, N, Q, args.p, args.q, args.j, route=args.route,
                                **_grid_kw(args))
    else:
        res = lp_mixed_quermass_paper(M, N, args.p, args.j, **_grid_kw(args))
    _emit(args, {"kind": args.kind, "value": res.value, "error_estimate": res.error_estimate,
                 "params": res.params, "grid": res.grid})
    return EXIT_OK


def cmd_check_ineq(args):
    theorems = []
    for t in args.theorem or THEOREMS:
        theorems.extend(x.strip() for x in str(t).split(",") if x.strip())
    for t in theorems:
        if t not in THEOREMS:
            raise ParseError(f"unknown theorem {t!r} (choose from {', '.join(THEOREMS)})")
    summary = fuzz_campaign({
        "theorems": theorems, "cases": args.cases, "seed": args.seed,
        "dimension": args.dimension, "resolution": args.resolution, "threads": args.threads,
        "dump_dir": args.dump_dir, "dilate_every": args.dilate_every,
    })
    if args.emit_csv:
        _write_csv(args.emit_csv, summary["rows"],
                   ["index", "theorem", "check", "region", "slack", "error_bound", "verdict",
                    "in_hypothesis", "dilates"])
    if not args.keep_rows:
        summary.pop("rows")
    _emit(args, summary)
    _say(args, f"{args.cases} cases, {summary['persistent_violations']} persistent violations")
    if summary["errors"]:
        return EXIT_INPUT
    return EXIT_FINDING if summary["persistent_violations"] else EXIT_OK


def _solve_config(args, dim):
    Q = _q_body(args, dim)
    init = args.init
    init_body = load_body(args.init_body) if args.init_body else None
    if init == "from-body" and init_body is None:
        raise ParseError("--init from-body needs --init-body")
    return SolveConfig(p=args.p, q=args.q, j=args.j, Q=Q, init=init, init_body=init_body,
                       max_iters=args.max_iters, tol=args.tol, resolution=args.resolution,
                       level=args.level, verify_tol=args.verify_tol,
                       unsafe_params=args.unsafe_params, seed=args.seed,
                       facet_policy=args.facet_policy)


def _solve_and_report(args, target, extra=None):
    config = _solve_config(args, target.measure.dim)
    try:
        report = solve(target, config)
    except MaxItersExceeded as exc:
        report = exc.report
    out = report.to_dict(include_trace=not args.no_trace)
    out["measure_diagnostics"] = target.diagnostics
    if extra:
        out.update(extra)
    if args.emit_csv:
        _write_csv(args.emit_csv, report.trace, ["iteration", "phi", "grad_inf", "step"])
    _emit(args, out)
    _say(args, f"status: {report.status}, iterations: {report.iterations}, "
               f"max residual: {report.max_residual:.3g}")
    return report, EXIT_OK if report.status == "converged" else EXIT_FINDING


def cmd_solve(args):
    mu = load_measure(args.measure)
    target = TargetMeasure(mu, require_even=not args.allow_odd)
    return _solve_and_report(args, target)[1]


def cmd_round_trip(args):
    M = load_body(args.body)
    Q = _q_body(args, M.dim)
    mu, P = measure_of(M, args.p, args.q, args.j, Q, args.resolution, args.level)
    target = TargetMeasure(mu, require_even=not args.allow_odd)
    ref = P.h
    if args.p == args.q:
        ref = ref / math.exp(math.fsum(np.log(ref).tolist()) / len(ref))
    config = _solve_config(args, M.dim)
    try:
        report = solve(target, config)
    except MaxItersExceeded as exc:
        report = exc.report
    err = float(np.max(np.abs(report.support - ref) / ref))
    out = report.to_dict(include_trace=not args.no_trace)
    out["reference_support"] = ref.tolist()
    out["support_error"] = err
    if args.emit_csv:
        _write_csv(args.emit_csv, report.trace, ["iteration", "phi", "grad_inf", "step"])
    _emit(args, out)
    _say(args, f"status: {report.status}, support error: {err:.3g}, "
               f"max residual: {report.max_residual:.3g}")
    ok = report.status == "converged" and err <= args.support_tol
    return EXIT_OK if ok else EXIT_FINDING


def fixture_specs():
    """The bundled example bodies, measures and direction sets."""
    sq = HPolytope([[1, 0], [0, 1], [-1, 0], [0, -1]], [1, 1, 1, 1])
    cube = HPolytope(np.vstack([np.eye(3), -np.eye(3)]), np.ones(6))
    theta = 2 * np.pi * np.arange(16) / 16
    return {
        "square.json": body_to_spec(sq),
        "cross.json": body_to_spec(PolytopeV([[1, 0], [0, 1], [-1, 0], [0, -1]])),
        "disk.json": body_to_spec(Ball(1.0, 2)),
        "ellipse.json": body_to_spec(Ellipsoid([1.0, 2.0])),
        "cube.json": body_to_spec(cube),
        "octahedron.json": body_to_spec(PolytopeV(np.vstack([np.eye(3), -np.eye(3)]))),
        "ball3.json": body_to_spec(Ball(1.0, 3)),
        "slab.json": {"type": "slab", "alpha": 0.25, "dimension": 2},
        "square_measure.json": {"dimension": 2, "atoms": [
            {"normal": v, "mass": 1.0} for v in ([1, 0], [0, 1], [-1, 0], [0, -1])]},
        "directions2.json": {"directions": np.stack([np.cos(theta), np.sin(theta)], 1).tolist()},
    }


def cmd_fixtures(args):
    out = Path(args.dir)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for name, spec in fixture_specs().items():
        (out / name).write_text(dumps(spec))
        names.append(name)
    _say(args, f"wrote {len(names)} fixtures to {out}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------


def _common(p):
    p.add_argument("--config", help="TOML file with flag defaults")
    p.add_argument("--out", help="write the JSON result here instead of stdout")
    p.add_argument("--no-meta", action="store_true", help="omit version/timestamp block")
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (default: $QUERMASS_THREADS or 1)")
    p.add_argument("--quiet", action="store_true")


def _params(p, need_p=True):
    if need_p:
        p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--j", type=float, default=0.0)


def _grid_args(p):
    p.add_argument("--resolution", type=int, default=None,
                   help="nodes per arc (n=2) or Gauss order (n=3) of the cone grid")
    p.add_argument("--level", type=int, default=None, help="triangle subdivision level (n=3)")


def _solver_args(p):
    _params(p)
    p.add_argument("--q-body", help="gauge body Q (default: unit ball)")
    _grid_args(p)
    p.add_argument("--tol", type=float, default=1e-9, help="gradient tolerance")
    p.add_argument("--verify-tol", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--init", choices=["uniform", "random", "from-body"], default="uniform")
    p.add_argument("--init-body")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--unsafe-params", action="store_true",
                   help="allow parameters outside p, q > 0")
    p.add_argument("--allow-odd", action="store_true", help="do not require an even measure")
    p.add_argument("--facet-policy", choices=["allow", "reject"], default="allow")
    p.add_argument("--no-trace", action="store_true")
    p.add_argument("--emit-csv", help="write the convergence trace as CSV")


def build_parser():
    parser = argparse.ArgumentParser(prog="pqdual", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="support/radial values, polar residuals, Gauss indices")
    _common(p)
    p.add_argument("op", choices=["support", "radial", "polar-check", "gauss"])
    p.add_argument("body")
    p.add_argument("directions")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("measure", help="atoms of C_{p,q,j}(M, Q, .) for a polytope M")
    _common(p)
    p.add_argument("--body", required=True)
    p.add_argument("--q-body")
    _params(p)
    _grid_args(p)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("quermass", help="dual, (p,q)-mixed or L_p mixed quermassintegral")
    _common(p)
    p.add_argument("--kind", choices=["dual", "pq", "lp"], default="pq")
    p.add_argument("--body", required=True)
    p.add_argument("--n-body")
    p.add_argument("--q-body")
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--j", type=float, default=0.0)
    p.add_argument("--route", choices=["direct", "measure"], default="direct")
    _grid_args(p)
    p.set_defaults(func=cmd_quermass)

    p = sub.add_parser("check-ineq", help="randomized inequality campaign")
    _common(p)
    p.add_argument("--theorem", action="append", help="5.1, 5.2, 5.3 or 5.4 (repeatable)")
    p.add_argument("--cases", type=int, default=100)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--dimension", type=int, default=2)
    p.add_argument("--resolution", type=int, default=None)
    p.add_argument("--dilate-every", type=int, default=10)
    p.add_argument("--dump-dir")
    p.add_argument("--emit-csv", help="write per-check slack rows as CSV")
    p.add_argument("--keep-rows", action="store_true", help="include per-check rows in JSON")
    p.set_defaults(func=cmd_check_ineq)

    p = sub.add_parser("solve", help="discrete (p,q)-dual mixed Minkowski problem")
    _common(p)
    p.add_argument("--measure", required=True)
    _solver_args(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("round-trip", help="measure of a polytope, then solve for it")
    _common(p)
    p.add_argument("--body", required=True)
    p.add_argument("--support-tol", type=float, default=1e-4)
    _solver_args(p)
    p.set_defaults(func=cmd_round_trip)

    p = sub.add_parser("fixtures", help="write the bundled example files")
    _common(p)
    p.add_argument("--dir", default="fixtures")
    p.set_defaults(func=cmd_fixtures)
    return parser


def _apply_config(parser, argv):
    """Parse ``argv`` with defaults taken from the TOML file named by --config.

    Top-level keys apply to every subcommand; a table named after the
    subcommand (e.g. ``[solve]``) overrides them.  Keys are flag names
    with dashes or underscores.  A value from the file satisfies a
    required flag.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    path = None
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif a.startswith("--config="):
            path = a.split("=", 1)[1]
    choices = parser._subparsers._group_actions[0].choices
    command = next((a for a in argv if a in choices), None)
    if path is None or command is None:
        return parser.parse_args(argv)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    flat = {k: v for k, v in data.items() if not isinstance(v, dict)}
    flat.update(data.get(command, {}))
    sub = choices[command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in flat.items():
        name = key.replace("-", "_")
        if name not in actions or name in ("help", "config"):
            raise ParseError(f"{path}: unknown option {key!r} for {command}")
        actions[name].required = False
        defaults[name] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None):
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if args.threads is None:
            env = os.environ.get("QUERMASS_THREADS")
            args.threads = int(env) if env else 1
        if args.command == "quermass" and args.q is None:
            args.q = float(load_body(args.body).dim)
        return args.func(args)
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FINDING
    except (PQDualError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
