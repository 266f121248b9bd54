"""Command line front end: ``tropma <command> ...``.

Exit codes: 0 ok, 2 invalid input, 3 no convergence.

Sign convention for the projective-line example: the library works with the
convex function f = phi + g0, whose slopes fill [-1, 0].  The concave picture
with polytope [0, 1] is obtained through the reflection x -> -x of slopes.
"""

from __future__ import annotations

import argparse
import csv
import io as _stdio
import json
import math
import sys
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import io
from ._exact import InvalidInput, NoConvergence
from .abelian import periodic_ma_measure, solve_torus_ma
from .convex import legendre_transform
from .monge_ampere import DiscreteMeasure, ma_measure, mixed_ma
from .mumford import nef_at_vertex, total_degree_check, vertex_degree
from .oracles import fd_hessian_ma, mc_subgradient_volume, p1_pipeline
from .sbp import SbpProblem, solve_sbp, verify_sbp
from .toric import is_psh, is_theta_psh

EXIT_OK, EXIT_INVALID, EXIT_NOCONV = 0, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=None, help="solver tolerance (per-command default)")
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default="-", help="output file (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def _tol(args, default: float) -> float:
    return default if args.tol is None else args.tol


def _measure_rows(mu: DiscreteMeasure) -> list[list]:
    return [[*map(io.q, p), io.q(m)] for p, m in mu.atoms]


def _emit(args, payload: dict, rows: list[list] | None = None) -> None:
    if args.format == "csv":
        buf = _stdio.StringIO()
        writer = csv.writer(buf)
        for row in rows if rows is not None else [[k, json.dumps(v)] for k, v in payload.items()]:
            writer.writerow(row)
        text = buf.getvalue()
    else:
        text = json.dumps(payload, indent=2) + "\n"
    if args.output == "-":
        sys.stdout.write(text)
    else:
        with open(args.output, "w") as fh:
            fh.write(text)


# ------------------------------------------------------------------ commands

def cmd_ma(args) -> int:
    f = io.maxaffine_from_json(io.load(args.f))
    mu = ma_measure(f)
    _emit(args, io.measure_to_json(mu), _measure_rows(mu))
    return EXIT_OK


def cmd_mixed_ma(args) -> int:
    fs = [io.maxaffine_from_json(io.load(p)) for p in args.f]
    mu = mixed_ma(*fs)
    _emit(args, io.measure_to_json(mu), _measure_rows(mu))
    return EXIT_OK


def cmd_legendre(args) -> int:
    f = io.maxaffine_from_json(io.load(args.f))
    domain, conj = legendre_transform(f)
    _emit(args, {"domain": io.polytope_to_json(domain), "conjugate": io.maxaffine_to_json(conj.g)},
          [[*map(io.q, m), io.q(c)] for m, c in conj.g.pieces])
    return EXIT_OK


def cmd_check_psh(args) -> int:
    f = io.maxaffine_from_json(io.load(args.f))
    fan = io.fan_from_json(io.load(args.fan))
    if args.green:
        green = io.green_from_json(io.load(args.green), fan)
        ok = is_theta_psh(f, green, fan)
        key = "theta_psh"
    else:
        ok = is_psh(f, fan)
        key = "psh"
    _emit(args, {key: ok}, [[key, ok]])
    return EXIT_OK


def cmd_sbp(args) -> int:
    body = io.polytope_from_json(io.load(args.body))
    mu = io.measure_from_json(io.load(args.measure))
    problem = SbpProblem(body, mu, _tol(args, 1e-9), args.max_iter, rescale=args.rescale)
    sol = solve_sbp(problem, seed=args.seed)
    report = verify_sbp(sol, problem)
    payload = {
        "phi": io.maxaffine_to_json(sol.phi),
        "dual_offsets": [float(c) for c in sol.dual_offsets],
        "iterations": sol.iterations,
        "residuals": [float(r) for r in sol.residuals],
        "max_residual": sol.max_residual,
        "report": {"ok": report.ok, "slopes_inside": report.slopes_inside,
                   "volume_ratio": report.volume_ratio,
                   "max_mass_error": report.max_mass_error,
                   "max_location_error": report.max_location_error,
                   "debris_mass": report.debris_mass},
    }
    rows = [[*map(float, s), float(c), float(r)]
            for s, c, r in zip(sol.sites, sol.dual_offsets, sol.residuals)]
    _emit(args, payload, rows)
    return EXIT_OK


def cmd_torus_ma(args) -> int:
    p = io.ptav_from_json(io.load(args.ptav))
    mu = io.measure_from_json(io.load(args.measure))
    sol = solve_torus_ma(p, mu, tol=_tol(args, 1e-9), max_iter=args.max_iter, seed=args.seed)
    payload = {
        "f": io.periodic_to_json(sol.f),
        "offsets": [float(c) for c in sol.offsets],
        "iterations": sol.iterations,
        "max_residual": float(sol.residuals.max()),
        "uniqueness_gap": sol.uniqueness_gap,
        "grid": sol.grid.tolist(),
        "phi": [float(v) for v in sol.phi_values],
    }
    rows = [[*map(float, w), float(v)] for w, v in zip(sol.grid, sol.phi_values)]
    _emit(args, payload, rows)
    return EXIT_OK


def cmd_mumford_degree(args) -> int:
    ctx = io.context_from_json(io.load(args.ctx))
    f = io.function_from_json(io.load(args.f))
    if args.vertex is not None:
        w = io.parse_point(args.vertex)
        deg = vertex_degree(ctx, f, w)
        nef = nef_at_vertex(f, w)
        _emit(args, {"vertex": io.qvec(w), "degree": io.q(deg), "nef": nef},
              [[*io.qvec(w), io.q(deg), nef]])
        return EXIT_OK
    if not hasattr(f, "cocycle"):
        raise InvalidInput("the total degree needs a periodic function (with a 'ptav' field)")
    mu = periodic_ma_measure(f)
    check = total_degree_check(ctx, f)
    per = [(w, vertex_degree(ctx, f, w)) for w in mu.points]
    _emit(args, {"vertices": [{"vertex": io.qvec(w), "degree": io.q(d)} for w, d in per],
                 "total": io.q(check.total), "expected": io.q(check.expected),
                 "equal": check.equal},
          [[*io.qvec(w), io.q(d)] for w, d in per])
    return EXIT_OK


def cmd_example_p1(args) -> int:
    res = p1_pipeline(Fraction(args.alpha), args.m, args.cutoff, tuple(args.points),
                      tol=_tol(args, 1e-7))
    payload = {"alpha": io.q(res.alpha), "m": res.m, "points": res.points,
               "recovered": res.recovered, "exact": res.exact, "error": res.error,
               "convention": "convex side, slopes in [-1,0]; reflect x -> -x for [0,1]"}
    _emit(args, payload, [[u, r, e] for u, r, e in zip(res.points, res.recovered, res.exact)])
    return EXIT_OK


def _smooth_oracle(expr: str, probe: Sequence[float]):
    try:
        code = compile(expr, "<expr>", "eval")
    except SyntaxError as exc:
        raise InvalidInput(f"bad expression: {exc.msg}") from exc
    names = {"np": np, "math": math, "__builtins__": {}}

    def f(u):
        try:
            return float(eval(code, names, {"u": np.asarray(u, dtype=float)}))
        except (NameError, AttributeError, IndexError) as exc:
            raise InvalidInput(f"bad expression: {exc}") from exc
    f(probe)  # surface a broken expression here, not as a NaN downstream
    return f


def cmd_oracle(args) -> int:
    if args.which == "mc":
        if args.f:
            f = io.maxaffine_from_json(io.load(args.f))
            body = None
        elif args.expr and args.body:
            body = io.polytope_from_json(io.load(args.body))
            f = _smooth_oracle(args.expr, [0.0] * body.dim)
        else:
            raise InvalidInput("oracle mc needs --f, or --expr together with --body")
        if not args.lo or not args.hi:
            raise InvalidInput("oracle mc needs --lo and --hi")
        lo = [float(x) for x in io.parse_point(args.lo)]
        hi = [float(x) for x in io.parse_point(args.hi)]
        est = mc_subgradient_volume(f, lo, hi, n_samples=args.samples, seed=args.seed, body=body)
        _emit(args, {"estimate": est.estimate, "stderr": est.stderr, "hits": est.hits,
                     "samples": est.samples}, [[est.estimate, est.stderr, est.hits, est.samples]])
        return EXIT_OK
    if not args.expr or not args.point:
        raise InvalidInput("oracle fd needs --expr and --point")
    point = [float(x) for x in io.parse_point(args.point)]
    value = fd_hessian_ma(_smooth_oracle(args.expr, point), point, h=args.h)
    _emit(args, {"ma_density": value, "nan": math.isnan(value)}, [[value]])
    return EXIT_OK


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tropma", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ma", help="Monge-Ampere measure of a MaxAffine")
    p.add_argument("--f", required=True)
    p.set_defaults(run=cmd_ma)

    p = sub.add_parser("mixed-ma", help="mixed Monge-Ampere measure of n MaxAffines")
    p.add_argument("--f", required=True, nargs="+")
    p.set_defaults(run=cmd_mixed_ma)

    p = sub.add_parser("legendre", help="Legendre transform of a MaxAffine")
    p.add_argument("--f", required=True)
    p.set_defaults(run=cmd_legendre)

    p = sub.add_parser("check-psh", help="psh test on a fan, or theta-psh with --green")
    p.add_argument("--f", required=True)
    p.add_argument("--fan", required=True)
    p.add_argument("--green")
    p.set_defaults(run=cmd_check_psh)

    p = sub.add_parser("sbp", help="second boundary problem for an atomic measure")
    p.add_argument("--body", required=True)
    p.add_argument("--measure", required=True)
    p.add_argument("--rescale", action="store_true")
    p.set_defaults(run=cmd_sbp)

    p = sub.add_parser("torus-ma", help="Monge-Ampere equation on a tropical abelian variety")
    p.add_argument("--ptav", required=True)
    p.add_argument("--measure", required=True)
    p.set_defaults(run=cmd_torus_ma)

    p = sub.add_parser("mumford-degree", help="component degrees of a Mumford model")
    p.add_argument("--ctx", required=True)
    p.add_argument("--f", required=True)
    p.add_argument("--vertex", help='comma-separated rationals, e.g. "1/2,0"')
    p.set_defaults(run=cmd_mumford_degree)

    p = sub.add_parser("example-p1", help="projective-line example (convex side, slopes [-1,0])")
    p.add_argument("--alpha", required=True, help='rational in [0,1), e.g. "1/4"')
    p.add_argument("--m", type=int, default=400)
    p.add_argument("--cutoff", type=int, default=1000)
    p.add_argument("--points", type=float, nargs="+", default=[0, 1, 2, 5, 10])
    p.set_defaults(run=cmd_example_p1)

    p = sub.add_parser("oracle", help="brute-force oracles")
    p.add_argument("which", choices=("mc", "fd"))
    p.add_argument("--f", help="MaxAffine JSON (mc)")
    p.add_argument("--expr", help="smooth oracle as a numpy expression in u, e.g. '0.5*u@u'")
    p.add_argument("--body", help="stability set JSON for a smooth oracle (mc)")
    p.add_argument("--lo", help="region lower corner (mc)")
    p.add_argument("--hi", help="region upper corner (mc)")
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--point", help="evaluation point (fd)")
    p.add_argument("--h", type=float, default=1e-4)
    p.set_defaults(run=cmd_oracle)

    for action in sub.choices.values():
        _common(action)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        return args.run(args)
    except NoConvergence as exc:
        print(f"tropma: no convergence: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except (InvalidInput, ValueError, KeyError, TypeError, ZeroDivisionError) as exc:
        print(f"tropma: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
