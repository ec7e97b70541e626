"""Command line interface.

Every subcommand reads a JSON bundle (see :mod:`circlepattern.jsonio`) from a
file or standard input and writes a bundle, or an SVG for ``render``, to
standard output or ``--out``. Exit status is 0 on success, 1 when the input
fails validation and 2 when a numerical procedure fails.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from circlepattern import jsonio
from circlepattern.crsys import AngleStructure, is_delaunay, ramification_index, validate_angle_structure
from circlepattern.develop import develop, holonomy
from circlepattern.errors import (
    ConvergenceError,
    DegenerateConfigurationError,
    DevelopError,
    HolonomyError,
    IllConditionedError,
    InvalidSystemError,
    MeshError,
    RigidityCounterexample,
)
from circlepattern.fixtures import FIXTURES, get_fixture
from circlepattern.hqd import hqd_system_cr_form, hqd_system_z_form, kernel_basis
from circlepattern.render import RenderOptions, render_svg
from circlepattern.solver import covering_scan, rigidity_check, solve_pattern, solve_sphere_pattern
from circlepattern.surface import lift_patch

VALIDATION_ERRORS = (InvalidSystemError, MeshError, RigidityCounterexample, jsonio.BundleError, ValueError, KeyError)
NUMERIC_ERRORS = (ConvergenceError, DevelopError, HolonomyError, IllConditionedError, DegenerateConfigurationError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str, n: int | None = None) -> list:
    vals = [float(v) for v in text.split(",")]
    if n is not None and len(vals) != n:
        raise UsageError(f"expected {n} comma separated numbers, got {text!r}")
    return vals


def _complexes(text: str) -> list:
    return [complex(v.replace("i", "j")) for v in text.split(",")]


def _range(text: str) -> range:
    a, b = (int(v) for v in text.split(":"))
    return range(a, b + 1)


def _holonomy_json(hol) -> dict:
    def pair(z):
        return [float(np.real(z)), float(np.imag(z))]

    out = {
        "type": hol.kind,
        "rho": [[pair(m.a), pair(m.b), pair(m.c), pair(m.d)] for m in hol.rho],
        "commutator_defect": hol.commutator_defect,
    }
    if hol.alpha is not None:
        out["alpha"] = [pair(a) for a in hol.alpha]
        out["beta"] = [pair(b) for b in hol.beta]
    return out


def _read(path: str) -> dict:
    if path == "-":
        text = sys.stdin.read()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return jsonio.loads(text)


def _write(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _theta_of(d, surface, cr=None):
    th = jsonio.read_theta(d, surface)
    if th is None and cr is not None:
        th = AngleStructure(surface, cr.arguments)
    if th is None:
        raise InvalidSystemError("bundle carries neither theta nor cross ratios")
    return th


# ---------------------------------------------------------------------------
# subcommands


def cmd_fixture(args) -> dict:
    params = []
    for p in args.params:
        params.append(int(p) if p.lstrip("-").isdigit() else complex(p.replace("i", "j")))
    fx = get_fixture(args.name, *params)
    return jsonio.make_bundle(fx.surface, fx.cr, fx.theta, fx.dev, fx.q, fixture=fx.name)


def cmd_verify(args, d) -> tuple:
    s = jsonio.read_surface(d)
    cr = jsonio.read_cr(d, s)
    report = {"vertices": s.n_vertices, "edges": s.n_edges, "faces": s.n_faces, "genus": s.genus}
    ok = True
    if cr is not None:
        res = cr.residual_norm()
        report["vertex_residual"] = res
        if res > args.tol:
            report["reason"] = f"vertex equations violated (residual {res:.3g})"
            return report, False
        report["ramification"] = ramification_index(cr).tolist()
        dl = is_delaunay(cr, check_valid=False)
        report["delaunay"] = dl.ok
        if not dl:
            report["reason"] = f"non-Delaunay: {dl.reason}"
            ok = False
    if "theta" in d:
        rep = validate_angle_structure(jsonio.read_theta(d, s))
        report["angle_structure"] = rep.ok
        if not rep:
            report.setdefault("reason", f"invalid angle structure: {rep.reason}")
            ok = False
    if cr is None and "theta" not in d:
        raise InvalidSystemError("nothing to verify: bundle has no cr or theta")
    return report, ok


def cmd_develop(args, d) -> dict:
    s = jsonio.read_surface(d)
    cr = jsonio.read_cr(d, s)
    if cr is None:
        raise InvalidSystemError("develop needs cross ratios")
    patch = None
    if args.patch:
        if s.genus != 1:
            raise UsageError("--patch applies to tori only")
        mr, nr = (_range(p) for p in args.patch.split(","))
        patch = lift_patch(s, (mr, nr))
    seed = _complexes(args.seed) if args.seed else None
    dev = develop(cr, patch=patch, seed=seed)
    extra = {}
    if s.genus == 1:
        extra["holonomy"] = _holonomy_json(holonomy(dev))
    return jsonio.make_bundle(s, cr, jsonio.read_theta(d, s), dev, jsonio.read_q(d), **extra)


def cmd_hqd(args, d) -> dict:
    s = jsonio.read_surface(d)
    cr = jsonio.read_cr(d, s)
    if cr is None:
        raise InvalidSystemError("hqd needs cross ratios")
    if args.form == "z":
        dev = jsonio.read_dev(d, s) or develop(cr)
        op = hqd_system_z_form(dev, field=args.field)
    else:
        op = hqd_system_cr_form(cr, field=args.field)
    kb = kernel_basis(op, field=args.field)

    def enc(x):
        return [float(x)] if args.field == "real" else [float(x.real), float(x.imag)]

    out = dict(d)
    out["hqd"] = {
        "field": args.field,
        "form": args.form,
        "dimension": kb.dimension,
        "gap_ratio": float(min(kb.gap_ratio, 1e300)),
        "ill_conditioned": kb.ill_conditioned,
        "singular_values": [float(v) for v in kb.singular_values],
        "basis": [[enc(x) for x in col] for col in kb.basis.T],
    }
    q = jsonio.read_q(d)
    if q is not None:
        qv = q.real if args.field == "real" else q
        out["hqd"]["q_residual"] = float(np.abs(op @ qv).max())
        out["hqd"]["q_projection_residual"] = float(np.linalg.norm(kb.project(qv)) / np.linalg.norm(qv))
    return out


def cmd_solve(args, d) -> dict:
    s = jsonio.read_surface(d)
    theta = _theta_of(d, s, jsonio.read_cr(d, s))
    if s.genus == 0:
        cr = solve_sphere_pattern(s, theta)
        return jsonio.make_bundle(s, cr, theta, develop(cr))
    a1, a2 = _floats(args.A, 2)
    pt = solve_pattern(s, theta, a1, a2)
    bundle = jsonio.make_bundle(s, pt.cr, pt.theta, pt.dev)
    bundle.update(pt.to_json_dict())
    return bundle


def cmd_scan(args, d) -> dict:
    s = jsonio.read_surface(d)
    theta = _theta_of(d, s, jsonio.read_cr(d, s))
    res = covering_scan(s, theta, n=args.grid, radius=args.range)
    return {"version": jsonio.VERSION, "mesh": s.to_json_dict(), **theta.to_json_dict(), "scan": res.to_json_dict()}


def cmd_rigidity(args, d) -> dict:
    s = jsonio.read_surface(d)
    theta = _theta_of(d, s, jsonio.read_cr(d, s))
    a1, a2 = _floats(args.A, 2)
    rep = rigidity_check(s, theta, a1, a2, trials=args.trials, seed=args.seed)
    return {
        "version": jsonio.VERSION,
        "mesh": s.to_json_dict(),
        **theta.to_json_dict(),
        "rigidity": {
            "trials": rep.trials,
            "converged": rep.converged,
            "max_cr_deviation": rep.max_cr_deviation,
            "max_sigma_spread": rep.max_sigma_spread,
        },
    }


def cmd_render(args, d) -> str:
    s = jsonio.read_surface(d)
    dev = jsonio.read_dev(d, s)
    if dev is None:
        cr = jsonio.read_cr(d, s)
        if cr is None:
            raise InvalidSystemError("render needs positions or cross ratios")
        dev = develop(cr)
    viewport = _floats(args.viewport, 4) if args.viewport else None
    opts = RenderOptions(circles=args.circles == "on", stroke=args.stroke, width=args.width, viewport=viewport)
    return render_svg(dev, opts)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="circlepattern", description="Circle patterns on tori and spheres.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text, with_input=True):
        sp = sub.add_parser(name, help=help_text)
        if with_input:
            sp.add_argument("input", nargs="?", default="-", help="bundle path, '-' for stdin")
        sp.add_argument("--out", help="output path (default stdout)")
        return sp

    sp = add("fixture", "emit a named fixture", with_input=False)
    sp.add_argument("name", choices=sorted(FIXTURES))
    sp.add_argument("params", nargs="*")

    sp = add("verify", "check vertex equations and the Delaunay condition")
    sp.add_argument("--tol", type=float, default=1e-8)

    sp = add("develop", "lay out a patch of the universal cover")
    sp.add_argument("--patch", help="deck word ranges m0:m1,n0:n1")
    sp.add_argument("--seed", help="three seed positions a,b,c")

    sp = add("hqd", "kernel of the quadratic differential equations")
    sp.add_argument("--field", choices=("real", "complex"), default="real")
    sp.add_argument("--form", choices=("cr", "z"), default="cr")

    sp = add("solve", "solve for the pattern with prescribed Re h")
    sp.add_argument("--A", default="0,0", help="a1,a2")

    sp = add("scan", "moduli over a grid of A values")
    sp.add_argument("--grid", type=int, default=9)
    sp.add_argument("--range", type=float, default=1.0)

    sp = add("rigidity", "random restart uniqueness test")
    sp.add_argument("--A", default="0,0")
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("render", "SVG picture of the developed pattern")
    sp.add_argument("--circles", choices=("on", "off"), default="on")
    sp.add_argument("--stroke", type=float, default=RenderOptions.stroke)
    sp.add_argument("--width", type=int, default=RenderOptions.width)
    sp.add_argument("--viewport", help="xmin,ymin,xmax,ymax")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        status = 0
        if args.command == "fixture":
            text = jsonio.dumps(cmd_fixture(args))
        else:
            d = _read(args.input)
            if args.command == "verify":
                report, ok = cmd_verify(args, d)
                if not ok:
                    print(f"circlepattern: {report['reason']}", file=sys.stderr)
                    status = 1
                text = jsonio.dumps(report)
            elif args.command == "render":
                text = cmd_render(args, d)
            else:
                handler = {
                    "develop": cmd_develop,
                    "hqd": cmd_hqd,
                    "solve": cmd_solve,
                    "scan": cmd_scan,
                    "rigidity": cmd_rigidity,
                }[args.command]
                text = jsonio.dumps(handler(args, d))
        _write(text, getattr(args, "out", None))
        return status
    except UsageError as exc:
        print(f"circlepattern: usage error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"circlepattern: {exc}", file=sys.stderr)
        return 1
    except NUMERIC_ERRORS as exc:
        print(f"circlepattern: numerical failure: {exc}", file=sys.stderr)
        return 2
    except VALIDATION_ERRORS as exc:
        print(f"circlepattern: invalid input: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
