"""Command-line front end.

Exit codes: 0 success or check passed, 1 check failed, 2 bad input, 3 bad
parameters, 4 fit failure, 5 hypothesis violation, 6 numerical failure.
"""
import argparse
import math
import sys

import numpy as np

from . import _config
from .errors import (EmptyAnnulus, InputError, InsufficientDecades, ParameterError,
                     ResolventLabError)
from .func_calculus import Circle, function_from_json, resolvent_identity_check
from .growth_analysis import (DEFAULT_ANNULUS, DEFAULT_SAMPLES, fit_growth,
                              resolvent_comparison_scan, sample_field, verify_converse,
                              verify_theorem_A, z_samples_near)
from .operator_core import from_json, load, resolvent_norms, spectrum
from .region_sets import (CompactSet, fit_admissibility, region_from_json,
                          set_from_json)
from . import scenarios

IDENTITY_MAX_RESIDUAL = 1e-8


def _read_json_arg(value, parse):
    """Inline JSON (starting with ``{``) or a path to a JSON file."""
    if value.lstrip().startswith("{"):
        return parse(value)
    try:
        with open(value) as fh:
            return parse(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read {value}: {exc}") from None


def _matrix(value):
    """Inline matrix JSON or a ``.json``/``.csv`` path."""
    return from_json(value) if value.lstrip().startswith("{") else load(value)


def _complex(text):
    try:
        if "," in text:
            re, im = (float(p) for p in text.split(","))
            return complex(re, im)
        return complex(text.replace(" ", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _floats(text):
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list: {text!r}") from None


def _circle(text):
    vals = _floats(text)
    if len(vals) != 3 or vals[2] <= 0:
        raise argparse.ArgumentTypeError(f"contour circle is re,im,radius: {text!r}")
    return Circle(complex(vals[0], vals[1]), vals[2])


def _global_flags(defaults):
    """Flags accepted before or after the subcommand."""
    sup = argparse.SUPPRESS
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=sup if not defaults else None,
                   help="random seed (default: $RESOLVENT_LAB_SEED, else 42)")
    g.add_argument("--workers", type=int, default=sup if not defaults else 1,
                   help="worker threads for parallel-capable steps (default: 1)")
    g.add_argument("--output", default=sup if not defaults else "-",
                   help="output path, '-' for stdout (default: -); a directory for "
                        "'scenario run'")
    g.add_argument("--format", choices=("json", "csv"), default=sup if not defaults else "json",
                   help="artifact format where both exist (default: json)")
    g.add_argument("--resolution", type=int, default=sup if not defaults else 256,
                   help="grid resolution for set measures (default: 256)")
    g.add_argument("--contour", type=_circle, action="append",
                   default=sup if not defaults else None, metavar="RE,IM,R",
                   help="contour circle for the functional calculus (repeatable)")
    for name, val in _config.DEFAULT_TOLERANCES.items():
        g.add_argument(f"--tol-{name}", type=float, dest=f"tol_{name}",
                       default=sup if not defaults else None, metavar="VALUE",
                       help=f"tolerance '{name}' (default: {val:g})")
    return p


def build_parser():
    parser = argparse.ArgumentParser(prog="resolvent-lab", parents=[_global_flags(True)],
                                     description="Resolvent growth of T and f(T) for "
                                                 "finite complex matrices.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = [_global_flags(False)]

    p = sub.add_parser("pseudospectra", parents=common,
                       help="CSV grid of log ||(T - lam)^-1||")
    p.add_argument("matrix")
    p.add_argument("--grid", type=_floats, required=True, metavar="X0,X1,Y0,Y1,NX,NY")
    p.set_defaults(func=cmd_pseudospectra)

    p = sub.add_parser("growth-fit", parents=common, help="fit the resolvent growth order")
    p.add_argument("matrix")
    p.add_argument("--set", help="set JSON (file or inline); default: the spectrum")
    p.add_argument("--d-min", type=float, default=DEFAULT_ANNULUS[0])
    p.add_argument("--d-max", type=float, default=DEFAULT_ANNULUS[1])
    p.add_argument("--n", type=int, default=DEFAULT_SAMPLES)
    p.add_argument("--min-decades", type=float, default=2.0)
    p.set_defaults(func=cmd_growth_fit)

    p = sub.add_parser("verify", help="check an identity or a growth bound")
    vsub = p.add_subparsers(dest="check", required=True)
    for name, fn, text in (("identity", cmd_verify_identity, "partial-fraction identity"),
                           ("theorem-a", cmd_verify_theorem_a, "s(f(T)) <= s(T)"),
                           ("converse", cmd_verify_converse, "s(T) <= s(f(T))"),
                           ("comparison", cmd_verify_comparison,
                            "resolvent of f(T) against resolvents of T at preimages")):
        q = vsub.add_parser(name, parents=common, help=text)
        if name == "theorem-a":
            q.add_argument("matrix", nargs="?")
            q.add_argument("function", nargs="?")
            q.add_argument("--battery", action="store_true",
                           help="run the built-in battery instead of one case")
        else:
            q.add_argument("matrix")
            q.add_argument("function", help="function JSON (file or inline)")
        q.add_argument("--region", help="region JSON (file or inline)")
        if name in ("theorem-a", "converse"):
            q.add_argument("--set", help="set JSON; default: the spectrum")
            q.add_argument("--d-min", type=float, default=DEFAULT_ANNULUS[0])
            q.add_argument("--d-max", type=float, default=DEFAULT_ANNULUS[1])
            q.add_argument("--n", type=int, default=DEFAULT_SAMPLES)
        if name == "identity":
            q.add_argument("--z", type=_complex, required=True, metavar="RE[,IM]")
            q.add_argument("--max-residual", type=float, default=IDENTITY_MAX_RESIDUAL)
        if name == "comparison":
            q.add_argument("--n", type=int, default=100)
            q.add_argument("--band", type=_floats, default=[1e-3, 1e-1], metavar="LO,HI")
            q.add_argument("--bound", type=float, default=50.0,
                           help="pass if all ratios lie in [1/bound, bound]")
        q.set_defaults(func=fn)

    p = sub.add_parser("admissibility", parents=common, help="fit the admissibility exponent")
    p.add_argument("set")
    p.add_argument("--sigmas", type=_floats, required=True)
    p.add_argument("--radii", type=_floats, required=True)
    p.add_argument("--centers", type=_complex, action="append", required=True,
                   metavar="RE,IM")
    p.set_defaults(func=cmd_admissibility)

    p = sub.add_parser("scenario", help="registry scenarios")
    ssub = p.add_subparsers(dest="action", required=True)
    q = ssub.add_parser("list", parents=common)
    q.set_defaults(func=cmd_scenario_list)
    q = ssub.add_parser("run", parents=common)
    q.add_argument("names", nargs="*", default=["all"])
    q.add_argument("--file", action="append", default=[], help="scenario JSON file")
    q.add_argument("--parallel", action="store_true", help="run scenarios concurrently")
    q.set_defaults(func=cmd_scenario_run)
    return parser


# helpers ---------------------------------------------------------------------

def _emit(args, text):
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.output, "w") as fh:
            fh.write(text)


def _emit_json(args, obj):
    _emit(args, scenarios._dump(obj))


def _set_or_spectrum(args, T):
    if getattr(args, "set", None):
        return _read_json_arg(args.set, set_from_json)
    return CompactSet.point_cloud(spectrum(T).eigenvalues)


def _region(args):
    return _read_json_arg(args.region, region_from_json) if args.region else None


def _annulus(args):
    d_min, d_max = args.d_min, args.d_max
    if not (0 < d_min <= d_max) or not math.isfinite(d_max):
        raise EmptyAnnulus(f"annulus [{d_min}, {d_max}] is empty")
    return d_min, d_max


# commands --------------------------------------------------------------------

def cmd_pseudospectra(args):
    T = _matrix(args.matrix)
    g = args.grid
    if len(g) != 6:
        raise ParameterError("grid is x0,x1,y0,y1,nx,ny")
    x0, x1, y0, y1 = g[:4]
    nx, ny = g[4], g[5]
    if nx != int(nx) or ny != int(ny) or nx < 1 or ny < 1 or x1 < x0 or y1 < y0 \
            or not all(math.isfinite(v) for v in g):
        raise ParameterError(f"bad grid {g}")
    xs = np.linspace(x0, x1, int(nx))
    ys = np.linspace(y0, y1, int(ny))
    lam = (xs[None, :] + 1j * ys[:, None]).ravel()
    norms = resolvent_norms(T, lam, strict=False)
    lines = ["re,im,log_norm"]
    for z, n in zip(lam, norms):
        val = "inf" if not math.isfinite(n) else f"{math.log(n):.17g}"
        lines.append(f"{z.real:.17g},{z.imag:.17g},{val}")
    _emit(args, "\n".join(lines) + "\n")
    return 0


def cmd_growth_fit(args):
    T = _matrix(args.matrix)
    K = _set_or_spectrum(args, T)
    annulus = _annulus(args)
    span = math.log10(annulus[1] / annulus[0])
    if span < args.min_decades:
        raise InsufficientDecades(
            f"annulus spans {span:.2f} decades, need {args.min_decades}")
    fld = sample_field(T, K, annulus, args.n, args.seed, args.workers)
    if args.format == "csv":
        _emit(args, fld.to_csv())
        return 0
    fit = fit_growth(fld, min_decades=args.min_decades)
    _emit_json(args, fit.to_dict())
    return 0


def cmd_verify_identity(args):
    T = _matrix(args.matrix)
    f = _read_json_arg(args.function, function_from_json)
    res = resolvent_identity_check(T, f, args.z, _region(args), args.contour)
    ok = res.residual <= args.max_residual
    _emit_json(args, {"check": "identity", "z": args.z, "residual": res.residual,
                      "max_residual": args.max_residual, "pass": ok})
    return 0 if ok else 1


def cmd_verify_theorem_a(args):
    if args.battery or args.matrix is None:
        if not args.battery:
            raise InputError("give MATRIX FUNCTION or --battery")
        report, _ = scenarios.run_theorem_A_battery(args.seed, args.workers)
        _emit_json(args, {"check": "theorem-a", **report})
        return 0 if report["pass"] else 1
    if args.function is None:
        raise InputError("theorem-a needs a function")
    T = _matrix(args.matrix)
    f = _read_json_arg(args.function, function_from_json)
    rep = verify_theorem_A(T, _set_or_spectrum(args, T), f, _region(args), _annulus(args),
                           args.n, args.seed, workers=args.workers)
    _emit_json(args, {"check": "theorem-a", **rep.to_dict()})
    return 0 if rep.passed else 1


def cmd_verify_converse(args):
    T = _matrix(args.matrix)
    f = _read_json_arg(args.function, function_from_json)
    rep = verify_converse(T, _set_or_spectrum(args, T), f, _region(args), _annulus(args),
                          args.n, args.seed, workers=args.workers)
    _emit_json(args, {"check": "converse", **rep.to_dict()})
    return 0 if rep.passed else 1


def cmd_verify_comparison(args):
    T = _matrix(args.matrix)
    f = _read_json_arg(args.function, function_from_json)
    if len(args.band) != 2 or not 0 < args.band[0] < args.band[1]:
        raise ParameterError(f"bad band {args.band}")
    zs = z_samples_near(f(spectrum(T).values), tuple(args.band), args.n, args.seed)
    scan = resolvent_comparison_scan(T, f, _region(args), zs)
    lo, hi = scan.extrema
    ok = 1 / args.bound <= lo and hi <= args.bound
    _emit_json(args, {"check": "comparison", "min_ratio": lo, "max_ratio": hi,
                      "n": int(zs.size), "bound": args.bound, "pass": ok})
    return 0 if ok else 1


def cmd_admissibility(args):
    G = _read_json_arg(args.set, set_from_json)
    fit = fit_admissibility(G, args.sigmas, args.radii, args.centers, args.resolution)
    _emit_json(args, {"p_hat": fit.p_hat, "C_hat": fit.C_hat,
                      "residuals": list(np.asarray(fit.residuals, dtype=float))})
    return 0


def cmd_scenario_list(args):
    _emit(args, "\n".join(scenarios.scenario_names()) + "\n")
    return 0


def cmd_scenario_run(args):
    out_dir = "scenario-output" if args.output in (None, "-") else args.output
    names = args.names if args.names != ["all"] or not args.file else []
    summary = scenarios.run_registry(names, out_dir, args.seed, args.workers,
                                     args.parallel, args.file)
    width = max([len(r["name"]) for r in summary["scenarios"]] + [8])
    lines = [f"{'scenario':<{width}}  result  seconds"]
    for r in summary["scenarios"]:
        lines.append(f"{r['name']:<{width}}  {'PASS' if r['pass'] else 'FAIL':<6}  "
                     f"{r['seconds']:.2f}")
    lines.append(f"reports written to {out_dir}")
    sys.stdout.write("\n".join(lines) + "\n")
    return 0 if summary["pass"] else 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = _config.default_seed()
    overrides = {name: getattr(args, f"tol_{name}") for name in _config.DEFAULT_TOLERANCES
                 if getattr(args, f"tol_{name}", None) is not None}
    try:
        with _config.tolerances(**overrides):
            return args.func(args)
    except ResolventLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


def entry():
    try:
        code = main()
    except BrokenPipeError:
        code = 0
    sys.exit(code)


if __name__ == "__main__":
    entry()
