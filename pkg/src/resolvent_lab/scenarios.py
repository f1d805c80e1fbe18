"""Reproducible scenario runs: the dense-spectrum example, the critical-point
counterexample, and batteries of growth checks.

Every scenario returns a JSON-ready dict; :func:`run_registry` writes it to
``<output_dir>/<name>/report.json`` (plus ``field.csv`` where a field was
sampled). Reports carry no timings, so equal seeds give equal bytes.
"""
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._config import default_seed
from .errors import (DimensionBudgetExceeded, HypothesisViolation, InputError,
                     ParameterError, UnknownScenario)
from .func_calculus import (Polynomial, PowerSeries, apply_function, function_from_json,
                            polynomial, resolvent_identity_check)
from .growth_analysis import (fit_growth, growth_order, resolvent_comparison_scan,
                              sample_field, verify_converse, verify_theorem_A,
                              z_samples_near)
from .operator_core import (BlockDiagonal, as_matrix, build, diagonal, direct_sum, jordan,
                            resolvent_norms, spectrum)
from .region_sets import (CompactSet, Disc, LipschitzCurve, RegionConfig, distance,
                          fit_admissibility, region_from_json, set_from_json,
                          thickened_measure)

SCHEMA_VERSION = 1


# dense-spectrum normal operator ---------------------------------------------

@dataclass(frozen=True, eq=False)
class DenseSpectrum:
    points: np.ndarray
    radii: np.ndarray
    r_min: float
    max_ratio: float
    grid_size: int

    @property
    def matrix(self):
        return BlockDiagonal(self.points)


def _ring_radii(r_min, exponent, spacing_factor):
    radii = [r_min]
    while radii[-1] < 1.0:
        r = radii[-1]
        radii.append(min(1.0, r + spacing_factor * r ** exponent))
    return np.array(radii)


def density_ratio(points, r_min, exponent=3, grid=400):
    """Max over an annulus grid of ``dist(lam, points) / |lam|^exponent``."""
    g = np.linspace(-1.0, 1.0, grid)
    x, y = np.meshgrid(g, g)
    lam = (x + 1j * y).ravel()
    r = np.abs(lam)
    lam = lam[(r >= r_min) & (r <= 1.0)]
    d = distance(CompactSet.point_cloud(points), lam)
    return float(np.max(d / np.abs(lam) ** exponent)), int(lam.size)


def build_dense_spectrum_normal(r_min=0.2, density_exponent=3, spacing_factor=0.5,
                                max_dim=20000, check_grid=400):
    """Eigenvalues on rings ``r_min <= r <= 1`` dense enough that
    ``dist(lam, sigma(N)) <= |lam|^3`` on the annulus.

    Ring gaps and arc spacings on the ring of radius ``r`` are at most
    ``spacing_factor * r^3``. The bound is re-checked on a ``check_grid``
    square grid and the worst ratio is reported.
    """
    if not 1e-2 <= r_min < 1:
        raise ParameterError(f"r_min must lie in [0.01, 1), got {r_min}")
    radii = _ring_radii(r_min, density_exponent, spacing_factor)
    counts = [int(math.ceil(2 * math.pi * r / (spacing_factor * r ** density_exponent)))
              for r in radii]
    if sum(counts) > max_dim:
        raise DimensionBudgetExceeded(
            f"r_min={r_min} needs {sum(counts)} eigenvalues (budget {max_dim})")
    pts = np.concatenate([r * np.exp(2j * np.pi * np.arange(n) / n)
                          for r, n in zip(radii, counts)])
    ratio, n_grid = density_ratio(pts, r_min, density_exponent, check_grid)
    return DenseSpectrum(pts, radii, r_min, ratio, n_grid)


def run_example_dense_sp(r_min=0.2, n_samples=None, seed=None, workers=1,
                         s_T_target=2.0, s_fT_target=1.0, tolerance=0.15):
    """N (+) Jordan(3, 2) with f(z) = z^2 - 3z.

    ``s_T`` is fitted near {3} on the default annulus. ``s_fT`` is fitted near
    f(sigma(T)) on ``dist in [10 r_min^3, 0.1]`` restricted to ``|z| <= 5``.
    That band is narrower than the usual two-decade requirement, so the fit
    runs with the decade check waived and says so in the report.
    """
    seed = default_seed() if seed is None else seed
    N = build_dense_spectrum_normal(r_min)
    J = jordan(3.0, 2)
    T = BlockDiagonal(N.points, (J,))
    f = polynomial(0, -3, 1)
    fJ = apply_function(J, f).entries
    fT = apply_function(T, f)

    fit_T, field_T = growth_order(T, CompactSet.point_cloud([3.0]), seed=seed,
                                  workers=workers)

    band = (10 * r_min ** 3, 1e-1)
    K_f = CompactSet.point_cloud(spectrum(T).values).pushforward(f)
    need = n_samples
    if need is None:
        # enough for every anchor of the net to be visited a few times
        need = 4 * int(np.unique(np.floor(K_f.points.real / (band[1] / 2))
                                 + 1j * np.floor(K_f.points.imag / (band[1] / 2))).size)
    field_f = sample_field(fT, K_f, band, need, seed, workers)
    keep = np.abs(field_f.lam) <= 5
    field_f = type(field_f)(field_f.lam[keep], field_f.dist[keep], field_f.norm[keep],
                            field_f.annulus, field_f.set_ref, field_f.operator_ref,
                            field_f.rejected, field_f.coverage, field_f.warnings)
    fit_fT = fit_growth(field_f, min_decades=0.0)

    # where the large entries come from: the nilpotent f(J) next to 0 versus the normal part
    near0 = np.abs(field_f.lam) <= band[1] + 1e-12
    jordan_part = resolvent_norms(BlockDiagonal(np.empty(0), (apply_function(J, f),)),
                                  field_f.lam[near0], strict=False)
    normal_part = resolvent_norms(BlockDiagonal(f(N.points)), field_f.lam[near0],
                                  strict=False)

    # diagnostic only: the same fit with the unfilled hole around f(0) = 0 left out
    hole = np.abs(field_f.lam) < 3 * r_min
    outside = type(field_f)(field_f.lam[~hole], field_f.dist[~hole], field_f.norm[~hole],
                            band)
    try:
        s_outside = fit_growth(outside, min_decades=0.0).s_hat
    except Exception:
        s_outside = None

    t = np.logspace(-4, -1, 25)
    lam = 3.0 + t * np.exp(0.7j)
    jordan_floor = bool(np.all(resolvent_norms(T, lam) >= t ** -2 / 2))

    nil = bool(np.allclose(fJ @ fJ, 0, atol=1e-12) and not np.allclose(fJ, 0))
    s_T_ok = abs(fit_T.s_hat - s_T_target) <= tolerance
    s_fT_ok = abs(fit_fT.s_hat - s_fT_target) <= tolerance
    report = {
        "r_min": r_min,
        "dim_normal": int(N.points.size),
        "rings": int(N.radii.size),
        "density_check": {"exponent": 3, "grid": 400, "points_checked": N.grid_size,
                          "max_ratio": N.max_ratio, "pass": N.max_ratio <= 1.0},
        "truncation": {
            "note": "sigma(N) is truncated below |lam| = r_min; the cubic density bound "
                    "is only checked on r_min <= |lam| <= 1",
            "band": list(band),
        },
        "f_of_J": [[_cjson(v) for v in row] for row in fJ],
        "f_of_J_nilpotent_index_2": nil,
        "s_T_near_3": fit_T.to_dict(),
        "s_fT": fit_fT.to_dict(),
        "s_fT_samples_near_0": int(near0.sum()),
        "max_jordan_over_normal_near_0": (float(np.max(jordan_part / normal_part))
                                          if near0.any() else None),
        "jordan_lower_bound_near_3": jordan_floor,
        "diagnostic_s_fT_outside_hole": s_outside,
        "checks": {"s_T": s_T_ok, "s_fT": s_fT_ok, "density": N.max_ratio <= 1.0,
                   "f_of_J": nil, "jordan_floor": jordan_floor},
    }
    report["pass"] = all(report["checks"].values())
    return report, field_f


def _cjson(z):
    z = complex(z)
    return [z.real, z.imag]


# critical-point counterexample ----------------------------------------------

def run_counterexample_critical(xi=1.0, seed=None, workers=1):
    """T = Jordan(xi, 2), f(z) = (z - xi)^2: f(T) is the zero matrix."""
    seed = default_seed() if seed is None else seed
    xi = complex(xi)
    T = jordan(xi, 2)
    f = PowerSeries([0, 0, 1], center=xi)
    fT = apply_function(T, f)
    exact_zero = bool(np.all(fT.entries == 0))
    K = CompactSet.point_cloud([xi])
    fit_T, field_T = growth_order(T, K, seed=seed, workers=workers)
    fit_fT, _ = growth_order(fT, K.pushforward(f), seed=seed, workers=workers)
    try:
        verify_converse(T, K, f, seed=seed)
        violation = None
    except HypothesisViolation as exc:
        violation = [_cjson(x) for x in exc.critical_points]
    checks = {
        "f_of_T_zero": exact_zero,
        "s_T": abs(fit_T.s_hat - 2.0) <= 0.1,
        "s_fT": abs(fit_fT.s_hat - 1.0) <= 0.1,
        "hypothesis_violation": violation is not None
        and any(abs(complex(*v) - xi) < 1e-8 for v in violation),
    }
    report = {"xi": _cjson(xi), "f_of_T_zero": exact_zero, "s_T": fit_T.to_dict(),
              "s_fT": fit_fT.to_dict(), "hypothesis_violation_at": violation,
              "checks": checks, "pass": all(checks.values())}
    return report, field_T


# batteries ------------------------------------------------------------------

JORDAN_SIZES = (1, 2, 3, 4)
JORDAN_CENTERS = (0.0, 3.0, 1 + 2j)


def run_jordan_family(seed=None, workers=1, tolerance=0.10, spread=0.05):
    rows = []
    ok = True
    for n in JORDAN_SIZES:
        fits = []
        for c in JORDAN_CENTERS:
            fit, _ = growth_order(jordan(c, n), CompactSet.point_cloud([c]), seed=seed,
                                  workers=workers)
            fits.append(fit.s_hat)
            rows.append({"n": n, "center": _cjson(c), **fit.to_dict(),
                         "pass": abs(fit.s_hat - n) <= tolerance})
        ok &= all(abs(s - n) <= tolerance for s in fits)
        ok &= (max(fits) - min(fits)) <= spread
    return {"fits": rows, "pass": bool(ok)}, None


def theorem_A_battery():
    """(name, T, K, f) cases; K is sigma(T) and avoids critical points where asked."""
    seg = np.linspace(0.0, 1.0, 21)
    ring = 0.5 * np.exp(2j * np.pi * np.arange(16) / 16)
    ops = [("diag_segment", diagonal(seg)),
           ("diag_ring", diagonal(ring))]
    ops += [(f"jordan_{n}", jordan(0.0, n)) for n in JORDAN_SIZES]
    ops += [("diag_plus_jordan2", direct_sum(diagonal(np.linspace(0.5, 1.0, 11)),
                                             jordan(0.0, 2))),
            ("jordan3_plus_jordan2", direct_sum(jordan(0.0, 3), jordan(0.5, 2)))]
    funcs = [("z+z^2", polynomial(0, 1, 1)),
             ("z^2-3z", polynomial(0, -3, 1)),
             ("z^3+3z", polynomial(0, 3, 0, 1))]
    cases = []
    for oname, T in ops:
        K = CompactSet.point_cloud(spectrum(T).eigenvalues)
        for fname, f in funcs:
            cases.append((f"{oname}|{fname}", T, K, f))
    return cases


def run_theorem_A_battery(seed=None, workers=1):
    rows = []
    for name, T, K, f in theorem_A_battery():
        rep = verify_theorem_A(T, K, f, seed=seed, workers=workers)
        rows.append({"case": name, **rep.to_dict()})
    return {"cases": rows, "pass": all(r["pass"] for r in rows)}, None


def converse_battery():
    """(name, T, K, f, annulus, expect_violation)."""
    seg = np.linspace(0.0, 1.0, 21)
    exp_like = PowerSeries([0, 1, 0.5, 1 / 6])
    n_circ = 32768
    circ = 0.5 * np.exp(2j * np.pi * np.arange(n_circ) / n_circ)
    disc = CompactSet.disc_union([Disc(0.0, 0.5)])
    wide = (1e-3, 1e-1)
    default = (1e-4, 1e-1)
    return [
        ("jordan2|z+z^2", jordan(0.0, 2), CompactSet.point_cloud([0.0]),
         polynomial(0, 1, 1), default, False),
        ("diag_segment|exp3", diagonal(seg), CompactSet.point_cloud(seg), exp_like,
         default, False),
        ("jordan3|z^3+3z", jordan(0.0, 3), CompactSet.point_cloud([0.0]),
         polynomial(0, 3, 0, 1), default, False),
        ("segment_curve|z^2-3z", diagonal(seg),
         CompactSet.curve_union([LipschitzCurve.segment(0.0, 1.0, 201)]),
         polynomial(0, -3, 1), default, False),
        ("disc|2z+1/2", BlockDiagonal(circ), disc, polynomial(0.5, 2), wide, False),
        ("disc|z+0.2z^2", BlockDiagonal(circ), disc, polynomial(0, 1, 0.2), wide, False),
        ("critical|(z-1)^2", jordan(1.0, 2), CompactSet.point_cloud([1.0]),
         polynomial(1, -2, 1), default, True),
        ("critical|z^3", jordan(0.0, 2), CompactSet.point_cloud([0.0]),
         polynomial(0, 0, 0, 1), default, True),
        ("critical|z^2-3z_on_segment", diagonal(np.linspace(1.0, 2.0, 11)),
         CompactSet.point_cloud(np.linspace(1.0, 2.0, 11)), polynomial(0, -3, 1),
         default, True),
    ]


def run_converse_battery(seed=None, workers=1):
    rows = []
    ok = True
    for name, T, K, f, annulus, expect_violation in converse_battery():
        try:
            rep = verify_converse(T, K, f, annulus=annulus, seed=seed, workers=workers)
            row = {"case": name, **rep.to_dict(), "violation": False}
            good = not expect_violation and rep.passed is True
        except HypothesisViolation as exc:
            row = {"case": name, "violation": True,
                   "critical_points": [_cjson(x) for x in exc.critical_points]}
            good = expect_violation
        row["as_expected"] = bool(good)
        ok &= good
        rows.append(row)
    return {"cases": rows, "pass": bool(ok)}, None


def run_admissibility_gallery(seed=None, workers=1):
    seg = CompactSet.curve_union([LipschitzCurve.segment(0.0, 1.0, 2)])
    point = CompactSet.point_cloud([0.0])
    sig = np.logspace(-3, -1.5, 5)
    fit_seg = fit_admissibility(seg, sig, [0.2, 0.4], [0.5, 0.3 + 0j], resolution=256)
    fit_pt = fit_admissibility(point, sig, [0.2, 0.4], [0.0], resolution=256)
    stadium = thickened_measure(seg, 0.1, 0.5, 10.0, resolution=1024)
    exact = 2 * 0.1 * 1.0 + math.pi * 0.01
    checks = {
        "segment_p": 0.85 <= fit_seg.p_hat <= 1.15,
        "point_p": fit_pt.p_hat <= 0.2,
        "stadium_area": abs(stadium.area - exact) <= 0.05 * exact,
    }
    report = {"segment": {"p_hat": fit_seg.p_hat, "C_hat": fit_seg.C_hat},
              "point": {"p_hat": fit_pt.p_hat, "C_hat": fit_pt.C_hat},
              "stadium": {"estimate": stadium.area, "error_bar": stadium.error,
                          "exact": exact},
              "checks": checks, "pass": all(checks.values())}
    return report, None


REGISTRY = {
    "dense_sp": lambda seed, workers: run_example_dense_sp(0.2, seed=seed, workers=workers),
    "critical_counterexample": lambda seed, workers: run_counterexample_critical(
        1.0, seed=seed, workers=workers),
    "jordan_family": lambda seed, workers: run_jordan_family(seed, workers),
    "theorem_A_battery": lambda seed, workers: run_theorem_A_battery(seed, workers),
    "converse_battery": lambda seed, workers: run_converse_battery(seed, workers),
    "admissibility_gallery": lambda seed, workers: run_admissibility_gallery(seed, workers),
}


# declarative scenario files -------------------------------------------------

@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    operator: dict
    function: dict = None
    set: dict = None
    region: dict = None
    checks: tuple = ()
    seed: int = 42

    def __post_init__(self):
        for c in self.checks:
            if c.get("op") not in CHECKS:
                raise InputError(f"check refers to unknown operation {c.get('op')!r}; "
                                 f"known: {sorted(CHECKS)}")

    @classmethod
    def from_json(cls, text):
        try:
            obj = json.loads(text) if isinstance(text, str) else text
            if obj.get("schema") != SCHEMA_VERSION:
                raise InputError(f"unsupported scenario schema {obj.get('schema')!r}")
            return cls(obj["name"], obj["operator"], obj.get("function"), obj.get("set"),
                       obj.get("region"), tuple(obj.get("checks", ())),
                       int(obj.get("seed", 42)))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"cannot parse scenario: {exc}") from None

    def to_dict(self):
        return {"schema": SCHEMA_VERSION, "name": self.name, "operator": self.operator,
                "function": self.function, "set": self.set, "region": self.region,
                "checks": list(self.checks), "seed": self.seed}


def _check_growth(ctx, c):
    fit, fld = growth_order(ctx["T"], ctx["K"], tuple(c.get("annulus", (1e-4, 1e-1))),
                            c.get("n", 2000), ctx["seed"], workers=ctx["workers"])
    ctx["field"] = fld
    ok = abs(fit.s_hat - c["expect"]) <= c.get("tol", 0.1) if "expect" in c else True
    return {**fit.to_dict(), "pass": ok}


def _check_theorem_a(ctx, c):
    rep = verify_theorem_A(ctx["T"], ctx["K"], ctx["f"], ctx["region"], seed=ctx["seed"],
                           workers=ctx["workers"])
    return rep.to_dict()


def _check_converse(ctx, c):
    try:
        rep = verify_converse(ctx["T"], ctx["K"], ctx["f"], ctx["region"],
                              seed=ctx["seed"], workers=ctx["workers"])
    except HypothesisViolation as exc:
        return {"violation": True, "pass": bool(c.get("expect_violation", False)),
                "critical_points": [_cjson(x) for x in exc.critical_points]}
    return {**rep.to_dict(), "violation": False,
            "pass": bool(rep.passed) and not c.get("expect_violation", False)}


def _check_identity(ctx, c):
    z = complex(*c["z"]) if isinstance(c["z"], list) else complex(c["z"])
    res = resolvent_identity_check(ctx["T"], ctx["f"], z, ctx["region"])
    return {"residual": res.residual, "pass": res.residual <= c.get("max_residual", 1e-8)}


def _check_comparison(ctx, c):
    T = as_matrix(ctx["T"])
    fvals = ctx["f"](spectrum(T).values)
    zs = z_samples_near(fvals, tuple(c.get("band", (1e-3, 1e-1))), c.get("n", 100),
                        ctx["seed"])
    scan = resolvent_comparison_scan(T, ctx["f"], ctx["region"], zs)
    lo, hi = scan.extrema
    bound = c.get("bound", 50.0)
    return {"min_ratio": lo, "max_ratio": hi, "pass": 1 / bound <= lo and hi <= bound}


CHECKS = {"growth_fit": _check_growth, "theorem_a": _check_theorem_a,
          "converse": _check_converse, "identity": _check_identity,
          "comparison": _check_comparison}


def run_spec(spec, workers=1):
    T = build(**spec.operator) if "kind" in spec.operator else as_matrix(
        np.asarray(spec.operator["re"]) + 1j * np.asarray(spec.operator.get("im", 0)))
    K = set_from_json(spec.set) if spec.set else CompactSet.point_cloud(
        spectrum(T).eigenvalues)
    ctx = {"T": T, "K": K, "f": function_from_json(spec.function) if spec.function else None,
           "region": region_from_json(spec.region) if spec.region else None,
           "seed": spec.seed, "workers": workers, "field": None}
    results = [{"op": c["op"], **CHECKS[c["op"]](ctx, c)} for c in spec.checks]
    report = {"name": spec.name, "checks": results,
              "pass": all(r.get("pass", True) for r in results)}
    return report, ctx["field"]


# registry runner ------------------------------------------------------------

def scenario_names():
    return list(REGISTRY)


def _dump(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _run_one(name, runner, output_dir, seed, workers):
    start = time.perf_counter()
    report, fld = runner(seed, workers)
    elapsed = time.perf_counter() - start
    if output_dir is not None:
        d = os.path.join(output_dir, name)
        os.makedirs(d, exist_ok=True)
        with open(os.path.join(d, "report.json"), "w") as fh:
            fh.write(_dump({"scenario": name, "seed": seed, **report}))
        if fld is not None:
            with open(os.path.join(d, "field.csv"), "w") as fh:
                fh.write(fld.to_csv())
    return {"name": name, "pass": bool(report["pass"]), "seconds": elapsed}


def run_registry(names="all", output_dir=None, seed=None, workers=1, parallel=False,
                 files=()):
    """Run named scenarios (and scenario files); return a pass/fail summary with timings."""
    seed = default_seed() if seed is None else seed
    if names == "all" or names == ["all"]:
        names = scenario_names()
    names = list(names)
    unknown = [n for n in names if n not in REGISTRY]
    if unknown:
        raise UnknownScenario(f"unknown scenario(s): {', '.join(unknown)}; "
                              f"known: {', '.join(REGISTRY)}")
    jobs = [(n, REGISTRY[n]) for n in names]
    for path in files:
        try:
            with open(path) as fh:
                spec = ScenarioSpec.from_json(fh.read())
        except OSError as exc:
            raise InputError(f"cannot read {path}: {exc}") from None
        jobs.append((spec.name, lambda s, w, spec=spec: run_spec(spec, w)))
    if parallel and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
            rows = list(pool.map(lambda j: _run_one(j[0], j[1], output_dir, seed, workers),
                                 jobs))
    else:
        rows = [_run_one(n, r, output_dir, seed, workers) for n, r in jobs]
    return {"scenarios": rows, "pass": all(r["pass"] for r in rows)}
