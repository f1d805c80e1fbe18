"""Sampling ``lam -> ||(T - lam)^{-1}||`` near a compact set and fitting growth orders.

A field is a set of points ``lam`` at controlled distance from ``K`` together
with the resolvent norm there. The growth order is the slope of the upper
envelope of ``log ||(T - lam)^{-1}||`` against ``-log dist(lam, K)``.
"""
import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._config import default_seed, tol
from .errors import (EmptyAnnulus, HypothesisViolation, InsufficientDecades,
                     DegenerateFit, ParameterError)
from .func_calculus import (apply_function, critical_data, preimages)
from .operator_core import as_matrix, resolvent_norm, resolvent_norms, spectrum
from .region_sets import CompactSet, fit_admissibility, preimage_set

DEFAULT_ANNULUS = (1e-4, 1e-1)
DEFAULT_SAMPLES = 2000
SLACK = 0.15
SLACK_P = 0.25


@dataclass(frozen=True, eq=False)
class ResolventField:
    lam: np.ndarray
    dist: np.ndarray
    norm: np.ndarray
    annulus: tuple
    set_ref: CompactSet = None
    operator_ref: object = None
    rejected: int = 0
    coverage: float = 1.0
    warnings: tuple = ()

    @property
    def u(self):
        return np.log(self.norm)

    def __len__(self):
        return self.lam.size

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["re", "im", "dist", "norm", "log_dist", "log_norm"])
        for lam, d, n in zip(self.lam, self.dist, self.norm):
            w.writerow([f"{lam.real:.17g}", f"{lam.imag:.17g}", f"{d:.17g}", f"{n:.17g}",
                        f"{math.log(d):.17g}", f"{math.log(n):.17g}"])
        return buf.getvalue()


def _net(points, spacing):
    """Thin ``points`` so that kept points are at least ~``spacing`` apart (grid hashing)."""
    points = np.asarray(points, dtype=complex)
    key = np.floor(points.real / spacing) + 1j * np.floor(points.imag / spacing)
    _, idx = np.unique(key, return_index=True)
    return points[np.sort(idx)]


def _parallel_norms(T, lam, workers):
    if workers <= 1 or lam.size < 64:
        return resolvent_norms(T, lam, strict=False)
    chunks = np.array_split(lam, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda c: resolvent_norms(T, c, strict=False), chunks))
    return np.concatenate(parts)


def sample_field(T, K, annulus=DEFAULT_ANNULUS, n_samples=DEFAULT_SAMPLES, seed=None,
                 workers=1):
    """Deterministic samples with ``dist(lam, K)`` log-uniform in ``annulus``.

    Anchors are a net of K's points at spacing ``d_max/2``, visited round robin,
    so isolated parts of K are sampled as well as dense ones. Points where the
    resolvent is numerically undefined are dropped and counted in ``rejected``.
    """
    T = as_matrix(T)
    d_min, d_max = (float(a) for a in annulus)
    if not (d_min > 0 and d_max > d_min):
        raise EmptyAnnulus(f"annulus [{d_min}, {d_max}] is empty")
    seed = default_seed() if seed is None else seed
    rng = np.random.default_rng(seed)
    warnings = []
    eig = spectrum(T).values
    outside = K.distance(eig) > tol("hypothesis") * (1 + np.abs(eig)) + 1e-12
    if np.any(outside):
        warnings.append(f"{int(outside.sum())} eigenvalue(s) of T lie outside K")
    anchors = _net(K.boundary_points(), d_max / 2)
    accepted = []
    total = 0
    for _ in range(200):
        m = max(n_samples, anchors.size)
        idx = (total + np.arange(m)) % anchors.size
        total += m
        d = np.exp(rng.uniform(math.log(d_min), math.log(d_max), m))
        theta = rng.uniform(0.0, 2 * np.pi, m)
        lam = anchors[idx] + d * np.exp(1j * theta)
        actual = K.distance(lam)
        ok = (actual >= d_min) & (actual <= d_max)
        accepted.append((lam[ok], actual[ok]))
        if sum(a.size for a, _ in accepted) >= n_samples:
            break
    lam = np.concatenate([a for a, _ in accepted])[:n_samples]
    dist = np.concatenate([b for _, b in accepted])[:n_samples]
    if lam.size == 0:
        raise EmptyAnnulus("no points of the annulus could be sampled")
    norms = _parallel_norms(T, lam, workers)
    good = np.isfinite(norms)
    coverage = min(1.0, lam.size / anchors.size)
    return ResolventField(lam[good], dist[good], norms[good], (d_min, d_max), K, T,
                          int((~good).sum()), coverage, tuple(warnings))


@dataclass(frozen=True, eq=False)
class GrowthFit:
    s_hat: float
    C_hat: float
    r_squared: float
    envelope: np.ndarray
    bins: int
    n: int

    def to_dict(self):
        return {"s_hat": self.s_hat, "C_hat": self.C_hat, "r_squared": self.r_squared,
                "bins": self.bins, "n": self.n}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def fit_growth(field, bins=24, min_decades=2.0, min_samples=100):
    """Upper-envelope regression of ``log norm`` on ``-log dist``.

    The requested annulus must span ``min_decades``; the retained samples must
    span at least half of that (high orders lose the innermost samples to the
    spectral tolerance).
    """
    d_min, d_max = field.annulus
    if math.log10(d_max / d_min) < min_decades - 1e-12:
        raise InsufficientDecades(
            f"annulus spans {math.log10(d_max / d_min):.2f} decades, need {min_decades}")
    if len(field) < min_samples:
        raise InsufficientDecades(f"only {len(field)} usable samples, need {min_samples}")
    x = -np.log(field.dist)
    y = np.log(field.norm)
    span = (x.max() - x.min()) / math.log(10)
    if span < 0.5 * min_decades - 1e-12:
        raise InsufficientDecades(f"usable samples span only {span:.2f} decades")
    edges = np.linspace(x.min(), x.max(), bins + 1)
    which = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, bins - 1)
    env = []
    for b in range(bins):
        sel = np.flatnonzero(which == b)
        if sel.size:
            k = sel[np.argmax(y[sel])]
            env.append((x[k], y[k]))
    env = np.array(env)
    if env.shape[0] < 3:
        raise DegenerateFit("fewer than three populated bins")
    A = np.column_stack([env[:, 0], np.ones(env.shape[0])])
    coef, *_ = np.linalg.lstsq(A, env[:, 1], rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((env[:, 1] - pred) ** 2))
    ss_tot = float(np.sum((env[:, 1] - env[:, 1].mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return GrowthFit(float(coef[0]), float(math.exp(coef[1])), r2, env, bins, len(field))


def growth_order(T, K, annulus=DEFAULT_ANNULUS, n_samples=DEFAULT_SAMPLES, seed=None,
                 bins=24, workers=1):
    field_ = sample_field(T, K, annulus, n_samples, seed, workers)
    return fit_growth(field_, bins), field_


# growth comparisons between T and f(T) ----------------------------------------

@dataclass(frozen=True)
class GrowthReport:
    s_T: float
    s_fT: float
    passed: bool
    geometry: str = None
    p_hat: float = None
    slack: float = SLACK

    def to_dict(self):
        out = {"s_T": self.s_T, "s_fT": self.s_fT, "pass": self.passed, "slack": self.slack}
        if self.geometry is not None:
            out["geometry"] = self.geometry
            out["p_hat"] = self.p_hat
        return out


def image_set(f, K):
    return K.pushforward(f)


def verify_theorem_A(T, K, f, region=None, annulus=DEFAULT_ANNULUS,
                     n_samples=DEFAULT_SAMPLES, seed=None, slack=SLACK, workers=1):
    """Growth order of f(T) near f(K) must not exceed that of T near K (up to ``slack``)."""
    T = as_matrix(T)
    fit_T, _ = growth_order(T, K, annulus, n_samples, seed, workers=workers)
    fT = apply_function(T, f)
    fit_fT, _ = growth_order(fT, image_set(f, K), annulus, n_samples, seed, workers=workers)
    return GrowthReport(fit_T.s_hat, fit_fT.s_hat, fit_fT.s_hat <= fit_T.s_hat + slack,
                        slack=slack)


def check_converse_hypothesis(f, K, region=None):
    """Raise :class:`HypothesisViolation` if a zero of f' lies on K."""
    crit = critical_data(f, region)
    bad = []
    for xi, m, _ in crit.critical_points:
        if K.distance(xi) <= tol("hypothesis") * (1 + abs(xi)):
            bad.append(xi)
    if bad:
        raise HypothesisViolation(
            "f' vanishes on K at " + ", ".join(f"{x:.6g}" for x in bad), bad)
    return crit


def classify_geometry(K, p_threshold=1.9):
    """``('lipschitz', None)`` for finite sets and curve unions, else an admissibility fit."""
    if K.variant in ("point_cloud", "curve_union"):
        return "lipschitz", None
    R0 = max(d.radius for d in K.discs)
    scale = max(R0, 1e-3)
    sigmas = scale * np.logspace(-2.5, -1, 4)
    radii = scale * np.array([0.2, 0.5])
    centers = K.boundary_points(spacing=2 * np.pi * scale / 8)[:8]
    fit = fit_admissibility(K, sigmas, radii, centers, resolution=256)
    if fit.p_hat < p_threshold:
        return "p_admissible", fit.p_hat
    return "neither", fit.p_hat


def verify_converse(T, K, f, region=None, annulus=DEFAULT_ANNULUS,
                    n_samples=DEFAULT_SAMPLES, seed=None, slack=SLACK, slack_p=SLACK_P,
                    workers=1, geometry=None):
    """Growth of T near K against that of f(T) near f(K), when f' has no zeros on K.

    Lipschitz-contained K uses ``slack``; p-admissible K uses the looser
    ``slack_p``. For other sets no claim is made and ``passed`` is None.
    """
    T = as_matrix(T)
    check_converse_hypothesis(f, K, region)
    if geometry is None:
        geometry, p_hat = classify_geometry(K)
    else:
        p_hat = None
    fit_T, _ = growth_order(T, K, annulus, n_samples, seed, workers=workers)
    fT = apply_function(T, f)
    fit_fT, _ = growth_order(fT, image_set(f, K), annulus, n_samples, seed, workers=workers)
    used = {"lipschitz": slack, "p_admissible": slack_p}.get(geometry)
    passed = None if used is None else fit_T.s_hat <= fit_fT.s_hat + used
    return GrowthReport(fit_T.s_hat, fit_fT.s_hat, passed, geometry, p_hat,
                        slack=used if used is not None else float("nan"))


# distance and resolvent comparisons -----------------------------------------

@dataclass(frozen=True)
class RatioScan:
    min_ratio: float
    max_ratio: float
    n: int


def _polar_samples(anchors, band, n_radii, n_angles):
    d = np.logspace(math.log10(band[0]), math.log10(band[1]), n_radii)
    th = 2 * np.pi * (np.arange(n_angles) + 0.5) / n_angles
    off = (d[:, None] * np.exp(1j * th)[None, :]).ravel()
    return (np.asarray(anchors, dtype=complex)[:, None] + off[None, :]).ravel()


def bilipschitz_ratio_scan(f, K, region, resolution=32, band=(1e-3, 1e-1), grid=None):
    """Extremes of ``dist(lam, K~) / dist(f(lam), f(K))`` for ``dist(lam, K)`` in ``band``."""
    K_tilde = preimage_set(f, K, region, grid)
    lam = _polar_samples(K.sample_points(grid), band, resolution, resolution)
    d = K.distance(lam)
    keep = (d >= band[0]) & (d <= band[1]) & region.inner.contains(lam)
    if region.branch_neighborhoods:
        keep &= region.branch_index(lam) < 0
    lam = lam[keep]
    if lam.size == 0:
        raise ParameterError("no scan points survive the band and region filters")
    num = K_tilde.distance(lam)
    den = K.pushforward(f).distance(f(lam))
    ok = den > 0
    ratio = num[ok] / den[ok]
    return RatioScan(float(ratio.min()), float(ratio.max()), int(ratio.size))


@dataclass(frozen=True, eq=False)
class ComparisonScan:
    z: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def ratio(self):
        return self.lhs / self.rhs

    @property
    def extrema(self):
        r = self.ratio
        return float(r.min()), float(r.max())


def z_samples_near(values, band=(1e-3, 1e-1), n=100, seed=None):
    """Points at log-uniform distance from a finite set of values."""
    seed = default_seed() if seed is None else seed
    rng = np.random.default_rng(seed)
    values = np.unique(np.asarray(values, dtype=complex))
    K = CompactSet.point_cloud(values)
    out = []
    while len(out) < n:
        a = values[rng.integers(values.size)]
        d = math.exp(rng.uniform(math.log(band[0]), math.log(band[1])))
        z = a + d * np.exp(2j * np.pi * rng.random())
        if band[0] <= K.distance(z) <= band[1]:
            out.append(z)
    return np.array(out)


def resolvent_comparison_scan(T, f, region, z_samples):
    """``||(f(T) - z)^{-1}||`` against the largest ``||(T - lam)^{-1}||`` over preimages of z."""
    T = as_matrix(T)
    fT = apply_function(T, f)
    z_samples = np.asarray(z_samples, dtype=complex).ravel()
    lhs = resolvent_norms(fT, z_samples)
    rhs = np.empty(z_samples.size)
    for i, z in enumerate(z_samples):
        fan = preimages(f, z, region)
        rhs[i] = max(resolvent_norm(T, lam) for lam in fan.points)
    return ComparisonScan(z_samples, lhs, rhs)


# subharmonicity --------------------------------------------------------------

@dataclass(frozen=True)
class SubharmonicCheck:
    max_violation: float
    n_checks: int


def log_resolvent(T, lam):
    """``u(lam) = log ||(T - lam)^{-1}||``."""
    return np.log(resolvent_norms(T, lam))


def subharmonic_check(T, n_points=100, radius_fractions=(0.1, 0.25, 0.45), nodes=256,
                      seed=None, box=None):
    """Largest ``u(lam) - mean_{|mu - lam| = r} u(mu)`` over random points and radii.

    Radii are fractions (< 1/2) of the distance to the spectrum, so the disc
    of radius ``2r`` misses the spectrum.
    """
    T = as_matrix(T)
    seed = default_seed() if seed is None else seed
    rng = np.random.default_rng(seed)
    eig = spectrum(T).values
    if box is None:
        c = eig.mean()
        R = float(np.abs(eig - c).max()) + 1.0
        box = (c.real - R, c.real + R, c.imag - R, c.imag + R)
    circle = np.exp(2j * np.pi * np.arange(nodes) / nodes)
    worst = -math.inf
    done = 0
    while done < n_points:
        lam = complex(rng.uniform(box[0], box[1]), rng.uniform(box[2], box[3]))
        d = float(np.abs(eig - lam).min())
        if d < 1e-3:
            continue
        u0 = float(log_resolvent(T, lam)[0])
        for frac in radius_fractions:
            r = frac * d
            mean = float(log_resolvent(T, lam + r * circle).mean())
            worst = max(worst, u0 - mean)
        done += 1
    return SubharmonicCheck(worst, done * len(radius_fractions))
