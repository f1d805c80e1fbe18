"""Compact sets in the plane: distances, thickenings, admissibility fits.

Also holds :class:`RegionConfig`, a concrete stand-in for the open set on
which ``f`` is analytic together with the small discs around its critical
points.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (DegenerateFit, InputError, ParameterError,
                     ResolutionTooCoarse)

_KDTREE_MIN_POINTS = 256


@dataclass(frozen=True)
class Disc:
    center: complex
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius >= 0:
            raise InputError(f"disc radius must be nonnegative, got {self.radius}")

    def contains(self, z, slack=0.0):
        return np.abs(np.asarray(z) - self.center) <= self.radius + slack

    def to_dict(self):
        return {"center": [self.center.real, self.center.imag], "radius": self.radius}


@dataclass(frozen=True, eq=False)
class LipschitzCurve:
    """Graph curve ``z = zeta * (t + i h(t))`` sampled on a uniform grid of ``t``."""

    zeta: complex
    interval: tuple
    heights: np.ndarray
    lipschitz_constant: float

    def __post_init__(self):
        zeta = complex(self.zeta)
        if abs(abs(zeta) - 1.0) > 1e-14:
            raise InputError(f"|zeta| must be 1, got {abs(zeta)!r}")
        t0, t1 = map(float, self.interval)
        if not t1 > t0:
            raise InputError("curve interval must have t1 > t0")
        h = np.array(self.heights, dtype=float).ravel()
        if h.size < 2:
            raise InputError("a curve needs at least two height samples")
        L = float(self.lipschitz_constant)
        step = (t1 - t0) / (h.size - 1)
        if np.any(np.abs(np.diff(h)) > L * step * (1 + 1e-12) + 1e-15):
            raise InputError("height samples violate the stated Lipschitz constant")
        h.setflags(write=False)
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "interval", (t0, t1))
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "lipschitz_constant", L)

    @classmethod
    def from_function(cls, func, t0, t1, n, zeta=1.0, lipschitz_constant=None):
        t = np.linspace(t0, t1, n)
        h = np.asarray(func(t), dtype=float) * np.ones_like(t)
        if lipschitz_constant is None:
            lipschitz_constant = float(np.max(np.abs(np.diff(h))) / (t[1] - t[0])) if n > 1 else 0.0
            lipschitz_constant = max(lipschitz_constant, 1e-300)
        return cls(zeta, (t0, t1), h, lipschitz_constant)

    @classmethod
    def segment(cls, a, b, n=2):
        """Straight segment from ``a`` to ``b``."""
        a, b = complex(a), complex(b)
        length = abs(b - a)
        return cls((b - a) / length, (0.0, length), np.zeros(n), 1.0)

    @property
    def params(self):
        return np.linspace(self.interval[0], self.interval[1], self.heights.size)

    @property
    def vertices(self):
        return self.zeta * (self.params + 1j * self.heights)

    @property
    def discretization_error(self):
        step = (self.interval[1] - self.interval[0]) / (self.heights.size - 1)
        return step * math.sqrt(1 + self.lipschitz_constant ** 2) / 2

    def to_dict(self):
        return {"zeta": [self.zeta.real, self.zeta.imag], "interval": list(self.interval),
                "heights": self.heights.tolist(),
                "lipschitz_constant": self.lipschitz_constant}


@dataclass(frozen=True, eq=False)
class Polyline:
    """Image of a curve under a map, kept as its vertex sequence."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=complex).ravel()
        if v.size < 1:
            raise InputError("polyline needs at least one vertex")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def to_dict(self):
        return {"vertices": [[z.real, z.imag] for z in self.vertices]}


@dataclass(frozen=True, eq=False)
class CompactSet:
    """A nonempty compact set: finite point cloud, union of closed discs, or union of curves."""

    variant: str
    points: np.ndarray = None
    discs: tuple = ()
    curves: tuple = ()
    bounding_disc: Disc = field(default=None)

    def __post_init__(self):
        if self.variant == "point_cloud":
            pts = np.array(self.points, dtype=complex).ravel()
            if pts.size == 0:
                raise InputError("point cloud must be nonempty")
            pts.setflags(write=False)
            object.__setattr__(self, "points", pts)
            anchors = pts
        elif self.variant == "disc_union":
            discs = tuple(d if isinstance(d, Disc) else Disc(*d) for d in self.discs)
            if not discs:
                raise InputError("disc union must be nonempty")
            object.__setattr__(self, "discs", discs)
            anchors = None
        elif self.variant == "curve_union":
            curves = tuple(self.curves)
            if not curves:
                raise InputError("curve union must be nonempty")
            object.__setattr__(self, "curves", curves)
            anchors = np.concatenate([c.vertices for c in curves])
        else:
            raise InputError(f"unknown set variant {self.variant!r}")
        if self.bounding_disc is None:
            if anchors is None:
                cs = np.array([d.center for d in self.discs])
                c = complex(cs.mean())
                r = max(abs(d.center - c) + d.radius for d in self.discs)
            else:
                c = complex(0.5 * (anchors.real.min() + anchors.real.max())
                            + 0.5j * (anchors.imag.min() + anchors.imag.max()))
                r = float(np.abs(anchors - c).max())
            object.__setattr__(self, "bounding_disc", Disc(c, r))
        elif not isinstance(self.bounding_disc, Disc):
            object.__setattr__(self, "bounding_disc", Disc(*self.bounding_disc))

    # constructors
    @classmethod
    def point_cloud(cls, points):
        return cls("point_cloud", points=points)

    @classmethod
    def disc_union(cls, discs):
        return cls("disc_union", discs=tuple(discs))

    @classmethod
    def curve_union(cls, curves):
        return cls("curve_union", curves=tuple(curves))

    def distance(self, lam):
        return distance(self, lam)

    def sample_points(self, spacing=None):
        """Finite sample of the set (vertices, points, or disc boundary plus interior fill)."""
        if self.variant == "point_cloud":
            return self.points
        if self.variant == "curve_union":
            return np.concatenate([c.vertices for c in self.curves])
        out = []
        for d in self.discs:
            h = spacing if spacing is not None else max(d.radius / 64, 1e-12)
            if d.radius == 0:
                out.append(np.array([d.center]))
                continue
            nb = max(8, int(math.ceil(2 * math.pi * d.radius / h)))
            out.append(d.center + d.radius * np.exp(2j * np.pi * np.arange(nb) / nb))
            k = int(math.floor(d.radius / h))
            g = np.arange(-k, k + 1) * h
            x, y = np.meshgrid(g, g)
            z = (x + 1j * y).ravel()
            out.append(d.center + z[np.abs(z) < d.radius])
        return np.concatenate(out)

    def boundary_points(self, spacing=None):
        """Points used as anchors when sampling near the set from outside."""
        if self.variant != "disc_union":
            return self.sample_points()
        out = []
        for d in self.discs:
            if d.radius == 0:
                out.append(np.array([d.center]))
                continue
            h = spacing if spacing is not None else d.radius / 64
            nb = max(8, int(math.ceil(2 * math.pi * d.radius / h)))
            out.append(d.center + d.radius * np.exp(2j * np.pi * np.arange(nb) / nb))
        return np.concatenate(out)

    def pushforward(self, f, spacing=None):
        """Image of the set under ``f``, computed from its samples.

        Curves map to polylines through the image vertices (same parameter
        grid). Discs map exactly under affine ``f``. Otherwise each disc is
        replaced by the closed image curve of its boundary (``f`` is assumed
        injective there), which gives the right distance from outside the image.
        """
        if self.variant == "point_cloud":
            return CompactSet.point_cloud(f(self.points))
        if self.variant == "curve_union":
            return CompactSet.curve_union([Polyline(f(c.vertices)) for c in self.curves])
        affine = getattr(f, "affine_coefficients", lambda: None)()
        if affine is not None:
            a0, a1 = affine
            return CompactSet.disc_union([Disc(a0 + a1 * d.center, abs(a1) * d.radius)
                                          for d in self.discs])
        curves = []
        for d in self.discs:
            if d.radius == 0:
                curves.append(Polyline(f(np.array([d.center]))))
                continue
            h = spacing if spacing is not None else 2 * math.pi * d.radius / 8192
            nb = max(64, int(math.ceil(2 * math.pi * d.radius / h)))
            circle = d.center + d.radius * np.exp(2j * np.pi * np.arange(nb + 1) / nb)
            curves.append(Polyline(f(circle)))
        return CompactSet.curve_union(curves)

    def to_dict(self):
        out = {"variant": self.variant, "bounding_disc": self.bounding_disc.to_dict()}
        if self.variant == "point_cloud":
            out["points"] = [[z.real, z.imag] for z in self.points]
        elif self.variant == "disc_union":
            out["discs"] = [d.to_dict() for d in self.discs]
        else:
            out["curves"] = [c.to_dict() for c in self.curves]
        return out


def distance(K, lam):
    """Euclidean distance from ``lam`` (scalar or array) to the compact set ``K``."""
    scalar = np.ndim(lam) == 0
    q = np.atleast_1d(np.asarray(lam, dtype=complex)).ravel()
    if K.variant == "point_cloud":
        d = _point_distance(q, K.points)
    elif K.variant == "disc_union":
        d = np.full(q.shape, np.inf)
        for disc in K.discs:
            d = np.minimum(d, np.maximum(np.abs(q - disc.center) - disc.radius, 0.0))
    else:
        starts, ends, lone = [], [], []
        for c in K.curves:
            v = c.vertices
            if v.size == 1:
                lone.append(v)
            else:
                starts.append(v[:-1])
                ends.append(v[1:])
        d = np.full(q.shape, np.inf)
        if starts:
            d = _kernels.min_dist_segments(q, np.concatenate(starts), np.concatenate(ends))
        if lone:
            d = np.minimum(d, _point_distance(q, np.concatenate(lone)))
    if scalar:
        return float(d[0])
    return d.reshape(np.shape(lam))


def _point_distance(q, points):
    if points.size >= _KDTREE_MIN_POINTS and q.size * points.size > 2_000_000:
        from scipy.spatial import cKDTree

        tree = cKDTree(np.column_stack([points.real, points.imag]))
        d, _ = tree.query(np.column_stack([q.real, q.imag]))
        return np.asarray(d, dtype=float)
    return _kernels.min_dist_points(q, points)


# thickening measure ----------------------------------------------------------

@dataclass(frozen=True)
class MeasureEstimate:
    area: float
    error: float
    cells: int
    cell_side: float

    def __float__(self):
        return self.area


def _grid(a, R, resolution):
    c = 2.0 * R / resolution
    g = -R + c * (np.arange(resolution) + 0.5)
    x, y = np.meshgrid(g, g)
    z = (x + 1j * y).ravel()
    z = z[np.abs(z) < R]
    return a + z, c


def thickened_measure(G, sigma, a, R, resolution=512):
    """Area of ``{y notin G : 0 < dist(y, G) <= sigma}`` inside the disc ``D(a, R)``.

    Deterministic grid count: a cell of side ``2R/resolution`` is counted when
    its center satisfies the condition. The error bar counts cells whose
    center lies within half a cell diagonal of either level set.
    """
    if not (sigma > 0 and R > 0):
        raise ParameterError("sigma and R must be positive")
    if resolution < 64:
        raise ParameterError(f"resolution must be >= 64, got {resolution}")
    cell = 2.0 * R / resolution
    if sigma < 2 * cell:
        raise ResolutionTooCoarse(
            f"sigma={sigma:g} is thinner than two grid cells ({2 * cell:g}); raise resolution")
    centers, c = _grid(complex(a), float(R), int(resolution))
    d = distance(G, centers)
    inside = (d > 0) & (d <= sigma)
    half_diag = c / math.sqrt(2)
    straddle = (np.abs(d - sigma) <= half_diag) | ((d > 0) & (d <= half_diag))
    area = c * c
    return MeasureEstimate(float(inside.sum() * area), float(straddle.sum() * area),
                           int(inside.sum()), c)


@dataclass(frozen=True)
class AdmissibilityFit:
    p_hat: float
    C_hat: float
    residuals: np.ndarray
    n_used: int


def fit_admissibility(G, sigmas, radii, centers, resolution=256):
    """Least-squares fit of ``log m = log C + (2-p) log sigma + p log R``.

    Only triples with ``sigma <= R/4`` are used; the grid resolution is raised
    per triple so the thickening spans at least four cells.
    """
    sigmas = np.asarray(sigmas, dtype=float).ravel()
    radii = np.asarray(radii, dtype=float).ravel()
    centers = np.asarray(centers, dtype=complex).ravel()
    if sigmas.size < 4 or sigmas.max() / sigmas.min() < 10 * (1 - 1e-12):
        raise ParameterError("need at least 4 sigma values spanning one decade")
    rows = []
    for s in sigmas:
        for R in radii:
            if s > R / 4:
                continue
            res = int(min(4096, max(resolution, math.ceil(8 * R / s))))
            for a in centers:
                m = thickened_measure(G, s, a, R, res).area
                if m > 0:
                    rows.append((math.log(s), math.log(R), math.log(m)))
    if not rows:
        raise DegenerateFit("all thickened measures are zero")
    ls, lR, lm = np.array(rows).T
    y = lm - 2 * ls
    x = lR - ls
    A = np.column_stack([np.ones_like(x), x])
    if np.ptp(x) == 0:
        raise DegenerateFit("R/sigma does not vary; cannot separate the exponent")
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return AdmissibilityFit(float(coef[1]), float(math.exp(coef[0])), resid, len(rows))


# region configuration --------------------------------------------------------

@dataclass(frozen=True)
class BranchDisc:
    """Neighbourhood ``W_j`` of a critical point of order ``order``."""

    center: complex
    radius: float
    order: int

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if int(self.order) < 2:
            raise InputError("branch order must be >= 2")
        object.__setattr__(self, "order", int(self.order))

    @property
    def disc(self):
        return Disc(self.center, self.radius)

    def to_dict(self):
        return {"center": [self.center.real, self.center.imag], "radius": self.radius,
                "order": self.order}


@dataclass(frozen=True)
class RegionConfig:
    """Working domain ``omega`` plus branch discs and an interior margin."""

    omega: Disc
    branch_neighborhoods: tuple = ()
    inner_margin: float = 0.05

    def __post_init__(self):
        if not isinstance(self.omega, Disc):
            object.__setattr__(self, "omega", Disc(*self.omega))
        bn = tuple(b if isinstance(b, BranchDisc) else BranchDisc(*b)
                   for b in self.branch_neighborhoods)
        object.__setattr__(self, "branch_neighborhoods", bn)
        if not self.inner_margin > 0 or self.inner_margin >= self.omega.radius:
            raise InputError("inner_margin must be positive and smaller than omega's radius")
        for i, w in enumerate(bn):
            # closed disc of radius 2 * diam W around the critical point must sit in omega
            if abs(w.center - self.omega.center) + 4 * w.radius > self.omega.radius:
                raise InputError(f"branch disc {i} violates cl D(xi, 2 diam W) within omega")
            for v in bn[:i]:
                if abs(w.center - v.center) <= w.radius + v.radius:
                    raise InputError("branch disc closures must be pairwise disjoint")

    @property
    def inner(self):
        return Disc(self.omega.center, self.omega.radius - self.inner_margin)

    def in_omega(self, z):
        return self.omega.contains(z)

    def branch_index(self, z):
        """Index of the branch disc containing ``z``, or -1."""
        z = np.asarray(z, dtype=complex)
        out = np.full(z.shape, -1, dtype=int)
        for k, w in enumerate(self.branch_neighborhoods):
            out = np.where((out < 0) & (np.abs(z - w.center) < w.radius), k, out)
        return out

    def grid(self, resolution, shrink=True, exclude_branch=False):
        """Deterministic square grid of points in omega (or its inner part)."""
        d = self.inner if shrink else self.omega
        pts, _ = _grid(d.center, d.radius, int(resolution))
        if exclude_branch and self.branch_neighborhoods:
            pts = pts[self.branch_index(pts) < 0]
        return pts

    def to_dict(self):
        return {"omega": self.omega.to_dict(),
                "branch_neighborhoods": [b.to_dict() for b in self.branch_neighborhoods],
                "inner_margin": self.inner_margin}

    @classmethod
    def around(cls, f, center, radius, inner_margin=0.05, branch_radius=None):
        """Region ``D(center, radius)`` with branch discs built from ``f``'s critical points."""
        from .func_calculus import critical_data

        omega = Disc(center, radius)
        crit = critical_data(f, RegionConfig(omega, (), inner_margin)).critical_points
        bn = []
        for xi, m, _ in crit:
            room = (radius - abs(xi - complex(center))) / 4
            others = [abs(xi - o[0]) / 2 for o in crit if o[0] != xi]
            r = min([room] + others) * 0.99
            if branch_radius is not None:
                r = min(r, branch_radius)
            if r > 0:
                bn.append(BranchDisc(xi, r, m))
        return cls(omega, tuple(bn), inner_margin)


# preimage set ----------------------------------------------------------------

def preimage_set(f, K, region, grid=None):
    """Point-cloud approximation of ``f^{-1}(f(K))`` inside ``region.omega``, K included."""
    from .func_calculus import preimages

    samples = K.sample_points(grid)
    values = f(samples)
    found = [np.asarray(samples, dtype=complex)]
    for w in values:
        fan = preimages(f, w, region)
        found.append(np.asarray(fan.points, dtype=complex))
    pts = np.concatenate(found)
    return CompactSet.point_cloud(_dedupe(pts, 1e-9))


def _dedupe(points, tol_):
    if points.size == 0:
        return points
    key = np.round(points.real / tol_) + 1j * np.round(points.imag / tol_)
    _, idx = np.unique(key, return_index=True)
    return points[np.sort(idx)]


# exchange format -------------------------------------------------------------

def set_to_json(K):
    return json.dumps(K.to_dict())


def set_from_json(text):
    try:
        obj = json.loads(text) if isinstance(text, str) else text
        variant = obj["variant"]
        bd = obj.get("bounding_disc")
        bdisc = None if bd is None else Disc(_c(bd["center"]), bd["radius"])
        if variant == "point_cloud":
            return CompactSet("point_cloud", points=[_c(p) for p in obj["points"]],
                              bounding_disc=bdisc)
        if variant == "disc_union":
            return CompactSet("disc_union", discs=tuple(Disc(_c(d["center"]), d["radius"])
                                                        for d in obj["discs"]),
                              bounding_disc=bdisc)
        if variant == "curve_union":
            curves = []
            for c in obj["curves"]:
                if "vertices" in c:
                    curves.append(Polyline([_c(v) for v in c["vertices"]]))
                else:
                    curves.append(LipschitzCurve(_c(c["zeta"]), tuple(c["interval"]),
                                                 c["heights"], c["lipschitz_constant"]))
            return CompactSet("curve_union", curves=tuple(curves), bounding_disc=bdisc)
        raise InputError(f"unknown set variant {variant!r}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"cannot parse set JSON: {exc}") from None


def region_from_json(text):
    try:
        obj = json.loads(text) if isinstance(text, str) else text
        om = obj["omega"]
        bn = tuple(BranchDisc(_c(b["center"]), b["radius"], b["order"])
                   for b in obj.get("branch_neighborhoods", []))
        return RegionConfig(Disc(_c(om["center"]), om["radius"]), bn,
                            obj.get("inner_margin", 0.05))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"cannot parse region JSON: {exc}") from None


def _c(v):
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1] if len(v) > 1 else 0.0)
    return complex(v)


def load_set(path):
    try:
        with open(path) as fh:
            return set_from_json(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
