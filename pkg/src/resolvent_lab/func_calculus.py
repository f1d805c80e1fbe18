"""Analytic functions of matrices and the factorisation machinery around them.

For a function ``f`` and a target value ``z`` the preimages ``lam_{z,j}``
give the factorisation

    f(lam) - z = phi_z(lam) * prod_j (lam - lam_{z,j}),

and the simple-fraction coefficients ``c_{z,j}`` of ``1 / prod_j (lam - lam_{z,j})``
turn the resolvent of ``f(T)`` into a combination of resolvents of ``T``:

    (f(T) - z)^{-1} = phi_z(T)^{-1} sum_j c_{z,j} (T - lam_{z,j})^{-1}.

``f(T)`` itself is computed either exactly (Horner for polynomials, and the
obvious variants for rational functions and truncated series) or through the
Cauchy integral, evaluated by the trapezoidal rule on circles around the
spectrum. The two routes are independent and are checked against each other.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import pdist

from ._config import QUAD_MAX_NODES, QUAD_START_NODES, tol
from .errors import (ContourOutsideDomain, ContourTooClose, CriticalValueCollision,
                     InputError, QuadratureStall, RootFindingFailure, SpectrumProximity)
from .operator_core import BlockDiagonal, ComplexMatrix, as_matrix, companion, spectrum
from .region_sets import Disc, RegionConfig


# analytic functions ----------------------------------------------------------

class AnalyticFunction:
    """Base class. Subclasses are vectorised callables with exact matrix evaluation."""

    variant = None

    def __call__(self, z):
        raise NotImplementedError

    def derivative(self, k=1):
        raise NotImplementedError

    def matrix(self, T):
        """``f(T)`` by direct (non-contour) evaluation."""
        raise NotImplementedError

    @property
    def domain(self):
        """Disc on which evaluation is allowed, or None for the whole plane."""
        return None

    def singularities(self):
        return np.empty(0, dtype=complex)

    def affine_coefficients(self):
        return None

    @property
    def degree_bound(self):
        """Uniform bound on the number of preimages of any value."""
        raise NotImplementedError


def _trim(c):
    c = np.asarray(c, dtype=complex).ravel()
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return np.zeros(1, dtype=complex)
    return c[: nz[-1] + 1].copy()


def _matrix_horner(coeffs, A):
    n = A.shape[0]
    out = coeffs[-1] * np.eye(n, dtype=complex)
    for c in coeffs[-2::-1]:
        out = out @ A
        out[np.diag_indices(n)] += c
    return out


class Polynomial(AnalyticFunction):
    """Polynomial with ascending complex coefficients."""

    variant = "polynomial"

    def __init__(self, coeffs):
        self.coeffs = _trim(coeffs)
        self.coeffs.setflags(write=False)

    def __repr__(self):
        return f"Polynomial({self.coeffs.tolist()})"

    @property
    def degree(self):
        return self.coeffs.size - 1

    @property
    def degree_bound(self):
        return self.degree

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.full(z.shape, self.coeffs[-1], dtype=complex)
        for c in self.coeffs[-2::-1]:
            out = out * z + c
        return out if out.ndim else complex(out)

    def derivative(self, k=1):
        c = self.coeffs
        for _ in range(k):
            c = P.polyder(c) if c.size > 1 else np.zeros(1, dtype=complex)
        return Polynomial(c)

    def matrix(self, T):
        return _matrix_horner(self.coeffs, np.asarray(as_matrix(T).entries))

    def affine_coefficients(self):
        if self.degree <= 1:
            c = np.concatenate([self.coeffs, [0, 0]])
            return complex(c[0]), complex(c[1])
        return None

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return Polynomial(P.polymul(self.coeffs, other.coeffs))
        if isinstance(other, Rational):
            return Rational(self * other.numerator, other.denominator)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Polynomial):
            return Polynomial(P.polysub(self.coeffs, other.coeffs))
        return Polynomial(P.polysub(self.coeffs, [complex(other)]))

    def roots(self):
        """All roots, as eigenvalues of the companion matrix."""
        if self.degree < 1:
            return np.empty(0, dtype=complex)
        return np.linalg.eigvals(companion(self.coeffs).entries)

    def to_dict(self):
        return {"variant": "polynomial", "coeffs_re": self.coeffs.real.tolist(),
                "coeffs_im": self.coeffs.imag.tolist()}


class Rational(AnalyticFunction):
    variant = "rational"

    def __init__(self, numerator, denominator):
        self.numerator = numerator if isinstance(numerator, Polynomial) else Polynomial(numerator)
        self.denominator = (denominator if isinstance(denominator, Polynomial)
                            else Polynomial(denominator))
        if not np.any(self.denominator.coeffs):
            raise InputError("rational function with zero denominator")

    def __repr__(self):
        return f"Rational({self.numerator!r}, {self.denominator!r})"

    @property
    def degree_bound(self):
        return max(self.numerator.degree, self.denominator.degree)

    def __call__(self, z):
        return self.numerator(z) / self.denominator(z)

    def derivative(self, k=1):
        f = self
        for _ in range(k):
            n, d = f.numerator, f.denominator
            f = Rational(n.derivative() * d - n * d.derivative(), d * d)
        return f

    def matrix(self, T):
        T = as_matrix(T)
        den = self.denominator.matrix(T)
        return np.linalg.solve(den.T, self.numerator.matrix(T).T).T

    def singularities(self):
        return self.denominator.roots()

    def affine_coefficients(self):
        if self.denominator.degree == 0:
            return Polynomial(self.numerator.coeffs / self.denominator.coeffs[0]
                              ).affine_coefficients()
        return None

    def __mul__(self, other):
        if isinstance(other, Rational):
            return Rational(self.numerator * other.numerator,
                            self.denominator * other.denominator)
        if isinstance(other, Polynomial):
            return Rational(self.numerator * other, self.denominator)
        return NotImplemented

    def to_dict(self):
        return {"variant": "rational", "numerator": self.numerator.to_dict(),
                "denominator": self.denominator.to_dict()}


class PowerSeries(AnalyticFunction):
    """Truncated power series ``sum_k c_k (z - center)^k`` with a nominal convergence radius.

    Evaluation is restricted to ``0.9 * convergence_radius`` around the center.
    """

    variant = "power_series"
    DOMAIN_FRACTION = 0.9

    def __init__(self, coeffs, convergence_radius=math.inf, center=0.0):
        self.coeffs = _trim(coeffs)
        self.coeffs.setflags(write=False)
        self.convergence_radius = float(convergence_radius)
        self.center = complex(center)
        if not self.convergence_radius > 0:
            raise InputError("convergence radius must be positive")

    def __repr__(self):
        return (f"PowerSeries({self.coeffs.tolist()}, radius={self.convergence_radius}, "
                f"center={self.center})")

    @property
    def degree_bound(self):
        return self.coeffs.size - 1

    @property
    def domain(self):
        if math.isinf(self.convergence_radius):
            return None
        return Disc(self.center, self.DOMAIN_FRACTION * self.convergence_radius)

    def _shifted(self):
        return Polynomial(self.coeffs)

    def __call__(self, z):
        return self._shifted()(np.asarray(z, dtype=complex) - self.center)

    def derivative(self, k=1):
        return PowerSeries(self._shifted().derivative(k).coeffs, self.convergence_radius,
                           self.center)

    def matrix(self, T):
        T = as_matrix(T)
        return _matrix_horner(self.coeffs, T.entries - self.center * np.eye(T.dim))

    def affine_coefficients(self):
        if self.coeffs.size <= 2:
            c = np.concatenate([self.coeffs, [0, 0]])
            return complex(c[0] - c[1] * self.center), complex(c[1])
        return None

    def __mul__(self, other):
        if isinstance(other, PowerSeries) and other.center == self.center:
            return PowerSeries(P.polymul(self.coeffs, other.coeffs),
                               min(self.convergence_radius, other.convergence_radius),
                               self.center)
        return NotImplemented

    def to_dict(self):
        return {"variant": "power_series", "coeffs_re": self.coeffs.real.tolist(),
                "coeffs_im": self.coeffs.imag.tolist(),
                "convergence_radius": (None if math.isinf(self.convergence_radius)
                                       else self.convergence_radius),
                "center": [self.center.real, self.center.imag]}


def polynomial(*coeffs):
    """Shorthand: ``polynomial(0, -3, 1)`` is ``z**2 - 3z``."""
    return Polynomial(coeffs)


def _scale(f, lam):
    """Magnitude used to make residual tolerances relative."""
    coeffs = getattr(f, "coeffs", None)
    if coeffs is None and isinstance(f, Rational):
        return _scale(f.numerator, lam) + abs(f(lam))
    r = abs(lam - getattr(f, "center", 0.0))
    return float(1.0 + np.sum(np.abs(coeffs) * r ** np.arange(coeffs.size)))


# critical points and preimages ----------------------------------------------

@dataclass(frozen=True)
class CriticalData:
    """Zeros ``xi`` of f' with branching order ``m = 1 + multiplicity`` and value ``f(xi)``."""

    critical_points: tuple = ()

    @property
    def points(self):
        return np.array([c[0] for c in self.critical_points], dtype=complex)

    @property
    def orders(self):
        return [c[1] for c in self.critical_points]

    @property
    def values(self):
        return np.array([c[2] for c in self.critical_points], dtype=complex)


@dataclass(frozen=True)
class PreimageFan:
    """Solutions of ``f(lam) = z`` in the region, distinct points with multiplicities."""

    z: complex
    points: tuple
    multiplicities: tuple
    bound: int
    confidence: str = "exact"

    @property
    def k(self):
        return int(sum(self.multiplicities))

    @property
    def values(self):
        return np.repeat(np.asarray(self.points, dtype=complex),
                         np.asarray(self.multiplicities, dtype=int))

    @property
    def is_simple(self):
        return all(m == 1 for m in self.multiplicities)


def _cluster(roots, radius):
    """Group numerically coincident roots; returns (means, counts)."""
    roots = np.asarray(roots, dtype=complex)
    if roots.size == 0:
        return np.empty(0, dtype=complex), np.empty(0, dtype=int)
    if roots.size == 1:
        return roots.copy(), np.ones(1, dtype=int)
    X = np.column_stack([roots.real, roots.imag])
    labels = fcluster(linkage(pdist(X), "single"), t=radius, criterion="distance")
    means, counts = [], []
    for lab in np.unique(labels):
        grp = roots[labels == lab]
        means.append(grp.mean())
        counts.append(grp.size)
    means = np.array(means)
    counts = np.array(counts)
    order = np.lexsort((means.imag, means.real))
    return means[order], counts[order]


def _order_at(f, xi, start, cap=32):
    """Smallest k >= start with f^(k)(xi) numerically nonzero."""
    scale = _scale(f, xi)
    d = f
    for k in range(1, cap + 1):
        d = d.derivative()
        if k >= start and abs(d(xi)) / math.factorial(k) > 1e-8 * scale:
            return k
    return cap


def _in_region(region, pts):
    if region is None:
        return np.ones(np.shape(pts), dtype=bool)
    return region.omega.contains(pts)


def _polynomial_of(f, z=0.0):
    """Polynomial whose roots are the solutions of f = z (poles removed separately)."""
    if isinstance(f, Polynomial):
        return f - z
    if isinstance(f, Rational):
        return f.numerator - f.denominator * Polynomial([z])
    if isinstance(f, PowerSeries):
        return Polynomial(P.polysub(f.coeffs, [z]))
    return None


def _solve(f, z, region, cluster_radius):
    """Roots of f(lam) = z (distinct, with multiplicities) inside region.omega."""
    bounded = region is not None or f.domain is not None
    if isinstance(f, PowerSeries) and bounded:
        raw = _newton_roots(f, z, region)
        pts, _ = _cluster(raw, max(cluster_radius, 1e-6))
        mult = np.array([_order_at(f, p, start=1) for p in pts], dtype=int)
        confidence = "heuristic"
    else:
        poly = _polynomial_of(f, z)
        raw = poly.roots()
        if isinstance(f, PowerSeries):
            raw = raw + f.center
        pts, mult = _cluster(raw, cluster_radius)
        confidence = "exact"
    if isinstance(f, Rational) and pts.size:
        poles = f.denominator.roots()
        if poles.size:
            keep = np.array([np.min(np.abs(poles - p)) > cluster_radius for p in pts])
            pts, mult = pts[keep], mult[keep]
    keep = _in_region(region, pts)
    dom = f.domain
    if dom is not None:
        keep &= dom.contains(pts)
    return pts[keep], mult[keep], confidence


def _newton_roots(f, z, region, starts_per_side=16, iters=200):
    """Newton from a grid of starting points inside the region (and f's domain)."""
    if region is not None:
        disc = region.omega
    elif f.domain is not None:
        disc = f.domain
    else:
        raise InputError("Newton root search needs a bounded region")
    if f.domain is not None:
        # stay where the series may be evaluated
        dom = f.domain
        if abs(disc.center - dom.center) + disc.radius > dom.radius:
            r = max(dom.radius - abs(disc.center - dom.center), dom.radius / 2)
            disc = Disc(disc.center if abs(disc.center - dom.center) < dom.radius else dom.center,
                        min(disc.radius, r))
    g = np.linspace(-1, 1, starts_per_side)
    x, y = np.meshgrid(g, g)
    s = (x + 1j * y).ravel()
    lam = disc.center + disc.radius * s[np.abs(s) <= 1]
    fp = f.derivative()
    for _ in range(iters):
        with np.errstate(all="ignore"):
            step = (f(lam) - z) / fp(lam)
        step = np.where(np.isfinite(step), step, 0.0)
        lam = lam - step
    with np.errstate(all="ignore"):
        res = np.abs(f(lam) - z)
    scale = np.array([_scale(f, l) for l in lam])
    good = np.isfinite(res) & (res <= 1e3 * tol("root") * scale)
    return lam[good]


def _winding_count(f, z, disc, nodes=4096):
    """Number of zeros of f - z inside ``disc`` by the argument principle."""
    t = disc.center + disc.radius * np.exp(2j * np.pi * np.arange(nodes + 1) / nodes)
    w = f(t) - z
    if np.any(np.abs(w) == 0):
        return None
    ang = np.unwrap(np.angle(w))
    return int(round((ang[-1] - ang[0]) / (2 * np.pi)))


def critical_data(f, region=None):
    """Zeros of f' inside ``region.omega`` with their branching orders."""
    fp = f.derivative()
    if isinstance(f, Rational):
        poly = fp.numerator
        raw = poly.roots() if poly.degree >= 1 else np.empty(0, dtype=complex)
    elif isinstance(fp, Polynomial):
        raw = fp.roots() if fp.degree >= 1 else np.empty(0, dtype=complex)
    elif isinstance(fp, PowerSeries):
        raw = (Polynomial(fp.coeffs).roots() + fp.center) if fp.coeffs.size > 1 \
            else np.empty(0, dtype=complex)
    else:
        raw = _newton_roots(fp, 0.0, region)
    # multiple zeros of f' split like eps**(1/q); merge generously then verify
    pts, counts = _cluster(raw, 1e-5)
    keep = _in_region(region, pts)
    if f.domain is not None:
        keep &= f.domain.contains(pts)
    out = []
    for xi in pts[keep]:
        res = abs(fp(xi))
        if res > 1e2 * tol("root") * _scale(fp, xi):
            raise RootFindingFailure(f"critical point {xi} has residual |f'|={res:.3g}")
        m = _order_at(f, xi, start=2)
        out.append((complex(xi), int(m), complex(f(xi))))
    return CriticalData(tuple(out))


def preimages(f, z, region=None):
    """All solutions of ``f(lam) = z`` in ``region.omega``, with multiplicities."""
    z = complex(z)
    pts, mult, confidence = _solve(f, z, region, tol("cluster"))
    for lam in pts:
        res = abs(f(lam) - z)
        if res > tol("root") * _scale(f, lam) * 1e2 and res > 1e-7 * _scale(f, lam):
            raise RootFindingFailure(f"preimage {lam} of {z} has residual {res:.3g}")
    if confidence == "heuristic" and region is not None:
        expected = _winding_count(f, z, region.omega)
        if expected is not None and expected > int(mult.sum()):
            raise RootFindingFailure(
                f"argument principle counts {expected} preimages of {z} but Newton found "
                f"{int(mult.sum())}")
    return PreimageFan(z, tuple(complex(p) for p in pts), tuple(int(m) for m in mult),
                       int(f.degree_bound), confidence)


# phi_z, c_{z,j}, psi_lambda --------------------------------------------------

class PhiZ:
    """``phi_z(lam) = (f(lam) - z) / prod_j (lam - lam_{z,j})`` with removable points filled."""

    def __init__(self, f, z, fan):
        self.f = f
        self.z = complex(z)
        self.fan = fan
        self.points = np.asarray(fan.points, dtype=complex)
        self.mult = np.asarray(fan.multiplicities, dtype=int)
        self._fill = [self._taylor(j) for j in range(self.points.size)]

    def _taylor(self, j):
        lj, m = self.points[j], int(self.mult[j])
        dm = self.f.derivative(m)(lj) / math.factorial(m)
        dm1 = self.f.derivative(m + 1)(lj) / math.factorial(m + 1)
        others = np.delete(self.points, j)
        om = np.delete(self.mult, j)
        pj = np.prod((lj - others) ** om) if others.size else 1.0
        value = dm / pj
        logder = (dm1 / dm if dm != 0 else 0.0) - np.sum(om / (lj - others))
        return complex(value), complex(value * logder)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=complex)
        flat = lam.ravel()
        prod = np.ones(flat.shape, dtype=complex)
        for p, m in zip(self.points, self.mult):
            prod = prod * (flat - p) ** m
        near = np.full(flat.shape, -1)
        for j, p in enumerate(self.points):
            near = np.where((near < 0) & (np.abs(flat - p) < tol("remove")), j, near)
        with np.errstate(all="ignore"):
            out = (self.f(flat) - self.z) / prod
        for j in np.unique(near[near >= 0]):
            sel = near == j
            v, dv = self._fill[j]
            out[sel] = v + dv * (flat[sel] - self.points[j])
        out = out.reshape(lam.shape)
        return out if out.ndim else complex(out)

    @property
    def domain(self):
        return self.f.domain

    def singularities(self):
        return self.f.singularities()


def phi_z(f, z, fan=None, region=None):
    if fan is None:
        fan = preimages(f, z, region)
    return PhiZ(f, z, fan)


def partial_fraction_coeffs(fan):
    """Coefficients ``c_j = prod_{k != j} (lam_j - lam_k)^{-1}``."""
    pts = np.asarray(fan.points if isinstance(fan, PreimageFan) else fan, dtype=complex)
    if isinstance(fan, PreimageFan) and not fan.is_simple:
        raise CriticalValueCollision(f"z={fan.z} is a critical value: repeated preimage")
    if pts.size == 0:
        raise InputError("no preimages: partial fractions are undefined")
    if pts.size > 1:
        gaps = np.abs(pts[:, None] - pts[None, :])
        np.fill_diagonal(gaps, np.inf)
        if gaps.min() < tol("cluster"):
            raise CriticalValueCollision("two preimages closer than the cluster tolerance")
    out = np.empty(pts.size, dtype=complex)
    for j in range(pts.size):
        out[j] = 1.0 / np.prod(pts[j] - np.delete(pts, j))
    return out


class PsiLambda:
    """Divided difference ``(f(t) - f(lam)) / (t - lam)``, equal to f'(lam) at t = lam."""

    def __init__(self, f, lam):
        self.f = f
        self.lam = complex(lam)
        self.flam = complex(f(self.lam))
        self.d1 = complex(f.derivative()(self.lam))
        self.d2 = complex(f.derivative(2)(self.lam)) / 2

    def __call__(self, t):
        t = np.asarray(t, dtype=complex)
        h = t - self.lam
        near = np.abs(h) < tol("remove")
        with np.errstate(all="ignore"):
            out = (self.f(t) - self.flam) / h
        out = np.where(near, self.d1 + self.d2 * h, out)
        return out if out.ndim else complex(out)

    @property
    def domain(self):
        return self.f.domain

    def singularities(self):
        return self.f.singularities()


def psi_lambda(f, lam):
    return PsiLambda(f, lam)


# Riesz-Dunford calculus ------------------------------------------------------

@dataclass(frozen=True)
class Circle:
    center: complex
    radius: float


def default_contour(T):
    """Circles around clusters of eigenvalues, falling back to one enclosing circle."""
    T = as_matrix(T)
    eig = spectrum(T).values
    clear = tol("clearance")
    c0 = complex(eig.mean())
    fallback = [Circle(c0, 1.25 * float(np.abs(eig - c0).max()) + clear)]
    if eig.size == 1:
        return [Circle(complex(eig[0]), clear)]
    diam = float(np.abs(eig[:, None] - eig[None, :]).max())
    if diam == 0:
        return [Circle(complex(eig[0]), clear)]
    X = np.column_stack([eig.real, eig.imag])
    labels = fcluster(linkage(pdist(X), "single"), t=0.5 * diam, criterion="distance")
    circles = []
    for lab in np.unique(labels):
        grp = eig[labels == lab]
        c = complex(grp.mean())
        circles.append(Circle(c, 1.25 * float(np.abs(grp - c).max()) + clear))
    if len(circles) > 1 and _contour_problem(circles, eig, clear) is None:
        return circles
    return fallback


def _contour_problem(circles, eig, clearance):
    for i, c in enumerate(circles):
        gap = np.abs(np.abs(eig - c.center) - c.radius).min()
        if gap < clearance:
            return f"circle {i} passes within {gap:.3g} of the spectrum"
        for d in circles[:i]:
            if abs(c.center - d.center) <= c.radius + d.radius:
                return "contour circles overlap"
    enclosed = np.zeros(eig.shape, dtype=int)
    for c in circles:
        enclosed += np.abs(eig - c.center) < c.radius
    if np.any(enclosed != 1):
        return "every eigenvalue must be enclosed by exactly one circle"
    return None


def dunford_apply(T, f, contour=None, return_nodes=False):
    """``f(T) = (1/2 pi i) oint f(lam) (lam I - T)^{-1} dlam`` by the trapezoidal rule.

    The node count per circle starts at 64 and doubles until the relative
    Frobenius change drops below ``tol_quad``; 16384 nodes is the cap.
    """
    T = as_matrix(T)
    A = T.entries
    n = T.dim
    eig = spectrum(T).values
    circles = default_contour(T) if contour is None else [
        c if isinstance(c, Circle) else Circle(complex(c[0]), float(c[1])) for c in contour]
    problem = _contour_problem(circles, eig, tol("clearance"))
    if problem is not None:
        raise ContourTooClose(problem)
    dom = getattr(f, "domain", None)
    sing = np.asarray(getattr(f, "singularities", lambda: np.empty(0))(), dtype=complex)
    for c in circles:
        if dom is not None and abs(c.center - dom.center) + c.radius >= dom.radius:
            raise ContourOutsideDomain(f"contour circle {c} leaves the domain {dom}")
        if sing.size and np.any(np.abs(sing - c.center) <= c.radius + tol("clearance")):
            raise ContourOutsideDomain("a singularity of f lies inside or near the contour")

    eye = np.eye(n, dtype=complex)

    def nodes_sum(circle, count, offset):
        theta = 2 * np.pi * (np.arange(count) + offset) / count
        w = np.exp(1j * theta)
        lam = circle.center + circle.radius * w
        fv = np.asarray(f(lam), dtype=complex)
        total = np.zeros((n, n), dtype=complex)
        scale = 0.0
        step = max(1, 200_000 // (n * n))
        for lo in range(0, count, step):
            lk = lam[lo:lo + step]
            stack = lk[:, None, None] * eye - A[None]
            R = np.linalg.solve(stack, np.broadcast_to(eye, stack.shape))
            weights = fv[lo:lo + step] * circle.radius * w[lo:lo + step]
            total += np.tensordot(weights, R, axes=(0, 0))
            scale = max(scale, float(np.max(np.abs(weights)[:, None, None] * np.abs(R))))
        return total / count, scale

    result = np.zeros((n, n), dtype=complex)
    used = []
    for circle in circles:
        count = QUAD_START_NODES
        current, scale = nodes_sum(circle, count, 0.0)
        while True:
            mid, s2 = nodes_sum(circle, count, 0.5)
            scale = max(scale, s2)
            refined = 0.5 * (current + mid)
            change = np.linalg.norm(refined - current)
            floor = max(np.linalg.norm(refined), 1e-2 * scale * math.sqrt(n))
            current = refined
            count *= 2
            if change <= tol("quad") * floor:
                break
            if count >= QUAD_MAX_NODES:
                raise QuadratureStall(
                    f"trapezoidal rule did not converge with {count} nodes "
                    f"(relative change {change / floor:.3g})")
        result += current
        used.append(count)
    if return_nodes:
        return ComplexMatrix(result), used
    return ComplexMatrix(result)


def apply_function(T, f):
    """``f(T)``: exact evaluation when ``f`` supports it, otherwise the contour integral."""
    if isinstance(T, BlockDiagonal):
        return BlockDiagonal(np.asarray(f(T.diagonal), dtype=complex),
                             tuple(apply_function(b, f) for b in T.blocks))
    if isinstance(f, AnalyticFunction):
        return ComplexMatrix(f.matrix(T))
    return dunford_apply(T, f)


def horner(f, T):
    """Horner evaluation of a polynomial (or truncated series) at a matrix."""
    return ComplexMatrix(f.matrix(T))


# identity and H-infinity checks ----------------------------------------------

@dataclass(frozen=True)
class IdentityCheck:
    residual: float
    phi_inverse_norm: float
    coefficients: tuple
    preimages: tuple
    term_norms: tuple


def resolvent_identity_check(T, f, z, region=None, contour=None):
    """Compare ``(f(T) - z)^{-1}`` with ``phi_z(T)^{-1} sum_j c_j (T - lam_j)^{-1}``."""
    T = as_matrix(T)
    n = T.dim
    eye = np.eye(n, dtype=complex)
    fT = apply_function(T, f).entries
    M = fT - z * eye
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] < tol("sing") * (1 + s[0]):
        raise SpectrumProximity(f"z={z} lies in the spectrum of f(T)")
    lhs = np.linalg.inv(M)
    fan = preimages(f, z, region)
    c = partial_fraction_coeffs(fan)
    phi = PhiZ(f, z, fan)
    phiT = dunford_apply(T, phi, contour).entries
    phi_inv = np.linalg.inv(phiT)
    acc = np.zeros((n, n), dtype=complex)
    norms = []
    for cj, lj in zip(c, fan.points):
        Rj = np.linalg.inv(T.entries - lj * eye)
        norms.append(float(abs(cj) * np.linalg.norm(Rj, 2)))
        acc += cj * Rj
    rhs = phi_inv @ acc
    residual = float(np.linalg.norm(lhs - rhs, 2) / np.linalg.norm(lhs, 2))
    return IdentityCheck(residual, float(np.linalg.norm(phi_inv, 2)), tuple(c),
                         tuple(fan.points), tuple(norms))


def psi_identity_residual(T, f, lam, contour=None):
    """Relative mismatch in ``(T - lam)^{-1} = psi_lam(T) (f(T) - f(lam))^{-1}``."""
    T = as_matrix(T)
    eye = np.eye(T.dim, dtype=complex)
    lhs = np.linalg.inv(T.entries - lam * eye)
    psiT = dunford_apply(T, PsiLambda(f, lam), contour).entries
    fT = apply_function(T, f).entries
    rhs = psiT @ np.linalg.inv(fT - f(lam) * eye)
    return float(np.linalg.norm(lhs - rhs, 2) / np.linalg.norm(lhs, 2))


@dataclass(frozen=True)
class HinfScan:
    z: np.ndarray
    sup_per_z: np.ndarray
    sup: float


def hinf_bound_scan(f, z_samples, region, resolution=128):
    """Max of ``|1/phi_z|`` over a grid on the inner part of the region, for each z."""
    grid = region.grid(resolution, shrink=True)
    z_samples = np.asarray(z_samples, dtype=complex).ravel()
    sups = np.empty(z_samples.size)
    for i, z in enumerate(z_samples):
        phi = PhiZ(f, z, preimages(f, z, region))
        sups[i] = float(np.max(1.0 / np.abs(phi(grid))))
    return HinfScan(z_samples, sups, float(sups.max()) if sups.size else float("nan"))


# constants of the local theory ----------------------------------------------

@dataclass(frozen=True)
class RegionConstants:
    tau: float
    rho: float
    lipschitz: float
    delta_hat: float


def tau_estimate(f, region, resolution=256):
    """``min |f'|`` over the inner region minus the branch discs, refined once near the argmin."""
    fp = f.derivative()
    pts = region.grid(resolution, shrink=True, exclude_branch=True)
    vals = np.abs(fp(pts))
    k = int(np.argmin(vals))
    h = 2 * region.inner.radius / resolution
    g = np.linspace(-h, h, 21)
    x, y = np.meshgrid(g, g)
    local = pts[k] + (x + 1j * y).ravel()
    local = local[region.inner.contains(local)]
    if region.branch_neighborhoods:
        local = local[region.branch_index(local) < 0]
    best = float(vals[k])
    if local.size:
        best = min(best, float(np.abs(fp(local)).min()))
    return best


def separation_delta(f, region, z_samples):
    """Smallest gap between two preimages of the same z that do not share a branch disc."""
    best = math.inf
    for z in np.asarray(z_samples, dtype=complex).ravel():
        fan = preimages(f, z, region)
        pts = np.asarray(fan.points, dtype=complex)
        if pts.size < 2:
            continue
        idx = region.branch_index(pts)
        for i in range(pts.size):
            for j in range(i):
                if idx[i] >= 0 and idx[i] == idx[j]:
                    continue
                best = min(best, abs(pts[i] - pts[j]))
    return best


def region_constants(f, region, z_samples=None, resolution=256):
    tau = tau_estimate(f, region, resolution)
    pts = region.grid(resolution, shrink=False)
    lip = float(np.abs(f.derivative()(pts)).max())
    if z_samples is None:
        z_samples = f(region.grid(16, shrink=True))
    delta = separation_delta(f, region, z_samples)
    return RegionConstants(tau, tau * region.inner_margin / 4, lip, delta)


# branch-case diagnostics -----------------------------------------------------

@dataclass(frozen=True)
class BranchRecord:
    preimage: complex
    case: int
    abs_c: float
    dist_to_K: float
    branch_point: complex = None
    order: int = None
    ratio: float = None
    transfer: float = None
    predicted_bound: float = None


def branch_case_diagnostics(f, z, fan, region, K, delta=None):
    """Classify each preimage as case 1 (outside branch discs) or case 2 (inside one).

    Case 2 records carry ``|c| * |lam - xi|^{m-1}`` (bounded above and below
    along a sweep) and ``dist(z, f(K)) / (dist(lam, K) * |lam - xi|^{m-1})``
    (bounded above). Case 1 records carry the bound ``max(1, delta^{1-n0})``
    when ``delta`` is supplied.
    """
    c = partial_fraction_coeffs(fan)
    pts = np.asarray(fan.points, dtype=complex)
    which = region.branch_index(pts)
    fK = K.pushforward(f)
    dz = float(fK.distance(complex(z)))
    out = []
    for lam, cj, k in zip(pts, c, which):
        dK = float(K.distance(lam))
        if k < 0:
            bound = None if delta is None else max(1.0, delta ** (1 - fan.bound))
            out.append(BranchRecord(complex(lam), 1, float(abs(cj)), dK,
                                    predicted_bound=bound))
            continue
        w = region.branch_neighborhoods[k]
        gap = abs(lam - w.center) ** (w.order - 1)
        ratio = float(abs(cj) * gap)
        transfer = float(dz / (dK * gap)) if dK * gap > 0 else math.inf
        out.append(BranchRecord(complex(lam), 2, float(abs(cj)), dK, w.center, w.order,
                                ratio, transfer))
    return out


# exchange format -------------------------------------------------------------

def function_from_json(text):
    try:
        obj = json.loads(text) if isinstance(text, str) else text
        variant = obj["variant"]
        if variant == "polynomial":
            return Polynomial(_coeffs(obj))
        if variant == "rational":
            return Rational(function_from_json(obj["numerator"]),
                            function_from_json(obj["denominator"]))
        if variant == "power_series":
            radius = obj.get("convergence_radius")
            center = obj.get("center", 0.0)
            if isinstance(center, (list, tuple)):
                center = complex(center[0], center[1])
            return PowerSeries(_coeffs(obj), math.inf if radius is None else radius, center)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"cannot parse function JSON: {exc}") from None
    raise InputError(f"unknown function variant {variant!r}")


def _coeffs(obj):
    re = np.asarray(obj["coeffs_re"], dtype=float)
    im = np.asarray(obj.get("coeffs_im", np.zeros_like(re)), dtype=float)
    if re.shape != im.shape:
        raise InputError("coeffs_re and coeffs_im differ in length")
    return re + 1j * im


def function_to_json(f):
    return json.dumps(f.to_dict())


def load_function(path):
    try:
        with open(path) as fh:
            return function_from_json(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
