"""Dense complex matrices, spectra and resolvent norms.

The operator norm throughout is the spectral norm, so the resolvent norm at
``lam`` is exactly ``1 / sigma_min(T - lam I)``. Block-diagonal structure is
detected once per matrix; resolvent norms are then evaluated block by block,
which keeps direct sums with a large diagonal part cheap.
"""
import csv
import io
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels
from ._config import tol
from .errors import BadDimension, InputError, NonFinite, SpectrumProximity


@dataclass(frozen=True, eq=False)
class ComplexMatrix:
    """Immutable square complex matrix."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.complex128, copy=True)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise BadDimension(f"expected a nonempty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise NonFinite("matrix entries contain NaN or Inf")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self):
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.entries
        return self.entries.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, ComplexMatrix):
            return NotImplemented
        return self.entries.shape == other.entries.shape and bool(
            np.array_equal(self.entries, other.entries))

    __hash__ = None

    def __repr__(self):
        return f"ComplexMatrix(dim={self.dim})"

    @cached_property
    def norm(self):
        """Spectral norm."""
        if self.is_diagonal:
            return float(np.abs(np.diag(self.entries)).max())
        return float(np.linalg.norm(self.entries, 2))

    @cached_property
    def is_diagonal(self):
        a = self.entries
        return bool(np.count_nonzero(a - np.diag(np.diag(a))) == 0)

    @cached_property
    def is_upper_triangular(self):
        return bool(np.count_nonzero(np.tril(self.entries, -1)) == 0)

    @cached_property
    def blocks(self):
        """Index arrays of the irreducible diagonal blocks (connected components)."""
        a = self.entries
        if self.is_diagonal:
            return [np.arange(self.dim)]
        pattern = csr_matrix((a != 0) | (a.T != 0))
        ncomp, labels = connected_components(pattern, directed=False)
        return [np.flatnonzero(labels == c) for c in range(ncomp)]


@dataclass(frozen=True)
class SpectrumResult:
    """Distinct eigenvalues with algebraic multiplicities."""

    eigenvalues: tuple
    multiplicities: tuple = field(default=())

    @property
    def values(self):
        """Eigenvalues repeated according to multiplicity."""
        return np.repeat(np.asarray(self.eigenvalues, dtype=complex),
                         np.asarray(self.multiplicities, dtype=int))

    @property
    def total(self):
        return int(sum(self.multiplicities))


@dataclass(frozen=True, eq=False)
class BlockDiagonal:
    """``diag(diagonal) (+) blocks[0] (+) blocks[1] ...`` without forming the dense matrix.

    Used for a large normal part next to a few small non-normal blocks.
    """

    diagonal: np.ndarray
    blocks: tuple = ()

    def __post_init__(self):
        d = np.array(self.diagonal, dtype=complex).ravel()
        if not np.all(np.isfinite(d)):
            raise NonFinite("diagonal contains NaN or Inf")
        d.setflags(write=False)
        object.__setattr__(self, "diagonal", d)
        object.__setattr__(self, "blocks", tuple(as_matrix(b) for b in self.blocks))
        if d.size == 0 and not self.blocks:
            raise BadDimension("empty block-diagonal operator")

    @property
    def dim(self):
        return self.diagonal.size + sum(b.dim for b in self.blocks)

    @cached_property
    def norm(self):
        parts = [b.norm for b in self.blocks]
        if self.diagonal.size:
            parts.append(float(np.abs(self.diagonal).max()))
        return max(parts)

    def dense(self):
        return direct_sum(*([diagonal(self.diagonal)] if self.diagonal.size else []),
                          *self.blocks)

    def __repr__(self):
        return (f"BlockDiagonal(diagonal={self.diagonal.size}, "
                f"blocks={[b.dim for b in self.blocks]})")


def as_matrix(T):
    if isinstance(T, (ComplexMatrix, BlockDiagonal)):
        return T
    return ComplexMatrix(T)


def _check_finite(T):
    if not np.all(np.isfinite(np.asarray(T.entries))):
        raise NonFinite("matrix entries contain NaN or Inf")


def min_singular_value(T):
    """Smallest singular value of ``T``."""
    T = as_matrix(T)
    return float(np.linalg.svd(T.entries, compute_uv=False)[-1])


def shifted_min_singular_values(T, shifts):
    """``sigma_min(T - s I)`` for every shift, exploiting block-diagonal structure."""
    T = as_matrix(T)
    shifts = np.asarray(shifts, dtype=complex).ravel()
    if isinstance(T, BlockDiagonal):
        best = np.full(shifts.shape, np.inf)
        if T.diagonal.size:
            best = _diag_smin(T.diagonal, shifts)
        for b in T.blocks:
            best = np.minimum(best, shifted_min_singular_values(b, shifts))
        return best
    if T.is_diagonal:
        return _diag_smin(np.diag(T.entries), shifts)
    best = np.full(shifts.shape, np.inf)
    scalars = []
    for idx in T.blocks:
        if idx.size == 1:
            scalars.append(idx[0])
            continue
        sub = T.entries[np.ix_(idx, idx)]
        best = np.minimum(best, _kernels.smin_shifted(sub, shifts))
    if scalars:
        d = T.entries[scalars, scalars]
        best = np.minimum(best, _diag_smin(d, shifts))
    return best


def _diag_smin(d, shifts):
    d = np.asarray(d, dtype=complex)
    if d.size * shifts.size > 5_000_000 and d.size > 256:
        from scipy.spatial import cKDTree

        tree = cKDTree(np.column_stack([d.real, d.imag]))
        dist, _ = tree.query(np.column_stack([shifts.real, shifts.imag]))
        return np.asarray(dist, dtype=float)
    return _kernels.min_dist_points(shifts, d)


def resolvent_norms(T, lams, *, strict=True):
    """Vector version of :func:`resolvent_norm`.

    With ``strict=False`` points where the resolvent is numerically undefined
    come back as ``inf`` instead of raising.
    """
    T = as_matrix(T)
    lams = np.asarray(lams, dtype=complex).ravel()
    smin = shifted_min_singular_values(T, lams)
    bad = smin < tol("sing") * (1.0 + T.norm)
    if strict and bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise SpectrumProximity(
            f"lambda={lams[k]:.6g} is within spectral tolerance of sigma(T) "
            f"(sigma_min={smin[k]:.3g})")
    with np.errstate(divide="ignore"):
        out = 1.0 / smin
    out[bad] = np.inf
    return out


def resolvent_norm(T, lam):
    """Spectral norm of ``(T - lam I)^{-1}``.

    Raises :class:`SpectrumProximity` when ``sigma_min(T - lam I)`` falls below
    ``tol_sing * (1 + ||T||)``.
    """
    return float(resolvent_norms(T, [lam])[0])


def resolvent(T, lam):
    """The resolvent matrix ``(T - lam I)^{-1}`` as a plain ndarray."""
    T = as_matrix(T)
    resolvent_norm(T, lam)
    return np.linalg.inv(T.entries - lam * np.eye(T.dim))


def spectrum(T, cluster_tol=None):
    """Eigenvalues with multiplicities.

    Triangular input is read off the diagonal exactly. Otherwise eigenvalues
    closer than ``cluster_tol`` are merged (default: exact duplicates only).
    """
    T = as_matrix(T)
    if isinstance(T, BlockDiagonal):
        parts = [T.diagonal] + [spectrum(b).values for b in T.blocks]
        return _group(np.concatenate(parts), 0.0 if cluster_tol is None else cluster_tol)
    _check_finite(T)
    if T.is_upper_triangular or np.count_nonzero(np.triu(T.entries, 1)) == 0:
        vals = np.diag(T.entries).copy()
        cluster_tol = 0.0 if cluster_tol is None else cluster_tol
    else:
        vals = np.linalg.eigvals(T.entries)
        cluster_tol = 0.0 if cluster_tol is None else cluster_tol
    return _group(vals, cluster_tol)


def _group(vals, cluster_tol):
    vals = np.asarray(vals, dtype=complex)
    if cluster_tol == 0.0:
        distinct, counts = np.unique(vals, return_counts=True)
        return SpectrumResult(tuple(complex(v) for v in distinct),
                              tuple(int(c) for c in counts))
    order = np.lexsort((vals.imag, vals.real))
    distinct, mult = [], []
    for v in vals[order]:
        for i, u in enumerate(distinct):
            if abs(u - v) <= cluster_tol:
                mult[i] += 1
                break
        else:
            distinct.append(complex(v))
            mult.append(1)
    return SpectrumResult(tuple(distinct), tuple(mult))


# builders --------------------------------------------------------------------

def jordan(eigenvalue, n):
    """``n x n`` Jordan block: ``eigenvalue`` on the diagonal, ones above it."""
    if int(n) != n or n < 1:
        raise BadDimension(f"Jordan block size must be a positive integer, got {n!r}")
    n = int(n)
    a = eigenvalue * np.eye(n, dtype=complex) + np.eye(n, k=1, dtype=complex)
    return ComplexMatrix(a)


def diagonal(points):
    points = np.asarray(points, dtype=complex).ravel()
    if points.size == 0:
        raise BadDimension("diagonal needs at least one point")
    return ComplexMatrix(np.diag(points))


def direct_sum(*mats):
    mats = [as_matrix(m) for m in mats]
    if not mats:
        raise BadDimension("direct_sum needs at least one matrix")
    n = sum(m.dim for m in mats)
    out = np.zeros((n, n), dtype=complex)
    k = 0
    for m in mats:
        out[k:k + m.dim, k:k + m.dim] = m.entries
        k += m.dim
    return ComplexMatrix(out)


def random_triangular(n, center=0.0, radius=1.0, seed=0, offdiag_scale=1.0):
    """Upper-triangular matrix with diagonal (= spectrum) uniform in the disc D(center, radius).

    Strictly upper entries are complex Gaussians scaled by ``offdiag_scale / sqrt(n)``.
    """
    if int(n) != n or n < 1:
        raise BadDimension(f"dimension must be a positive integer, got {n!r}")
    n = int(n)
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.random(n))
    theta = 2 * np.pi * rng.random(n)
    diag = center + r * np.exp(1j * theta)
    upper = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    upper *= offdiag_scale / np.sqrt(2 * n)
    a = np.triu(upper, 1) + np.diag(diag)
    return ComplexMatrix(a)


def companion(coeffs):
    """Companion matrix of the polynomial with ascending ``coeffs``."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=complex), "b")
    if c.size < 2:
        raise BadDimension("companion matrix needs degree >= 1")
    n = c.size - 1
    a = np.zeros((n, n), dtype=complex)
    a[1:, :-1] = np.eye(n - 1)
    a[:, -1] = -c[:-1] / c[-1]
    return ComplexMatrix(a)


def build(kind, **params):
    """Dispatch to a named builder: jordan, diagonal, direct_sum, random_triangular."""
    builders = {
        "jordan": lambda p: jordan(_cplx(p["eigenvalue"]), p["n"]),
        "diagonal": lambda p: diagonal([_cplx(x) for x in p["points"]]),
        "direct_sum": lambda p: direct_sum(*[
            m if isinstance(m, ComplexMatrix) else build(**m) for m in p["blocks"]]),
        "random_triangular": lambda p: random_triangular(
            p["n"], _cplx(p.get("center", 0.0)), p.get("radius", 1.0), p.get("seed", 0),
            p.get("offdiag_scale", 1.0)),
    }
    if kind not in builders:
        raise InputError(f"unknown operator kind {kind!r}; known: {sorted(builders)}")
    try:
        return builders[kind](params)
    except KeyError as exc:
        raise InputError(f"operator recipe {kind!r} is missing field {exc}") from None


def _cplx(x):
    if isinstance(x, (list, tuple)):
        return complex(x[0], x[1])
    if isinstance(x, str):
        return complex(x.replace(" ", ""))
    return complex(x)


# exchange formats ------------------------------------------------------------

def to_json(T):
    T = as_matrix(T)
    return json.dumps({"dim": T.dim, "re": T.entries.real.tolist(),
                       "im": T.entries.imag.tolist()})


def from_json(text):
    try:
        obj = json.loads(text) if isinstance(text, str) else text
        if "kind" in obj:
            return build(**obj)
        n = int(obj["dim"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros((n, n))), dtype=float)
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot parse matrix JSON: {exc}") from None
    if re.shape != (n, n) or im.shape != (n, n):
        raise InputError(f"matrix JSON: re/im must be {n}x{n}")
    return ComplexMatrix(re + 1j * im)


def to_csv(T):
    T = as_matrix(T)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "col", "re", "im"])
    for i in range(T.dim):
        for j in range(T.dim):
            v = T.entries[i, j]
            if v != 0:
                w.writerow([i, j, repr(float(v.real)), repr(float(v.imag))])
    return buf.getvalue()


def from_csv(text, dim=None):
    """Parse ``row,col,re,im`` triplets; missing entries are zero."""
    try:
        rows = list(csv.DictReader(io.StringIO(text)))
        idx = [(int(r["row"]), int(r["col"]), float(r["re"]), float(r["im"])) for r in rows]
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot parse matrix CSV: {exc}") from None
    if not idx and dim is None:
        raise InputError("matrix CSV has no entries")
    n = dim if dim is not None else 1 + max(max(i, j) for i, j, _, _ in idx)
    a = np.zeros((n, n), dtype=complex)
    for i, j, re, im in idx:
        a[i, j] = complex(re, im)
    return ComplexMatrix(a)


def load(path):
    """Load a matrix from a ``.json`` or ``.csv`` file."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    if str(path).lower().endswith(".csv"):
        return from_csv(text)
    return from_json(text)
