"""Hot inner loops: shifted smallest singular values and distance queries.

Each kernel has a numba ``@njit`` version and a pure-numpy version with the
same signature. The numba path is used when numba imports and the environment
variable ``RESOLVENT_LAB_NUMBA`` is not set to ``0``; the choice is made once
at import time. Both paths are always importable so the benchmark and the
tests can compare them directly.

The shifted-SVD kernel is the exception: numpy's stacked LAPACK call already
loops in C and beats a per-shift numba SVD (see benchmarks/), so it only takes
the numba path when ``RESOLVENT_LAB_NUMBA_SVD=1``.
"""
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

_CHUNK = 4096


def _want_numba():
    flag = os.environ.get("RESOLVENT_LAB_NUMBA", "1").strip().lower()
    return numba is not None and flag not in ("0", "false", "no", "off")


USE_NUMBA = _want_numba()
USE_NUMBA_SVD = USE_NUMBA and os.environ.get("RESOLVENT_LAB_NUMBA_SVD", "0").strip() == "1"


# numpy path ------------------------------------------------------------------

def smin_shifted_numpy(a, shifts):
    """Smallest singular value of ``a - s*I`` for every ``s`` in ``shifts``."""
    a = np.ascontiguousarray(a, dtype=np.complex128)
    shifts = np.ascontiguousarray(shifts, dtype=np.complex128).ravel()
    n = a.shape[0]
    out = np.empty(shifts.shape[0])
    eye = np.eye(n, dtype=np.complex128)
    step = max(1, _CHUNK // max(1, n * n // 16))
    for lo in range(0, shifts.shape[0], step):
        s = shifts[lo:lo + step]
        stack = a[None, :, :] - s[:, None, None] * eye[None, :, :]
        out[lo:lo + step] = np.linalg.svd(stack, compute_uv=False)[:, -1]
    return out


def min_dist_points_numpy(queries, points):
    """Distance from each query to the nearest point (brute force, chunked)."""
    queries = np.ascontiguousarray(queries, dtype=np.complex128).ravel()
    points = np.ascontiguousarray(points, dtype=np.complex128).ravel()
    out = np.empty(queries.shape[0])
    step = max(1, 2_000_000 // max(1, points.shape[0]))
    for lo in range(0, queries.shape[0], step):
        q = queries[lo:lo + step]
        out[lo:lo + step] = np.abs(q[:, None] - points[None, :]).min(axis=1)
    return out


def min_dist_segments_numpy(queries, starts, ends):
    """Distance from each query to the nearest of the segments [starts[k], ends[k]]."""
    queries = np.ascontiguousarray(queries, dtype=np.complex128).ravel()
    starts = np.ascontiguousarray(starts, dtype=np.complex128).ravel()
    ends = np.ascontiguousarray(ends, dtype=np.complex128).ravel()
    d = ends - starts
    dd = (d.real ** 2 + d.imag ** 2)
    safe = np.where(dd > 0, dd, 1.0)
    out = np.empty(queries.shape[0])
    step = max(1, 2_000_000 // max(1, starts.shape[0]))
    for lo in range(0, queries.shape[0], step):
        q = queries[lo:lo + step, None] - starts[None, :]
        t = (q.real * d.real + q.imag * d.imag) / safe
        t = np.clip(np.where(dd > 0, t, 0.0), 0.0, 1.0)
        out[lo:lo + step] = np.abs(q - t * d).min(axis=1)
    return out


# numba path ------------------------------------------------------------------

if numba is not None:

    @numba.njit(cache=True, nogil=True)
    def smin_shifted_numba(a, shifts):
        n = a.shape[0]
        m = shifts.shape[0]
        out = np.empty(m)
        b = np.empty((n, n), dtype=np.complex128)
        for k in range(m):
            for i in range(n):
                for j in range(n):
                    b[i, j] = a[i, j]
                b[i, i] -= shifts[k]
            # numba's svd has no compute_uv switch
            _, s, _ = np.linalg.svd(b)
            out[k] = s[n - 1]
        return out

    @numba.njit(cache=True, nogil=True)
    def min_dist_points_numba(queries, points):
        m = queries.shape[0]
        out = np.empty(m)
        for i in range(m):
            qr = queries[i].real
            qi = queries[i].imag
            best = np.inf
            for k in range(points.shape[0]):
                dr = qr - points[k].real
                di = qi - points[k].imag
                d2 = dr * dr + di * di
                if d2 < best:
                    best = d2
            out[i] = np.sqrt(best)
        return out

    @numba.njit(cache=True, nogil=True)
    def min_dist_segments_numba(queries, starts, ends):
        m = queries.shape[0]
        out = np.empty(m)
        for i in range(m):
            qr = queries[i].real
            qi = queries[i].imag
            best = np.inf
            for k in range(starts.shape[0]):
                ax = starts[k].real
                ay = starts[k].imag
                dx = ends[k].real - ax
                dy = ends[k].imag - ay
                dd = dx * dx + dy * dy
                t = 0.0
                if dd > 0.0:
                    t = ((qr - ax) * dx + (qi - ay) * dy) / dd
                    if t < 0.0:
                        t = 0.0
                    elif t > 1.0:
                        t = 1.0
                rx = qr - ax - t * dx
                ry = qi - ay - t * dy
                d2 = rx * rx + ry * ry
                if d2 < best:
                    best = d2
            out[i] = np.sqrt(best)
        return out

else:  # pragma: no cover
    smin_shifted_numba = smin_shifted_numpy
    min_dist_points_numba = min_dist_points_numpy
    min_dist_segments_numba = min_dist_segments_numpy


def _c128(x):
    return np.ascontiguousarray(np.asarray(x, dtype=np.complex128).ravel())


def smin_shifted(a, shifts):
    a = np.ascontiguousarray(a, dtype=np.complex128)
    shifts = _c128(shifts)
    if USE_NUMBA_SVD:
        return smin_shifted_numba(a, shifts)
    return smin_shifted_numpy(a, shifts)


def min_dist_points(queries, points):
    queries, points = _c128(queries), _c128(points)
    if USE_NUMBA:
        return min_dist_points_numba(queries, points)
    return min_dist_points_numpy(queries, points)


def min_dist_segments(queries, starts, ends):
    queries, starts, ends = _c128(queries), _c128(starts), _c128(ends)
    if USE_NUMBA:
        return min_dist_segments_numba(queries, starts, ends)
    return min_dist_segments_numpy(queries, starts, ends)
