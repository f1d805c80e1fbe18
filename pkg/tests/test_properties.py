import numpy as np
from hypothesis import given, settings, strategies as st

from resolvent_lab.func_calculus import partial_fraction_coeffs, polynomial
from resolvent_lab.operator_core import (direct_sum, jordan, min_singular_value,
                                         random_triangular, spectrum)
from resolvent_lab.region_sets import CompactSet, LipschitzCurve, distance, thickened_measure

coord = st.floats(-3, 3, allow_nan=False)
cplx = st.builds(complex, coord, coord)
seeds = st.integers(0, 2 ** 31)


@settings(max_examples=50, deadline=None)
@given(st.lists(cplx, min_size=1, max_size=20), cplx, cplx)
def test_distance_is_1_lipschitz(points, a, b):
    K = CompactSet.point_cloud(points)
    assert abs(distance(K, a) - distance(K, b)) <= abs(a - b) + 1e-12


@settings(max_examples=30, deadline=None)
@given(cplx, cplx)
def test_curve_distance_is_1_lipschitz(a, b):
    K = CompactSet.curve_union([LipschitzCurve.from_function(np.sin, 0, 2, 50)])
    assert abs(distance(K, a) - distance(K, b)) <= abs(a - b) + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), seeds, seeds)
def test_smin_unitarily_invariant(n, s1, s2):
    A = random_triangular(n, seed=s1).entries
    rng = np.random.default_rng(s2)
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    assert abs(min_singular_value(Q @ A @ Q.conj().T) - min_singular_value(A)) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(st.floats(0.02, 0.2), st.floats(0.0, 0.2), st.floats(0.3, 1.0), st.floats(0.0, 0.5))
def test_measure_monotone(sigma, dsigma, R, dR):
    K = CompactSet.curve_union([LipschitzCurve.segment(0, 1)])
    base = thickened_measure(K, sigma, 0.5, R, resolution=512).area
    assert thickened_measure(K, sigma + dsigma, 0.5, R, resolution=512).area >= base
    # same cell size and even resolution keep the two grids on one lattice
    res2 = 2 * int(round(256 * (R + dR) / R))
    assert thickened_measure(K, sigma, 0.5, R * res2 / 512, resolution=res2).area >= base - 1e-12


@settings(max_examples=25, deadline=None)
@given(st.lists(cplx, min_size=1, max_size=4), st.integers(1, 3), cplx)
def test_direct_sum_spectrum_is_union(diag, n, c):
    from resolvent_lab.operator_core import diagonal
    T = direct_sum(diagonal(diag), jordan(c, n))
    got = np.sort_complex(spectrum(T, cluster_tol=0).values)
    want = np.sort_complex(np.r_[np.asarray(diag, dtype=complex), np.full(n, c)])
    assert got.size == want.size
    assert np.allclose(got, want, atol=1e-5)


@settings(max_examples=40, deadline=None)
@given(st.lists(cplx, min_size=2, max_size=6, unique=True))
def test_partial_fractions_sum_to_zero(points):
    pts = np.array(points)
    gaps = np.abs(pts[:, None] - pts[None, :]) + np.eye(pts.size)
    if gaps.min() < 1e-2:
        return
    # sum of residues of 1/prod(lam - lam_j) vanishes for two or more poles
    c = partial_fraction_coeffs(pts)
    assert abs(c.sum()) <= 1e-8 * np.abs(c).max()


@settings(max_examples=30, deadline=None)
@given(st.lists(cplx, min_size=1, max_size=5), cplx)
def test_polynomial_preimages_map_back(coeffs, z):
    f = polynomial(*coeffs, 1.0)
    from resolvent_lab.func_calculus import preimages
    fan = preimages(f, z)
    assert fan.k == f.degree
    assert all(abs(f(p) - z) <= 1e-6 * (1 + abs(z) + np.abs(coeffs).sum()) for p in fan.points)
