import math

import numpy as np
import pytest

from resolvent_lab.errors import InputError, ParameterError, ResolutionTooCoarse
from resolvent_lab.func_calculus import polynomial
from resolvent_lab.region_sets import (BranchDisc, CompactSet, Disc, LipschitzCurve,
                                       RegionConfig, _grid, distance, fit_admissibility,
                                       preimage_set, region_from_json, set_from_json,
                                       set_to_json, thickened_measure)

SEGMENT = CompactSet.curve_union([LipschitzCurve.segment(0, 1)])


def test_distance_examples():
    assert distance(CompactSet.point_cloud([0, 3]), 1) == pytest.approx(1.0)
    assert distance(CompactSet.disc_union([Disc(0, 1)]), 3) == pytest.approx(2.0)
    assert distance(SEGMENT, 0.5 + 0.25j) == pytest.approx(0.25)


def test_distance_is_vectorised_and_zero_on_set():
    K = CompactSet.point_cloud([0, 1j])
    d = distance(K, np.array([0, 1j, 2]))
    assert d.shape == (3,) and d[0] == 0 and d[1] == 0 and d[2] == pytest.approx(2)


def test_large_cloud_distance_matches_brute_force():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=5000) + 1j * rng.normal(size=5000)
    q = rng.normal(size=300) + 1j * rng.normal(size=300)
    brute = np.abs(q[:, None] - pts[None, :]).min(axis=1)
    assert np.allclose(distance(CompactSet.point_cloud(pts), q), brute, atol=1e-14)


def test_lipschitz_curve_validation():
    c = LipschitzCurve.from_function(lambda t: 0.5 * np.abs(t - 0.5), 0, 1, 101)
    assert c.lipschitz_constant == pytest.approx(0.5)
    assert c.discretization_error == pytest.approx(0.01 * math.sqrt(1.25) / 2)
    with pytest.raises(InputError):
        LipschitzCurve(1.0, (0, 1), [0, 1, 0], 0.5)
    with pytest.raises(InputError):
        LipschitzCurve(2.0, (0, 1), [0, 0], 1.0)


def test_stadium_area():
    exact = 2 * 0.1 * 1 + math.pi * 0.01
    est = thickened_measure(SEGMENT, 0.1, 0.5, 10, resolution=1024)
    assert abs(est.area - exact) <= 0.05 * exact


def test_punctured_disc_area():
    est = thickened_measure(CompactSet.point_cloud([0]), 1.0, 0, 10, resolution=512)
    assert abs(est.area - math.pi) <= 0.05 * math.pi


def test_square_frame_area():
    # cloud on the grid's own cell centres, so interior cells sit at distance 0
    a, R, res = 0.5 + 0.5j, 1.0, 1024
    centers, c = _grid(a, R, res)
    sq = centers[(centers.real >= 0) & (centers.real <= 1)
                 & (centers.imag >= 0) & (centers.imag <= 1)]
    side = sq.real.max() - sq.real.min()
    K = CompactSet.point_cloud(sq)
    for sigma in (0.05, 0.08):
        m = thickened_measure(K, sigma, a, R, res)
        est = m.area
        euclid = 4 * side * sigma + math.pi * sigma ** 2
        assert abs(est - euclid) <= m.error
        assert abs(est - euclid) <= 0.03 * euclid
        assert abs(est - (4 * sigma + 4 * sigma ** 2)) <= 0.10 * (4 * sigma + 4 * sigma ** 2)


def test_measure_errors():
    with pytest.raises(ParameterError):
        thickened_measure(SEGMENT, 0.1, 0, 1, resolution=32)
    with pytest.raises(ResolutionTooCoarse):
        thickened_measure(SEGMENT, 1e-4, 0, 1, resolution=64)


def test_admissibility_fits():
    sig = np.logspace(-3, -1.5, 5)
    seg = fit_admissibility(SEGMENT, sig, [0.2, 0.4], [0.5, 0.3], resolution=256)
    assert 0.85 <= seg.p_hat <= 1.15
    pt = fit_admissibility(CompactSet.point_cloud([0]), sig, [0.2, 0.4], [0], resolution=256)
    assert pt.p_hat <= 0.2


def test_dense_cloud_fills_like_a_planar_set():
    g = np.linspace(0, 1, 101)
    x, y = np.meshgrid(g, g)
    K = CompactSet.point_cloud((x + 1j * y).ravel())
    fit = fit_admissibility(K, np.logspace(-1.7, -0.7, 4) / 4, [0.3, 0.4],
                            [0.5 + 0.5j], resolution=256)
    assert 1.8 <= fit.p_hat <= 2.0 + 1e-6


def test_fit_needs_a_decade():
    with pytest.raises(ParameterError):
        fit_admissibility(SEGMENT, [0.01, 0.02, 0.03, 0.04], [0.5], [0.5])


def test_preimage_set_examples():
    region = RegionConfig(Disc(0, 10))
    P = preimage_set(polynomial(0, 0, 1), CompactSet.point_cloud([1]), region)
    assert np.allclose(np.sort(P.points.real), [-1, 1]) and np.allclose(P.points.imag, 0)
    P = preimage_set(polynomial(0, -3, 1), CompactSet.point_cloud([0, 3]), region)
    assert np.allclose(np.sort(P.points.real), [0, 3])
    K = CompactSet.point_cloud([0.3, 1 + 1j])
    P = preimage_set(polynomial(0, 1), K, region)
    assert np.allclose(np.sort_complex(P.points), np.sort_complex(K.points))


def test_region_validation():
    with pytest.raises(InputError):
        RegionConfig(Disc(0, 1), (BranchDisc(0.9, 0.1, 2),))
    with pytest.raises(InputError):
        RegionConfig(Disc(0, 10), (BranchDisc(0, 1, 2), BranchDisc(1.5, 1, 2)))
    with pytest.raises(InputError):
        BranchDisc(0, 1, 1)
    r = RegionConfig.around(polynomial(0, -3, 1), 1.5, 3.0)
    assert len(r.branch_neighborhoods) == 1
    assert r.branch_neighborhoods[0].center == pytest.approx(1.5)
    assert r.branch_index(np.array([1.5, 10])).tolist() == [0, -1]


def test_pushforward():
    disc = CompactSet.disc_union([Disc(1, 0.5)])
    img = disc.pushforward(polynomial(1, 2))
    assert img.variant == "disc_union"
    assert img.discs[0].center == pytest.approx(3) and img.discs[0].radius == pytest.approx(1)
    img = disc.pushforward(polynomial(0, 0, 1))
    # boundary image of D(1, 1/2) under z^2 passes through 1/4 and 9/4
    assert distance(img, 0.25) < 1e-6 and distance(img, 2.25) < 1e-6
    assert distance(img, 0.0) == pytest.approx(0.25, abs=1e-6)


def test_json_round_trip():
    for K in (CompactSet.point_cloud([0, 1 + 1j]), CompactSet.disc_union([Disc(0, 1)]),
              SEGMENT):
        back = set_from_json(set_to_json(K))
        q = np.array([2 + 2j, -1, 0.5j])
        assert np.allclose(distance(back, q), distance(K, q))
    r = RegionConfig(Disc(1.5, 3), (BranchDisc(1.5, 0.5, 2),), 0.1)
    import json
    assert region_from_json(json.dumps(r.to_dict())) == r
    with pytest.raises(InputError):
        set_from_json('{"variant": "blob"}')
