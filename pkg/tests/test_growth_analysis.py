import math

import numpy as np
import pytest

from resolvent_lab.errors import (EmptyAnnulus, HypothesisViolation, InsufficientDecades)
from resolvent_lab.func_calculus import PowerSeries, polynomial
from resolvent_lab.growth_analysis import (bilipschitz_ratio_scan, classify_geometry,
                                           fit_growth, growth_order,
                                           resolvent_comparison_scan, sample_field,
                                           subharmonic_check, verify_converse,
                                           verify_theorem_A, z_samples_near)
from resolvent_lab.operator_core import diagonal, jordan, random_triangular
from resolvent_lab.region_sets import BranchDisc, CompactSet, Disc, RegionConfig

SEG = np.linspace(0, 1, 21)


def test_sample_field_normal_case():
    T = diagonal([0, 1])
    fld = sample_field(T, CompactSet.point_cloud([0, 1]), (1e-4, 1e-1), 500, seed=1)
    assert len(fld) == 500
    assert np.all((fld.dist >= 1e-4) & (fld.dist <= 1e-1))
    assert np.allclose(fld.norm * fld.dist, 1, atol=1e-10)


def test_sample_field_jordan_lower_bound():
    fld = sample_field(jordan(0, 3), CompactSet.point_cloud([0]), (1e-3, 1e-3 * 1.0001), 20,
                       seed=2)
    assert np.all(fld.norm >= 1e6 * 0.999)


def test_sample_field_is_deterministic():
    K = CompactSet.point_cloud([0])
    a = sample_field(jordan(0, 2), K, seed=5)
    b = sample_field(jordan(0, 2), K, seed=5, workers=3)
    assert np.array_equal(a.lam, b.lam) and np.array_equal(a.norm, b.norm)
    assert a.to_csv() == b.to_csv()


def test_empty_annulus():
    with pytest.raises(EmptyAnnulus):
        sample_field(jordan(0, 2), CompactSet.point_cloud([0]), (0, 0))


def test_fit_examples():
    fit, _ = growth_order(diagonal(SEG), CompactSet.point_cloud(SEG))
    assert abs(fit.s_hat - 1) <= 0.05
    for n in (2, 3, 4):
        fit, _ = growth_order(jordan(0, n), CompactSet.point_cloud([0]))
        assert abs(fit.s_hat - n) <= 0.10
    zero = jordan(0, 2).entries @ jordan(0, 2).entries
    fit, _ = growth_order(zero, CompactSet.point_cloud([0]))
    assert abs(fit.s_hat - 1) <= 0.05


def test_fit_needs_two_decades():
    fld = sample_field(jordan(0, 2), CompactSet.point_cloud([0]), (1e-2, 1e-1), 500)
    with pytest.raises(InsufficientDecades):
        fit_growth(fld)
    assert abs(fit_growth(fld, min_decades=1.0).s_hat - 2) < 0.1


def test_forward_bound_examples():
    r = verify_theorem_A(jordan(0, 2), CompactSet.point_cloud([0]), polynomial(0, 1, 1))
    assert r.passed and abs(r.s_T - 2) < 0.1 and abs(r.s_fT - 2) < 0.1
    r = verify_theorem_A(diagonal(SEG), CompactSet.point_cloud(SEG), polynomial(0, 0, 1))
    assert r.passed and abs(r.s_T - 1) < 0.1 and abs(r.s_fT - 1) < 0.1
    r = verify_theorem_A(jordan(1, 2), CompactSet.point_cloud([1]), polynomial(1, -2, 1))
    assert r.passed and abs(r.s_T - 2) < 0.1 and abs(r.s_fT - 1) < 0.1


def test_converse_examples():
    r = verify_converse(jordan(0, 2), CompactSet.point_cloud([0]), polynomial(0, 1, 1))
    assert r.passed and r.geometry == "lipschitz"
    with pytest.raises(HypothesisViolation) as exc:
        verify_converse(jordan(1, 2), CompactSet.point_cloud([1]), polynomial(1, -2, 1))
    assert exc.value.critical_points[0] == pytest.approx(1)
    f = PowerSeries([0, 1, 0.5, 1 / 6])
    r = verify_converse(diagonal(SEG), CompactSet.point_cloud(SEG), f)
    assert r.passed and abs(r.s_T - 1) < 0.1 and abs(r.s_fT - 1) < 0.1


def test_geometry_classification():
    assert classify_geometry(CompactSet.point_cloud([0]))[0] == "lipschitz"
    kind, p = classify_geometry(CompactSet.disc_union([Disc(0, 0.5)]))
    assert kind == "p_admissible" and 0.8 < p < 1.2


def test_bilipschitz_examples():
    region = RegionConfig(Disc(0, 5))
    s = bilipschitz_ratio_scan(polynomial(0, 1), CompactSet.point_cloud([0, 1j]), region,
                               resolution=8)
    assert s.min_ratio == pytest.approx(1) and s.max_ratio == pytest.approx(1)
    s = bilipschitz_ratio_scan(polynomial(0, 2), CompactSet.point_cloud([0]), region,
                               resolution=8)
    assert s.min_ratio == pytest.approx(0.5) and s.max_ratio == pytest.approx(0.5)
    region = RegionConfig(Disc(1.5, 3.2), (BranchDisc(1.5, 0.5, 2),), 0.1)
    K = CompactSet.point_cloud([0, 3])
    a = bilipschitz_ratio_scan(polynomial(0, -3, 1), K, region, resolution=16)
    b = bilipschitz_ratio_scan(polynomial(0, -3, 1), K, region, resolution=32)
    assert a.max_ratio / a.min_ratio <= 10
    assert b.max_ratio / b.min_ratio == pytest.approx(a.max_ratio / a.min_ratio, rel=0.1)


def test_comparison_examples():
    zs = z_samples_near([0, 1], n=20)
    scan = resolvent_comparison_scan(diagonal([0, 1]), polynomial(0, 1), None, zs)
    assert np.allclose(scan.ratio, 1)
    f = polynomial(0, 1, 1)
    scan = resolvent_comparison_scan(jordan(0, 2), f, None, z_samples_near([0], n=100))
    lo, hi = scan.extrema
    assert 1 / 50 <= lo and hi <= 50
    ring = np.exp(2j * np.pi * np.arange(16) / 16)
    g = polynomial(0, 0, 1)
    scan = resolvent_comparison_scan(diagonal(ring), g, None, z_samples_near(g(ring), n=50))
    lo, hi = scan.extrema
    assert 1 / 10 <= lo and hi <= 10


def test_subharmonic():
    for T in (jordan(0, 3), random_triangular(5, seed=1)):
        assert subharmonic_check(T, n_points=30).max_violation <= 1e-6
