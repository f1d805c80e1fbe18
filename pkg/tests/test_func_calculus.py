import math

import numpy as np
import pytest

from resolvent_lab.errors import (ContourOutsideDomain, ContourTooClose,
                                  CriticalValueCollision, InputError)
from resolvent_lab.func_calculus import (Circle, Polynomial,
                                         PowerSeries, Rational, apply_function,
                                         branch_case_diagnostics, critical_data,
                                         dunford_apply, function_from_json, function_to_json,
                                         hinf_bound_scan, horner, partial_fraction_coeffs,
                                         phi_z, polynomial, preimages, psi_identity_residual,
                                         psi_lambda, resolvent_identity_check, tau_estimate)
from resolvent_lab.operator_core import diagonal, jordan, random_triangular
from resolvent_lab.region_sets import BranchDisc, CompactSet, Disc, RegionConfig

F = polynomial(0, -3, 1)


def test_critical_data_examples():
    (xi, m, v), = critical_data(F).critical_points
    assert xi == pytest.approx(1.5) and m == 2 and v == pytest.approx(-2.25)
    assert critical_data(polynomial(0, 1)).critical_points == ()
    (xi, m, v), = critical_data(polynomial(0, 0, 0, 1)).critical_points
    assert abs(xi) < 1e-8 and m == 3 and abs(v) < 1e-12


def test_preimage_examples():
    fan = preimages(F, 0)
    assert fan.k == 2 and np.allclose(sorted(np.real(fan.points)), [0, 3])
    fan = preimages(F, -9 / 4)
    assert fan.multiplicities == (2,) and fan.points[0] == pytest.approx(1.5, abs=1e-6)
    fan = preimages(polynomial(0, 1), 5)
    assert fan.k == 1 and fan.points[0] == pytest.approx(5)


def test_power_series_preimages_use_region_count():
    f = PowerSeries([0, 1, 0.5, 1 / 6], convergence_radius=10)
    region = RegionConfig(Disc(0, 1.5))
    fan = preimages(f, 0.3, region)
    assert all(abs(f(p) - 0.3) < 1e-10 for p in fan.points)
    assert fan.confidence in ("exact", "heuristic")


def test_phi_examples():
    assert np.allclose(phi_z(F, 0)(np.array([0, 0.5, 3, 7 + 1j])), 1)
    assert phi_z(polynomial(0, 0, 2), 2)(0.3 + 0.1j) == pytest.approx(2)
    assert phi_z(F, 0)(0.0) == pytest.approx(1)


def test_phi_removable_fill_is_smooth():
    f = PowerSeries([0, 1, 0.5, 1 / 6])
    phi = phi_z(f, 0.2, region=RegionConfig(Disc(0, 1.5)))
    p = phi.points[0]
    near = phi(p + 1e-7)
    far = phi(p + 1e-3)
    assert abs(near - phi(p)) < 1e-6
    assert abs(far - phi(p)) < 1e-2


def test_partial_fraction_examples():
    c = partial_fraction_coeffs([0, 3])
    assert c[0] == pytest.approx(-1 / 3) and c[1] == pytest.approx(1 / 3)
    assert partial_fraction_coeffs([5])[0] == pytest.approx(1)
    c = partial_fraction_coeffs([1, -1])
    assert c[0] == pytest.approx(0.5) and c[1] == pytest.approx(-0.5)
    with pytest.raises(CriticalValueCollision):
        partial_fraction_coeffs(preimages(F, -9 / 4))


def test_partial_fraction_cover_up_oracle():
    # sum_j c_j / (lam - lam_j) = 1 / prod (lam - lam_j)
    pts = np.array([0.1, 2 + 1j, -1j, 3])
    c = partial_fraction_coeffs(pts)
    lam = 0.7 - 0.4j
    assert np.sum(c / (lam - pts)) == pytest.approx(1 / np.prod(lam - pts), rel=1e-12)


def test_psi_examples():
    lam = 0.4 + 0.2j
    t = np.array([1.0, 2j, -0.5])
    assert np.allclose(psi_lambda(polynomial(0, 0, 1), lam)(t), t + lam)
    assert psi_lambda(F, 0)(3.0) == pytest.approx(0)
    assert psi_lambda(F, lam)(lam) == pytest.approx(F.derivative()(lam))


def test_dunford_examples():
    T = random_triangular(5, seed=0)
    I = dunford_apply(T, polynomial(0, 1)).entries
    assert np.linalg.norm(I - T.entries) <= 1e-10 * np.linalg.norm(T.entries)
    assert np.allclose(dunford_apply(jordan(3, 2), F).entries, [[0, 3], [0, 0]], atol=1e-10)
    mu = np.array([0.2, -1, 2j])
    assert np.allclose(dunford_apply(diagonal(mu), F).entries, np.diag(F(mu)), atol=1e-10)


def test_dunford_on_series_and_rational():
    T = random_triangular(4, radius=0.5, seed=4)
    exp_ = PowerSeries([1 / math.factorial(k) for k in range(25)])
    assert np.allclose(dunford_apply(T, exp_).entries, exp_.matrix(T), atol=1e-10)
    r = Rational(polynomial(1, 1), polynomial(3, 0, 1))
    assert np.allclose(dunford_apply(T, r).entries, r.matrix(T), atol=1e-10)


def test_contour_errors():
    T = diagonal([0, 1])
    with pytest.raises(ContourTooClose):
        dunford_apply(T, F, [Circle(0, 1.0)])
    with pytest.raises(ContourOutsideDomain):
        dunford_apply(T, PowerSeries([0, 1], convergence_radius=1.5), [Circle(0.5, 3)])
    with pytest.raises(ContourOutsideDomain):
        dunford_apply(T, Rational(polynomial(1), polynomial(-0.5j, 1)), [Circle(0.5, 2)])


def test_horner_matches_apply_function():
    T = random_triangular(6, seed=9)
    f = polynomial(1, -2, 0, 0.5, 1j)
    assert np.allclose(horner(f, T).entries, apply_function(T, f).entries)


def test_identity_examples():
    assert resolvent_identity_check(random_triangular(6, 0, 1, seed=1),
                                    polynomial(0, 0, 1), 4).residual <= 1e-8
    assert resolvent_identity_check(diagonal([0, 1]), polynomial(0, 1), 2).residual <= 1e-12
    assert resolvent_identity_check(jordan(3, 2), F, 1).residual <= 1e-8


def test_identity_with_series_in_region():
    f = PowerSeries([0, 1, 0.5, 1 / 6], convergence_radius=10)
    T = random_triangular(4, radius=0.5, seed=5)
    res = resolvent_identity_check(T, f, 1.5, RegionConfig(Disc(0, 2.0)))
    assert res.residual <= 1e-8


def test_psi_identity_residual():
    T = random_triangular(5, radius=0.8, seed=6)
    assert psi_identity_residual(T, polynomial(0.3, 1, 0.1), 0.95j) <= 1e-8


def test_hinf_scan():
    r = RegionConfig(Disc(0, 5))
    scan = hinf_bound_scan(polynomial(0, 0, 2), [0.5, 1j, 2], r, resolution=64)
    assert np.allclose(scan.sup_per_z, 0.5)
    region = RegionConfig(Disc(1.5, 2))
    zs = F(1.5 + 1.2 * np.exp(2j * np.pi * np.arange(50) / 50))
    a = hinf_bound_scan(F, zs, region, resolution=128).sup
    b = hinf_bound_scan(F, zs, region, resolution=256).sup
    assert math.isfinite(a) and abs(a - b) <= 0.05 * b


def test_tau_estimate_of_quadratic():
    region = RegionConfig(Disc(1.5, 3), (BranchDisc(1.5, 0.5, 2),), 0.1)
    # |f'| = 2 |z - 3/2| is smallest on the branch disc boundary
    assert tau_estimate(F, region) == pytest.approx(1.0, rel=0.02)


def test_branch_diagnostics_case_one_for_identity():
    f = polynomial(0, 1)
    region = RegionConfig(Disc(0, 3))
    K = CompactSet.point_cloud([0])
    recs = branch_case_diagnostics(f, 0.5, preimages(f, 0.5, region), region, K)
    assert [r.case for r in recs] == [1] and recs[0].abs_c == pytest.approx(1)


def test_branch_diagnostics_square_map():
    f = polynomial(0, 0, 1)
    region = RegionConfig(Disc(0, 2), (BranchDisc(0, 0.4, 2),))
    K = CompactSet.point_cloud([0])
    for z in (1e-2, 1e-4):
        recs = branch_case_diagnostics(f, z, preimages(f, z, region), region, K)
        assert len(recs) == 2 and all(r.case == 2 for r in recs)
        assert all(r.abs_c == pytest.approx(1 / (2 * math.sqrt(z))) for r in recs)
        assert all(r.ratio == pytest.approx(0.5, abs=1e-9) for r in recs)
    recs = branch_case_diagnostics(polynomial(0, 0, 0, 1), 1e-6,
                                   preimages(polynomial(0, 0, 0, 1), 1e-6, region),
                                   RegionConfig(Disc(0, 2), (BranchDisc(0, 0.4, 3),)), K)
    assert len(recs) == 3 and all(r.ratio == pytest.approx(1 / 3, abs=1e-9) for r in recs)


def test_function_json_round_trip():
    for f in (F, Rational(polynomial(1, 1), polynomial(3, 0, 1)),
              PowerSeries([0, 1, 0.5], convergence_radius=2, center=1j)):
        g = function_from_json(function_to_json(f))
        z = np.array([0.3, 0.1 + 0.2j])
        assert np.allclose(f(z), g(z))
    with pytest.raises(InputError):
        function_from_json('{"variant": "spline"}')
