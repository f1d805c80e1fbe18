import numpy as np
import pytest

from resolvent_lab import _kernels


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def test_smin_paths_agree(rng):
    a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    s = rng.normal(size=200) + 1j * rng.normal(size=200)
    ref = np.array([np.linalg.svd(a - z * np.eye(6), compute_uv=False)[-1] for z in s])
    assert np.allclose(_kernels.smin_shifted_numpy(a, s), ref, rtol=1e-12, atol=1e-14)
    assert np.allclose(_kernels.smin_shifted_numba(a, s), ref, rtol=1e-12, atol=1e-14)


def test_point_distance_paths_agree(rng):
    q = rng.normal(size=300) + 1j * rng.normal(size=300)
    p = rng.normal(size=50) + 1j * rng.normal(size=50)
    ref = np.abs(q[:, None] - p[None, :]).min(axis=1)
    assert np.allclose(_kernels.min_dist_points_numpy(q, p), ref)
    assert np.allclose(_kernels.min_dist_points_numba(q, p), ref)


def test_segment_distance_paths_agree(rng):
    q = rng.normal(size=300) + 1j * rng.normal(size=300)
    v = np.cumsum(rng.normal(size=40) + 1j * rng.normal(size=40)) * 0.1
    a = _kernels.min_dist_segments_numpy(q, v[:-1], v[1:])
    b = _kernels.min_dist_segments_numba(q, v[:-1], v[1:])
    assert np.allclose(a, b, rtol=1e-13)
    # dense resampling of the polyline bounds the exact distance from above
    t = np.linspace(0, 1, 400)[None, :]
    pts = (v[:-1, None] * (1 - t) + v[1:, None] * t).ravel()
    assert np.all(a <= np.abs(q[:, None] - pts[None, :]).min(axis=1) + 1e-12)


def test_env_flag_selects_numpy(monkeypatch):
    monkeypatch.setenv("RESOLVENT_LAB_NUMBA", "0")
    assert not _kernels._want_numba()
    monkeypatch.setenv("RESOLVENT_LAB_NUMBA", "1")
    assert _kernels._want_numba()


def test_dispatch_follows_flag(monkeypatch, rng):
    q = rng.normal(size=10) + 1j * rng.normal(size=10)
    p = rng.normal(size=5) + 1j * rng.normal(size=5)
    monkeypatch.setattr(_kernels, "USE_NUMBA", False)
    a = _kernels.min_dist_points(q, p)
    monkeypatch.setattr(_kernels, "USE_NUMBA", True)
    assert np.allclose(a, _kernels.min_dist_points(q, p))


def test_smin_dispatch_follows_flag(monkeypatch, rng):
    a = rng.normal(size=(3, 3)) + 0j
    s = rng.normal(size=20) + 1j * rng.normal(size=20)
    monkeypatch.setattr(_kernels, "USE_NUMBA_SVD", False)
    x = _kernels.smin_shifted(a, s)
    monkeypatch.setattr(_kernels, "USE_NUMBA_SVD", True)
    assert np.allclose(x, _kernels.smin_shifted(a, s), rtol=1e-12)
