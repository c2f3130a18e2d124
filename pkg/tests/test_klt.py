import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import smooth_texture
from dualtrack import klt
from dualtrack.frames import GrayFrame


def _tensor_oracle(data, cx, cy, half):
    gy, gx = np.gradient(data)
    z = np.zeros((2, 2))
    for y in range(cy - half, cy + half + 1):
        for x in range(cx - half, cx + half + 1):
            if 0 <= x < data.shape[1] and 0 <= y < data.shape[0]:
                g = np.array([gx[y, x], gy[y, x]])
                z += np.outer(g, g)
    return z


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(0, 31), st.integers(0, 31), st.integers(1, 7))
def test_structure_tensor_matches_double_loop(seed, cx, cy, half):
    data = np.random.default_rng(seed).random((32, 32))
    z = klt.structure_tensor(klt.image_gradients(data), (cx, cy), half)
    assert np.allclose(z.matrix(), _tensor_oracle(data, cx, cy, half), atol=1e-9, rtol=0)


@settings(max_examples=200)
@given(st.floats(0, 1e3), st.floats(-1e3, 1e3), st.floats(0, 1e3))
def test_min_eigenvalue_matches_eigensolver(a, b, c):
    z = klt.StructureTensor(a, b, c)
    expected = np.linalg.eigvalsh(z.matrix())[0]
    assert klt.min_eigenvalue(z) == pytest.approx(expected, abs=1e-12 * max(1.0, abs(a) + abs(b) + abs(c)))


def test_trackability_is_strict():
    z = klt.StructureTensor(2.0, 0.0, 1.0)
    assert klt.is_trackable(z, 0.5)
    assert not klt.is_trackable(z, 1.0)
    with pytest.raises(ValueError):
        klt.is_trackable(z, -1.0)


def test_min_eigenvalue_map_agrees_with_pointwise_tensor():
    f = smooth_texture((24, 24), np.random.default_rng(0))
    m = klt.min_eigenvalue_map(f, 3)
    g = klt.image_gradients(f)
    for x, y in [(5, 5), (12, 9), (0, 0), (23, 17)]:
        assert m[y, x] == pytest.approx(max(klt.min_eigenvalue(klt.structure_tensor(g, (x, y), 3)), 0.0), abs=1e-9)


def test_bilinear_is_exact_on_planes():
    y, x = np.mgrid[0:5, 0:6].astype(float)
    img = 2 * x + 3 * y
    assert klt.bilinear(img, np.array([1.25, 4.5]), np.array([2.5, 0.75])) == pytest.approx([10.0, 11.25])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(-6, 6), st.integers(-6, 6))
def test_translation_equivariance(seed, hx, hy):
    dx, dy = hx / 2.0, hy / 2.0
    if math.hypot(dx, dy) > 3.0:
        dx, dy = dx / 2.0, dy / 2.0
    prev = smooth_texture((40, 40), np.random.default_rng(seed))
    curr = smooth_texture((40, 40), np.random.default_rng(seed), dx, dy)
    tp = klt.track_point(prev, curr, (20, 20), min_eig=klt.frame_lambda(prev, klt.KLTConfig()))
    if tp.live:
        assert math.hypot(tp.displacement[0] - dx, tp.displacement[1] - dy) <= 0.25
        assert 0 <= tp.position[0] <= 39 and 0 <= tp.position[1] <= 39


def test_zero_motion_returns_start():
    f = smooth_texture((32, 32), np.random.default_rng(1))
    tp = klt.track_point(f, f, (16, 16))
    assert tp.live and tp.position == (16.0, 16.0) and tp.iterations_used == 1


def test_uniform_patch_is_lost():
    f = GrayFrame(np.full((32, 32), 0.3))
    tp = klt.track_point(f, f, (16, 16))
    assert not tp.live and tp.reason == "untextured"


def test_window_mostly_outside_is_lost():
    f = smooth_texture((32, 32), np.random.default_rng(2))
    assert klt.track_point(f, f, (0, 0)).reason == "border"


def test_changed_content_fails_residual():
    rng = np.random.default_rng(4)
    a = smooth_texture((32, 32), rng)
    b = GrayFrame(rng.random((32, 32)))
    tp = klt.track_point(a, b, (16, 16), max_iter=3)
    assert not tp.live and tp.reason == "residual"


def test_stationary_points_are_declared_lost():
    f = smooth_texture((32, 32), np.random.default_rng(5))
    cfg = klt.KLTConfig(stationary_frames=3)
    counts = None
    statuses = []
    for _ in range(3):
        pts, counts = klt.track_dominant_points(f, f, [(16, 16)], cfg, counts)
        statuses.append(pts[0].reason or pts[0].status)
    assert statuses == ["live", "live", "stationary"]


def test_tiny_frame_rejected():
    with pytest.raises(ValueError):
        klt.image_gradients(np.zeros((2, 5)))


def test_frame_lambda_uses_fixed_value_when_given():
    f = smooth_texture((16, 16), np.random.default_rng(0))
    assert klt.frame_lambda(f, klt.KLTConfig(lambda_threshold=0.25)) == 0.25
    auto = klt.frame_lambda(f, klt.KLTConfig())
    assert auto == pytest.approx(0.01 * klt.min_eigenvalue_map(f, 7).max())
