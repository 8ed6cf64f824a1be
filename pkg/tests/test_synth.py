import math

import numpy as np
import pytest

from mmreg.errors import BadOptions
from mmreg.evaluation import landmark_error, map_landmarks
from mmreg.imaging import bilinear_sample, image_center, similarity_forward, similarity_inverse
from mmreg.synth import SynthOptions, generate_pair, invert_field, phantom_landmarks, render_phantom

FULL = SynthOptions(translation=10, rotation=10, scale=0.1, deform=6, gap=1.0, noise=0.01)


def test_zero_options_identity_pair():
    pair = generate_pair(3, SynthOptions())
    np.testing.assert_array_equal(pair.fixed, pair.moving)
    np.testing.assert_array_equal(pair.landmarks_fixed, pair.landmarks_moving)
    assert not pair.truth_field.any()


def test_same_seed_bitwise():
    a, b = generate_pair(5, FULL), generate_pair(5, FULL)
    for name in ("fixed", "moving", "truth_field", "landmarks_fixed", "landmarks_moving"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    assert a.truth_params == b.truth_params


def test_different_seeds_differ():
    assert generate_pair(1, FULL).truth_params != generate_pair(2, FULL).truth_params


@pytest.mark.parametrize("seed", [0, 4, 9])
def test_landmark_chain_matches_map_landmarks(seed):
    pair = generate_pair(seed, FULL)
    chained = map_landmarks(pair.landmarks_fixed, pair.truth_params, pair.truth_field)
    assert landmark_error(chained, pair.landmarks_moving).rms_px < 1e-6


@pytest.mark.parametrize("seed", [0, 7])
def test_landmark_chain_independent_arithmetic(seed):
    pair = generate_pair(seed, FULL)
    p = pair.truth_params
    cx, cy = image_center(pair.fixed.shape)
    c, s = math.cos(p.theta), math.sin(p.theta)
    for (x, y), (mx, my) in zip(pair.landmarks_fixed, pair.landmarks_moving):
        qx = cx + p.scale * (c * (x - cx) - s * (y - cy)) + p.tx
        qy = cy + p.scale * (s * (x - cx) + c * (y - cy)) + p.ty
        x0, y0 = int(qx), int(qy)
        fx, fy = qx - x0, qy - y0
        f = pair.truth_field
        d = ((1 - fx) * (1 - fy) * f[y0, x0] + fx * (1 - fy) * f[y0, x0 + 1]
             + (1 - fx) * fy * f[y0 + 1, x0] + fx * fy * f[y0 + 1, x0 + 1])
        assert abs(qx + d[0] - mx) < 1e-6 and abs(qy + d[1] - my) < 1e-6


def test_moving_image_follows_chain():
    # without a modality gap the moving image is the phantom seen through the chain
    pair = generate_pair(2, SynthOptions(translation=8, rotation=8, scale=0.08, deform=5))
    pts = np.array([(100.0, 120.0), (150.0, 90.0), (128.0, 180.0)])
    p = pair.truth_params
    qx, qy = similarity_forward(p, pts[:, 0], pts[:, 1], image_center(pair.fixed.shape))
    d = bilinear_sample(pair.truth_field, qx, qy)
    mx, my = qx + d[:, 0], qy + d[:, 1]
    # compare at grid points near the mapped location through the analytic phantom
    gx, gy = np.round(mx), np.round(my)
    vals = pair.moving[gy.astype(int), gx.astype(int)]
    # invert the chain at the grid point: moving(g) = phantom(T^-1(g + u(g)))
    u = invert_field(pair.truth_field)
    ux = u[gy.astype(int), gx.astype(int)]
    px, py = similarity_inverse(p, gx + ux[:, 0], gy + ux[:, 1], image_center(pair.fixed.shape))
    np.testing.assert_allclose(vals, render_phantom(px, py, 256, 0.0), atol=1e-12)


def test_invert_field_consistency():
    pair = generate_pair(1, FULL)
    D = pair.truth_field
    u = invert_field(D)
    ys, xs = np.mgrid[0:256, 0:256].astype(float)
    resid = u + bilinear_sample(D, xs + u[..., 0], ys + u[..., 1])
    assert np.abs(resid).max() < 1e-6


def test_deformation_magnitude_and_ranges():
    pair = generate_pair(4, FULL)
    assert np.hypot(pair.truth_field[..., 0], pair.truth_field[..., 1]).max() == pytest.approx(6.0)
    p = pair.truth_params
    assert abs(p.tx) <= 10 and abs(p.ty) <= 10 and abs(math.degrees(p.theta)) <= 10 and abs(p.scale - 1) <= 0.1
    assert pair.fixed.min() >= 0 and pair.fixed.max() <= 1
    assert pair.moving.min() >= 0 and pair.moving.max() <= 1
    assert pair.landmarks_fixed.shape == (8, 2)


def test_raw_error_grows_with_deformation():
    errs = []
    for d in (0, 2, 4, 6, 8, 10):
        pair = generate_pair(6, SynthOptions(deform=d))
        errs.append(landmark_error(pair.landmarks_fixed, pair.landmarks_moving).mse_px2)
    assert errs[0] == 0
    assert all(b > a for a, b in zip(errs, errs[1:]))


def test_gap_changes_intensities_but_not_geometry():
    vis = generate_pair(0, SynthOptions(gap=0.0))
    ir = generate_pair(0, SynthOptions(gap=1.0))
    assert np.abs(vis.moving - ir.moving).mean() > 0.05
    np.testing.assert_array_equal(vis.landmarks_moving, ir.landmarks_moving)


def test_size_scaling():
    pair = generate_pair(0, SynthOptions(size=128, n_landmarks=4))
    assert pair.fixed.shape == (128, 128)
    np.testing.assert_allclose(pair.landmarks_fixed, phantom_landmarks(4, 128))


@pytest.mark.parametrize("kw", [dict(translation=16), dict(rotation=-1), dict(rotation=15.5), dict(scale=0.16),
                                dict(deform=10.5), dict(gap=1.2), dict(noise=0.03), dict(n_landmarks=0),
                                dict(n_landmarks=13), dict(size=32)])
def test_bad_options(kw):
    with pytest.raises(BadOptions):
        SynthOptions(**kw)
