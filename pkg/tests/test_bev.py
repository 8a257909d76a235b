import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bevgraph.bev import (
    CameraModel,
    RoiSpec,
    bev_denormalize,
    bev_normalize,
    clip_resample,
    depth_warp_source,
    feature_pixel_centers,
    ground_to_pixel,
    pixel_to_ground,
    split_positional_encoding,
    translate_labels,
)
from bevgraph.errors import DomainError, HorizonError, OutOfRoiError, WarpSingularityError
from bevgraph.lane_graph import LaneGraph, validate
from bevgraph.objects import OrientedBox

CAM = CameraModel.default()


def random_in_roi_pixels(rng, count, cam=CAM, roi=RoiSpec(), z_margin=0.0):
    x = rng.uniform(roi.x_min, roi.x_max, count)
    z = rng.uniform(roi.z_min + z_margin, roi.z_max - z_margin, count)
    return ground_to_pixel(np.stack([x, z], axis=-1), cam)


def test_pixel_to_ground_examples():
    cam = CameraModel(focal=1000, cx=400, cy=224, cam_height=1.5)
    assert pixel_to_ground((374, 400), cam) == pytest.approx([0, 10])
    z0 = 7.0
    assert pixel_to_ground((cam.cy + cam.focal * cam.cam_height / z0, cam.cx), cam) == pytest.approx([0, z0])


def test_pixel_to_ground_horizon():
    with pytest.raises(HorizonError):
        pixel_to_ground((CAM.cy, 10), CAM)
    with pytest.raises(HorizonError):
        pixel_to_ground((CAM.cy - 5, 10), CAM)


def test_depth_decreases_down_the_image():
    rows = np.linspace(CAM.cy + 1, CAM.image_height, 50)
    z = pixel_to_ground(np.stack([rows, np.full(50, 100.0)], axis=-1), CAM)[:, 1]
    assert np.all(np.diff(z) < 0)


def test_projection_roundtrip():
    rng = np.random.default_rng(0)
    px = np.stack([rng.uniform(CAM.cy + 1, CAM.image_height, 1000), rng.uniform(0, CAM.image_width, 1000)], -1)
    assert np.abs(ground_to_pixel(pixel_to_ground(px, CAM), CAM) - px).max() <= 1e-9


def test_bev_normalize_examples():
    assert bev_normalize((-25, 1)).tolist() == [0, 0]
    assert bev_normalize((25, 50)).tolist() == [1, 1]
    assert bev_normalize((0, 25.5)).tolist() == [0.5, 0.5]
    # 0.01 normalized is half a meter
    assert (bev_denormalize((0.01, 0.0)) - bev_denormalize((0.0, 0.0)))[0] == pytest.approx(0.5)
    with pytest.raises(OutOfRoiError):
        bev_normalize((0, 0.5))


def test_bev_normalize_is_affine():
    rng = np.random.default_rng(1)
    for _ in range(100):
        a = np.array([rng.uniform(-25, 25), rng.uniform(1, 50)])
        b = np.array([rng.uniform(-25, 25), rng.uniform(1, 50)])
        mid = bev_normalize((a + b) / 2)
        assert mid == pytest.approx((bev_normalize(a) + bev_normalize(b)) / 2, abs=1e-15)
        assert bev_denormalize(bev_normalize(a)) == pytest.approx(a, abs=1e-12)


def test_roi_defaults():
    roi = RoiSpec()
    assert roi.grid_shape == (196, 200)
    with pytest.raises(DomainError):
        RoiSpec(resolution=0.3)


def test_clip_resample_straight_segment():
    (seg,) = clip_resample([(0, 10), (0, 20)])
    assert len(seg) == 41
    steps = np.linalg.norm(np.diff(bev_denormalize(seg), axis=0), axis=1)
    assert np.abs(steps - 0.25).max() <= 1e-9


def test_clip_resample_spacing_on_a_bent_polyline():
    (seg,) = clip_resample([(0, 5), (3, 9), (3, 12.3)])
    steps = np.linalg.norm(np.diff(bev_denormalize(seg), axis=0), axis=1)
    # last step may be partial
    assert np.abs(steps[:-1] - 0.25).max() <= 1e-9
    assert 0 < steps[-1] <= 0.25 + 1e-9


def test_clip_resample_outside_and_split():
    assert clip_resample([(0, 0.2), (5, 0.5)]) == []
    segs = clip_resample([(-20, 10), (-30, 15), (-20, 20)])
    assert len(segs) == 2
    for s in segs:
        assert s.min() >= 0 and s.max() <= 1
    with pytest.raises(DomainError):
        clip_resample([(0, 10)])


def test_depth_warp_identity():
    px = random_in_roi_pixels(np.random.default_rng(2), 50)
    assert np.array_equal(depth_warp_source(px, 0.0, CAM), px)


def test_depth_warp_example():
    target = ground_to_pixel((0.0, 10.0), CAM)
    src = depth_warp_source(target, 2.0, CAM)
    assert src == pytest.approx(ground_to_pixel((0.0, 12.0), CAM), abs=1e-9)
    assert pixel_to_ground(src, CAM) == pytest.approx([0, 12])


def test_depth_warp_project_move_project():
    rng = np.random.default_rng(3)
    px = random_in_roi_pixels(rng, 1000, z_margin=5.0)
    for beta in rng.uniform(-5, 5, 10):
        src = depth_warp_source(px, beta, CAM)
        ground = pixel_to_ground(px, CAM)
        expected = ground_to_pixel(ground + np.array([0.0, beta]), CAM)
        assert np.abs(src - expected).max() <= 1e-6
        g0 = pixel_to_ground(src, CAM)
        assert g0[:, 1] == pytest.approx(ground[:, 1] + beta)
        assert g0[:, 0] == pytest.approx(ground[:, 0])


def test_depth_warp_composition():
    rng = np.random.default_rng(4)
    px = random_in_roi_pixels(rng, 500, z_margin=5.0)
    for b1, b2 in rng.uniform(-2.5, 2.5, (10, 2)):
        two = depth_warp_source(depth_warp_source(px, b1, CAM), b2, CAM)
        assert np.abs(two - depth_warp_source(px, b1 + b2, CAM)).max() <= 1e-6


def test_depth_warp_agrees_with_closed_form():
    # n0 = (n1 - dx) fC / (fC - m1 b + dy b) + dx with b = -beta, and the
    # row analogue with dy as its offset
    rng = np.random.default_rng(5)
    px = random_in_roi_pixels(rng, 200, z_margin=5.0)
    fc = CAM.focal * CAM.cam_height
    for beta in (-3.0, 1.5, 4.0):
        b = -beta
        den = fc - px[:, 0] * b + CAM.cy * b
        n0 = (px[:, 1] - CAM.cx) * fc / den + CAM.cx
        m0 = (px[:, 0] - CAM.cy) * fc / den + CAM.cy
        src = depth_warp_source(px, beta, CAM)
        assert src[:, 1] == pytest.approx(n0, abs=1e-9)
        assert src[:, 0] == pytest.approx(m0, abs=1e-9)


def test_depth_warp_errors():
    with pytest.raises(HorizonError):
        depth_warp_source((CAM.cy - 1, 10), 1.0, CAM)
    # a point 10 m away cannot come from behind the camera
    with pytest.raises(WarpSingularityError):
        depth_warp_source(ground_to_pixel((0.0, 10.0), CAM), -12.0, CAM)


def test_translate_labels_identity():
    g = LaneGraph.from_edges([[(0.2, 0.3), (0.3, 0.4), (0.4, 0.5)], [(0.4, 0.5), (0.5, 0.6), (0.6, 0.7)]], [(0, 1)])
    boxes = [OrientedBox.one_hot((0.5, 0.5), 0.1, 0.05, 0.3, 1)]
    out_g, out_b = translate_labels(g, boxes, 0.0)
    assert out_g == g and out_b == boxes


def test_translate_labels_shift():
    g = LaneGraph.from_edges([[(0.2, 0.3), (0.3, 0.4), (0.4, 0.5)], [(0.4, 0.5), (0.5, 0.6), (0.6, 0.7)]], [(0, 1)])
    boxes = [OrientedBox.one_hot((0.5, 0.5), 0.1, 0.05, 0.3, 1), OrientedBox.one_hot((0.3, 0.01), 0.05, 0.02, 0.0, 0)]
    out_g, out_b = translate_labels(g, boxes, 5.0)
    for a, b in zip(out_g.centerlines, g.centerlines):
        assert a.control_points[:, 1] == pytest.approx(b.control_points[:, 1] - 5 / 49, abs=1e-12)
        assert np.array_equal(a.control_points[:, 0], b.control_points[:, 0])
    assert np.array_equal(out_g.incidence, g.incidence)
    assert len(out_b) == 1
    assert out_b[0].center[1] == pytest.approx(0.5 - 5 / 49)


def test_translate_labels_reclips():
    # the first curve starts near the bottom edge and is partly pushed out
    g = LaneGraph.from_edges([[(0.5, 0.02), (0.5, 0.1), (0.5, 0.3)], [(0.5, 0.3), (0.6, 0.5), (0.7, 0.7)]], [(0, 1)])
    out_g, _ = translate_labels(g, [], 2.0)
    assert len(out_g) == 2
    first = out_g.centerlines[0]
    assert first.start[1] == pytest.approx(0.0, abs=0.25 / 49 + 1e-9)
    assert first.end == pytest.approx([0.5, 0.3 - 2 / 49], abs=1e-9)
    assert validate(out_g) == []


@pytest.mark.parametrize("h, w, c", [(28, 50, 32), (14, 25, 8), (1, 1, 2)])
def test_pe_shape(h, w, c):
    assert split_positional_encoding(h, w, c, CAM).shape == (h, w, c)


def test_pe_zero_above_horizon_and_deterministic():
    pe = split_positional_encoding(28, 50, 32, CAM)
    rows, _ = feature_pixel_centers(28, 50, CAM)
    above = rows[:, 0] <= CAM.cy
    assert above.any()
    assert not pe[above, :, 16:].any()
    assert pe[~above, :, :16].any()
    assert pe[-1, :, 16:].any()
    assert np.array_equal(pe, split_positional_encoding(28, 50, 32, CAM))


def test_pe_camera_only_changes_bev_half():
    a = split_positional_encoding(28, 50, 32, CAM)
    b = split_positional_encoding(28, 50, 32, CameraModel(900.0, 380.0, 200.0, 2.0))
    assert np.array_equal(a[..., :16], b[..., :16])
    assert not np.array_equal(a[..., 16:], b[..., 16:])


def test_pe_rejects_odd_channels():
    with pytest.raises(DomainError):
        split_positional_encoding(4, 4, 7, CAM)


@settings(max_examples=100, deadline=None)
@given(
    st.floats(-24.0, 24.0),
    st.floats(6.0, 45.0),
    st.floats(-5.0, 5.0),
)
def test_warp_property(x, z, beta):
    px = ground_to_pixel((x, z), CAM)
    src = depth_warp_source(px, beta, CAM)
    assert pixel_to_ground(src, CAM) == pytest.approx([x, z + beta], rel=1e-9, abs=1e-9)
    assert math.isfinite(src[0]) and math.isfinite(src[1])
