import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bevgraph.errors import DomainError
from bevgraph.objects import (
    DEFAULT_GRID,
    NonRectangularWarning,
    OrientedBox,
    box_mask,
    box_to_corners,
    corners_to_box,
    fold_angle,
    grid_argmax,
    iou_matrix,
    oriented_iou,
    rasterize_instances,
)


def inside(box, pts):
    c, s = math.cos(box.heading), math.sin(box.heading)
    d = pts - np.array(box.center)
    along = d[:, 0] * c + d[:, 1] * s
    across = -d[:, 0] * s + d[:, 1] * c
    return (np.abs(along) <= box.long / 2) & (np.abs(across) <= box.short / 2)


def monte_carlo_iou(a, b, n, rng):
    """Point-sampling IOU over the joint bounding rectangle."""
    corners = np.vstack([box_to_corners(a), box_to_corners(b)])
    lo, hi = corners.min(axis=0), corners.max(axis=0)
    pts = rng.uniform(lo, hi, (n, 2))
    ia, ib = inside(a, pts), inside(b, pts)
    union = (ia | ib).sum()
    return (ia & ib).sum() / union if union else 0.0


def random_box(rng, label=None):
    long = rng.uniform(0.05, 0.3)
    box = OrientedBox((rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7)), long, long * rng.uniform(0.2, 1.0), rng.uniform(0, math.pi))
    return box if label is None else OrientedBox(box.center, box.long, box.short, box.heading, _one_hot(label))


def _one_hot(label, n=7):
    p = [0.0] * n
    p[label] = 1.0
    return tuple(p)


def test_corners_example():
    corners = box_to_corners(OrientedBox((0.5, 0.5), 0.2, 0.1, 0.0))
    assert corners == pytest.approx(np.array([(0.4, 0.45), (0.6, 0.45), (0.6, 0.55), (0.4, 0.55)]))


def test_corners_are_ccw_with_correct_sides():
    rng = np.random.default_rng(0)
    for _ in range(50):
        b = random_box(rng)
        c = box_to_corners(b)
        x, y = c[:, 0], c[:, 1]
        signed = 0.5 * (x @ np.roll(y, -1) - y @ np.roll(x, -1))
        assert signed == pytest.approx(b.area)
        assert c.mean(axis=0) == pytest.approx(b.center)
        sides = np.linalg.norm(np.diff(np.vstack([c, c[:1]]), axis=0), axis=1)
        assert sides == pytest.approx([b.long, b.short, b.long, b.short])


def test_quarter_turn_swaps_extent():
    a = box_to_corners(OrientedBox((0.5, 0.5), 0.2, 0.1, 0.0))
    b = box_to_corners(OrientedBox((0.5, 0.5), 0.2, 0.1, math.pi / 2))
    assert np.ptp(a, axis=0) == pytest.approx(np.ptp(b, axis=0)[::-1])


def test_corners_to_box_examples():
    sq = corners_to_box([(0, 0), (1, 0), (1, 1), (0, 1)])
    assert (sq.center, sq.long, sq.short, sq.heading) == ((0.5, 0.5), 1.0, 1.0, 0.0)
    rot = corners_to_box([(1, 0), (1, 1), (0, 1), (0, 0)])
    assert rot.center == sq.center and rot.heading == pytest.approx(0.0, abs=1e-12)
    c, s = math.cos(math.pi / 6), math.sin(math.pi / 6)
    r = np.array([[c, -s], [s, c]])
    rect = np.array([(-0.2, -0.05), (0.2, -0.05), (0.2, 0.05), (-0.2, 0.05)]) @ r.T + 0.5
    box = corners_to_box(rect)
    assert box.heading == pytest.approx(math.pi / 6, abs=1e-9)
    assert (box.long, box.short) == pytest.approx((0.4, 0.1))


def test_corners_to_box_starting_on_short_side():
    c = box_to_corners(OrientedBox((0.5, 0.5), 0.2, 0.1, 0.3))
    b = corners_to_box(np.roll(c, 1, axis=0))
    assert b.heading == pytest.approx(0.3, abs=1e-12)


def test_corners_to_box_errors():
    with pytest.raises(DomainError):
        corners_to_box([(0, 0), (1, 0), (1, 0), (0, 0)])
    with pytest.warns(NonRectangularWarning):
        corners_to_box([(0, 0), (1, 0), (1.3, 1), (0, 1)])


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0.1, 0.9), st.floats(0.1, 0.9), st.floats(0.01, 0.3), st.floats(0.1, 0.99), st.floats(0, math.pi, exclude_max=True)
)
def test_corner_roundtrip(cx, cz, long, frac, heading):
    b = OrientedBox((cx, cz), long, long * frac, heading)
    with warnings.catch_warnings():
        warnings.simplefilter("error", NonRectangularWarning)
        r = corners_to_box(box_to_corners(b))
    assert r.center == pytest.approx(b.center, abs=1e-9)
    assert (r.long, r.short) == pytest.approx((b.long, b.short), abs=1e-9)
    d = abs(r.heading - b.heading)
    assert min(d, math.pi - d) <= 1e-9


def test_fold_angle():
    assert fold_angle(math.pi) == 0.0
    assert fold_angle(-0.1) == pytest.approx(math.pi - 0.1)
    assert fold_angle(3 * math.pi + 0.2) == pytest.approx(0.2)


def test_box_validation():
    with pytest.raises(DomainError):
        OrientedBox((0.5, 0.5), 0.1, 0.2, 0.0)
    with pytest.raises(DomainError):
        OrientedBox((0.5, 0.5), 0.2, 0.1, math.pi)
    with pytest.raises(DomainError):
        OrientedBox((0.5, 0.5), 0.2, 0.1, 0.0, (0.5, 0.6))


def test_iou_examples():
    a = OrientedBox((0.5, 0.5), 1.0, 1.0, 0.0)
    assert oriented_iou(a, a) == 1.0
    assert oriented_iou(a, a.moved((3.0, 3.0))) == 0.0
    assert abs(oriented_iou(a, a.moved((1.0, 0.5))) - 1 / 3) <= 1e-12


def test_iou_symmetric_and_bounded():
    rng = np.random.default_rng(1)
    for _ in range(100):
        a, b = random_box(rng), random_box(rng)
        v = oriented_iou(a, b)
        assert 0 <= v <= 1
        assert v == pytest.approx(oriented_iou(b, a), abs=1e-12)


def test_iou_rigid_invariance():
    rng = np.random.default_rng(2)
    for _ in range(50):
        a, b = random_box(rng), random_box(rng)
        theta, t = rng.uniform(0, 2 * math.pi), rng.uniform(-1, 1, 2)
        c, s = math.cos(theta), math.sin(theta)
        r = np.array([[c, -s], [s, c]])

        def move(box):
            center = r @ np.array(box.center) + t
            return OrientedBox(tuple(center), box.long, box.short, fold_angle(box.heading + theta))

        assert oriented_iou(move(a), move(b)) == pytest.approx(oriented_iou(a, b), abs=1e-9)


def test_iou_monte_carlo():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a = random_box(rng)
        b = a.moved((a.center[0] + rng.normal(0, 0.05), a.center[1] + rng.normal(0, 0.05)))
        assert oriented_iou(a, b) == pytest.approx(monte_carlo_iou(a, b, 200_000, rng), abs=1e-2)


def test_iou_matrix_matches_pairwise():
    rng = np.random.default_rng(4)
    est = [random_box(rng) for _ in range(3)]
    tgt = [random_box(rng) for _ in range(4)]
    ref = [[oriented_iou(e, t) for t in tgt] for e in est]
    assert iou_matrix(est, tgt) == pytest.approx(np.array(ref), abs=1e-12)


def test_rasterize_examples():
    assert DEFAULT_GRID == (196, 200)
    assert not rasterize_instances([]).any()
    box = OrientedBox.one_hot((0.5, 0.5), 0.2, 0.1, 0.0, 2)
    grid = rasterize_instances([box], 50, 50)
    mask = box_mask(box, 50, 50)
    assert grid.shape == (50, 50, 7)
    assert np.all(grid[mask].sum(axis=-1) == 1) and np.all(grid[mask][:, 2] == 1)
    assert not grid[~mask].any()


def test_rasterize_clips_overlap():
    probs = (0.6, 0.4, 0.0)
    a = OrientedBox((0.4, 0.5), 0.3, 0.2, 0.0, probs)
    b = OrientedBox((0.6, 0.5), 0.3, 0.2, 0.0, probs)
    grid = rasterize_instances([a, b], 40, 40)
    both = box_mask(a, 40, 40) & box_mask(b, 40, 40)
    assert both.any()
    assert np.all(grid[both][:, 0] == 1.0)
    assert grid[both][:, 1] == pytest.approx(0.8)
    only_a = box_mask(a, 40, 40) & ~both
    assert np.all(grid[only_a][:, 0] == 0.6)


def test_rasterize_row_is_depth():
    box = OrientedBox.one_hot((0.5, 0.1), 0.1, 0.05, 0.0, 0)
    rows = np.nonzero(box_mask(box, 100, 100).any(axis=1))[0]
    assert rows.max() < 20


def test_rasterize_count_within_perimeter_band():
    rng = np.random.default_rng(5)
    h, w = DEFAULT_GRID
    for _ in range(30):
        b = random_box(rng)
        count = box_mask(b, h, w).sum()
        cell = (1 / h) * (1 / w)
        # one cell diagonal of slack along the perimeter
        band = 2 * (b.long + b.short) * math.hypot(1 / h, 1 / w) / cell
        assert abs(count - b.area / cell) <= band


def test_rasterize_requires_distributions():
    with pytest.raises(DomainError):
        rasterize_instances([OrientedBox((0.5, 0.5), 0.2, 0.1, 0.0)], 10, 10, n_channels=7)


def test_grid_argmax():
    grid = np.zeros((2, 2, 3))
    grid[0, 0] = [0.2, 0.7, 0.1]
    grid[0, 1] = [1, 0, 0]
    grid[1, 0] = [0.5, 0.5, 0]
    labels = grid_argmax(grid)
    assert labels.tolist() == [[1, 0], [0, 2]]
    assert np.all(grid_argmax(np.zeros((3, 3, 4))) == 3)
