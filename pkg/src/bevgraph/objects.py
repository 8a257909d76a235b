"""Oriented BEV object boxes and their rasterization to semantic grids."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from shapely.geometry import Polygon

from .errors import DomainError

# 49 m x 50 m at 25 cm
DEFAULT_GRID = (196, 200)
CLASS_NAMES = ("car", "truck", "bus", "pedestrian", "bike", "motorcycle")
RECT_TOL = 1e-3


class NonRectangularWarning(UserWarning):
    pass


def fold_angle(alpha: float) -> float:
    a = math.fmod(alpha, math.pi)
    if a < 0:
        a += math.pi
    return 0.0 if a >= math.pi else a


@dataclass(frozen=True)
class OrientedBox:
    """Box center (x, z), long and short side, heading of the long side.

    ``probs`` is a distribution over C + 1 classes whose last entry is the
    "no detection" class. Geometry-only boxes carry ``probs=None``.
    """

    center: tuple[float, float]
    long: float
    short: float
    heading: float
    probs: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if not (self.long >= self.short > 0):
            raise DomainError(f"need long >= short > 0, got {self.long}, {self.short}")
        if not 0.0 <= self.heading < math.pi:
            raise DomainError(f"heading must lie in [0, pi), got {self.heading}")
        if self.probs is not None:
            probs = tuple(float(p) for p in self.probs)
            if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-6:
                raise DomainError("class distribution must be non-negative and sum to 1")
            object.__setattr__(self, "probs", probs)

    @property
    def area(self) -> float:
        return self.long * self.short

    @property
    def label(self) -> int | None:
        """Argmax class; equals ``len(probs) - 1`` for "no detection"."""
        if self.probs is None:
            return None
        return int(np.argmax(self.probs))

    @classmethod
    def one_hot(cls, center, long, short, heading, label: int, n_classes: int = len(CLASS_NAMES)):
        probs = [0.0] * (n_classes + 1)
        probs[label] = 1.0
        return cls(center, long, short, fold_angle(heading), tuple(probs))

    def moved(self, center) -> "OrientedBox":
        return OrientedBox(center, self.long, self.short, self.heading, self.probs)


def _axes(box: OrientedBox) -> tuple[np.ndarray, np.ndarray]:
    c, s = math.cos(box.heading), math.sin(box.heading)
    return np.array([c, s]), np.array([-s, c])


def box_to_corners(box: OrientedBox) -> np.ndarray:
    """Four counter-clockwise corners, starting behind-right of the heading."""
    u, v = _axes(box)
    c = np.array(box.center)
    hl, hs = box.long / 2, box.short / 2
    return np.array([c - hl * u - hs * v, c + hl * u - hs * v, c + hl * u + hs * v, c - hl * u + hs * v])


def corners_to_box(corners, probs=None) -> OrientedBox:
    pts = np.asarray(corners, dtype=float)
    if pts.shape != (4, 2):
        raise DomainError(f"expected 4 corners, got shape {pts.shape}")
    e0 = pts[1] - pts[0]
    e1 = pts[2] - pts[1]
    l0, l1 = float(np.linalg.norm(e0)), float(np.linalg.norm(e1))
    if l0 * l1 <= 1e-15 or abs(float(e0[0] * e1[1] - e0[1] * e1[0])) <= 1e-15:
        raise DomainError("corners span zero area")
    skew = abs(float(e0 @ e1)) / (l0 * l1)
    opposite = max(
        float(np.linalg.norm(pts[2] - pts[3] - e0)), float(np.linalg.norm(pts[3] - pts[0] - e1))
    )
    if skew > RECT_TOL or opposite > RECT_TOL * max(l0, l1):
        warnings.warn(f"corners are not a rectangle (skew {skew:.2g})", NonRectangularWarning)
    if l0 >= l1:
        long, short, axis = l0, l1, e0
    else:
        long, short, axis = l1, l0, e1
    alpha = fold_angle(math.atan2(axis[1], axis[0]))
    if math.isclose(long, short, rel_tol=1e-12):
        # a square's heading is only defined modulo pi / 2
        alpha = math.fmod(alpha, math.pi / 2)
    center = pts.mean(axis=0)
    return OrientedBox((center[0], center[1]), long, short, alpha, probs)


def _polygon(box: OrientedBox) -> Polygon:
    return Polygon(box_to_corners(box))


def oriented_iou(a: OrientedBox, b: OrientedBox) -> float:
    inter = _polygon(a).intersection(_polygon(b)).area
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return float(min(max(inter / union, 0.0), 1.0))


def iou_matrix(estimates: Sequence[OrientedBox], targets: Sequence[OrientedBox]) -> np.ndarray:
    out = np.zeros((len(estimates), len(targets)))
    polys_t = [_polygon(t) for t in targets]
    for i, e in enumerate(estimates):
        pe = _polygon(e)
        for j, (t, pt) in enumerate(zip(targets, polys_t)):
            inter = pe.intersection(pt).area
            out[i, j] = inter / (e.area + t.area - inter)
    return np.clip(out, 0.0, 1.0)


def cell_centers(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Normalized (x, z) of every grid cell center; row h covers z in [h/H, (h+1)/H)."""
    zs = (np.arange(height) + 0.5) / height
    xs = (np.arange(width) + 0.5) / width
    return np.meshgrid(xs, zs)


def box_mask(box: OrientedBox, height: int, width: int) -> np.ndarray:
    gx, gz = cell_centers(height, width)
    u, v = _axes(box)
    dx, dz = gx - box.center[0], gz - box.center[1]
    along = dx * u[0] + dz * u[1]
    across = dx * v[0] + dz * v[1]
    return (np.abs(along) <= box.long / 2) & (np.abs(across) <= box.short / 2)


def rasterize_instances(
    boxes: Sequence[OrientedBox],
    height: int = DEFAULT_GRID[0],
    width: int = DEFAULT_GRID[1],
    n_channels: int | None = None,
) -> np.ndarray:
    """Sum per-box class distributions over covered cells, then clip to [0, 1]."""
    if n_channels is None:
        n_channels = len(boxes[0].probs) if boxes else len(CLASS_NAMES) + 1
    grid = np.zeros((height, width, n_channels))
    for box in boxes:
        if box.probs is None or len(box.probs) != n_channels:
            raise DomainError(f"every box needs a {n_channels}-way class distribution")
        grid[box_mask(box, height, width)] += np.asarray(box.probs)
    return np.clip(grid, 0.0, 1.0)


def grid_argmax(grid: np.ndarray) -> np.ndarray:
    """Per-cell class label; empty cells map to background (the last channel)."""
    labels = np.argmax(grid, axis=-1)
    labels[~np.any(grid > 0, axis=-1)] = grid.shape[-1] - 1
    return labels
