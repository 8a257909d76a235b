"""Flat-ground camera geometry and BEV region-of-interest handling.

Conventions: image pixels are (row m, column n); ground points are (x, z)
in meters with x to the right and z forward; normalized BEV points are
(x, z) rescaled to [0, 1] over the ROI.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .curve import BezierCurve, DEFAULT_DEGREE, elevate, fit_bezier, sample_curve
from .errors import DomainError, HorizonError, OutOfRoiError, WarpSingularityError
from .lane_graph import Diagnostic, LaneGraph
from .objects import OrientedBox

PE_VERSION = 1
PE_TEMPERATURE = 10000.0
# BEV half of the encoding is zeroed this many feature rows below the horizon
HORIZON_GUARD_ROWS = 2
ROI_EPS = 1e-9


@dataclass(frozen=True)
class CameraModel:
    focal: float
    cx: float
    cy: float
    cam_height: float
    image_width: int = 800
    image_height: int = 448

    def __post_init__(self):
        if self.focal <= 0:
            raise DomainError("focal length must be positive")
        if self.cam_height <= 0:
            raise DomainError("camera height must be positive")
        if not (0 <= self.cx <= self.image_width and 0 <= self.cy <= self.image_height):
            raise DomainError("principal point must lie inside the image")

    @classmethod
    def default(cls) -> "CameraModel":
        # roughly a front driving camera downscaled to 800 x 448
        return cls(focal=633.0, cx=400.0, cy=224.0, cam_height=1.5)


@dataclass(frozen=True)
class RoiSpec:
    x_min: float = -25.0
    x_max: float = 25.0
    z_min: float = 1.0
    z_max: float = 50.0
    resolution: float = 0.25

    def __post_init__(self):
        if self.x_max <= self.x_min or self.z_max <= self.z_min:
            raise DomainError("ROI extents must be positive")
        if self.resolution <= 0:
            raise DomainError("resolution must be positive")
        for extent in (self.x_extent, self.z_extent):
            cells = extent / self.resolution
            if abs(cells - round(cells)) > 1e-9:
                raise DomainError(f"extent {extent} is not a whole number of {self.resolution} m cells")

    @property
    def x_extent(self) -> float:
        return self.x_max - self.x_min

    @property
    def z_extent(self) -> float:
        return self.z_max - self.z_min

    @property
    def grid_shape(self) -> tuple[int, int]:
        """(rows along z, columns along x)."""
        return round(self.z_extent / self.resolution), round(self.x_extent / self.resolution)

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return (
            (p[..., 0] >= self.x_min - ROI_EPS)
            & (p[..., 0] <= self.x_max + ROI_EPS)
            & (p[..., 1] >= self.z_min - ROI_EPS)
            & (p[..., 1] <= self.z_max + ROI_EPS)
        )


# --------------------------------------------------------------------------
# pinhole flat-ground projection


def pixel_to_ground(pixel, cam: CameraModel) -> np.ndarray:
    """Ground point (x, z) seen at pixel (m, n), assuming a flat road."""
    px = np.asarray(pixel, dtype=float)
    m, n = px[..., 0], px[..., 1]
    if np.any(m <= cam.cy):
        raise HorizonError("pixel lies at or above the horizon row")
    z = cam.focal * cam.cam_height / (m - cam.cy)
    x = (n - cam.cx) * z / cam.focal
    return np.stack([x, z], axis=-1)


def ground_to_pixel(point, cam: CameraModel) -> np.ndarray:
    p = np.asarray(point, dtype=float)
    x, z = p[..., 0], p[..., 1]
    if np.any(z <= 0):
        raise HorizonError("ground point must lie in front of the camera")
    m = cam.cy + cam.focal * cam.cam_height / z
    n = cam.cx + cam.focal * x / z
    return np.stack([m, n], axis=-1)


# --------------------------------------------------------------------------
# ROI normalization, clipping and resampling


def bev_normalize(point, roi: RoiSpec = RoiSpec()) -> np.ndarray:
    p = np.asarray(point, dtype=float)
    if not np.all(roi.contains(p)):
        raise OutOfRoiError(f"point outside ROI: {p.tolist()}")
    out = np.stack(
        [(p[..., 0] - roi.x_min) / roi.x_extent, (p[..., 1] - roi.z_min) / roi.z_extent], axis=-1
    )
    return np.clip(out, 0.0, 1.0)


def bev_denormalize(point, roi: RoiSpec = RoiSpec()) -> np.ndarray:
    p = np.asarray(point, dtype=float)
    return np.stack([p[..., 0] * roi.x_extent + roi.x_min, p[..., 1] * roi.z_extent + roi.z_min], axis=-1)


def resample_polyline(points, spacing: float) -> np.ndarray:
    """Points every ``spacing`` meters of arc length, plus the final vertex."""
    pts = np.asarray(points, dtype=float)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    keep = np.concatenate([[True], seg > 0])
    pts, seg = pts[keep], seg[seg > 0]
    if len(pts) < 2:
        return pts[:1]
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    n_steps = math.floor(total / spacing + 1e-9)
    s = spacing * np.arange(n_steps + 1)
    if total - s[-1] > 1e-9:
        s = np.append(s, total)
    else:
        s[-1] = total
    return np.stack([np.interp(s, cum, pts[:, 0]), np.interp(s, cum, pts[:, 1])], axis=-1)


@dataclass(frozen=True)
class ClippedRun:
    """A maximal in-ROI run of a resampled polyline (normalized coordinates)."""

    points: np.ndarray
    has_start: bool  # contains the polyline's first point
    has_end: bool  # contains the polyline's last point


def clip_runs(points, roi: RoiSpec = RoiSpec()) -> list[ClippedRun]:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 2:
        raise DomainError("a polyline needs at least 2 points")
    dense = resample_polyline(pts, roi.resolution)
    inside = roi.contains(dense)
    runs = []
    k, n = 0, len(dense)
    while k < n:
        if not inside[k]:
            k += 1
            continue
        j = k
        while j + 1 < n and inside[j + 1]:
            j += 1
        if j > k:
            runs.append(ClippedRun(bev_normalize(dense[k : j + 1], roi), k == 0, j == n - 1))
        k = j + 1
    return runs


def clip_resample(points, roi: RoiSpec = RoiSpec()) -> list[np.ndarray]:
    """Resample at the ROI resolution, drop out-of-ROI points, normalize.

    Each maximal in-ROI run of two or more points becomes one segment.
    """
    return [run.points for run in clip_runs(points, roi)]


def fit_segment(points: np.ndarray, degree: int = DEFAULT_DEGREE) -> BezierCurve:
    """Endpoint-preserving fit used for labels so that shared points stay shared."""
    if len(points) <= degree:
        return elevate(BezierCurve([points[0], points[-1]]), degree)
    return fit_bezier(points, degree, pin_endpoints=True)


def assemble_graph(
    runs_per_line: Sequence[Sequence[ClippedRun]],
    pairs: Sequence[tuple[int, int]],
    degree: int = DEFAULT_DEGREE,
    curves_per_line: Sequence[Sequence[BezierCurve]] | None = None,
) -> tuple[LaneGraph, list[Diagnostic]]:
    """Fit every run and rebuild connectivity over the surviving pieces.

    A declared connection a -> b survives only if a's end point and b's
    start point both survived clipping. Pieces of one split line are not
    connected to each other.
    """
    curves: list[BezierCurve] = []
    first: list[int | None] = []
    last: list[int | None] = []
    diags: list[Diagnostic] = []
    for k, runs in enumerate(runs_per_line):
        idx = []
        for r, run in enumerate(runs):
            if curves_per_line is not None:
                curves.append(curves_per_line[k][r])
            else:
                curves.append(fit_segment(run.points, degree))
            idx.append(len(curves) - 1)
        first.append(idx[0] if runs and runs[0].has_start else None)
        last.append(idx[-1] if runs and runs[-1].has_end else None)
        if not runs:
            diags.append(Diagnostic("clipped", f"line {k} lies entirely outside the ROI", "info"))
        elif len(runs) > 1:
            diags.append(
                Diagnostic("split", f"line {k} split into {len(runs)} pieces; no edges across gaps", "info")
            )
    edges = []
    for a, b in pairs:
        if not (0 <= a < len(runs_per_line) and 0 <= b < len(runs_per_line)):
            raise DomainError(f"connection ({a}, {b}) refers to a missing line")
        if last[a] is None or first[b] is None:
            diags.append(Diagnostic("edge-dropped", f"connection ({a}, {b}) clipped away", "info"))
            continue
        if last[a] != first[b]:
            edges.append((last[a], first[b]))
    return LaneGraph.from_edges(curves, edges), diags


# --------------------------------------------------------------------------
# depth-motion augmentation


def _warp_denominator(m1, beta: float, cam: CameraModel):
    return cam.focal * cam.cam_height + beta * (m1 - cam.cy)


def depth_warp_source(pixel, beta: float, cam: CameraModel) -> np.ndarray:
    """Source pixel (m0, n0) for target pixel (m1, n1) after moving ``beta`` forward.

    The ego vehicle advances ``beta`` meters, so the road point seen at
    (m1, n1) was ``beta`` meters farther away, at the same x, in the
    original image.
    """
    px = np.asarray(pixel, dtype=float)
    m1, n1 = px[..., 0], px[..., 1]
    if np.any(m1 <= cam.cy):
        raise HorizonError("pixel lies at or above the horizon row")
    den = _warp_denominator(m1, beta, cam)
    if np.any(den <= 0):
        raise WarpSingularityError("source point would lie at or behind the camera")
    fc = cam.focal * cam.cam_height
    m0 = (m1 - cam.cy) * fc / den + cam.cy
    n0 = (n1 - cam.cx) * fc / den + cam.cx
    out = np.stack([m0, n0], axis=-1)
    # no motion must be an exact identity, not one up to rounding
    still = np.broadcast_to(np.asarray(beta) == 0, m1.shape)
    out[still] = px[still]
    return out


def translate_labels(
    graph: LaneGraph,
    boxes: Sequence[OrientedBox],
    beta: float,
    roi: RoiSpec = RoiSpec(),
    samples: int = 200,
) -> tuple[LaneGraph, list[OrientedBox]]:
    """Move labels ``beta`` meters toward the camera to match the warped image.

    Curves that stay inside the ROI are shifted exactly; the others are
    re-clipped and refitted. Boxes whose center leaves the ROI are dropped.
    """
    dz = beta / roi.z_extent
    shift = np.array([0.0, dz])
    runs_per_line: list[list[ClippedRun]] = []
    curves_per_line: list[list[BezierCurve]] = []
    for curve in graph.centerlines:
        moved = BezierCurve(curve.control_points - shift)
        if np.all((moved.control_points >= 0.0) & (moved.control_points <= 1.0)):
            # convex hull inside the unit square: the whole curve is
            pts = moved.control_points
            runs_per_line.append([ClippedRun(pts, True, True)])
            curves_per_line.append([moved])
            continue
        meters = bev_denormalize(sample_curve(curve, samples), roi)
        meters[:, 1] -= beta
        runs = clip_runs(meters, roi)
        runs_per_line.append(runs)
        curves_per_line.append([fit_segment(r.points, curve.degree) for r in runs])
    out_graph, _ = assemble_graph(
        runs_per_line, [tuple(p) for p in np.argwhere(graph.incidence)], curves_per_line=curves_per_line
    )
    out_boxes = []
    for box in boxes:
        z = box.center[1] - dz
        if 0.0 <= z <= 1.0:
            out_boxes.append(box.moved((box.center[0], z)))
    return out_graph, out_boxes


# --------------------------------------------------------------------------
# split positional encoding


def _sinusoid(pos: np.ndarray, dims: int) -> np.ndarray:
    """Interleaved sin/cos features of positions already scaled to [0, 2 pi]."""
    i = np.arange(dims)
    freq = PE_TEMPERATURE ** (2 * (i // 2) / max(dims, 1))
    arg = pos[..., None] / freq
    return np.where(i % 2 == 0, np.sin(arg), np.cos(arg))


def _two_axis_encoding(row_pos: np.ndarray, col_pos: np.ndarray, channels: int) -> np.ndarray:
    n_row = (channels + 1) // 2
    return np.concatenate(
        [_sinusoid(row_pos * 2 * math.pi, n_row), _sinusoid(col_pos * 2 * math.pi, channels - n_row)],
        axis=-1,
    )


def _normalize01(a: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    if not mask.any():
        return out
    lo, hi = a[mask].min(), a[mask].max()
    out[mask] = (a[mask] - lo) / (hi - lo) if hi > lo else 0.0
    return out


def feature_pixel_centers(feat_h: int, feat_w: int, cam: CameraModel) -> tuple[np.ndarray, np.ndarray]:
    """Image (row, column) of every feature-cell center."""
    rows = (np.arange(feat_h) + 0.5) * cam.image_height / feat_h
    cols = (np.arange(feat_w) + 0.5) * cam.image_width / feat_w
    return np.meshgrid(rows, cols, indexing="ij")


def split_positional_encoding(feat_h: int, feat_w: int, channels: int, cam: CameraModel) -> np.ndarray:
    """(feat_h, feat_w, channels) encoding: image position, then BEV position.

    The first half encodes normalized cumulative row/column indices. The
    second half encodes each cell's flat-ground point: signed log of x and
    log of z, cumulatively summed along columns and rows respectively,
    normalized to [0, 1] and passed through sinusoids. Rows at or above the
    horizon (plus a small guard band) have a zero BEV half.
    """
    if channels <= 0 or channels % 2:
        raise DomainError(f"channel count must be positive and even, got {channels}")
    half = channels // 2
    ones = np.ones((feat_h, feat_w))
    row_cum = np.cumsum(ones, axis=0)
    col_cum = np.cumsum(ones, axis=1)
    image_pe = _two_axis_encoding(row_cum / row_cum[-1:, :], col_cum / col_cum[:, -1:], half)

    rows, cols = feature_pixel_centers(feat_h, feat_w, cam)
    row_px_per_cell = cam.image_height / feat_h
    valid = rows > cam.cy + HORIZON_GUARD_ROWS * row_px_per_cell
    safe_rows = np.where(valid, rows, cam.cy + 1.0)
    ground = pixel_to_ground(np.stack([safe_rows, cols], axis=-1), cam)
    log_x = np.sign(ground[..., 0]) * np.log1p(np.abs(ground[..., 0]))
    log_z = np.log(ground[..., 1])
    log_x = np.where(valid, log_x, 0.0)
    log_z = np.where(valid, log_z, 0.0)
    z_pos = _normalize01(np.cumsum(log_z, axis=0), valid)
    x_pos = _normalize01(np.cumsum(log_x, axis=1), valid)
    bev_pe = _two_axis_encoding(z_pos, x_pos, channels - half)
    bev_pe[~valid] = 0.0
    return np.concatenate([image_pe, bev_pe], axis=-1)
