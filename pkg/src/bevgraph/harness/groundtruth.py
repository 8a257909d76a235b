"""Ground-truth construction from metric polylines and boxes."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..bev import CameraModel, RoiSpec, assemble_graph, bev_normalize, clip_runs
from ..curve import DEFAULT_DEGREE
from ..lane_graph import Diagnostic, validate
from ..objects import CLASS_NAMES, NonRectangularWarning, OrientedBox, corners_to_box
from .records import SceneRecord


@dataclass(frozen=True)
class RawBox:
    """Object box in camera-frame meters; ``label`` indexes CLASS_NAMES."""

    center: tuple[float, float]
    long: float
    short: float
    heading: float
    label: int


def _normalize_box(box: RawBox, roi: RoiSpec, n_classes: int) -> OrientedBox | None:
    if not roi.contains(np.asarray(box.center)):
        return None
    c, s = np.cos(box.heading), np.sin(box.heading)
    u, v = np.array([c, s]), np.array([-s, c])
    ctr = np.asarray(box.center, dtype=float)
    hl, hs = box.long / 2, box.short / 2
    corners = np.array([ctr - hl * u - hs * v, ctr + hl * u - hs * v, ctr + hl * u + hs * v, ctr - hl * u + hs * v])
    # corners may stick out of the ROI; normalize them without the range check
    norm = np.stack(
        [(corners[:, 0] - roi.x_min) / roi.x_extent, (corners[:, 1] - roi.z_min) / roi.z_extent], axis=-1
    )
    probs = [0.0] * (n_classes + 1)
    probs[box.label] = 1.0
    with warnings.catch_warnings():
        # unequal ROI extents shear rotated boxes slightly
        warnings.simplefilter("ignore", NonRectangularWarning)
        out = corners_to_box(norm, tuple(probs))
    center = bev_normalize(np.asarray(box.center), roi)
    return out.moved((center[0], center[1]))


def build_ground_truth(
    raw_centerlines: Sequence,
    connectivity: Sequence[tuple[int, int]],
    raw_boxes: Sequence[RawBox] = (),
    cam: CameraModel | None = None,
    roi: RoiSpec = RoiSpec(),
    scene_id: str = "scene",
    degree: int = DEFAULT_DEGREE,
    traffic_side: str = "right",
    n_classes: int = len(CLASS_NAMES),
) -> SceneRecord:
    """Clip, resample, normalize and fit labelled centerlines into a scene.

    Polylines are in camera-frame meters, (x, z) per point. A line split by
    the ROI yields one curve per in-ROI piece with no edges between pieces;
    declared connections whose shared point fell outside are dropped.
    """
    cam = cam or CameraModel.default()
    runs = [clip_runs(np.asarray(pl, dtype=float), roi) for pl in raw_centerlines]
    graph, diags = assemble_graph(runs, [tuple(p) for p in connectivity], degree)
    boxes = []
    for k, rb in enumerate(raw_boxes):
        box = _normalize_box(rb, roi, n_classes)
        if box is None:
            diags.append(Diagnostic("object-clipped", f"object {k} center outside the ROI", "info"))
        else:
            boxes.append(box)
    if len(graph) == 0 and raw_centerlines:
        diags.append(Diagnostic("empty", "no centerline intersects the ROI", "warning"))
    diags.extend(validate(graph, ground_truth=True))
    return SceneRecord(scene_id, cam, roi, graph, tuple(boxes), traffic_side, tuple(diags))
