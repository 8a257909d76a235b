"""Structured BEV lane graphs: Bezier centerlines, connectivity, objects and metrics."""
from .curve import BezierCurve, basis_matrix, eval_bezier, fit_bezier, sample_curve
from .lane_graph import LaneGraph, merge_junctions, validate
from .objects import OrientedBox, oriented_iou

__version__ = "0.1.0"

__all__ = [
    "BezierCurve",
    "LaneGraph",
    "OrientedBox",
    "basis_matrix",
    "eval_bezier",
    "fit_bezier",
    "merge_junctions",
    "oriented_iou",
    "sample_curve",
    "validate",
]
