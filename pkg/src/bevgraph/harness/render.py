"""Deterministic SVG rendering of a scene (and optionally a prediction).

Far is up: normalized z = 1 is the top edge of the frame. Each drawable is
one line of output so renders can be compared line by line.
"""
from __future__ import annotations

from pathlib import Path

from ..curve import BezierCurve, sample_curve
from ..lane_graph import LaneGraph, find_junctions
from ..objects import box_to_corners
from .records import SceneRecord

SIZE = 600
PAD = 20
GT_COLOR = "#1f77b4"
PRED_COLOR = "#ff7f0e"
START_COLOR = "#2ca02c"
END_COLOR = "#d62728"
JUNCTION_COLOR = "#e6c300"
BOX_COLORS = ("#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aaaaaa")


def _xy(p) -> tuple[float, float]:
    return PAD + float(p[0]) * SIZE, PAD + (1.0 - float(p[1])) * SIZE


def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _pt(p) -> str:
    x, y = _xy(p)
    return f"{_fmt(x)} {_fmt(y)}"


def _path_data(curve: BezierCurve) -> str:
    cp = curve.control_points
    if curve.degree == 1:
        return f"M {_pt(cp[0])} L {_pt(cp[1])}"
    if curve.degree == 2:
        return f"M {_pt(cp[0])} Q {_pt(cp[1])} {_pt(cp[2])}"
    if curve.degree == 3:
        return f"M {_pt(cp[0])} C {_pt(cp[1])} {_pt(cp[2])} {_pt(cp[3])}"
    pts = sample_curve(curve, 50)
    return "M " + " L ".join(_pt(p) for p in pts)


def _dot(p, color: str, r: float = 3.0) -> str:
    x, y = _xy(p)
    return f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r)}" fill="{color}"/>'


def _graph_lines(graph: LaneGraph, color: str, tag: str) -> list[str]:
    out = [f'<g class="{tag}">']
    for k, c in enumerate(graph.centerlines):
        out.append(
            f'<path class="{tag}-line" data-index="{k}" d="{_path_data(c)}" '
            f'fill="none" stroke="{color}" stroke-width="2"/>'
        )
    for c in graph.centerlines:
        out.append(_dot(c.start, START_COLOR))
        out.append(_dot(c.end, END_COLOR))
    for jn in find_junctions(graph):
        x, y = _xy(jn.location)
        out.append(
            f'<circle class="junction" cx="{_fmt(x)}" cy="{_fmt(y)}" r="5" '
            f'fill="none" stroke="{JUNCTION_COLOR}" stroke-width="2"/>'
        )
    out.append("</g>")
    return out


def _box_lines(scene: SceneRecord, tag: str, dashed: bool) -> list[str]:
    out = []
    for box in scene.objects:
        label = box.label if box.label is not None else len(BOX_COLORS) - 1
        color = BOX_COLORS[min(label, len(BOX_COLORS) - 1)]
        pts = " ".join(_pt(p).replace(" ", ",") for p in box_to_corners(box))
        dash = ' stroke-dasharray="4 2"' if dashed else ""
        out.append(f'<polygon class="{tag}-box" points="{pts}" fill="none" stroke="{color}"{dash}/>')
    return out


def svg_text(scene: SceneRecord, pred: SceneRecord | None = None) -> str:
    full = SIZE + 2 * PAD
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{full}" height="{full}" viewBox="0 0 {full} {full}">',
        f"<title>{scene.scene_id}</title>",
        f'<rect class="roi" x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="white" stroke="black"/>',
    ]
    lines += _box_lines(scene, "gt", dashed=False)
    lines += _graph_lines(scene.graph, GT_COLOR, "gt")
    if pred is not None:
        lines += _box_lines(pred, "pred", dashed=True)
        lines += _graph_lines(pred.graph, PRED_COLOR, "pred")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def render_svg(scene: SceneRecord, pred: SceneRecord | None, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(svg_text(scene, pred), encoding="utf-8")
    return path
