"""Scene records and their JSON documents.

A scene document holds a list of scenes; every coordinate is normalized
BEV. Centerlines are stored as control-point lists and connectivity as a
sparse edge list. An edge may carry a third element, its association
probability, which is thresholded on load.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import jsonschema

from ..bev import CameraModel, RoiSpec
from ..errors import FormatError
from ..lane_graph import Diagnostic, LaneGraph, connected_pairs, validate
from ..objects import OrientedBox

SCENES_FORMAT = "bevgraph-scenes"
REPORT_FORMAT = "bevgraph-report"
FORMAT_VERSION = 1


@dataclass(frozen=True, eq=True)
class SceneRecord:
    scene_id: str
    camera: CameraModel
    roi: RoiSpec
    graph: LaneGraph
    objects: tuple[OrientedBox, ...] = ()
    traffic_side: str = "right"
    diagnostics: tuple[Diagnostic, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.traffic_side not in ("left", "right"):
            raise FormatError(f"traffic side must be 'left' or 'right', got {self.traffic_side!r}")
        object.__setattr__(self, "objects", tuple(self.objects))

    def replace(self, **changes) -> "SceneRecord":
        data = {k: getattr(self, k) for k in self.__dataclass_fields__}
        data.update(changes)
        return SceneRecord(**data)


def check_scene(scene: SceneRecord, ground_truth: bool = True) -> list[Diagnostic]:
    out = [d for d in validate(scene.graph, ground_truth=ground_truth) if d.severity == "error"]
    for k, box in enumerate(scene.objects):
        if not (0.0 <= box.center[0] <= 1.0 and 0.0 <= box.center[1] <= 1.0):
            out.append(Diagnostic("object", f"object {k} center {box.center} outside the unit square"))
    return out


# --------------------------------------------------------------------------
# schemas


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("bevgraph").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def check_document(doc: Any, schema: str) -> None:
    try:
        jsonschema.validate(doc, load_schema(schema))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise FormatError(f"{schema} document invalid at {where}: {exc.message}") from None


# --------------------------------------------------------------------------
# scenes <-> dicts


def box_to_dict(box: OrientedBox) -> dict:
    out = {"center": list(box.center), "long": box.long, "short": box.short, "heading": box.heading}
    if box.probs is not None:
        out["probs"] = list(box.probs)
    return out


def box_from_dict(d: dict) -> OrientedBox:
    probs = d.get("probs")
    return OrientedBox(tuple(d["center"]), d["long"], d["short"], d["heading"], None if probs is None else tuple(probs))


def scene_to_dict(scene: SceneRecord) -> dict:
    g = scene.graph
    lines = []
    for k, curve in enumerate(g.centerlines):
        item: dict[str, Any] = {"control_points": curve.tolist()}
        if g.probs is not None:
            item["prob"] = g.probs[k]
        lines.append(item)
    return {
        "id": scene.scene_id,
        "traffic_side": scene.traffic_side,
        "camera": asdict(scene.camera),
        "roi": asdict(scene.roi),
        "centerlines": lines,
        "edges": [list(p) for p in connected_pairs(g)],
        "objects": [box_to_dict(b) for b in scene.objects],
    }


def scene_from_dict(d: dict, assoc_threshold: float = 0.5) -> SceneRecord:
    lines = d["centerlines"]
    curves = [item["control_points"] for item in lines]
    has_prob = [("prob" in item) for item in lines]
    if any(has_prob) and not all(has_prob):
        raise FormatError(f"scene {d['id']}: either every centerline carries 'prob' or none does")
    probs = [item["prob"] for item in lines] if lines and all(has_prob) else None
    edges = [(e[0], e[1]) for e in d["edges"] if len(e) < 3 or e[2] >= assoc_threshold]
    graph = LaneGraph.from_edges(curves, edges, probs)
    return SceneRecord(
        scene_id=d["id"],
        camera=CameraModel(**d["camera"]),
        roi=RoiSpec(**d["roi"]),
        graph=graph,
        objects=tuple(box_from_dict(b) for b in d["objects"]),
        traffic_side=d.get("traffic_side", "right"),
    )


def scenes_document(scenes: Sequence[SceneRecord]) -> dict:
    return {
        "format": SCENES_FORMAT,
        "version": FORMAT_VERSION,
        "scenes": [scene_to_dict(s) for s in scenes],
    }


def dump_json(doc: Any, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from None


def save_scenes(scenes: Sequence[SceneRecord], path: str | Path) -> None:
    dump_json(scenes_document(scenes), path)


def parse_scenes(doc: Any, assoc_threshold: float = 0.5) -> list[SceneRecord]:
    check_document(doc, "scenes")
    if doc["version"] != FORMAT_VERSION:
        raise FormatError(f"unsupported scenes format version {doc['version']}")
    try:
        return [scene_from_dict(s, assoc_threshold) for s in doc["scenes"]]
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def load_scenes(path: str | Path, assoc_threshold: float = 0.5) -> list[SceneRecord]:
    return parse_scenes(read_json(path), assoc_threshold)
