"""Seeded synthetic scenes: a ground-truth lane graph plus a corrupted prediction."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from ..bev import CameraModel, RoiSpec
from ..errors import DomainError
from ..lane_graph import LaneGraph
from ..objects import CLASS_NAMES, OrientedBox
from .records import SceneRecord

MARGIN = 0.02


@dataclass(frozen=True)
class SynthConfig:
    lanes: tuple[int, int] = (3, 8)
    junction_prob: float = 0.6
    merge_prob: float = 0.2
    straight: bool = False
    objects: tuple[int, int] = (0, 5)
    # prediction corruption
    noise: float = 0.0
    drop: float = 0.0
    fp_rate: float = 0.0
    flip_rate: float = 0.0
    offset: float = 0.0  # constant shift along each line's left normal
    box_noise: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lanes", tuple(self.lanes))
        object.__setattr__(self, "objects", tuple(self.objects))
        if not 1 <= self.lanes[0] <= self.lanes[1]:
            raise DomainError(f"bad lane count range {self.lanes}")
        if not 0 <= self.objects[0] <= self.objects[1]:
            raise DomainError(f"bad object count range {self.objects}")
        for name in ("junction_prob", "merge_prob", "drop", "fp_rate", "flip_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1]")
        if self.noise < 0 or self.box_noise < 0:
            raise DomainError("noise levels must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise DomainError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lanes"] = list(self.lanes)
        d["objects"] = list(self.objects)
        return d


def _inside(pts: np.ndarray) -> bool:
    return bool(np.all((pts >= MARGIN) & (pts <= 1 - MARGIN)))


def _lane(rng, start, heading, straight: bool, end=None) -> np.ndarray | None:
    """Quadratic control points leaving ``start`` (or arriving at ``end``)."""
    length = rng.uniform(0.12, 0.3)
    d = np.array([math.cos(heading), math.sin(heading)])
    if end is None:
        p0 = np.asarray(start, dtype=float)
        p2 = p0 + length * d
    else:
        p2 = np.asarray(end, dtype=float)
        p0 = p2 - length * d
    bend = 0.0 if straight else rng.uniform(-0.25, 0.25) * length
    p1 = 0.5 * (p0 + p2) + bend * np.array([-d[1], d[0]])
    pts = np.array([p0, p1, p2])
    if end is None:
        pts[0] = start  # keep the shared point bit-identical
    else:
        pts[2] = end
    return pts if _inside(pts) else None


def _root(rng, straight: bool) -> np.ndarray:
    for _ in range(200):
        start = np.array([rng.uniform(0.1, 0.9), rng.uniform(MARGIN, 0.5)])
        pts = _lane(rng, start, math.pi / 2 + rng.uniform(-0.7, 0.7), straight)
        if pts is not None:
            return pts
    raise RuntimeError("could not place a lane")  # unreachable for the ranges above


def _heading(pts: np.ndarray, at_end: bool) -> float:
    d = pts[2] - pts[1] if at_end else pts[1] - pts[0]
    return math.atan2(d[1], d[0])


def synth_graph(rng, n_lanes: int, cfg: SynthConfig) -> LaneGraph:
    lanes: list[np.ndarray] = []
    while len(lanes) < n_lanes:
        pts = None
        if lanes and rng.random() < cfg.junction_prob:
            k = int(rng.integers(len(lanes)))
            base = lanes[k]
            turn = rng.uniform(-0.6, 0.6)
            if rng.random() < cfg.merge_prob:
                # incoming lane that ends where lane k starts
                pts = _lane(rng, None, _heading(base, False) + turn, cfg.straight, end=base[0])
            else:
                pts = _lane(rng, base[2], _heading(base, True) + turn, cfg.straight)
        if pts is None:
            pts = _root(rng, cfg.straight)
        lanes.append(pts)
    n = len(lanes)
    inc = np.zeros((n, n), dtype=np.uint8)
    for i in range(n):
        for j in range(n):
            if i != j and np.array_equal(lanes[i][2], lanes[j][0]):
                inc[i, j] = 1
    # a lane may coincidentally close a 2-cycle; keep one direction only
    inc[np.tril(inc & inc.T, -1).astype(bool)] = 0
    return LaneGraph(lanes, inc)


def synth_boxes(rng, count: int, n_classes: int = len(CLASS_NAMES)) -> list[OrientedBox]:
    boxes = []
    for _ in range(count):
        long = rng.uniform(0.03, 0.1)
        short = long * rng.uniform(0.3, 0.9)
        center = rng.uniform(0.05, 0.95, size=2)
        boxes.append(
            OrientedBox.one_hot(tuple(center), long, short, rng.uniform(0, math.pi), int(rng.integers(n_classes)))
        )
    return boxes


def corrupt(rng, gt: LaneGraph, boxes, cfg: SynthConfig) -> tuple[LaneGraph, list[OrientedBox]]:
    n = len(gt)
    keep = [k for k in range(n) if not rng.random() < cfg.drop]
    curves = []
    for k in keep:
        pts = gt.centerlines[k].control_points.copy()
        if cfg.offset:
            d = pts[-1] - pts[0]
            d = d / np.linalg.norm(d)
            pts = pts + cfg.offset * np.array([-d[1], d[0]])
        if cfg.noise:
            pts = pts + rng.normal(0.0, cfg.noise, size=pts.shape)
        curves.append(pts)
    n_fp = int(rng.binomial(n, cfg.fp_rate)) if cfg.fp_rate else 0
    curves.extend(_root(rng, cfg.straight) for _ in range(n_fp))
    m = len(curves)
    inc = np.zeros((m, m), dtype=np.uint8)
    inc[: len(keep), : len(keep)] = gt.incidence[np.ix_(keep, keep)]
    if cfg.flip_rate:
        flips = rng.random((m, m)) < cfg.flip_rate
        np.fill_diagonal(flips, False)
        inc ^= flips.astype(np.uint8)
    pred = LaneGraph(curves, inc)

    out_boxes = []
    for b in boxes:
        if rng.random() < cfg.drop:
            continue
        if cfg.box_noise:
            c = np.clip(np.asarray(b.center) + rng.normal(0.0, cfg.box_noise, 2), 0.0, 1.0)
            b = b.moved((c[0], c[1]))
        out_boxes.append(b)
    n_box_fp = int(rng.binomial(len(boxes), cfg.fp_rate)) if cfg.fp_rate and boxes else 0
    out_boxes.extend(synth_boxes(rng, n_box_fp))
    return pred, out_boxes


def synth_scene(
    seed: int,
    config: SynthConfig = SynthConfig(),
    scene_id: str | None = None,
    cam: CameraModel | None = None,
    roi: RoiSpec = RoiSpec(),
) -> tuple[SceneRecord, SceneRecord]:
    """Deterministic (gt, pred) pair for ``seed``."""
    rng = np.random.default_rng(seed)
    cam = cam or CameraModel.default()
    scene_id = scene_id if scene_id is not None else f"synth-{seed:06d}"
    n_lanes = int(rng.integers(config.lanes[0], config.lanes[1] + 1))
    graph = synth_graph(rng, n_lanes, config)
    boxes = synth_boxes(rng, int(rng.integers(config.objects[0], config.objects[1] + 1)))
    side = "right" if rng.random() < 0.5 else "left"
    gt = SceneRecord(scene_id, cam, roi, graph, tuple(boxes), side)
    pred_graph, pred_boxes = corrupt(rng, graph, boxes, config)
    pred = SceneRecord(scene_id, cam, roi, pred_graph, tuple(pred_boxes), side)
    return gt, pred


def synth_dataset(seed: int, n_scenes: int, config: SynthConfig = SynthConfig()):
    """``n_scenes`` pairs; scene k uses the child seed (seed, k)."""
    gts, preds = [], []
    for k in range(n_scenes):
        child = int(np.random.SeedSequence([seed, k]).generate_state(1)[0])
        gt, pred = synth_scene(child, config, scene_id=f"s{seed}-{k:04d}")
        gts.append(gt)
        preds.append(pred)
    return gts, preds
