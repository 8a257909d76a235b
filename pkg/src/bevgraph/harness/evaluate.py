"""Dataset-level evaluation: per-scene metric counts reduced into a report."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from ..assignment import match_min_l1
from ..curve import DEFAULT_SAMPLES
from ..errors import DomainError, FormatError
from ..metrics import (
    IOU_THRESHOLDS,
    LANE_THRESHOLDS,
    ConnectivityCount,
    DetectionCount,
    PRCurve,
    PRPoint,
    confusion_counts,
    connectivity_counts,
    detection_count,
    iou_from_counts,
    lane_pr_curve,
    object_pr,
)
from ..objects import CLASS_NAMES, grid_argmax, rasterize_instances
from .records import FORMAT_VERSION, REPORT_FORMAT, SceneRecord, check_document

WORKERS_ENV = "BEVGRAPH_WORKERS"


@dataclass(frozen=True)
class EvalConfig:
    samples: int = DEFAULT_SAMPLES
    det_threshold: float = 0.5
    lane_thresholds: tuple[float, ...] = LANE_THRESHOLDS
    iou_thresholds: tuple[float, ...] = IOU_THRESHOLDS
    with_miou: bool = True
    aggregation: str = "counts"  # or "scene_mean"
    per_scene: bool = False
    workers: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.samples < 2:
            raise DomainError("need at least 2 samples per curve")
        if self.aggregation not in ("counts", "scene_mean"):
            raise DomainError(f"unknown aggregation {self.aggregation!r}")
        object.__setattr__(self, "lane_thresholds", tuple(float(t) for t in self.lane_thresholds))
        object.__setattr__(self, "iou_thresholds", tuple(float(t) for t in self.iou_thresholds))

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("workers")
        d["lane_thresholds"] = list(self.lane_thresholds)
        d["iou_thresholds"] = list(self.iou_thresholds)
        return d


@dataclass(frozen=True)
class SceneMetrics:
    scene_id: str
    lane: PRCurve
    detection: DetectionCount
    connectivity: ConnectivityCount
    objects: PRCurve
    miou_counts: tuple[tuple[int, ...], tuple[int, ...]] | None = None

    def __add__(self, other: "SceneMetrics") -> "SceneMetrics":
        if (self.miou_counts is None) != (other.miou_counts is None):
            raise DomainError("cannot combine scenes with and without mIOU counts")
        counts = None
        if self.miou_counts is not None:
            counts = tuple(
                tuple(int(a + b) for a, b in zip(x, y, strict=True))
                for x, y in zip(self.miou_counts, other.miou_counts)
            )
        return SceneMetrics(
            "*",
            self.lane + other.lane,
            self.detection + other.detection,
            self.connectivity + other.connectivity,
            self.objects + other.objects,
            counts,
        )

    def summary(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "m_pre": self.lane.m_pre,
            "m_rec": self.lane.m_rec,
            "precision": self.lane.precisions,
            "recall": self.lane.recalls,
            "detection_ratio": self.detection.ratio,
            "conn_precision": self.connectivity.precision,
            "conn_recall": self.connectivity.recall,
            "conn_iou": self.connectivity.iou,
            "obj_precision": self.objects.precisions,
            "obj_recall": self.objects.recalls,
        }
        if self.miou_counts is not None:
            per_class, mean = iou_from_counts(*(np.array(c) for c in self.miou_counts))
            out["miou_per_class"] = [_nan_to_none(v) for v in per_class]
            out["miou"] = _nan_to_none(mean)
        return out


def _nan_to_none(v: float) -> float | None:
    return None if math.isnan(v) else float(v)


@dataclass(frozen=True)
class MetricReport:
    config: EvalConfig
    total: SceneMetrics
    summary: dict[str, Any]
    vacuous: dict[str, int]
    n_scenes: int
    scenes: tuple[SceneMetrics, ...] = ()


# --------------------------------------------------------------------------
# per-scene evaluation


def active_lines(pred: SceneRecord, det_threshold: float):
    g = pred.graph
    if g.probs is None:
        return g
    return g.subset([k for k, p in enumerate(g.probs) if p >= det_threshold])


def _label_grid(scene: SceneRecord, boxes, n_channels: int) -> np.ndarray:
    h, w = scene.roi.grid_shape
    return grid_argmax(rasterize_instances(boxes, h, w, n_channels))


def evaluate_scene(gt: SceneRecord, pred: SceneRecord, config: EvalConfig = EvalConfig()) -> SceneMetrics:
    est = active_lines(pred, config.det_threshold)
    tgt = gt.graph
    match = match_min_l1(est.centerlines, tgt.centerlines)
    lane = lane_pr_curve(est, tgt, config.samples, match, config.lane_thresholds)
    det = detection_count(match, len(tgt))
    conn = connectivity_counts(est.incidence, tgt.incidence, match)
    objs = object_pr(pred.objects, gt.objects, config.iou_thresholds)
    counts = None
    if config.with_miou:
        boxes = list(gt.objects) + list(pred.objects)
        n_channels = len(boxes[0].probs) if boxes else len(CLASS_NAMES) + 1
        inter, union = confusion_counts(
            _label_grid(pred, pred.objects, n_channels), _label_grid(gt, gt.objects, n_channels), n_channels
        )
        counts = (tuple(int(v) for v in inter), tuple(int(v) for v in union))
    return SceneMetrics(gt.scene_id, lane, det, conn, objs, counts)


def _evaluate_pair(args):
    return evaluate_scene(*args)


def _align(gt_set: Sequence[SceneRecord], pred_set: Sequence[SceneRecord]):
    gt_ids = [s.scene_id for s in gt_set]
    pred_ids = [s.scene_id for s in pred_set]
    for name, ids in (("ground truth", gt_ids), ("prediction", pred_ids)):
        if len(set(ids)) != len(ids):
            raise DomainError(f"duplicate scene ids in {name} set")
    missing = sorted(set(gt_ids) - set(pred_ids))
    extra = sorted(set(pred_ids) - set(gt_ids))
    if missing or extra:
        raise DomainError(f"scene ids do not align; missing predictions: {missing}, unknown predictions: {extra}")
    preds = {s.scene_id: s for s in pred_set}
    return [(g, preds[g.scene_id]) for g in sorted(gt_set, key=lambda s: s.scene_id)]


def _worker_count(config: EvalConfig) -> int:
    if config.workers is not None:
        return max(1, config.workers)
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _empty_metrics(config: EvalConfig) -> SceneMetrics:
    n = len(CLASS_NAMES) + 1
    return SceneMetrics(
        "*",
        PRCurve(tuple(PRPoint(t, 0, 0, 0, 0) for t in config.lane_thresholds)),
        DetectionCount(0, 0),
        ConnectivityCount(0, 0, 0, 0),
        PRCurve(tuple(PRPoint(t, 0, 0, 0, 0) for t in config.iou_thresholds)),
        ((0,) * n, (0,) * n) if config.with_miou else None,
    )


def _mean_summary(summaries: list[dict]) -> dict:
    out = {}
    for key in summaries[0]:
        values = [s[key] for s in summaries]
        if isinstance(values[0], list):
            arr = np.array([[np.nan if v is None else v for v in row] for row in values], dtype=float)
            with np.errstate(all="ignore"):
                col = [np.nan if np.all(np.isnan(c)) else float(np.nanmean(c)) for c in arr.T]
            out[key] = [_nan_to_none(v) for v in col]
        else:
            vals = [v for v in values if v is not None]
            out[key] = float(np.mean(vals)) if vals else None
    return out


def evaluate(
    gt_set: Sequence[SceneRecord], pred_set: Sequence[SceneRecord], config: EvalConfig = EvalConfig()
) -> MetricReport:
    pairs = _align(gt_set, pred_set)
    jobs = [(g, p, config) for g, p in pairs]
    workers = _worker_count(config)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_scene = list(pool.map(_evaluate_pair, jobs))
    else:
        per_scene = [_evaluate_pair(j) for j in jobs]

    total = _empty_metrics(config)
    for sm in per_scene:
        total = total + sm
    if config.aggregation == "counts" or not per_scene:
        summary = total.summary()
    else:
        summary = _mean_summary([sm.summary() for sm in per_scene])
    vacuous = {
        "lane": sum(sm.lane.vacuous for sm in per_scene),
        "connectivity": sum(sm.connectivity.vacuous for sm in per_scene),
        "objects": sum(sm.objects.vacuous for sm in per_scene),
    }
    return MetricReport(
        config,
        total,
        summary,
        vacuous,
        len(per_scene),
        tuple(per_scene) if config.per_scene else (),
    )


# --------------------------------------------------------------------------
# report <-> dict


def _curve_to_dict(curve: PRCurve) -> dict:
    pts = curve.points
    return {
        "thresholds": [p.threshold for p in pts],
        "tp": [p.tp for p in pts],
        "fp": [p.fp for p in pts],
        "fn": [p.fn for p in pts],
        "tp_gt": [p.tp_gt for p in pts],
        "precision": curve.precisions,
        "recall": curve.recalls,
        "vacuous": curve.vacuous,
    }


def _curve_from_dict(d: dict) -> PRCurve:
    return PRCurve(
        tuple(
            PRPoint(t, tp, fp, fn, tg)
            for t, tp, fp, fn, tg in zip(d["thresholds"], d["tp"], d["fp"], d["fn"], d["tp_gt"], strict=True)
        )
    )


def metrics_to_dict(sm: SceneMetrics) -> dict:
    c = sm.connectivity
    out = {
        "id": sm.scene_id,
        "lane": {**_curve_to_dict(sm.lane), "m_pre": sm.lane.m_pre, "m_rec": sm.lane.m_rec},
        "detection": {"matched": sm.detection.matched, "total": sm.detection.total, "ratio": sm.detection.ratio},
        "connectivity": {
            "tp": c.tp,
            "fp": c.fp,
            "fn": c.fn,
            "n_gt_edges": c.n_gt_edges,
            "precision": c.precision,
            "recall": c.recall,
            "iou": c.iou,
            "vacuous": c.vacuous,
        },
        "objects": _curve_to_dict(sm.objects),
        "miou": None,
    }
    if sm.miou_counts is not None:
        summ = sm.summary()
        out["miou"] = {
            "intersection": list(sm.miou_counts[0]),
            "union": list(sm.miou_counts[1]),
            "per_class": summ["miou_per_class"],
            "mean": summ["miou"],
        }
    return out


def metrics_from_dict(d: dict) -> SceneMetrics:
    c = d["connectivity"]
    counts = None
    if d["miou"] is not None:
        counts = (tuple(d["miou"]["intersection"]), tuple(d["miou"]["union"]))
    return SceneMetrics(
        d["id"],
        _curve_from_dict(d["lane"]),
        DetectionCount(d["detection"]["matched"], d["detection"]["total"]),
        ConnectivityCount(c["tp"], c["fp"], c["fn"], c["n_gt_edges"]),
        _curve_from_dict(d["objects"]),
        counts,
    )


def report_to_dict(report: MetricReport) -> dict:
    return {
        "format": REPORT_FORMAT,
        "version": FORMAT_VERSION,
        "config": report.config.to_dict(),
        "n_scenes": report.n_scenes,
        "summary": report.summary,
        "vacuous": report.vacuous,
        "total": metrics_to_dict(report.total),
        "scenes": [metrics_to_dict(s) for s in report.scenes],
    }


def report_from_dict(doc: dict) -> MetricReport:
    check_document(doc, "report")
    if doc["version"] != FORMAT_VERSION:
        raise FormatError(f"unsupported report version {doc['version']}")
    cfg = dict(doc["config"])
    cfg["lane_thresholds"] = tuple(cfg["lane_thresholds"])
    cfg["iou_thresholds"] = tuple(cfg["iou_thresholds"])
    return MetricReport(
        EvalConfig(**cfg),
        metrics_from_dict(doc["total"]),
        doc["summary"],
        doc["vacuous"],
        doc["n_scenes"],
        tuple(metrics_from_dict(s) for s in doc["scenes"]),
    )
