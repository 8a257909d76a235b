"""Lane-graph metrics (precision/recall, detection ratio, connectivity),
object precision/recall and semantic-grid mIOU.

Every metric keeps raw counts so that scenes can be reduced by summation
before ratios are taken.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .assignment import MatchMap, hungarian, match_min_l1
from .curve import DEFAULT_SAMPLES, sample_curve
from .errors import DomainError
from .lane_graph import LaneGraph
from .objects import OrientedBox, iou_matrix

# 0.01 .. 0.10 in normalized units; 0.01 is 50 cm laterally
LANE_THRESHOLDS = tuple(round(0.01 * k, 2) for k in range(1, 11))
IOU_THRESHOLDS = tuple(round(0.1 * k, 1) for k in range(1, 10))


def ratio(num: float, den: float) -> float:
    """num / den with the 0/0 -> 1 convention."""
    return 1.0 if den == 0 else num / den


@dataclass(frozen=True)
class PRPoint:
    """Counts at one threshold.

    ``tp``/``fp`` count estimate-side points, ``tp_gt``/``fn`` target-side
    points (for objects both true-positive counts are the matched pairs).
    """

    threshold: float
    tp: int
    fp: int
    fn: int
    tp_gt: int

    @property
    def precision(self) -> float:
        return ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return ratio(self.tp_gt, self.tp_gt + self.fn)

    @property
    def vacuous(self) -> bool:
        return self.tp + self.fp == 0 or self.tp_gt + self.fn == 0

    def __add__(self, other: "PRPoint") -> "PRPoint":
        if self.threshold != other.threshold:
            raise DomainError("cannot add PR counts taken at different thresholds")
        return PRPoint(
            self.threshold,
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.tp_gt + other.tp_gt,
        )


@dataclass(frozen=True)
class PRCurve:
    points: tuple[PRPoint, ...]

    @property
    def precisions(self) -> list[float]:
        return [p.precision for p in self.points]

    @property
    def recalls(self) -> list[float]:
        return [p.recall for p in self.points]

    @property
    def m_pre(self) -> float:
        return float(np.mean(self.precisions))

    @property
    def m_rec(self) -> float:
        return float(np.mean(self.recalls))

    @property
    def vacuous(self) -> bool:
        return all(p.vacuous for p in self.points)

    def __add__(self, other: "PRCurve") -> "PRCurve":
        return PRCurve(tuple(a + b for a, b in zip(self.points, other.points, strict=True)))


def _min_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """For every point of ``a`` the distance to the nearest point of ``b``."""
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)).min(axis=1)


def _lane_distances(estimates: LaneGraph, targets: LaneGraph, match: MatchMap, samples: int):
    if len(match.targets) != len(estimates):
        raise DomainError("match map does not cover the estimates")
    est_pts = [sample_curve(c, samples) for c in estimates.centerlines]
    tgt_pts = [sample_curve(c, samples) for c in targets.centerlines]
    est_d = []  # per estimate point: distance to its matched GT line (inf if unmatched)
    for i, pts in enumerate(est_pts):
        m = match.targets[i]
        est_d.append(np.full(samples, np.inf) if m is None else _min_dists(pts, tgt_pts[m]))
    gt_d = []  # per GT point of a matched line: distance to the nearest matched estimate
    for n, members in enumerate(match.members):
        if members:
            cloud = np.concatenate([est_pts[i] for i in sorted(members)])
            gt_d.append(_min_dists(tgt_pts[n], cloud))
    est_d = np.concatenate(est_d) if est_d else np.zeros(0)
    gt_d = np.concatenate(gt_d) if gt_d else np.zeros(0)
    return est_d, gt_d


def _pr_from_distances(est_d, gt_d, threshold: float) -> PRPoint:
    tp = int((est_d <= threshold).sum())
    tp_gt = int((gt_d <= threshold).sum())
    return PRPoint(threshold, tp, int(est_d.size - tp), int(gt_d.size - tp_gt), tp_gt)


def lane_pr(
    estimates: LaneGraph,
    targets: LaneGraph,
    match: MatchMap,
    threshold: float,
    samples: int = DEFAULT_SAMPLES,
) -> PRPoint:
    """Point-level precision/recall of matched centerlines at one threshold.

    An estimate point is a true positive when it lies within ``threshold``
    of its matched GT line. A point of a matched GT line is a miss when no
    estimate matched to that line comes within ``threshold``. GT lines
    without any matched estimate are ignored here (see detection_ratio).
    """
    est_d, gt_d = _lane_distances(estimates, targets, match, samples)
    return _pr_from_distances(est_d, gt_d, threshold)


def lane_pr_curve(
    estimates: LaneGraph,
    targets: LaneGraph,
    samples: int = DEFAULT_SAMPLES,
    match: MatchMap | None = None,
    thresholds: Sequence[float] = LANE_THRESHOLDS,
) -> PRCurve:
    if match is None:
        match = match_min_l1(estimates.centerlines, targets.centerlines)
    est_d, gt_d = _lane_distances(estimates, targets, match, samples)
    return PRCurve(tuple(_pr_from_distances(est_d, gt_d, t) for t in thresholds))


@dataclass(frozen=True)
class DetectionCount:
    matched: int
    total: int

    @property
    def ratio(self) -> float:
        return ratio(self.matched, self.total)

    def __add__(self, other: "DetectionCount") -> "DetectionCount":
        return DetectionCount(self.matched + other.matched, self.total + other.total)


def detection_count(match: MatchMap, n_targets: int) -> DetectionCount:
    if n_targets < 0:
        raise DomainError("n_targets must be non-negative")
    return DetectionCount(sum(1 for s in match.members[:n_targets] if s), n_targets)


def detection_ratio(match: MatchMap, n_targets: int) -> float:
    return detection_count(match, n_targets).ratio


@dataclass(frozen=True)
class ConnectivityCount:
    """``tp``/``fp`` count estimated edges, ``fn`` missed GT edges."""

    tp: int
    fp: int
    fn: int
    n_gt_edges: int

    @property
    def precision(self) -> float:
        return ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return ratio(self.n_gt_edges - self.fn, self.n_gt_edges)

    @property
    def iou(self) -> float:
        return ratio(self.tp, self.tp + self.fp + self.fn)

    @property
    def vacuous(self) -> bool:
        return self.tp + self.fp == 0

    def as_tuple(self) -> tuple[float, float, float]:
        return self.precision, self.recall, self.iou

    def __add__(self, other: "ConnectivityCount") -> "ConnectivityCount":
        return ConnectivityCount(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.n_gt_edges + other.n_gt_edges
        )


def connectivity_counts(E, I, match: MatchMap) -> ConnectivityCount:
    """Edge-level TP/FP/FN of an estimated incidence matrix under a match map.

    An estimated edge (i, j) is correct when both ends match the same GT
    line or GT lines that are connected i -> j. Edges touching an unmatched
    estimate are false positives; the diagonal is ignored. A GT edge
    (m, n) is missed unless some estimated edge runs from S(m) to S(n).
    """
    E = np.asarray(E)
    I = np.asarray(I)
    n_est = len(match.targets)
    if E.shape != (n_est, n_est):
        raise DomainError(f"estimated incidence {E.shape} does not match {n_est} estimates")
    if I.shape != (match.n_targets, match.n_targets):
        raise DomainError(f"GT incidence {I.shape} does not match {match.n_targets} targets")
    tp = fp = 0
    for i, j in np.argwhere(E):
        if i == j:
            continue
        mi, mj = match.targets[i], match.targets[j]
        if mi is not None and mj is not None and (mi == mj or I[mi, mj] == 1):
            tp += 1
        else:
            fp += 1
    members = match.members
    fn = 0
    gt_edges = [(m, n) for m, n in np.argwhere(I) if m != n]
    for m, n in gt_edges:
        sm, sn = sorted(members[m]), sorted(members[n])
        if not sm or not sn or not E[np.ix_(sm, sn)].any():
            fn += 1
    return ConnectivityCount(tp, fp, fn, len(gt_edges))


def connectivity(E, I, match: MatchMap) -> tuple[float, float, float]:
    """(precision, recall, iou) of the estimated connections."""
    return connectivity_counts(E, I, match).as_tuple()


def box_class(box: OrientedBox) -> int:
    if box.probs is None:
        raise DomainError("object boxes need a class distribution")
    return box.label


def match_objects(estimates: Sequence[OrientedBox], targets: Sequence[OrientedBox]):
    """Per-class Hungarian matching on 1 - IOU; returns (est, gt, iou) triples."""
    pairs = []
    classes = {box_class(b) for b in targets} | {box_class(b) for b in estimates}
    for c in sorted(classes):
        ei = [i for i, b in enumerate(estimates) if box_class(b) == c]
        ti = [j for j, b in enumerate(targets) if box_class(b) == c]
        if not ei or not ti:
            continue
        ious = iou_matrix([estimates[i] for i in ei], [targets[j] for j in ti])
        for r, k in hungarian(1.0 - ious):
            pairs.append((ei[r], ti[k], float(ious[r, k])))
    return pairs


def object_pr(
    estimates: Sequence[OrientedBox],
    targets: Sequence[OrientedBox],
    iou_thresholds: Sequence[float] = IOU_THRESHOLDS,
) -> PRCurve:
    """Object precision/recall over IOU thresholds.

    Estimates whose argmax is the "no detection" class are dropped first.
    Unmatched GT boxes are misses and unmatched estimates false positives.
    """
    active = [b for b in estimates if box_class(b) != len(b.probs) - 1]
    pairs = match_objects(active, targets)
    points = []
    for t in iou_thresholds:
        tp = sum(1 for _, _, iou in pairs if iou >= t)
        points.append(PRPoint(float(t), tp, len(active) - tp, len(targets) - tp, tp))
    return PRCurve(tuple(points))


def confusion_counts(pred, gt, n_classes: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-class (intersection, union) cell counts."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise DomainError(f"grid shapes differ: {pred.shape} vs {gt.shape}")
    if pred.size and (max(pred.max(), gt.max()) >= n_classes or min(pred.min(), gt.min()) < 0):
        raise DomainError(f"labels must lie in [0, {n_classes})")
    p = np.bincount(pred.ravel(), minlength=n_classes)
    g = np.bincount(gt.ravel(), minlength=n_classes)
    inter = np.bincount(pred.ravel()[pred.ravel() == gt.ravel()], minlength=n_classes)
    return inter, p + g - inter


def iou_from_counts(inter: np.ndarray, union: np.ndarray) -> tuple[np.ndarray, float]:
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(union > 0, inter / np.maximum(union, 1), np.nan)
    present = union > 0
    mean = float(per_class[present].mean()) if present.any() else float("nan")
    return per_class, mean


def miou(pred, gt, n_classes: int) -> tuple[np.ndarray, float]:
    """Per-class IOU (NaN for classes absent from both grids) and their mean."""
    return iou_from_counts(*confusion_counts(pred, gt, n_classes))
