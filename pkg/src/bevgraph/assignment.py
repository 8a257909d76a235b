"""Estimate-to-target matching and the training-loss terms.

Two matchers live here. ``hungarian`` is the one-to-one optimal assignment
used while training; ``match_min_l1`` is the many-to-one nearest-target
matching used by the lane metrics.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import log
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .curve import BezierCurve, control_point_l1
from .errors import DomainError

PROB_EPS = 1e-7


def hungarian(costs) -> list[tuple[int, int]]:
    """Globally optimal one-to-one assignment on a (possibly rectangular) cost matrix.

    Returns ``min(n_rows, n_cols)`` (row, col) pairs sorted by row.
    """
    c = np.asarray(costs, dtype=float)
    if c.size == 0:
        return []
    if c.ndim != 2:
        raise DomainError(f"cost matrix must be 2D, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise DomainError("cost matrix entries must be finite")
    rows, cols = linear_sum_assignment(c)
    return [(int(r), int(k)) for r, k in zip(rows, cols)]


def assignment_cost(costs, pairs) -> float:
    c = np.asarray(costs, dtype=float)
    return float(sum(c[r, k] for r, k in pairs))


@dataclass(frozen=True)
class MatchMap:
    """``targets[i]`` is M(i) (or None); ``members[n]`` is S(n)."""

    targets: tuple[int | None, ...]
    n_targets: int
    diagnostics: tuple[str, ...] = field(default=(), compare=False)

    @property
    def members(self) -> tuple[frozenset[int], ...]:
        sets: list[set[int]] = [set() for _ in range(self.n_targets)]
        for i, m in enumerate(self.targets):
            if m is not None:
                sets[m].add(i)
        return tuple(frozenset(s) for s in sets)

    def M(self, i: int) -> int | None:
        return self.targets[i]

    def S(self, n: int) -> frozenset[int]:
        return self.members[n]

    @classmethod
    def identity(cls, n: int) -> "MatchMap":
        return cls(tuple(range(n)), n)


def match_min_l1(
    estimates: Sequence[BezierCurve], targets: Sequence[BezierCurve]
) -> MatchMap:
    """Match every estimate to the target with the smallest control-point L1.

    Several estimates may share a target. Ties go to the lowest target index.
    """
    if len(estimates) and not len(targets):
        return MatchMap(
            (None,) * len(estimates), 0, (f"{len(estimates)} estimates left unmatched: no targets",)
        )
    if not len(estimates):
        return MatchMap((), len(targets))
    dist = l1_cost_matrix(estimates, targets)
    return MatchMap(tuple(int(k) for k in dist.argmin(axis=1)), len(targets))


def l1_cost_matrix(estimates, targets) -> np.ndarray:
    est = np.stack([e.control_points for e in estimates])
    tgt = np.stack([t.control_points for t in targets]) if targets else None
    if tgt is None or est.shape[1:] != tgt.shape[1:]:
        # defer to the scalar routine for its error message
        return np.array([[control_point_l1(e, t) for t in targets] for e in estimates])
    return np.abs(est[:, None] - tgt[None]).sum(axis=(2, 3))


@dataclass(frozen=True)
class LossConfig:
    weight_l1: float = 1.0

    def __post_init__(self):
        if self.weight_l1 < 0:
            raise DomainError("L1 weight must be non-negative")


def _clamp(p: float) -> float:
    return min(max(float(p), PROB_EPS), 1.0 - PROB_EPS)


def training_match_cost(
    det_prob: float,
    is_gt_present: bool,
    est_params,
    gt_params,
    cfg: LossConfig = LossConfig(),
) -> float:
    """Cross-entropy on the detection probability plus weighted parameter L1.

    For an empty GT slot only the "no detection" cross-entropy counts.
    """
    est = np.asarray(est_params, dtype=float).ravel()
    gt = np.asarray(gt_params, dtype=float).ravel()
    if est.shape != gt.shape:
        raise DomainError(f"parameter vectors differ in length: {est.size} vs {gt.size}")
    p = _clamp(det_prob)
    if not is_gt_present:
        return -log(1.0 - p)
    return -log(p) + cfg.weight_l1 * float(np.abs(est - gt).sum())


def angle_loss(alpha: float, phi: float) -> float:
    """Flip-invariant heading loss on doubled angles."""
    return abs(np.cos(2 * alpha) - np.cos(2 * phi)) + abs(np.sin(2 * alpha) - np.sin(2 * phi))


def angle_loss_grad(alpha: float, phi: float) -> float:
    """d angle_loss / d alpha (a subgradient at the kinks)."""
    dc = np.cos(2 * alpha) - np.cos(2 * phi)
    ds = np.sin(2 * alpha) - np.sin(2 * phi)
    return float(-2.0 * np.sin(2 * alpha) * np.sign(dc) + 2.0 * np.cos(2 * alpha) * np.sign(ds))


def cross_entropy(probs, label: int) -> float:
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise DomainError("class distribution must be a non-empty vector")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-6:
        raise DomainError(f"class distribution must be non-negative and sum to 1 (sum={p.sum()})")
    if not 0 <= label < p.size:
        raise DomainError(f"label {label} out of range for {p.size} classes")
    return -log(_clamp(p[label]))


def association_input(f_i, f_j) -> np.ndarray:
    a = np.asarray(f_i, dtype=float).ravel()
    b = np.asarray(f_j, dtype=float).ravel()
    if a.shape != b.shape:
        raise DomainError(f"association features differ in length: {a.size} vs {b.size}")
    return np.concatenate([a, b])


def association_inputs(features) -> np.ndarray:
    """All ordered pairs at once: an (N, N, 2 * delta) array."""
    f = np.asarray(features, dtype=float)
    n = len(f)
    return np.concatenate(
        [np.broadcast_to(f[:, None, :], (n, n, f.shape[1])), np.broadcast_to(f[None, :, :], (n, n, f.shape[1]))],
        axis=-1,
    )
