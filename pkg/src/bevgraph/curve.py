"""Bezier centerlines: evaluation, Bernstein basis, least-squares fitting.

All curves live in normalized BEV coordinates. A curve with R control
points has degree R - 1; the default used for lane centerlines is R = 3.
"""
from __future__ import annotations

from math import comb
from typing import Sequence

import numpy as np

from .errors import DomainError, FitError

DEFAULT_DEGREE = 2
DEFAULT_SAMPLES = 100
# Gram matrices worse than this are solved by orthogonal decomposition instead.
GRAM_COND_LIMIT = 1e8


class BezierCurve:
    """Immutable 2D Bezier curve given by its ordered control points."""

    __slots__ = ("_points",)

    def __init__(self, control_points):
        pts = np.array(control_points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise DomainError(f"control points must have shape (R, 2), got {pts.shape}")
        if len(pts) < 2:
            raise DomainError("a Bezier curve needs at least 2 control points")
        if not np.all(np.isfinite(pts)):
            raise DomainError("control points must be finite")
        pts.setflags(write=False)
        self._points = pts

    @property
    def control_points(self) -> np.ndarray:
        return self._points

    @property
    def degree(self) -> int:
        return len(self._points) - 1

    @property
    def start(self) -> np.ndarray:
        return self._points[0]

    @property
    def end(self) -> np.ndarray:
        return self._points[-1]

    def with_endpoints(self, start=None, end=None) -> "BezierCurve":
        pts = self._points.copy()
        if start is not None:
            pts[0] = start
        if end is not None:
            pts[-1] = end
        return BezierCurve(pts)

    def tolist(self) -> list[list[float]]:
        return self._points.tolist()

    def __len__(self) -> int:
        return len(self._points)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BezierCurve):
            return NotImplemented
        return self._points.shape == other._points.shape and bool(
            np.array_equal(self._points, other._points)
        )

    def __hash__(self) -> int:
        return hash(self._points.tobytes())

    def __repr__(self) -> str:
        return f"BezierCurve({self._points.tolist()!r})"


def _check_ts(ts: np.ndarray) -> None:
    if ts.size == 0:
        raise DomainError("at least one parameter value is required")
    if np.any(~np.isfinite(ts)) or np.any(ts < 0.0) or np.any(ts > 1.0):
        raise DomainError("curve parameters must lie in [0, 1]")


def basis_matrix(ts, degree: int) -> np.ndarray:
    """Bernstein weight matrix of shape (len(ts), degree + 1).

    Entry (i, j) is C(n, j) (1 - t_i)^(n - j) t_i^j with n = degree.
    """
    if degree < 1:
        raise DomainError(f"degree must be >= 1, got {degree}")
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    _check_ts(ts)
    j = np.arange(degree + 1)
    binom = np.array([comb(degree, k) for k in j], dtype=float)
    t = ts[:, None]
    return binom * (1.0 - t) ** (degree - j) * t**j


def eval_bezier(curve: BezierCurve, t: float) -> np.ndarray:
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t must lie in [0, 1], got {t}")
    return (basis_matrix([t], curve.degree) @ curve.control_points)[0]


def sample_curve(curve: BezierCurve, count: int = DEFAULT_SAMPLES) -> np.ndarray:
    """Evaluate the curve at ``count`` uniformly spaced parameters in [0, 1]."""
    if count < 2:
        raise DomainError(f"need at least 2 samples, got {count}")
    ts = np.linspace(0.0, 1.0, count)
    return basis_matrix(ts, curve.degree) @ curve.control_points


def parameterize(points: np.ndarray, method: str = "uniform") -> np.ndarray:
    n = len(points)
    if method == "uniform":
        return np.linspace(0.0, 1.0, n)
    if method == "chord":
        seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        if cum[-1] <= 0.0:
            raise FitError("chord-length parameterization of a zero-length polyline")
        return cum / cum[-1]
    raise DomainError(f"unknown parameterization {method!r}")


def fit_bezier(
    points,
    degree: int = DEFAULT_DEGREE,
    parameterization: str = "uniform",
    ts=None,
    pin_endpoints: bool = False,
) -> BezierCurve:
    """Least-squares control points for an observed polyline.

    Parameters are assigned uniformly (t_i = i / (T - 1)) unless
    ``parameterization="chord"`` or explicit ``ts`` are given. With
    ``pin_endpoints`` the first and last control points are fixed to the
    first and last observation and only the interior ones are solved for.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError(f"points must have shape (T, 2), got {pts.shape}")
    if len(pts) < degree + 1:
        raise FitError(f"{len(pts)} points cannot determine {degree + 1} control points")
    ts = parameterize(pts, parameterization) if ts is None else np.asarray(ts, dtype=float)
    if len(ts) != len(pts):
        raise DomainError("one parameter value per point is required")
    gamma = basis_matrix(ts, degree)
    rank = np.linalg.matrix_rank(gamma)
    if rank < degree + 1:
        n_unique = len(np.unique(ts))
        raise FitError(
            f"basis matrix has rank {rank} < {degree + 1} "
            f"({n_unique} distinct parameter values for {len(ts)} points)"
        )
    if pin_endpoints:
        ctrl = np.empty((degree + 1, 2))
        ctrl[0], ctrl[-1] = pts[0], pts[-1]
        if degree > 1:
            rhs = pts - np.outer(gamma[:, 0], pts[0]) - np.outer(gamma[:, -1], pts[-1])
            ctrl[1:-1] = _solve(gamma[:, 1:-1], rhs)
        return BezierCurve(ctrl)
    return BezierCurve(_solve(gamma, pts))


def _solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Normal equations, or orthogonal decomposition when they are ill conditioned."""
    gram = a.T @ a
    if np.linalg.cond(gram) <= GRAM_COND_LIMIT:
        return np.linalg.solve(gram, a.T @ b)
    return np.linalg.lstsq(a, b, rcond=None)[0]


def fit_residual(curve: BezierCurve, points, ts=None) -> float:
    """Frobenius norm of Gamma(t) P - Y for the uniform (or given) parameters."""
    pts = np.asarray(points, dtype=float)
    ts = np.linspace(0.0, 1.0, len(pts)) if ts is None else ts
    return float(np.linalg.norm(basis_matrix(ts, curve.degree) @ curve.control_points - pts))


def elevate(curve: BezierCurve, degree: int) -> BezierCurve:
    """Raise the degree without changing the traced curve."""
    pts = curve.control_points
    while len(pts) - 1 < degree:
        n = len(pts)  # degree after this step
        inner = [(k / n) * pts[k - 1] + (1 - k / n) * pts[k] for k in range(1, n)]
        pts = np.vstack([pts[:1], *inner, pts[-1:]])
    return BezierCurve(pts)


def control_point_l1(a: BezierCurve, b: BezierCurve) -> float:
    """Sum of absolute coordinate differences of the ordered control points.

    Direction sensitive: a curve and its reversal are far apart.
    """
    if len(a) != len(b):
        raise DomainError(f"control point counts differ: {len(a)} vs {len(b)}")
    return float(np.abs(a.control_points - b.control_points).sum())


def reverse(curve: BezierCurve) -> BezierCurve:
    return BezierCurve(curve.control_points[::-1])


def chamfer(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric mean nearest-neighbour distance between two point sets."""
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    return 0.5 * float(d.min(axis=1).mean() + d.min(axis=0).mean())


def as_curves(items: Sequence) -> list[BezierCurve]:
    return [c if isinstance(c, BezierCurve) else BezierCurve(c) for c in items]
