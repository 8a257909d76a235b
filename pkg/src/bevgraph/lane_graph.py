"""Directed lane graph: centerline vertices plus a binary incidence matrix."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .curve import BezierCurve, as_curves
from .errors import DomainError

ENDPOINT_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class LaneGraph:
    centerlines: tuple[BezierCurve, ...]
    incidence: np.ndarray
    probs: tuple[float, ...] | None = None

    def __init__(self, centerlines: Sequence, incidence=None, probs=None):
        curves = tuple(as_curves(centerlines))
        n = len(curves)
        if incidence is None:
            inc = np.zeros((n, n), dtype=np.uint8)
        else:
            inc = np.array(incidence)
            if inc.size == 0:
                inc = inc.reshape((0, 0))
            if inc.ndim != 2:
                raise DomainError(f"incidence must be a matrix, got shape {inc.shape}")
            if np.any((inc != 0) & (inc != 1)):
                raise DomainError("incidence entries must be 0 or 1")
            inc = inc.astype(np.uint8)
        inc.setflags(write=False)
        if probs is not None:
            probs = tuple(float(p) for p in probs)
            if len(probs) != n:
                raise DomainError("one detection probability per centerline is required")
            if any(not 0.0 <= p <= 1.0 for p in probs):
                raise DomainError("detection probabilities must lie in [0, 1]")
        object.__setattr__(self, "centerlines", curves)
        object.__setattr__(self, "incidence", inc)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_edges(cls, centerlines, edges, probs=None) -> "LaneGraph":
        n = len(centerlines)
        inc = np.zeros((n, n), dtype=np.uint8)
        for i, j in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise DomainError(f"edge ({i}, {j}) refers to a missing centerline")
            inc[i, j] = 1
        return cls(centerlines, inc, probs)

    def __len__(self) -> int:
        return len(self.centerlines)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LaneGraph):
            return NotImplemented
        return (
            self.centerlines == other.centerlines
            and self.incidence.shape == other.incidence.shape
            and bool(np.array_equal(self.incidence, other.incidence))
            and self.probs == other.probs
        )

    def subset(self, keep: Sequence[int]) -> "LaneGraph":
        """Induced subgraph on the given vertex indices (in that order)."""
        keep = list(keep)
        inc = self.incidence[np.ix_(keep, keep)] if keep else np.zeros((0, 0), np.uint8)
        probs = None if self.probs is None else [self.probs[k] for k in keep]
        return LaneGraph([self.centerlines[k] for k in keep], inc, probs)


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str
    severity: str = "error"


@dataclass(frozen=True)
class Junction:
    members: tuple[tuple[int, str], ...]
    location: tuple[float, float] = field(default=(0.0, 0.0))


def validate(
    graph: LaneGraph,
    *,
    ground_truth: bool = True,
    tol: float = ENDPOINT_TOL,
    report_cycles: bool = False,
) -> list[Diagnostic]:
    """Check the lane-graph invariants and return one diagnostic per violation.

    Mutual edges and endpoint mismatches only violate ground-truth graphs.
    Cycles are allowed; with ``report_cycles`` they are reported at
    severity ``"info"``.
    """
    out: list[Diagnostic] = []
    inc = graph.incidence
    n = len(graph.centerlines)
    if inc.ndim != 2 or inc.shape[0] != inc.shape[1] or inc.shape[0] != n:
        out.append(Diagnostic("shape", f"incidence shape {inc.shape} does not match {n} centerlines"))
        return out
    for i in np.flatnonzero(np.diag(inc)):
        out.append(Diagnostic("diagonal", f"centerline {i} is connected to itself"))
    if not ground_truth:
        if report_cycles:
            out.extend(_cycle_diagnostics(graph))
        return out
    for i, j in connected_pairs(graph):
        if i < j and inc[j, i]:
            out.append(Diagnostic("mutual", f"centerlines {i} and {j} are connected in both directions"))
        if i != j:
            gap = float(np.linalg.norm(graph.centerlines[i].end - graph.centerlines[j].start))
            if gap > tol:
                out.append(
                    Diagnostic("endpoint", f"edge ({i}, {j}): end/start points are {gap:.3g} apart")
                )
    if report_cycles:
        out.extend(_cycle_diagnostics(graph))
    return out


def _cycle_diagnostics(graph: LaneGraph) -> list[Diagnostic]:
    inc = graph.incidence.copy()
    np.fill_diagonal(inc, 0)
    # Kahn's algorithm: whatever survives lies on or downstream of a cycle
    indeg = inc.sum(axis=0).astype(int)
    queue = deque(np.flatnonzero(indeg == 0).tolist())
    seen = 0
    while queue:
        v = queue.popleft()
        seen += 1
        for w in np.flatnonzero(inc[v]):
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(int(w))
    if seen == len(graph):
        return []
    return [Diagnostic("cycle", f"{len(graph) - seen} centerlines lie on or after a cycle", "info")]


def connected_pairs(graph: LaneGraph) -> list[tuple[int, int]]:
    return [(int(i), int(j)) for i, j in np.argwhere(graph.incidence)]


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def find_junctions(graph: LaneGraph) -> list[Junction]:
    """Group endpoints joined by incidence edges.

    Endpoint node 2i is the start of curve i and 2i + 1 its end. Every edge
    (i, j) joins end-of-i with start-of-j; connected groups of two or more
    endpoints are junctions located at the mean endpoint position.
    """
    n = len(graph)
    uf = _UnionFind(2 * n)
    for i, j in connected_pairs(graph):
        uf.union(2 * i + 1, 2 * j)
    groups: dict[int, list[int]] = {}
    for node in range(2 * n):
        groups.setdefault(uf.find(node), []).append(node)
    junctions = []
    for nodes in groups.values():
        if len(nodes) < 2:
            continue
        pos = np.array([_endpoint(graph, node) for node in nodes])
        if np.all(pos == pos[0]):
            loc = pos[0]
        else:
            loc = pos.mean(axis=0)
        members = tuple((node // 2, "end" if node % 2 else "start") for node in nodes)
        junctions.append(Junction(members, (float(loc[0]), float(loc[1]))))
    junctions.sort(key=lambda jn: jn.members)
    return junctions


def _endpoint(graph: LaneGraph, node: int) -> np.ndarray:
    curve = graph.centerlines[node // 2]
    return curve.end if node % 2 else curve.start


def merge_junctions(graph: LaneGraph) -> LaneGraph:
    """Snap the endpoints of every junction to the junction mean.

    Only control points are moved; the incidence matrix is untouched.
    """
    pts = [c.control_points.copy() for c in graph.centerlines]
    for jn in find_junctions(graph):
        for idx, kind in jn.members:
            pts[idx][-1 if kind == "end" else 0] = jn.location
    return LaneGraph(pts, graph.incidence, graph.probs)


def subgraph_reachable(graph: LaneGraph, start: int) -> set[int]:
    n = len(graph)
    if not 0 <= start < n:
        raise IndexError(f"start index {start} out of range for {n} centerlines")
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for w in np.flatnonzero(graph.incidence[v]):
            w = int(w)
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return seen
