"""Path costs on the GVD: attach endpoints to the skeleton, then Dijkstra."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ._kernels import segments_free
from .grid import OCCUPIED, OccupancyGrid
from .gvd import GvdGraph, GvdNode

DEFAULT_ATTACH_CAP = 3.0


class Unattachable(LookupError):
    """No skeleton vertex is reachable by a collision-free straight connector."""


class Disconnected(LookupError):
    """The two vertices lie in different graph components."""


@dataclass(frozen=True)
class Attachment:
    source: tuple[float, float]
    vertex: int
    node: GvdNode
    vertex_position: tuple[float, float]
    connector_cost: float


@dataclass(frozen=True)
class GvdPath:
    waypoints: list[tuple[float, float]]
    cost: float
    vertices: tuple[int, ...] = ()

    def length(self) -> float:
        pts = self.waypoints
        return sum(math.dist(pts[i], pts[i + 1]) for i in range(len(pts) - 1))


def bresenham(c0: int, r0: int, c1: int, r1: int):
    """Cells on the Bresenham line from (c0, r0) to (c1, r1), both ends included."""
    dc, dr = abs(c1 - c0), -abs(r1 - r0)
    sc = 1 if c0 < c1 else -1
    sr = 1 if r0 < r1 else -1
    err = dc + dr
    c, r = c0, r0
    while True:
        yield c, r
        if c == c1 and r == r1:
            return
        e2 = 2 * err
        if e2 >= dr:
            err += dr
            c += sc
        if e2 <= dc:
            err += dc
            r += sr


def segment_clear(grid: OccupancyGrid, a: tuple[int, int], b: tuple[int, int]) -> bool:
    """True when no cell on the line a-b is occupied (unknown cells are allowed)."""
    cells = grid.cells
    for c, r in bresenham(a[0], a[1], b[0], b[1]):
        if not grid.contains_cell(c, r) or cells[r, c] == OCCUPIED:
            return False
    return True


def segment_free(grid: OccupancyGrid, a: tuple[int, int], b: tuple[int, int],
                 step: float = 0.1) -> bool:
    """True when every cell the straight segment between cell centers a and b
    passes through (sampled every ``step`` cells) is Free."""
    ok = segments_free(grid.cells, np.array([a[0]]), np.array([a[1]]), np.array([b[0]]),
                       np.array([b[1]]), step)
    return bool(ok[0])


def attach_to_gvd(point: tuple[float, float], gvd: GvdGraph, grid: OccupancyGrid,
                  cap: float = DEFAULT_ATTACH_CAP) -> Attachment:
    """Nearest vertex (Euclidean, within ``cap`` meters) reachable by a clear connector."""
    col, row = grid.world_to_cell(*point)
    if not grid.contains_cell(col, row):
        raise ValueError(f"point {point} lies outside the map")
    if gvd.empty or grid.cells[row, col] == OCCUPIED:
        raise Unattachable(f"no skeleton vertex reachable from {point}")
    pos = gvd.positions()
    d = np.hypot(pos[:, 0] - point[0], pos[:, 1] - point[1])
    near = np.flatnonzero(d <= cap + 1e-9)
    # exact ties (e.g. 3-4-5 offsets) must not hinge on float rounding
    near = near[np.lexsort((gvd.cols[near], gvd.rows[near], np.round(d[near], 9)))]
    for i in near.tolist():
        if segment_clear(grid, (col, row), (int(gvd.cols[i]), int(gvd.rows[i]))):
            return Attachment(point, i, gvd.node(i), (float(pos[i, 0]), float(pos[i, 1])),
                              float(d[i]))
    raise Unattachable(f"no skeleton vertex within {cap} m of {point} has a clear connector")


def dijkstra(gvd: GvdGraph, source: int, target: int | None = None):
    """Single-source distances and predecessors over the skeleton graph.

    Among equal-cost predecessors the lowest node id (row-major cell order)
    wins. Stops early once ``target`` is settled.
    """
    n = len(gvd)
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    dist[source] = 0.0
    heap = [(0.0, source)]
    nbrs, wts = gvd.neighbors, gvd.weights
    while heap:
        du, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == target:
            break
        for v, w in zip(nbrs[u], wts[u]):
            if done[v]:
                continue
            nd = du + w
            dv = dist[v]
            if nd < dv:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
            elif nd == dv and u < pred[v]:
                pred[v] = u
    return dist, pred


def _trace(pred: np.ndarray, source: int, target: int) -> list[int]:
    out = [target]
    while out[-1] != source:
        out.append(int(pred[out[-1]]))
    out.reverse()
    return out


def gvd_shortest_path(gvd: GvdGraph, a: int | GvdNode, b: int | GvdNode) -> tuple[list[int], float]:
    """Minimum-weight vertex path between two graph vertices and its cost in meters."""
    ia = a if isinstance(a, (int, np.integer)) else gvd.node_id(a.cell)
    ib = b if isinstance(b, (int, np.integer)) else gvd.node_id(b.cell)
    if ia < 0 or ib < 0:
        raise KeyError("both endpoints must be graph vertices")
    if ia == ib:
        return [int(ia)], 0.0
    if gvd.component[ia] != gvd.component[ib]:
        raise Disconnected(f"vertices {ia} and {ib} are in different components")
    dist, pred = dijkstra(gvd, int(ia), int(ib))
    return _trace(pred, int(ia), int(ib)), float(dist[ib])


def bridge_components(gvd: GvdGraph, grid: OccupancyGrid, cap: float = DEFAULT_ATTACH_CAP,
                      tries: int = 10) -> GvdGraph:
    """Copy of ``gvd`` with fragments joined by straight bridges through known free space.

    Every cell is labelled with its nearest skeleton vertex; two vertices of
    different components whose regions touch form a candidate bridge (the
    closest pair of two fragments always does, unless a third fragment lies
    between them). Per component pair the ``tries`` shortest candidates no
    longer than ``cap`` meters are tested in order and the first whose
    segment stays on Free cells becomes an extra edge weighted by its length.
    Component labels of the copy reflect the joined graph.
    """
    n = len(gvd)
    if n == 0 or gvd.n_components < 2:
        return gvd
    comp = gvd.component
    _, (near_r, near_c) = ndimage.distance_transform_edt(~gvd.mask, return_indices=True)
    owner = gvd.index[near_r, near_c]
    touching = [(owner[:, :-1], owner[:, 1:]), (owner[:-1, :], owner[1:, :]),
                (owner[:-1, :-1], owner[1:, 1:]), (owner[:-1, 1:], owner[1:, :-1])]
    u = np.concatenate([x.ravel() for x, _ in touching])
    v = np.concatenate([y.ravel() for _, y in touching])
    cross = comp[u] != comp[v]
    u, v = np.minimum(u[cross], v[cross]), np.maximum(u[cross], v[cross])
    pairs = np.unique(u * n + v)
    pairs = np.column_stack([pairs // n, pairs % n])
    dc = gvd.cols[pairs[:, 0]] - gvd.cols[pairs[:, 1]]
    dr = gvd.rows[pairs[:, 0]] - gvd.rows[pairs[:, 1]]
    d2 = dc * dc + dr * dr  # exact, ordered like the length
    reach = cap / gvd.resolution
    pairs, d2 = pairs[d2 <= reach * reach + 1e-9], d2[d2 <= reach * reach + 1e-9]
    neighbors = [list(a) for a in gvd.neighbors]
    weights = [list(a) for a in gvd.weights]
    parent = {int(c): int(c) for c in np.unique(comp)}

    def find(c):
        while parent[c] != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    if pairs.size:
        ci = comp[pairs[:, 0]]
        cj = comp[pairs[:, 1]]
        lo, hi = np.minimum(ci, cj), np.maximum(ci, cj)
        # pairs are sorted by (i, j); a stable sort on (lo, hi, length) keeps that as tie-break
        ncomp = int(comp.max()) + 1
        key = (lo * ncomp + hi) * (int(d2.max()) + 1) + d2
        order = np.argsort(key, kind="stable")
        # keep the ``tries`` shortest candidates of every component pair
        glo, ghi = lo[order], hi[order]
        start = np.r_[True, (glo[1:] != glo[:-1]) | (ghi[1:] != ghi[:-1])]
        first = np.maximum.accumulate(np.where(start, np.arange(order.size), 0))
        order = order[np.arange(order.size) - first < tries]
        d = np.sqrt(d2.astype(np.float64))
        ok = segments_free(grid.cells, gvd.cols[pairs[order, 0]], gvd.rows[pairs[order, 0]],
                           gvd.cols[pairs[order, 1]], gvd.rows[pairs[order, 1]], 0.1)
        done: set[tuple[int, int]] = set()
        for k in order[ok].tolist():
            key = (int(lo[k]), int(hi[k]))
            if key in done:
                continue
            done.add(key)
            i, j = int(pairs[k, 0]), int(pairs[k, 1])
            wgt = float(d[k]) * gvd.resolution
            neighbors[i].append(j)
            weights[i].append(wgt)
            neighbors[j].append(i)
            weights[j].append(wgt)
            ri, rj = find(key[0]), find(key[1])
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    component = np.array([find(int(c)) for c in gvd.component], dtype=np.int64)
    return GvdGraph(cols=gvd.cols, rows=gvd.rows, radius=gvd.radius, clearance=gvd.clearance,
                    resolution=gvd.resolution, origin=gvd.origin, shape=gvd.shape,
                    index=gvd.index, neighbors=neighbors, weights=weights, component=component)


class GvdPlanner:
    """Path costs and paths on one fixed GVD, reusing attachments and Dijkstra runs.

    Skeleton fragments are first joined by :func:`bridge_components` with
    ``bridge_cap``; pass ``None`` to plan on the raw ridge graph.
    """

    def __init__(self, gvd: GvdGraph, grid: OccupancyGrid, attach_cap: float = DEFAULT_ATTACH_CAP,
                 bridge_cap: float | None = DEFAULT_ATTACH_CAP):
        if bridge_cap is not None:
            gvd = bridge_components(gvd, grid, bridge_cap)
        self.gvd = gvd
        self.grid = grid
        self.attach_cap = attach_cap
        self._attach: dict[tuple[float, float], Attachment | None] = {}
        self._sssp: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def attach(self, point: tuple[float, float]) -> Attachment | None:
        key = (float(point[0]), float(point[1]))
        if key not in self._attach:
            try:
                self._attach[key] = attach_to_gvd(key, self.gvd, self.grid, self.attach_cap)
            except Unattachable:
                self._attach[key] = None
        return self._attach[key]

    def distances_from(self, vertex: int) -> tuple[np.ndarray, np.ndarray]:
        if vertex not in self._sssp:
            self._sssp[vertex] = dijkstra(self.gvd, vertex)
        return self._sssp[vertex]

    def cost(self, start: tuple[float, float], goal: tuple[float, float]) -> float:
        """Connector + skeleton + connector length; ``math.inf`` when unreachable."""
        sa, ga = self.attach(start), self.attach(goal)
        if sa is None or ga is None:
            return math.inf
        if self.gvd.component[sa.vertex] != self.gvd.component[ga.vertex]:
            return math.inf
        dist, _ = self.distances_from(sa.vertex)
        return sa.connector_cost + float(dist[ga.vertex]) + ga.connector_cost

    def path(self, start: tuple[float, float], goal: tuple[float, float]) -> GvdPath | None:
        sa, ga = self.attach(start), self.attach(goal)
        if sa is None or ga is None:
            return None
        if self.gvd.component[sa.vertex] != self.gvd.component[ga.vertex]:
            return None
        dist, pred = self.distances_from(sa.vertex)
        verts = _trace(pred, sa.vertex, ga.vertex)
        pts = [tuple(map(float, start))]
        for v in verts:
            pts.append(self.gvd.position(v))
        pts.append(tuple(map(float, goal)))
        waypoints = [pts[0]]
        for p in pts[1:]:
            if math.dist(p, waypoints[-1]) > 1e-12:
                waypoints.append(p)
        cost = sa.connector_cost + float(dist[ga.vertex]) + ga.connector_cost
        return GvdPath(waypoints, cost, tuple(verts))


def gvd_path_cost(robot, frontier, gvd: GvdGraph, grid: OccupancyGrid,
                  planner: GvdPlanner | None = None) -> float:
    """GVD path cost from a pose (or point) to a frontier (or point); inf if unreachable."""
    planner = planner or GvdPlanner(gvd, grid)
    start = (robot.x, robot.y) if hasattr(robot, "x") else tuple(robot)
    goal = frontier.position if hasattr(frontier, "position") else tuple(frontier)
    return planner.cost(start, goal)
