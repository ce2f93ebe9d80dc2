"""Generalized Voronoi diagram extraction by offset max-pooling and a Laplacian.

The clearance field is produced by repeatedly max-pooling a 3x3 window after
adding a fixed distance offset to every window cell. Obstacle pixels start
at a sentinel ``K`` and free pixels at 0, so each pass pushes ``K - distance``
one chamfer step further into free space; clearance is ``K`` minus the
pooled value. Ridge pixels are read off the Laplacian of that field.

Values are carried exactly as ``a + b*sqrt(2)`` with integer ``a, b``. Every
chamfer distance has a unique such form, which keeps the pooled field
bit-identical to any other exact chamfer transform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .grid import FREE, OccupancyGrid, binarize

SQRT2 = math.sqrt(2.0)

OFFSET_MATRIX = np.array([[-SQRT2, -1.0, -SQRT2],
                          [-1.0, 0.0, -1.0],
                          [-SQRT2, -1.0, -SQRT2]])
LAPLACIAN = np.array([[0.0, 1.0, 0.0],
                      [1.0, -4.0, 1.0],
                      [0.0, 1.0, 0.0]])
IDENTITY = np.eye(3)

# (drow, dcol, axis part, diagonal part) of each offset entry.
_WINDOW = [(dr, dc, -1 if (dr == 0) != (dc == 0) else 0, -1 if dr and dc else 0)
           for dr in (-1, 0, 1) for dc in (-1, 0, 1) if dr or dc]

DEFAULT_TAU = -0.5


class NoObstacleError(ValueError):
    """The image has no blocked pixel, so clearance has no reference."""


@dataclass
class DistanceMap:
    """Pooled distance field.

    ``level_axis + level_diag*sqrt(2)`` is the internal pooled value ``D``;
    ``clearance`` (in cells) is derived from it.
    """
    level_axis: np.ndarray
    level_diag: np.ndarray
    obstacle: np.ndarray
    sentinel: int
    passes: int = 0

    @classmethod
    def initial(cls, binary: np.ndarray, sentinel: int | None = None) -> "DistanceMap":
        obstacle = np.asarray(binary).astype(bool)
        if obstacle.ndim != 2 or obstacle.size == 0:
            raise ValueError("binary image must be a non-empty 2-D array")
        k = default_sentinel(obstacle) if sentinel is None else int(sentinel)
        axis = np.where(obstacle, k, 0).astype(np.int64)
        return cls(axis, np.zeros_like(axis), obstacle, k)

    @property
    def shape(self) -> tuple[int, int]:
        return self.obstacle.shape

    @property
    def width(self) -> int:
        return self.obstacle.shape[1]

    @property
    def height(self) -> int:
        return self.obstacle.shape[0]

    @property
    def internal(self) -> np.ndarray:
        return self.level_axis + self.level_diag * SQRT2

    @property
    def clearance_axis(self) -> np.ndarray:
        return np.where(self.obstacle, 0, self.sentinel - self.level_axis)

    @property
    def clearance_diag(self) -> np.ndarray:
        return np.where(self.obstacle, 0, -self.level_diag)

    @property
    def clearance(self) -> np.ndarray:
        value = self.clearance_axis + self.clearance_diag * SQRT2
        return np.maximum(value, 0.0)


def default_sentinel(obstacle: np.ndarray) -> int:
    """``K`` for obstacle pixels: the longer side, or ``h + w`` on an open border.

    Clearance saturates at ``K``. A blocked border keeps every clearance
    below the longer side; otherwise ``h + w`` exceeds any in-image chamfer
    distance.
    """
    h, w = obstacle.shape
    sealed = (obstacle[0].all() and obstacle[-1].all() and obstacle[:, 0].all()
              and obstacle[:, -1].all())
    return max(h, w) if sealed else h + w


def pooling_iterations(binary: np.ndarray) -> int:
    """Nominal pooling depth: half the longer image side, rounded up.

    This covers every clearance when the image border is blocked. Without a
    blocked border a free cell can sit up to ``max(h, w) - 1`` steps from the
    nearest obstacle, see :func:`exact_pass_bound`.
    """
    h, w = np.shape(binary)
    if h < 1 or w < 1:
        raise ValueError("empty image")
    return max(1, math.ceil(max(h, w) / 2))


def exact_pass_bound(binary: np.ndarray) -> int:
    """Passes that always reach the fixpoint: the Chebyshev diameter of the image."""
    h, w = np.shape(binary)
    return max(pooling_iterations(binary), max(h, w) - 1)


def distance_offset_pool(dmap: DistanceMap) -> DistanceMap:
    """One stride-1 3x3 pass of ``max(D(q) + offset(q - p))``.

    Window cells outside the image are left out of the max.
    """
    a, b = dmap.level_axis, dmap.level_diag
    best_key = a + b * SQRT2
    best_a = a.copy()
    best_b = b.copy()
    h, w = a.shape
    for dr, dc, da, db in _WINDOW:
        # destination p and source q = p + (dr, dc), both in bounds
        pr = slice(max(0, -dr), h - max(0, dr))
        pc = slice(max(0, -dc), w - max(0, dc))
        qr = slice(max(0, dr), h - max(0, -dr))
        qc = slice(max(0, dc), w - max(0, -dc))
        qa = a[qr, qc] + da
        qb = b[qr, qc] + db
        cand = qa + qb * SQRT2
        cur = best_key[pr, pc]
        better = cand > cur
        if not better.any():
            continue
        cur[better] = cand[better]
        best_a[pr, pc][better] = qa[better]
        best_b[pr, pc][better] = qb[better]
    return DistanceMap(best_a, best_b, dmap.obstacle, dmap.sentinel, dmap.passes + 1)


def build_distance_map(binary: np.ndarray, max_passes: int | None = None) -> DistanceMap:
    """Clearance field of ``binary`` (1 = blocked) by iterated offset pooling.

    Stops at the first pass that changes nothing, or after ``max_passes``
    passes (default :func:`exact_pass_bound`, which is always enough for the
    exact transform); ``passes`` on the result counts the
    passes that changed the field. Each pass only revisits the 3x3
    neighbourhood of cells changed by the previous one, which gives the same
    field as full passes of :func:`distance_offset_pool`.
    """
    init = DistanceMap.initial(binary)
    if not init.obstacle.any():
        raise NoObstacleError("no obstacle reference: image has no blocked pixel")
    limit = exact_pass_bound(binary) if max_passes is None else max_passes
    h, w = init.shape
    w2 = w + 2
    a = np.zeros((h + 2, w2), dtype=np.int64)
    b = np.zeros((h + 2, w2), dtype=np.int64)
    a[1:-1, 1:-1] = init.level_axis
    inside = np.zeros((h + 2, w2), dtype=bool)
    inside[1:-1, 1:-1] = True
    a, b, inside = a.ravel(), b.ravel(), inside.ravel()
    key = np.where(inside, a + b * SQRT2, -np.inf)
    offsets = [(dr * w2 + dc, da, db) for dr, dc, da, db in _WINDOW]
    spread = np.array([0] + [o for o, _, _ in offsets], dtype=np.int64)

    # only free cells touching an obstacle can change on the first pass
    frontier = np.flatnonzero(inside & (key > 0))
    passes = 0
    while passes < limit and frontier.size:
        cand = np.unique((frontier[:, None] + spread[None, :]).ravel())
        cand = cand[inside[cand]]
        best = key[cand]
        ba = a[cand]
        bb = b[cand]
        for off, da, db in offsets:
            q = cand + off
            qa = a[q] + da
            qb = b[q] + db
            nk = qa + qb * SQRT2
            nk[~inside[q]] = -np.inf
            better = nk > best
            best[better] = nk[better]
            ba[better] = qa[better]
            bb[better] = qb[better]
        moved = (ba != a[cand]) | (bb != b[cand])
        frontier = cand[moved]
        if not frontier.size:
            break
        a[frontier] = ba[moved]
        b[frontier] = bb[moved]
        key[frontier] = best[moved]
        passes += 1
    dmap = DistanceMap(a.reshape(h + 2, w2)[1:-1, 1:-1].copy(),
                       b.reshape(h + 2, w2)[1:-1, 1:-1].copy(),
                       init.obstacle, init.sentinel, passes)
    return dmap


def laplacian_response(dmap: DistanceMap) -> np.ndarray:
    """Laplacian of the clearance field with zero padding; 0 on blocked cells."""
    clearance = dmap.clearance
    response = ndimage.correlate(clearance, LAPLACIAN, mode="constant", cval=0.0)
    response[dmap.obstacle] = 0.0
    return response


@dataclass(frozen=True)
class GvdNode:
    cell: tuple[int, int]  # (col, row)
    radius: float  # meters


@dataclass
class GvdGraph:
    """Ridge graph. Node ``i`` sits at ``cols[i], rows[i]``; ids follow row-major order."""
    cols: np.ndarray
    rows: np.ndarray
    radius: np.ndarray
    clearance: np.ndarray
    resolution: float
    origin: tuple[float, float]
    shape: tuple[int, int]
    index: np.ndarray  # (h, w) node id per cell, -1 off the graph
    neighbors: list[list[int]] = field(repr=False)
    weights: list[list[float]] = field(repr=False)
    component: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return int(self.cols.size)

    @property
    def empty(self) -> bool:
        return self.cols.size == 0

    @property
    def n_components(self) -> int:
        return int(np.unique(self.component).size)

    @property
    def mask(self) -> np.ndarray:
        return self.index >= 0

    def nodes(self) -> list[GvdNode]:
        return [GvdNode((int(c), int(r)), float(rad))
                for c, r, rad in zip(self.cols, self.rows, self.radius)]

    def node(self, i: int) -> GvdNode:
        return GvdNode((int(self.cols[i]), int(self.rows[i])), float(self.radius[i]))

    def node_id(self, cell: tuple[int, int]) -> int:
        col, row = cell
        if not (0 <= row < self.shape[0] and 0 <= col < self.shape[1]):
            return -1
        return int(self.index[row, col])

    def position(self, i: int) -> tuple[float, float]:
        return (self.origin[0] + (self.cols[i] + 0.5) * self.resolution,
                self.origin[1] + (self.rows[i] + 0.5) * self.resolution)

    def positions(self) -> np.ndarray:
        return np.column_stack([self.origin[0] + (self.cols + 0.5) * self.resolution,
                                self.origin[1] + (self.rows + 0.5) * self.resolution])

    def edges(self):
        """Each undirected edge once, as ``(i, j, weight)`` with ``i < j``."""
        for i, (nbrs, ws) in enumerate(zip(self.neighbors, self.weights)):
            for j, wgt in zip(nbrs, ws):
                if i < j:
                    yield i, j, wgt

    def edge_list_text(self) -> str:
        lines = []
        for i, j, wgt in self.edges():
            lines.append(f"({self.cols[i]},{self.rows[i]},{self.radius[i]:.4f}) -- "
                         f"({self.cols[j]},{self.rows[j]},{self.radius[j]:.4f}) {wgt:.6f}")
        return "\n".join(lines) + ("\n" if lines else "")


def ridge_mask(dmap: DistanceMap, grid: OccupancyGrid, tau: float = DEFAULT_TAU,
               r_min: float = 0.0, response: np.ndarray | None = None) -> np.ndarray:
    if not tau < 0:
        raise ValueError(f"ridge threshold must be negative, got {tau}")
    if r_min < 0:
        raise ValueError("r_min must be non-negative")
    if response is None:
        response = laplacian_response(dmap)
    clearance = dmap.clearance
    return ((grid.cells == FREE) & (response <= tau) & (clearance > 0)
            & (clearance * grid.resolution >= r_min))


def extract_gvd(dmap: DistanceMap, grid: OccupancyGrid, tau: float = DEFAULT_TAU,
                r_min: float = 0.0) -> GvdGraph:
    """Ridge cells as an 8-connected graph with metric step weights."""
    mask = ridge_mask(dmap, grid, tau, r_min)
    return graph_from_mask(mask, dmap.clearance, grid.resolution, grid.origin)


def graph_from_mask(mask: np.ndarray, clearance: np.ndarray, resolution: float,
                    origin: tuple[float, float]) -> GvdGraph:
    h, w = mask.shape
    rows, cols = np.nonzero(mask)  # row-major order
    index = np.full((h, w), -1, dtype=np.int64)
    index[rows, cols] = np.arange(rows.size)
    neighbors: list[list[int]] = [[] for _ in range(rows.size)]
    weights: list[list[float]] = [[] for _ in range(rows.size)]
    diag = SQRT2 * resolution
    for dr, dc in ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)):
        rr, cc = rows + dr, cols + dc
        ok = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
        src = np.nonzero(ok)[0]
        dst = index[rr[ok], cc[ok]]
        keep = dst >= 0
        wgt = diag if dr and dc else resolution
        for i, j in zip(src[keep].tolist(), dst[keep].tolist()):
            neighbors[i].append(j)
            weights[i].append(wgt)
    labels, _ = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    clear = clearance[rows, cols].astype(np.float64)
    return GvdGraph(cols=cols.astype(np.int64), rows=rows.astype(np.int64),
                    radius=clear * resolution, clearance=clear, resolution=resolution,
                    origin=origin, shape=(h, w), index=index, neighbors=neighbors,
                    weights=weights, component=labels[rows, cols].astype(np.int64))


@dataclass
class GvdBuild:
    binary: np.ndarray
    dmap: DistanceMap
    response: np.ndarray
    graph: GvdGraph


def build_gvd(grid: OccupancyGrid, tau: float = DEFAULT_TAU, r_min: float = 0.0,
              closed_world: bool | None = None) -> GvdBuild:
    """Full pipeline: binarize, pool to a distance map, extract the ridge graph."""
    closed = grid.closed_world if closed_world is None else closed_world
    binary = binarize(grid, closed_world=closed)
    dmap = build_distance_map(binary)
    response = laplacian_response(dmap)
    mask = ridge_mask(dmap, grid, tau, r_min, response=response)
    graph = graph_from_mask(mask, dmap.clearance, grid.resolution, grid.origin)
    return GvdBuild(binary, dmap, response, graph)
