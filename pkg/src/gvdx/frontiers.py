"""Heuristic frontiers fused from GVD nodes, and the three frontier ledgers."""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from ._kernels import open_unknown_count
from .grid import OCCUPIED, UNKNOWN, OccupancyGrid, Pose, window_bounds
from .gvd import GvdGraph, GvdNode

DEFAULT_DELTA = 10


class FrontierKind(str, enum.Enum):
    REALTIME_LOCAL = "RealtimeLocal"
    RESERVED_LOCAL = "ReservedLocal"
    GLOBAL = "Global"


@dataclass(frozen=True)
class Frontier:
    cell: tuple[int, int]  # (col, row)
    position: tuple[float, float]
    radius: float
    unknown_count: int
    gain: int = 0
    born_at: int = 0
    kind: FrontierKind = FrontierKind.GLOBAL

    @property
    def sort_key(self) -> tuple[int, int]:
        return self.cell[1], self.cell[0]


@functools.lru_cache(maxsize=512)
def _disc_template(radius_cells: float) -> np.ndarray:
    reach = int(math.floor(radius_cells + 1e-9))
    off = np.arange(-reach, reach + 1)
    disc = off[:, None] ** 2 + off[None, :] ** 2 <= radius_cells * radius_cells + 1e-9
    disc.flags.writeable = False
    return disc


def _disc_window(grid: OccupancyGrid, center: tuple[int, int], radius_cells: float):
    col, row = center
    reach = int(math.floor(radius_cells + 1e-9))
    r0, r1 = max(row - reach, 0), min(row + reach + 1, grid.height)
    c0, c1 = max(col - reach, 0), min(col + reach + 1, grid.width)
    disc = _disc_template(radius_cells)
    disc = disc[r0 - row + reach:r1 - row + reach, c0 - col + reach:c1 - col + reach]
    return grid.cells[r0:r1, c0:c1], disc, (row - r0, col - c0)


def count_unknown_in_disc(grid: OccupancyGrid, center: tuple[int, int], radius: float) -> int:
    """Unknown cells whose center lies within ``radius`` meters of ``center``'s center."""
    col, row = center
    if not grid.contains_cell(col, row):
        raise ValueError(f"cell {center} lies outside the map")
    if radius < 0:
        raise ValueError("radius must be non-negative")
    window, disc, _ = _disc_window(grid, center, radius / grid.resolution)
    return int(np.count_nonzero(disc & (window == UNKNOWN)))


def count_open_unknown(grid: OccupancyGrid, center: tuple[int, int], radius: float) -> int:
    """Unknown cells in the disc that connect to ``center`` without crossing an occupied cell.

    Connectivity is 4-neighbour and stays inside the disc, so a wall between
    the center and an unknown pocket hides the pocket.
    """
    col, row = center
    if not grid.contains_cell(col, row):
        raise ValueError(f"cell {center} lies outside the map")
    window, disc, (lr, lc) = _disc_window(grid, center, radius / grid.resolution)
    if not (disc & (window == UNKNOWN)).any():
        return 0
    return int(open_unknown_count(window, disc, lr, lc))


@dataclass(frozen=True)
class UnknownCounter:
    """How a node's unknown count is measured.

    The defaults count every unknown cell inside the node radius. ``margin``
    (meters) widens the disc and ``occlusion`` drops unknown cells walled off
    from the node.
    """
    margin: float = 0.0
    occlusion: bool = False

    def __call__(self, grid: OccupancyGrid, cell: tuple[int, int], radius: float) -> int:
        r = radius + self.margin
        if self.occlusion:
            return count_open_unknown(grid, cell, r)
        return count_unknown_in_disc(grid, cell, r)


def _node_arrays(nodes):
    if isinstance(nodes, GvdGraph):
        return nodes.cols, nodes.rows, nodes.radius
    nodes = list(nodes)
    cols = np.array([n.cell[0] for n in nodes], dtype=np.int64)
    rows = np.array([n.cell[1] for n in nodes], dtype=np.int64)
    radius = np.array([n.radius for n in nodes], dtype=np.float64)
    return cols, rows, radius


def fuse_extract(grid: OccupancyGrid, nodes: Iterable[GvdNode] | GvdGraph,
                 delta: int = DEFAULT_DELTA, counter: UnknownCounter = UnknownCounter(),
                 step: int = 0, kind: FrontierKind = FrontierKind.GLOBAL) -> list[Frontier]:
    """Largest-radius-first fusion of GVD nodes into frontiers.

    Repeatedly take the remaining node of largest radius (ties: lowest row,
    then column). If its unknown count exceeds ``delta`` it becomes a frontier
    and every remaining node whose cell center lies within its radius is
    dropped; otherwise only that node is dropped.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    cols, rows, radius = _node_arrays(nodes)
    order = np.lexsort((cols, rows, -radius))
    alive = np.ones(cols.size, dtype=bool)
    res = grid.resolution
    out: list[Frontier] = []
    for i in order:
        if not alive[i]:
            continue
        cell = (int(cols[i]), int(rows[i]))
        num = counter(grid, cell, float(radius[i]))
        if num > delta:
            out.append(Frontier(cell, grid.cell_to_world(*cell), float(radius[i]), num,
                                born_at=step, kind=kind))
            reach = radius[i] / res
            d2 = (cols - cols[i]) ** 2 + (rows - rows[i]) ** 2
            alive &= d2 > reach * reach + 1e-9
        alive[i] = False
    return out


@dataclass(frozen=True)
class Local:
    pose: Pose
    side: float


GLOBAL = "global"


def extract_scoped(grid: OccupancyGrid, gvd: GvdGraph, scope: Local | str,
                   delta: int = DEFAULT_DELTA, counter: UnknownCounter = UnknownCounter(),
                   step: int = 0) -> list[Frontier]:
    if isinstance(scope, Local):
        c0, r0, c1, r1 = window_bounds(grid, scope.pose, scope.side)
        inside = (gvd.cols >= c0) & (gvd.cols < c1) & (gvd.rows >= r0) & (gvd.rows < r1)
        nodes = [GvdNode((int(c), int(r)), float(rad)) for c, r, rad in
                 zip(gvd.cols[inside], gvd.rows[inside], gvd.radius[inside])]
        return fuse_extract(grid, nodes, delta, counter, step, FrontierKind.REALTIME_LOCAL)
    if scope != GLOBAL:
        raise ValueError(f"unknown scope {scope!r}")
    return fuse_extract(grid, gvd, delta, counter, step, FrontierKind.GLOBAL)


@dataclass
class FrontierLedger:
    v_current: list[Frontier] = field(default_factory=list)
    v_local: list[Frontier] = field(default_factory=list)
    v_global: list[Frontier] = field(default_factory=list)

    def all(self) -> list[Frontier]:
        return self.v_current + self.v_local + self.v_global

    def empty(self) -> bool:
        return not (self.v_current or self.v_local or self.v_global)

    def counts(self) -> tuple[int, int, int]:
        return len(self.v_current), len(self.v_local), len(self.v_global)

    def discard(self, cells: Iterable[tuple[int, int]]):
        gone = set(cells)
        self.v_current = [f for f in self.v_current if f.cell not in gone]
        self.v_local = [f for f in self.v_local if f.cell not in gone]
        self.v_global = [f for f in self.v_global if f.cell not in gone]


def _duplicate(a: Frontier, b: Frontier, step: int, res: float) -> bool:
    if a.cell == b.cell:
        return True
    if a.born_at != step and b.born_at != step:
        return False
    d = math.hypot(a.cell[0] - b.cell[0], a.cell[1] - b.cell[1]) * res
    reach = max(a.radius if a.born_at == step else 0.0,
                b.radius if b.born_at == step else 0.0)
    return d <= reach + 1e-9


def ledger_update(ledger: FrontierLedger, fresh_local: Sequence[Frontier],
                  fresh_global: Sequence[Frontier], grid: OccupancyGrid, step: int,
                  counter: UnknownCounter = UnknownCounter(), keep_above: int = 0) -> FrontierLedger:
    """Fold this step's extractions into the ledger and return the new ledger.

    Previous real-time frontiers are demoted to reserved; stored frontiers are
    re-counted and dropped once their count falls to ``keep_above`` or below.
    A frontier sharing a cell with, or lying inside the radius of, a fresh
    frontier is kept only in the highest-precedence set
    (real-time > reserved > global).
    """
    def rescored(items):
        kept = []
        for f in items:
            if not grid.contains_cell(*f.cell):
                continue
            num = counter(grid, f.cell, f.radius)
            if num > keep_above:
                kept.append(replace(f, unknown_count=num))
        return kept

    current = [replace(f, kind=FrontierKind.REALTIME_LOCAL, born_at=step) for f in fresh_local]
    reserved = rescored([replace(f, kind=FrontierKind.RESERVED_LOCAL)
                         for f in ledger.v_local + ledger.v_current])
    fresh_g = [replace(f, kind=FrontierKind.GLOBAL, born_at=step) for f in fresh_global]
    stored_g = rescored([replace(f, kind=FrontierKind.GLOBAL) for f in ledger.v_global])

    res = grid.resolution
    accepted: list[Frontier] = []
    tiers: list[list[Frontier]] = [[], [], []]
    for tier, group in ((0, current), (1, reserved), (2, fresh_g), (2, stored_g)):
        for f in group:
            if any(_duplicate(f, g, step, res) for g in accepted):
                continue
            accepted.append(f)
            tiers[tier].append(f)
    return FrontierLedger(*tiers)


def frontier_rows(step: int, frontiers: Iterable[Frontier]) -> list[tuple]:
    """Rows ``step,kind,col,row,radius_m,unknown_count`` for the frontier dump."""
    return [(step, f.kind.value, f.cell[0], f.cell[1], f"{f.radius:.4f}", f.unknown_count)
            for f in frontiers]
