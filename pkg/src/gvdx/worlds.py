"""Procedural ground-truth worlds: rooms, maze, corridor loop and open field.

Walls are one cell thick and 4-connected so no lidar ray can slip through a
diagonal gap. Passages are kept wide enough (at least 7 cells) for the
skeleton to survive the minimum-radius filter at 0.1 m per cell.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import FREE, OCCUPIED, OccupancyGrid, Pose

KINDS = ("rooms", "maze", "corridor", "open")
MIN_SIZE = 20
DOOR = 8
MIN_ROOM = 22
MAZE_PITCH = 16


@dataclass(frozen=True)
class World:
    truth: OccupancyGrid
    start: Pose
    name: str = ""
    seed: int = 0

    def __post_init__(self):
        cells = self.truth.cells
        if np.any((cells != FREE) & (cells != OCCUPIED)):
            raise ValueError("ground truth may only hold Free and Occupied cells")
        col, row = self.truth.world_to_cell(self.start.x, self.start.y)
        if not self.truth.contains_cell(col, row) or cells[row, col] != FREE:
            raise ValueError("start must lie on a Free cell")


def _border(h: int, w: int) -> np.ndarray:
    occ = np.zeros((h, w), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    return occ


def _rooms(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    occ = _border(h, w)
    doors: list[tuple[int, int, int, int]] = []  # (r0, c0, r1, c1) door openings, end-exclusive

    def blocked(axis: int, k: int, lo: int, hi: int) -> bool:
        # a new wall must not end inside an existing doorway
        for r0, c0, r1, c1 in doors:
            if axis == 0 and c0 - 1 <= k <= c1 and (r0 in (lo - 1, hi) or r1 - 1 in (lo - 1, hi)):
                return True
            if axis == 1 and r0 - 1 <= k <= r1 and (c0 in (lo - 1, hi) or c1 - 1 in (lo - 1, hi)):
                return True
        return False

    def divide(r0: int, c0: int, r1: int, c1: int):
        # interior rows r0..r1-1, columns c0..c1-1 (walls lie just outside)
        hh, ww = r1 - r0, c1 - c0
        can_h = hh >= 2 * MIN_ROOM + 1
        can_v = ww >= 2 * MIN_ROOM + 1
        if not (can_h or can_v):
            return
        horizontal = can_h and (not can_v or hh > ww or (hh == ww and rng.random() < 0.5))
        if horizontal:
            options = [k for k in range(r0 + MIN_ROOM, r1 - MIN_ROOM)
                       if not blocked(1, k, c0, c1)]
        else:
            options = [k for k in range(c0 + MIN_ROOM, c1 - MIN_ROOM)
                       if not blocked(0, k, r0, r1)]
        if not options:
            return
        k = int(rng.choice(options))
        if horizontal:
            occ[k, c0:c1] = True
            d = int(rng.integers(c0, c1 - DOOR + 1))
            occ[k, d:d + DOOR] = False
            doors.append((k, d, k + 1, d + DOOR))
            divide(r0, c0, k, c1)
            divide(k + 1, c0, r1, c1)
        else:
            occ[r0:r1, k] = True
            d = int(rng.integers(r0, r1 - DOOR + 1))
            occ[d:d + DOOR, k] = False
            doors.append((d, k, d + DOOR, k + 1))
            divide(r0, c0, r1, k)
            divide(r0, k + 1, r1, c1)

    divide(1, 1, h - 1, w - 1)
    return occ


def _maze(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    p = MAZE_PITCH
    nr, nc = max((h - 1) // p, 1), max((w - 1) // p, 1)
    occ = np.ones((h, w), dtype=bool)
    for i in range(nr):
        for j in range(nc):
            occ[i * p + 1:(i + 1) * p, j * p + 1:(j + 1) * p] = False
    seen = np.zeros((nr, nc), dtype=bool)
    stack = [(int(rng.integers(nr)), int(rng.integers(nc)))]
    seen[stack[0]] = True
    while stack:
        i, j = stack[-1]
        nbrs = [(i + di, j + dj) for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1))
                if 0 <= i + di < nr and 0 <= j + dj < nc and not seen[i + di, j + dj]]
        if not nbrs:
            stack.pop()
            continue
        ni, nj = nbrs[int(rng.integers(len(nbrs)))]
        if ni != i:
            k = max(i, ni) * p
            occ[k, j * p + 1:(j + 1) * p] = False
        else:
            k = max(j, nj) * p
            occ[i * p + 1:(i + 1) * p, k] = False
        seen[ni, nj] = True
        stack.append((ni, nj))
    return occ


def _corridor(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    """Single loop around a central block, with a few alcoves cut into the block."""
    occ = _border(h, w)
    width = max(7, (h - 2) // 3)
    r0, r1 = 1 + width, h - 1 - width
    c0, c1 = 1 + width, w - 1 - width
    if r1 - r0 < 3 or c1 - c0 < 3:
        return occ
    block = np.zeros((h, w), dtype=bool)
    block[r0:r1, c0:c1] = True
    depth = max(0, min(5, (r1 - r0 - 4) // 2))
    if depth >= 2:
        span = 10
        for side in (r0, r1 - depth):
            slots = np.arange(c0 + 4, c1 - span - 4, span + 6)
            if slots.size == 0:
                continue
            picked = rng.choice(slots, size=min(2, slots.size), replace=False)
            for c in np.sort(picked):
                block[side:side + depth, c:c + span] = False
    occ |= block
    return occ


def _open(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    occ = _border(h, w)
    taken = np.zeros((h, w), dtype=bool)
    gap = 8
    for _ in range(max(2, h * w // 1500)):
        for _attempt in range(20):
            rh, rw = int(rng.integers(4, max(5, h // 6))), int(rng.integers(4, max(5, w // 6)))
            r = int(rng.integers(gap + 1, max(gap + 2, h - gap - 1 - rh)))
            c = int(rng.integers(gap + 1, max(gap + 2, w - gap - 1 - rw)))
            if r + rh > h - gap - 1 or c + rw > w - gap - 1:
                continue
            if taken[r - gap:r + rh + gap, c - gap:c + rw + gap].any():
                continue
            occ[r:r + rh, c:c + rw] = True
            taken[r:r + rh, c:c + rw] = True
            break
    return occ


_GENERATORS = {"rooms": _rooms, "maze": _maze, "corridor": _corridor, "open": _open}


def _start_cell(free: np.ndarray) -> tuple[int, int]:
    """(col, row) of maximal Euclidean clearance; lowest row, then column on ties."""
    dist = ndimage.distance_transform_edt(free)
    flat = int(np.argmax(dist))  # first maximum in row-major order
    row, col = divmod(flat, free.shape[1])
    return col, row


def repair_connectivity(occ: np.ndarray) -> np.ndarray:
    """Fill every free pocket except the largest 4-connected free component."""
    free = ~occ
    labels, n = ndimage.label(free)
    if n <= 1:
        return occ
    sizes = ndimage.sum_labels(free, labels, index=np.arange(1, n + 1))
    keep = 1 + int(np.argmax(sizes))
    return occ | (free & (labels != keep))


def parse_size(size) -> tuple[int, int]:
    """``100`` or ``"44x210"`` (rows x cols) into (rows, cols)."""
    if isinstance(size, (tuple, list)):
        h, w = (int(v) for v in size)
    elif isinstance(size, str) and "x" in size.lower():
        a, b = size.lower().split("x", 1)
        h, w = int(a), int(b)
    else:
        h = w = int(size)
    return h, w


def generate_world(kind: str, size, seed: int = 0, resolution: float = 0.1) -> World:
    """Deterministic world of ``kind`` with ``size`` cells (int, ``(rows, cols)`` or ``"RxC"``)."""
    if kind not in _GENERATORS:
        raise ValueError(f"unknown world kind {kind!r}; choose from {', '.join(KINDS)}")
    h, w = parse_size(size)
    if min(h, w) < MIN_SIZE:
        raise ValueError(f"world size must be at least {MIN_SIZE} cells per side")
    rng = np.random.default_rng(seed)
    occ = repair_connectivity(_GENERATORS[kind](h, w, rng))
    cells = np.where(occ, OCCUPIED, FREE).astype(np.int8)
    name = f"{kind}-{h}x{w}-s{seed}"
    truth = OccupancyGrid(cells, resolution, (0.0, 0.0), closed_world=True, name=name)
    col, row = _start_cell(~occ)
    x, y = truth.cell_to_world(col, row)
    return World(truth, Pose(x, y, 0.0), name, seed)


def world_from_grid(grid: OccupancyGrid, name: str = "", seed: int = 0) -> World:
    """Wrap a loaded map as a world; Unknown cells are treated as Occupied."""
    occ = grid.cells != FREE
    occ = repair_connectivity(occ)
    cells = np.where(occ, OCCUPIED, FREE).astype(np.int8)
    truth = OccupancyGrid(cells, grid.resolution, grid.origin, closed_world=grid.closed_world,
                          name=name or grid.name)
    col, row = _start_cell(~occ)
    return World(truth, Pose(*truth.cell_to_world(col, row), 0.0), name or grid.name, seed)


def reachable_free(truth: OccupancyGrid, start: Pose) -> np.ndarray:
    """Free cells 4-connected to the start cell."""
    free = truth.cells == FREE
    labels, _ = ndimage.label(free)
    col, row = truth.world_to_cell(start.x, start.y)
    return labels == labels[row, col]
