from __future__ import annotations

import numpy as np
import pytest
from scipy import ndimage

from gvdx.grid import FREE, OCCUPIED, UNKNOWN, OccupancyGrid, Pose
from gvdx.worlds import (KINDS, World, generate_world, parse_size, reachable_free,
                         repair_connectivity, world_from_grid)

from oracles import flood_fill


def _free_components(world: World) -> int:
    return ndimage.label(world.truth.cells == FREE)[1]


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("seed", range(4))
def test_generated_worlds_are_connected_and_valid(kind, seed):
    w = generate_world(kind, 100 if kind != "corridor" else "44x210", seed)
    assert _free_components(w) == 1
    assert set(np.unique(w.truth.cells).tolist()) <= {FREE, OCCUPIED}
    col, row = w.truth.world_to_cell(w.start.x, w.start.y)
    assert w.truth.cells[row, col] == FREE
    assert w.truth.closed_world
    # border is sealed
    c = w.truth.cells
    assert np.all(c[0] == OCCUPIED) and np.all(c[-1] == OCCUPIED)
    assert np.all(c[:, 0] == OCCUPIED) and np.all(c[:, -1] == OCCUPIED)


def test_corridor_dimensions():
    w = generate_world("corridor", "44x210", 0)
    assert w.truth.cells.shape == (44, 210)
    assert w.truth.width * w.truth.resolution == pytest.approx(21.0)
    assert w.truth.height * w.truth.resolution == pytest.approx(4.4)
    # a single loop: the free space has exactly one hole (the central block)
    free = w.truth.cells == FREE
    holes = ndimage.label(~free[1:-1, 1:-1])[1]
    assert holes == 1


@pytest.mark.parametrize("kind", KINDS)
def test_determinism(kind):
    a = generate_world(kind, 60, 7)
    b = generate_world(kind, 60, 7)
    assert a == b
    assert generate_world(kind, 60, 8).truth.cells.tobytes() != a.truth.cells.tobytes() \
        or kind == "corridor"


@pytest.mark.parametrize("kind", ["rooms", "maze", "corridor"])
def test_passages_at_least_three_cells(kind):
    w = generate_world(kind, 100 if kind != "corridor" else "44x210", 3)
    free = w.truth.cells == FREE
    # every free cell lies in some 3x3 all-free block
    core = ndimage.binary_erosion(free, np.ones((3, 3)), border_value=0)
    covered = ndimage.binary_dilation(core, np.ones((3, 3)))
    assert np.all(covered[free])


def test_start_has_maximal_clearance():
    w = generate_world("open", 80, 1)
    free = w.truth.cells == FREE
    dist = ndimage.distance_transform_edt(free)
    col, row = w.truth.world_to_cell(w.start.x, w.start.y)
    assert dist[row, col] == dist.max()


def test_errors():
    with pytest.raises(ValueError, match="unknown world kind"):
        generate_world("cave", 50)
    with pytest.raises(ValueError, match="at least"):
        generate_world("rooms", 19)
    cells = np.zeros((5, 5), dtype=np.int8)
    with pytest.raises(ValueError, match="Free and Occupied"):
        World(OccupancyGrid(np.full((5, 5), UNKNOWN, dtype=np.int8)), Pose(0.25, 0.25))
    cells[2, 2] = OCCUPIED
    with pytest.raises(ValueError, match="start"):
        World(OccupancyGrid(cells), Pose(0.25, 0.25))


@pytest.mark.parametrize("text,expected", [(50, (50, 50)), ("44x210", (44, 210)),
                                           ((30, 40), (30, 40)), ("25", (25, 25))])
def test_parse_size(text, expected):
    assert parse_size(text) == expected


def test_repair_keeps_largest_component():
    occ = np.ones((7, 9), dtype=bool)
    occ[1:6, 1:5] = False  # 20 cells
    occ[2:4, 6:8] = False  # 4 cells
    fixed = repair_connectivity(occ)
    assert fixed[2:4, 6:8].all()
    assert not fixed[1:6, 1:5].any()
    assert np.array_equal(repair_connectivity(fixed), fixed)


def test_reachable_free_matches_flood_fill():
    w = generate_world("rooms", 80, 2)
    col, row = w.truth.world_to_cell(w.start.x, w.start.y)
    oracle = flood_fill(w.truth.cells == FREE, (col, row))
    assert np.array_equal(reachable_free(w.truth, w.start), oracle)


def test_world_from_grid_treats_unknown_as_wall():
    cells = np.full((12, 12), OCCUPIED, dtype=np.int8)
    cells[1:11, 1:11] = FREE
    cells[4:6, 4:6] = UNKNOWN
    w = world_from_grid(OccupancyGrid(cells, 0.1), name="box")
    assert np.all(w.truth.cells[4:6, 4:6] == OCCUPIED)
    assert w.name == "box" and _free_components(w) == 1
