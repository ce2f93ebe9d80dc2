from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gvdx.grid import (FREE, OCCUPIED, UNKNOWN, CellState, MapFormatError, OccupancyGrid, Pose,
                       binarize, load_map, local_window, map_entropy, normalize_angle, save_map,
                       window_bounds)

from conftest import grid_from_ascii


def test_cell_state_encodings():
    assert (CellState.FREE, CellState.OCCUPIED, CellState.UNKNOWN) == (0, 100, -1)
    assert len(CellState) == 3


def test_grid_validation():
    with pytest.raises(ValueError):
        OccupancyGrid(np.zeros((0, 3), dtype=np.int8))
    with pytest.raises(ValueError):
        OccupancyGrid(np.full((2, 2), 7, dtype=np.int8))
    with pytest.raises(ValueError):
        OccupancyGrid(np.zeros((2, 2), dtype=np.int8), resolution=0.0)


@pytest.mark.parametrize("theta", [0.0, math.pi, -math.pi, 3 * math.pi, -2.5 * math.pi, 7.0])
def test_pose_heading_normalized(theta):
    h = Pose(0, 0, theta).heading
    assert -math.pi < h <= math.pi
    assert math.isclose(math.cos(h), math.cos(theta), abs_tol=1e-12)
    assert math.isclose(math.sin(h), math.sin(theta), abs_tol=1e-12)
    assert normalize_angle(-math.pi) == math.pi


def test_world_cell_round_trip():
    g = OccupancyGrid(np.zeros((5, 7), dtype=np.int8), 0.25, origin=(-1.0, 2.0))
    for col in range(7):
        for row in range(5):
            assert g.world_to_cell(*g.cell_to_world(col, row)) == (col, row)


# ---------------------------------------------------------------- load / save


def test_ascii_load_maps_characters(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("##\n.?\n")
    g = load_map(p)
    assert g.cells.ravel().tolist() == [OCCUPIED, OCCUPIED, FREE, UNKNOWN]
    assert g.resolution == 0.1 and g.origin == (0.0, 0.0)


def test_ascii_ragged_rows_rejected(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("##\n.\n")
    with pytest.raises(MapFormatError):
        load_map(p)


def test_ascii_bad_character_rejected(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("#x\n..\n")
    with pytest.raises(MapFormatError):
        load_map(p)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_map(tmp_path / "nope.pgm")


def test_p2_black_pixel_is_occupied(tmp_path):
    (tmp_path / "m.pgm").write_text("P2\n# comment\n3 1\n255\n0 255 220\n")
    (tmp_path / "m.yaml").write_text("resolution: 0.05\noccupied_thresh: 65\nfree_thresh: 20\n"
                                     "origin: 1.5 -2\n")
    g = load_map(tmp_path / "m.pgm")
    assert g.cells.ravel().tolist() == [OCCUPIED, FREE, UNKNOWN]
    assert g.resolution == 0.05 and g.origin == (1.5, -2.0)


def test_pgm_negate_flips_darkness(tmp_path):
    (tmp_path / "m.pgm").write_text("P2\n2 1\n255\n0 255\n")
    (tmp_path / "m.yaml").write_text("negate: 1\n")
    assert load_map(tmp_path / "m.pgm").cells.ravel().tolist() == [FREE, OCCUPIED]


def test_pgm_requires_sidecar(tmp_path):
    (tmp_path / "m.pgm").write_text("P2\n1 1\n255\n0\n")
    with pytest.raises(MapFormatError):
        load_map(tmp_path / "m.pgm")


def test_pgm_malformed_header(tmp_path):
    (tmp_path / "m.pgm").write_bytes(b"P5\n3\n")
    (tmp_path / "m.yaml").write_text("resolution: 0.1\n")
    with pytest.raises(MapFormatError):
        load_map(tmp_path / "m.pgm")


def test_pgm_truncated_raster(tmp_path):
    (tmp_path / "m.pgm").write_bytes(b"P5\n4 4\n255\n" + bytes(10))
    (tmp_path / "m.yaml").write_text("resolution: 0.1\n")
    with pytest.raises(MapFormatError):
        load_map(tmp_path / "m.pgm")


def test_pgm_sidecar_dimension_mismatch(tmp_path):
    (tmp_path / "m.pgm").write_text("P2\n2 2\n255\n0 0 0 0\n")
    (tmp_path / "m.yaml").write_text("resolution: 0.1\nwidth: 3\nheight: 2\n")
    with pytest.raises(MapFormatError):
        load_map(tmp_path / "m.pgm")


def test_sidecar_threshold_range_checked(tmp_path):
    (tmp_path / "m.pgm").write_text("P2\n1 1\n255\n0\n")
    (tmp_path / "m.yaml").write_text("occupied_thresh: 300\n")
    with pytest.raises(MapFormatError):
        load_map(tmp_path / "m.pgm")


def test_p5_sixteen_bit(tmp_path):
    raw = np.array([[0, 65535]], dtype=">u2").tobytes()
    (tmp_path / "m.pgm").write_bytes(b"P5\n2 1\n65535\n" + raw)
    (tmp_path / "m.yaml").write_text("resolution: 0.1\n")
    assert load_map(tmp_path / "m.pgm").cells.ravel().tolist() == [OCCUPIED, FREE]


states = st.sampled_from([FREE, OCCUPIED, UNKNOWN])


@settings(max_examples=30, deadline=None)
@given(arrays(np.int8, (16, 16), elements=states), st.sampled_from(["pgm", "txt"]))
def test_save_load_round_trip(tmp_path_factory, cells, ext):
    d = tmp_path_factory.mktemp("rt")
    g = OccupancyGrid(cells, 0.1)
    p = d / f"m.{ext}"
    save_map(g, p)
    back = load_map(p)
    assert back == g
    assert np.array_equal(binarize(back), binarize(g))


def test_round_trip_keeps_metric_frame(tmp_path):
    g = OccupancyGrid(np.array([[0, 100], [-1, 0]], dtype=np.int8), 0.05, origin=(3.25, -1.5),
                      closed_world=False)
    for ext in ("pgm", "txt"):
        save_map(g, tmp_path / f"m.{ext}")
        back = load_map(tmp_path / f"m.{ext}")
        assert back == g and back.closed_world is False


# ---------------------------------------------------------------- binarize


def test_binarize_examples():
    assert binarize(grid_from_ascii(".")).tolist() == [[0]]
    assert binarize(grid_from_ascii("?")).tolist() == [[1]]
    assert binarize(grid_from_ascii("#")).tolist() == [[1]]
    free = OccupancyGrid(np.zeros((4, 4), dtype=np.int8))
    assert not binarize(free).any()
    assert binarize(free).shape == (4, 4)


def test_binarize_closed_world_seals_border():
    b = binarize(OccupancyGrid(np.zeros((4, 5), dtype=np.int8)), closed_world=True)
    assert b[0].all() and b[-1].all() and b[:, 0].all() and b[:, -1].all()
    assert not b[1:-1, 1:-1].any()


@settings(max_examples=50, deadline=None)
@given(arrays(np.int8, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=states))
def test_binarize_counts_blocked_cells(cells):
    g = OccupancyGrid(cells)
    b = binarize(g)
    assert b.shape == cells.shape
    assert int(b.sum()) == g.count(OCCUPIED) + g.count(UNKNOWN)


# ---------------------------------------------------------------- windows


def test_local_window_centered_and_odd():
    g = OccupancyGrid(np.zeros((10, 10), dtype=np.int8), 1.0)
    w = local_window(g, Pose(5.5, 5.5), 4.0)
    assert w.cells.shape == (5, 5)
    assert w.world_to_cell(5.5, 5.5) == (2, 2)


def test_local_window_clamped_at_corner():
    g = OccupancyGrid(np.zeros((10, 10), dtype=np.int8), 1.0)
    c0, r0, c1, r1 = window_bounds(g, Pose(0.5, 0.5), 6.0)
    assert (c0, r0) == (0, 0)
    assert c1 - c0 <= 7 and r1 - r0 <= 7
    w = local_window(g, Pose(0.5, 0.5), 6.0)
    assert w.cells.shape[0] <= 7 and w.cells.shape[1] <= 7


def test_local_window_errors():
    g = OccupancyGrid(np.zeros((10, 10), dtype=np.int8), 1.0)
    with pytest.raises(ValueError):
        local_window(g, Pose(50.0, 0.5), 4.0)
    with pytest.raises(ValueError):
        local_window(g, Pose(1.0, 1.0), 0.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 20), st.integers(1, 20), st.floats(0.05, 1.0), st.data())
def test_local_window_preserves_world_coordinates(h, w, res, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 10_000)))
    cells = rng.choice(np.array([FREE, OCCUPIED, UNKNOWN], dtype=np.int8), size=(h, w))
    g = OccupancyGrid(cells, res, origin=(-0.3, 1.7))
    col, row = data.draw(st.integers(0, w - 1)), data.draw(st.integers(0, h - 1))
    side = data.draw(st.floats(res * 0.5, res * 30))
    sub = local_window(g, Pose(*g.cell_to_world(col, row)), side)
    for r in range(sub.height):
        for c in range(sub.width):
            x, y = sub.cell_to_world(c, r)
            pc, pr = g.world_to_cell(x, y)
            assert g.contains_cell(pc, pr)
            assert sub.cells[r, c] == g.cells[pr, pc]
            assert math.isclose(x, g.cell_to_world(pc, pr)[0], abs_tol=1e-9)


# ---------------------------------------------------------------- entropy


def test_map_entropy_examples():
    assert map_entropy(OccupancyGrid.filled(10, 10, UNKNOWN)) == 100.0
    assert map_entropy(OccupancyGrid.filled(10, 10, FREE)) == 0.0
    cells = np.zeros((5, 5), dtype=np.int8)
    cells.ravel()[[1, 7, 20]] = UNKNOWN
    assert map_entropy(OccupancyGrid(cells)) == 3.0


def test_map_entropy_drops_by_revealed_count(rng):
    cells = np.full((8, 8), UNKNOWN, dtype=np.int8)
    g = OccupancyGrid(cells.copy())
    before = map_entropy(g)
    g.cells[2:4, 1:4] = FREE
    assert before - map_entropy(g) == 6.0
