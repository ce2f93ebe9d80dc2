"""Occupancy grids: tri-state cells, map files, binarization and windowing.

Cell (col, row) maps to ``cells[row, col]``. Row 0 is the first line of an
ASCII map / first raster row of a PGM and sits at the smallest world y.
"""
from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field

import numpy as np

FREE = 0
OCCUPIED = 100
UNKNOWN = -1


class CellState(enum.IntEnum):
    FREE = FREE
    OCCUPIED = OCCUPIED
    UNKNOWN = UNKNOWN


class MapFormatError(ValueError):
    """Raised for unreadable or inconsistent map files."""


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    wrapped = math.fmod(theta, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    elif wrapped > math.pi:
        wrapped -= 2.0 * math.pi
    return wrapped


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", normalize_angle(float(self.heading)))

    def distance_to(self, x: float, y: float) -> float:
        return math.hypot(x - self.x, y - self.y)


@dataclass
class OccupancyGrid:
    cells: np.ndarray
    resolution: float = 0.1
    origin: tuple[float, float] = (0.0, 0.0)
    closed_world: bool = True
    name: str = field(default="", compare=False)

    def __post_init__(self):
        cells = np.asarray(self.cells)
        if cells.ndim != 2 or cells.shape[0] < 1 or cells.shape[1] < 1:
            raise ValueError(f"grid must be a non-empty 2-D array, got shape {cells.shape}")
        if not np.isin(cells, (FREE, OCCUPIED, UNKNOWN)).all():
            raise ValueError("grid cells must be 0 (free), 100 (occupied) or -1 (unknown)")
        if not self.resolution > 0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        self.cells = cells.astype(np.int8, copy=False)
        self.origin = (float(self.origin[0]), float(self.origin[1]))

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @classmethod
    def filled(cls, width: int, height: int, state: int = UNKNOWN, **kwargs) -> "OccupancyGrid":
        return cls(np.full((height, width), state, dtype=np.int8), **kwargs)

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.cells.copy(), self.resolution, self.origin,
                             self.closed_world, self.name)

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (self.resolution == other.resolution and self.origin == other.origin
                and self.cells.shape == other.cells.shape
                and bool(np.array_equal(self.cells, other.cells)))

    def contains_cell(self, col: int, row: int) -> bool:
        return 0 <= col < self.width and 0 <= row < self.height

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        col = math.floor((x - self.origin[0]) / self.resolution)
        row = math.floor((y - self.origin[1]) / self.resolution)
        return col, row

    def cell_to_world(self, col: int, row: int) -> tuple[float, float]:
        """Center of a cell in world coordinates."""
        return (self.origin[0] + (col + 0.5) * self.resolution,
                self.origin[1] + (row + 0.5) * self.resolution)

    def state(self, col: int, row: int) -> CellState:
        return CellState(int(self.cells[row, col]))

    def count(self, state: int) -> int:
        return int(np.count_nonzero(self.cells == state))


def binarize(grid: OccupancyGrid, closed_world: bool = False) -> np.ndarray:
    """Obstacle-or-unknown mask of ``grid`` as a uint8 image (1 = blocked).

    With ``closed_world`` the outermost ring of cells is also set, so the map
    border acts as a wall.
    """
    bits = (grid.cells != FREE).astype(np.uint8)
    if closed_world:
        bits[0, :] = 1
        bits[-1, :] = 1
        bits[:, 0] = 1
        bits[:, -1] = 1
    return bits


def window_bounds(grid: OccupancyGrid, center: Pose, side: float) -> tuple[int, int, int, int]:
    """Clamped (col0, row0, col1, row1) bounds, end-exclusive, of a local window.

    The side length in cells is rounded up to an odd count so the cell holding
    ``center`` is the exact middle of the unclamped window.
    """
    if not side > 0:
        raise ValueError(f"window side must be positive, got {side}")
    col, row = grid.world_to_cell(center.x, center.y)
    if not grid.contains_cell(col, row):
        raise ValueError(f"window center ({center.x}, {center.y}) lies outside the map")
    n = math.ceil(side / grid.resolution - 1e-9)
    if n % 2 == 0:
        n += 1
    half = n // 2
    return (max(col - half, 0), max(row - half, 0),
            min(col + half + 1, grid.width), min(row + half + 1, grid.height))


def local_window(grid: OccupancyGrid, center: Pose, side: float) -> OccupancyGrid:
    c0, r0, c1, r1 = window_bounds(grid, center, side)
    origin = (grid.origin[0] + c0 * grid.resolution, grid.origin[1] + r0 * grid.resolution)
    return OccupancyGrid(grid.cells[r0:r1, c0:c1].copy(), grid.resolution, origin,
                         grid.closed_world, grid.name)


def map_entropy(grid: OccupancyGrid) -> float:
    """Map entropy in bits: each unknown cell contributes one bit, known cells none."""
    return float(np.count_nonzero(grid.cells == UNKNOWN))


# --------------------------------------------------------------------------- I/O

_ASCII_TO_STATE = {"#": OCCUPIED, ".": FREE, "?": UNKNOWN}
_STATE_TO_ASCII = {v: k for k, v in _ASCII_TO_STATE.items()}

# PGM pixel values written for each state; thresholds below are on the
# "darkness" scale 255 - pixel (negate: 0), as in common map-server files.
_PGM_PIXEL = {OCCUPIED: 0, FREE: 254, UNKNOWN: 128}
DEFAULT_META = {
    "resolution": 0.1,
    "occupied_thresh": 165.0,
    "free_thresh": 50.0,
    "origin": (0.0, 0.0),
    "negate": 0,
    "closed_world": True,
}


def sidecar_path(path: str | os.PathLike) -> str:
    root, _ = os.path.splitext(os.fspath(path))
    return root + ".yaml"


def read_sidecar(path: str | os.PathLike) -> dict:
    """Parse ``key: value`` lines; ``origin`` takes two numbers."""
    meta = dict(DEFAULT_META)
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if ":" not in line:
                raise MapFormatError(f"{path}:{lineno}: expected 'key: value'")
            key, value = (s.strip() for s in line.split(":", 1))
            try:
                if key == "origin":
                    parts = value.replace(",", " ").strip("[] ").split()
                    meta["origin"] = (float(parts[0]), float(parts[1]))
                elif key == "closed_world":
                    meta["closed_world"] = value.lower() in ("1", "true", "yes")
                elif key in ("resolution", "occupied_thresh", "free_thresh"):
                    meta[key] = float(value)
                elif key == "negate":
                    meta["negate"] = int(value)
                else:
                    meta[key] = value
            except (ValueError, IndexError) as exc:
                raise MapFormatError(f"{path}:{lineno}: bad value for {key!r}: {value!r}") from exc
    for key in ("occupied_thresh", "free_thresh"):
        if not 0 <= meta[key] <= 255:
            raise MapFormatError(f"{path}: {key} must lie in [0, 255]")
    if meta["free_thresh"] >= meta["occupied_thresh"]:
        raise MapFormatError(f"{path}: free_thresh must be below occupied_thresh")
    if not meta["resolution"] > 0:
        raise MapFormatError(f"{path}: resolution must be positive")
    return meta


def write_sidecar(path: str | os.PathLike, grid: OccupancyGrid, extra: dict | None = None):
    meta = {
        "image": os.path.basename(os.fspath(path).rsplit(".", 1)[0] + ".pgm"),
        "resolution": repr(grid.resolution),
        "origin": f"{grid.origin[0]!r} {grid.origin[1]!r}",
        "occupied_thresh": DEFAULT_META["occupied_thresh"],
        "free_thresh": DEFAULT_META["free_thresh"],
        "negate": 0,
        "closed_world": "true" if grid.closed_world else "false",
    }
    meta.update(extra or {})
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in meta.items():
            fh.write(f"{key}: {value}\n")


def _pgm_tokens(data: bytes):
    """Yield header tokens with their end offsets, skipping comments."""
    i, n = 0, len(data)
    while i < n:
        ch = data[i:i + 1]
        if ch == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < n and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
                j += 1
            yield data[i:j], j
            i = j


def read_pgm(path: str | os.PathLike) -> tuple[np.ndarray, int]:
    """Raw PGM pixels (P2 or P5) as a (height, width) array plus maxval."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = _pgm_tokens(data)
    try:
        magic, _ = next(tokens)
        width, _ = next(tokens)
        height, _ = next(tokens)
        maxval, end = next(tokens)
        width, height, maxval = int(width), int(height), int(maxval)
    except (StopIteration, ValueError) as exc:
        raise MapFormatError(f"{path}: malformed PGM header") from exc
    if magic not in (b"P2", b"P5"):
        raise MapFormatError(f"{path}: unsupported PGM magic {magic!r}")
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise MapFormatError(f"{path}: bad PGM dimensions or maxval")
    count = width * height
    if magic == b"P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = data[end + 1:end + 1 + count * dtype.itemsize]
        if len(raw) != count * dtype.itemsize:
            raise MapFormatError(f"{path}: expected {count} pixels, file is truncated")
        pixels = np.frombuffer(raw, dtype=dtype).astype(np.int64)
    else:
        body = data[end:].split()
        if len(body) != count:
            raise MapFormatError(f"{path}: expected {count} pixels, found {len(body)}")
        pixels = np.array([int(tok) for tok in body], dtype=np.int64)
    return pixels.reshape(height, width), maxval


def pixels_to_cells(pixels: np.ndarray, maxval: int, meta: dict) -> np.ndarray:
    scaled = pixels.astype(np.float64) * (255.0 / maxval)
    darkness = scaled if meta.get("negate", 0) else 255.0 - scaled
    cells = np.full(pixels.shape, UNKNOWN, dtype=np.int8)
    cells[darkness >= meta["occupied_thresh"]] = OCCUPIED
    cells[darkness <= meta["free_thresh"]] = FREE
    return cells


def load_map(path: str | os.PathLike) -> OccupancyGrid:
    """Load a PGM (P2/P5) map with its ``.yaml`` sidecar, or an ASCII map.

    ASCII maps use ``#`` (occupied), ``.`` (free) and ``?`` (unknown), one row
    per line. A sidecar is optional for ASCII and supplies resolution/origin.
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    meta_path = sidecar_path(path)
    with open(path, "rb") as fh:
        head = fh.read(2)
    name = os.path.splitext(os.path.basename(path))[0]
    if head in (b"P2", b"P5"):
        if not os.path.exists(meta_path):
            raise MapFormatError(f"{path}: PGM map needs a sidecar at {meta_path}")
        meta = read_sidecar(meta_path)
        pixels, maxval = read_pgm(path)
        cells = pixels_to_cells(pixels, maxval, meta)
        declared = [meta.get(k) for k in ("width", "height")]
        if any(v is not None for v in declared):
            try:
                dw, dh = (int(v) if v is not None else None for v in declared)
            except ValueError as exc:
                raise MapFormatError(f"{meta_path}: bad width/height") from exc
            if (dw is not None and dw != cells.shape[1]) or (dh is not None and dh != cells.shape[0]):
                raise MapFormatError(f"{path}: image is {cells.shape[1]}x{cells.shape[0]}, "
                                     f"sidecar declares {dw}x{dh}")
    else:
        meta = read_sidecar(meta_path) if os.path.exists(meta_path) else dict(DEFAULT_META)
        cells = _parse_ascii(path)
    return OccupancyGrid(cells, meta["resolution"], meta["origin"], meta["closed_world"], name)


def _parse_ascii(path: str) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\r\n") for ln in fh]
    while lines and not lines[-1]:
        lines.pop()
    if not lines:
        raise MapFormatError(f"{path}: empty ASCII map")
    width = len(lines[0])
    rows = []
    for lineno, line in enumerate(lines, 1):
        if len(line) != width:
            raise MapFormatError(f"{path}:{lineno}: row has {len(line)} cells, expected {width}")
        try:
            rows.append([_ASCII_TO_STATE[ch] for ch in line])
        except KeyError as exc:
            raise MapFormatError(f"{path}:{lineno}: unexpected character {exc.args[0]!r}") from exc
    return np.array(rows, dtype=np.int8)


def save_map(grid: OccupancyGrid, path: str | os.PathLike, fmt: str | None = None):
    """Write ``grid`` as PGM (P5, plus sidecar) or ASCII, chosen by extension."""
    path = os.fspath(path)
    fmt = fmt or ("pgm" if path.lower().endswith(".pgm") else "ascii")
    if fmt == "pgm":
        pixels = np.empty(grid.cells.shape, dtype=np.uint8)
        for state, value in _PGM_PIXEL.items():
            pixels[grid.cells == state] = value
        with open(path, "wb") as fh:
            fh.write(f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii"))
            fh.write(pixels.tobytes())
        write_sidecar(sidecar_path(path), grid)
    elif fmt == "ascii":
        with open(path, "w", encoding="utf-8") as fh:
            for row in grid.cells:
                fh.write("".join(_STATE_TO_ASCII[int(v)] for v in row) + "\n")
        if grid.resolution != DEFAULT_META["resolution"] or grid.origin != (0.0, 0.0):
            write_sidecar(sidecar_path(path), grid)
    else:
        raise ValueError(f"unknown map format {fmt!r}")


def write_scaled_pgm(values: np.ndarray, path: str | os.PathLike):
    """Dump a non-negative real field as an 8-bit P5 image scaled to its maximum."""
    vals = np.asarray(values, dtype=np.float64)
    top = vals.max() if vals.size and vals.max() > 0 else 1.0
    pixels = np.clip(np.round(vals / top * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
