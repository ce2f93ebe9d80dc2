from __future__ import annotations

import numpy as np
import pytest

from gvdx.grid import FREE, OCCUPIED, UNKNOWN, OccupancyGrid

_CHARS = {"#": OCCUPIED, ".": FREE, "?": UNKNOWN}


def grid_from_ascii(text: str, resolution: float = 0.1, **kw) -> OccupancyGrid:
    lines = [ln.strip() for ln in text.strip().splitlines()]
    cells = np.array([[_CHARS[ch] for ch in ln] for ln in lines], dtype=np.int8)
    return OccupancyGrid(cells, resolution, **kw)


def boxed(h: int, w: int, resolution: float = 0.1) -> OccupancyGrid:
    """Free h x w grid with an occupied border."""
    cells = np.zeros((h, w), dtype=np.int8)
    cells[0, :] = cells[-1, :] = cells[:, 0] = cells[:, -1] = OCCUPIED
    return OccupancyGrid(cells, resolution)


def random_binary(rng: np.random.Generator, h: int = 64, w: int = 64, density: float = 0.08,
                  border: bool = True) -> np.ndarray:
    b = (rng.random((h, w)) < density).astype(np.uint8)
    if border:
        b[0, :] = b[-1, :] = b[:, 0] = b[:, -1] = 1
    return b


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: list[tuple[str, bool, str]] = []


def report(criterion: str, passed: bool, detail: str) -> bool:
    line = f"{criterion} {'PASS' if passed else 'FAIL'}: {detail}"
    ACCEPTANCE.append((criterion, passed, detail))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(ACCEPTANCE, key=lambda t: int(t[0][2:])):
        terminalreporter.write_line(f"{criterion} {'PASS' if passed else 'FAIL'}: {detail}")
