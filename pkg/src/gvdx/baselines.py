"""Selection rules of the comparison strategies.

Both baselines see the same frontier sets as the GVD strategy; only the
choice of target differs.
"""
from __future__ import annotations

import math
from typing import Sequence

from .frontiers import Frontier
from .grid import Pose

BASELINES = ("nearest", "greedy")


def baseline_rank(frontiers: Sequence[Frontier], robot: Pose, kind: str) -> list[Frontier]:
    """Frontiers best-first under ``kind``; ties fall back to the cell tuple.

    ``nearest`` ranks by straight-line distance from the robot and ignores
    walls; ``greedy`` ranks by the ``gain`` field, largest first.
    """
    if kind == "nearest":
        key = lambda f: (math.hypot(f.position[0] - robot.x, f.position[1] - robot.y), f.cell)
    elif kind == "greedy":
        key = lambda f: (-f.gain, f.cell)
    else:
        raise ValueError(f"unknown baseline {kind!r}; choose from {', '.join(BASELINES)}")
    return sorted(frontiers, key=key)


def baseline_select(frontiers: Sequence[Frontier], robot: Pose, kind: str) -> Frontier:
    if not frontiers:
        raise ValueError("no frontiers to choose from")
    return baseline_rank(frontiers, robot, kind)[0]
