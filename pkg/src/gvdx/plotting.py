"""SVG figures: trajectory over the map, entropy curves, skeleton overlay."""
from __future__ import annotations

import math
import os
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .grid import FREE, OCCUPIED, OccupancyGrid  # noqa: E402
from .gvd import GvdGraph  # noqa: E402

# fixed ids and no timestamp so identical inputs give identical files
plt.rcParams["svg.hashsalt"] = "gvdx"
_META = {"Date": None, "Creator": "gvdx"}
_STYLE = {"gvd": "tab:blue", "nearest": "tab:orange", "greedy": "tab:green"}


def _map_image(grid: OccupancyGrid) -> np.ndarray:
    img = np.full(grid.cells.shape, 0.75)
    img[grid.cells == FREE] = 1.0
    img[grid.cells == OCCUPIED] = 0.1
    return img


def _show_map(ax, grid: OccupancyGrid):
    x0, y0 = grid.origin
    extent = (x0, x0 + grid.width * grid.resolution, y0, y0 + grid.height * grid.resolution)
    ax.imshow(_map_image(grid), cmap="gray", vmin=0, vmax=1, origin="lower",
              extent=extent, interpolation="nearest")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal")


def polyline_length(points: Sequence[tuple[float, float]]) -> float:
    return sum(math.dist(points[i], points[i + 1]) for i in range(len(points) - 1))


def _save(fig, path: str | os.PathLike):
    fig.savefig(path, format="svg", metadata=_META, bbox_inches="tight")
    plt.close(fig)


def plot_trajectory(grid: OccupancyGrid, points: Sequence[tuple[float, float]],
                    path: str | os.PathLike, title: str = "") -> float:
    """Trajectory over ``grid``, annotated with its polyline length; returns that length."""
    fig, ax = plt.subplots(figsize=(6, 6 * grid.height / max(grid.width, 1) + 0.8))
    _show_map(ax, grid)
    length = polyline_length(points)
    if len(points):
        xy = np.asarray(points, dtype=float)
        ax.plot(xy[:, 0], xy[:, 1], color="tab:red", lw=1.2)
        ax.plot(*xy[0], "o", color="tab:green", ms=5)
        ax.plot(*xy[-1], "s", color="tab:red", ms=5)
    ax.set_title(f"{title}  path {length:.2f} m".strip())
    _save(fig, path)
    return length


def plot_entropy(curves: Mapping[str, Sequence[tuple[float, float]]], path: str | os.PathLike,
                 title: str = "map entropy"):
    """One ``(time, entropy)`` polyline per label; empty curves draw nothing."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, pts in curves.items():
        if not len(pts):
            continue
        xy = np.asarray(pts, dtype=float)
        ax.plot(xy[:, 0], xy[:, 1], label=label, color=_STYLE.get(label))
    if any(len(p) for p in curves.values()):
        ax.legend()
    ax.set_xlabel("time [s]")
    ax.set_ylabel("entropy [bits]")
    ax.set_title(title)
    _save(fig, path)


def plot_gvd_overlay(grid: OccupancyGrid, gvd: GvdGraph | None, path: str | os.PathLike,
                     route: Sequence[tuple[float, float]] | None = None,
                     frontiers: Sequence | None = None, title: str = "GVD"):
    fig, ax = plt.subplots(figsize=(6, 6 * grid.height / max(grid.width, 1) + 0.8))
    _show_map(ax, grid)
    if gvd is not None and not gvd.empty:
        pos = gvd.positions()
        ax.scatter(pos[:, 0], pos[:, 1], s=1.5, color="tab:blue", marker="s", linewidths=0)
    for f in frontiers or ():
        ax.add_patch(plt.Circle(f.position, f.radius, fill=False, color="tab:orange", lw=0.8))
    if route:
        xy = np.asarray(route, dtype=float)
        ax.plot(xy[:, 0], xy[:, 1], color="teal", lw=1.5)
    ax.set_title(title)
    _save(fig, path)
