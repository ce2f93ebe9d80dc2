"""Deterministic 2-D exploration simulator.

A noiseless lidar reveals a ground-truth world into a known map, the planner
picks a frontier, and a rotate-then-translate robot follows the GVD path to
it. Everything is single-threaded and seeded, so a run is a pure function of
(world, strategy, seed, config).
"""
from __future__ import annotations

import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ._kernels import cast_scan
from .assignment import AssignmentParams, Decision, Tier, decide_next, refresh_gains
from .baselines import BASELINES, baseline_rank
from .frontiers import (DEFAULT_DELTA, GLOBAL, Frontier, FrontierLedger, Local, UnknownCounter,
                        extract_scoped, frontier_rows, ledger_update)
from .grid import FREE, OCCUPIED, UNKNOWN, OccupancyGrid, Pose, map_entropy, normalize_angle
from .gvd import DEFAULT_TAU, GvdGraph, build_gvd
from .gvd_path import DEFAULT_ATTACH_CAP, GvdPath, GvdPlanner
from .worlds import World, generate_world, reachable_free  # noqa: F401  (re-exported)

log = logging.getLogger(__name__)

STRATEGIES = ("gvd",) + BASELINES
RUN_COLUMNS = ("step", "sim_time", "x", "y", "heading", "entropy", "path", "tier",
               "n_current", "n_local", "n_global")
DECISION_COLUMNS = ("step", "tier", "target_col", "target_row", "cost", "tour_len")
FRONTIER_COLUMNS = ("step", "kind", "col", "row", "radius_m", "unknown_count")


@dataclass(frozen=True)
class SensorModel:
    range: float = 10.0
    fov: float = math.radians(270.0)
    rays: int = 541

    def __post_init__(self):
        if not self.range > 0:
            raise ValueError("sensor range must be positive")
        if not 0 < self.fov <= 2 * math.pi + 1e-12:
            raise ValueError("sensor fov must lie in (0, 2*pi]")
        if self.rays < 1:
            raise ValueError("sensor needs at least one ray")


@dataclass(frozen=True)
class RobotModel:
    v_max: float = 0.3
    w_max: float = 2.0
    radius: float = 0.18
    dt: float = 0.1

    def __post_init__(self):
        if not (self.v_max > 0 and self.w_max > 0 and self.dt > 0):
            raise ValueError("v_max, w_max and dt must be positive")


@dataclass(frozen=True)
class SimConfig:
    sensor: SensorModel = SensorModel()
    robot: RobotModel = RobotModel()
    sense_every: int = 5
    align_tol: float = 0.2
    delta: int = DEFAULT_DELTA
    tau: float = DEFAULT_TAU
    r_min: float = 0.27
    window: float = 20.0
    count_margin: float = 0.3
    occlusion: bool = True
    attach_cap: float = DEFAULT_ATTACH_CAP
    bridge_cap: float | None = DEFAULT_ATTACH_CAP
    assignment: AssignmentParams = AssignmentParams()
    max_steps: int = 30000
    explored_target: float = 0.995
    initial_spin: bool = True
    blacklist_radius: float = 0.3
    max_replans: int = 5

    def __post_init__(self):
        if self.sense_every < 1:
            raise ValueError("sense_every must be at least 1")
        if not self.align_tol > 0:
            raise ValueError("align_tol must be positive")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if not self.tau < 0:
            raise ValueError("tau must be negative")
        if self.r_min < 0 or self.window <= 0 or self.count_margin < 0:
            raise ValueError("r_min and count_margin must be >= 0 and window > 0")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if not 0 < self.explored_target <= 1:
            raise ValueError("explored_target must lie in (0, 1]")

    @property
    def counter(self) -> UnknownCounter:
        return UnknownCounter(self.count_margin, self.occlusion)


# ------------------------------------------------------------------ sensing


def sense(world: World | OccupancyGrid, known: OccupancyGrid, pose: Pose,
          s: SensorModel = SensorModel()) -> OccupancyGrid:
    """One lidar scan from ``pose``, written into ``known`` in place (and returned)."""
    truth = world.truth if isinstance(world, World) else world
    if truth.cells.shape != known.cells.shape:
        raise ValueError("known map and truth differ in shape")
    res = truth.resolution
    gx = (pose.x - truth.origin[0]) / res
    gy = (pose.y - truth.origin[1]) / res
    cast_scan(truth.cells, known.cells, gx, gy, pose.heading, s.fov, s.rays, s.range / res)
    return known


# ------------------------------------------------------------------ motion


@dataclass(frozen=True)
class Tick:
    pose: Pose
    distance: float
    elapsed: float
    waypoint: int  # index of the waypoint pursued next; len(waypoints) once done
    replan: bool = False


def _waypoints(path) -> Sequence[tuple[float, float]]:
    return path.waypoints if isinstance(path, GvdPath) else path


def advance(pose: Pose, path: GvdPath | Sequence[tuple[float, float]], r: RobotModel = RobotModel(),
            known: OccupancyGrid | None = None, align_tol: float = 0.2, waypoint: int = 0) -> Tick:
    """One tick of rotate-then-translate motion toward the next waypoint.

    The robot turns by at most ``w_max*dt``; only when the remaining heading
    error is within ``align_tol`` does it also move up to ``v_max*dt`` straight
    at the waypoint, stopping on it rather than overshooting. A waypoint cell
    that is Occupied in ``known`` yields a replan tick with no motion.
    """
    pts = _waypoints(path)
    n = len(pts)
    i = waypoint
    while i < n and math.hypot(pts[i][0] - pose.x, pts[i][1] - pose.y) <= 1e-9:
        i += 1
    if i == n:
        return Tick(pose, 0.0, 0.0, n)
    gx, gy = pts[i]
    if known is not None:
        col, row = known.world_to_cell(gx, gy)
        if not known.contains_cell(col, row) or known.cells[row, col] == OCCUPIED:
            return Tick(pose, 0.0, 0.0, i, replan=True)
    dist = math.hypot(gx - pose.x, gy - pose.y)
    bearing = math.atan2(gy - pose.y, gx - pose.x)
    err = normalize_angle(bearing - pose.heading)
    turn = max(-r.w_max * r.dt, min(r.w_max * r.dt, err))
    heading = pose.heading + turn
    if abs(err - turn) > align_tol:
        return Tick(Pose(pose.x, pose.y, heading), 0.0, r.dt, i)
    step = r.v_max * r.dt
    if step >= dist - 1e-12:
        return Tick(Pose(gx, gy, heading), dist, r.dt, i + 1)
    x = pose.x + step * (gx - pose.x) / dist
    y = pose.y + step * (gy - pose.y) / dist
    return Tick(Pose(x, y, heading), step, r.dt, i)


# ------------------------------------------------------------------ records


@dataclass
class RunRecord:
    world: str
    strategy: str
    seed: int
    rows: list[tuple] = field(default_factory=list)
    decisions: list[tuple] = field(default_factory=list)
    frontiers: list[tuple] = field(default_factory=list)
    total_time: float = 0.0
    total_path: float = 0.0
    explored_fraction: float = 0.0
    reason: str = ""
    warning: bool = False
    compute_s: float = 0.0  # planner wall time; not part of any CSV
    stages: tuple[str, ...] = ()
    known: OccupancyGrid | None = None
    gvd: GvdGraph | None = None

    @property
    def timed_out(self) -> bool:
        return self.reason == "timeout"

    def trajectory(self) -> list[tuple[float, float]]:
        return [(r[2], r[3]) for r in self.rows]

    def summary(self) -> dict:
        return {"world": self.world, "strategy": self.strategy, "seed": self.seed,
                "total_time": self.total_time, "total_path": self.total_path,
                "explored_fraction": self.explored_fraction, "reason": self.reason,
                "warning": int(self.warning), "decisions": len(self.decisions)}


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(columns: Sequence[str], rows: Sequence[Sequence]) -> str:
    lines = [",".join(columns)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ exploration loop


def _grid_path_to_skeleton(known: OccupancyGrid, pose: Pose, gvd: GvdGraph) -> list[tuple[float, float]] | None:
    """Breadth-first route over known Free cells to the closest skeleton cell.

    Used only when the robot cannot see the skeleton in a straight line.
    Diagonal moves may not cut the corner of a non-free cell.
    """
    if gvd.empty:
        return None
    free = known.cells == FREE
    target = gvd.mask
    col, row = known.world_to_cell(pose.x, pose.y)
    h, w = free.shape
    prev = {(col, row): None}
    queue = deque([(col, row)])
    moves = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1))
    while queue:
        c, r = queue.popleft()
        if target[r, c]:
            cells = []
            cur = (c, r)
            while cur is not None:
                cells.append(cur)
                cur = prev[cur]
            cells.reverse()
            return [(pose.x, pose.y)] + [known.cell_to_world(*cr) for cr in cells[1:]]
        for dc, dr in moves:
            nc, nr = c + dc, r + dr
            if not (0 <= nc < w and 0 <= nr < h) or not free[nr, nc] or (nc, nr) in prev:
                continue
            if dc and dr and not (free[r, nc] and free[nr, c]):
                continue
            prev[(nc, nr)] = (c, r)
            queue.append((nc, nr))
    return None


class _Explorer:
    def __init__(self, world: World, strategy: str, cfg: SimConfig, seed: int):
        self.world = world
        self.truth = world.truth
        self.strategy = strategy
        self.cfg = cfg
        self.seed = seed
        t = self.truth
        self.known = OccupancyGrid.filled(t.width, t.height, UNKNOWN, resolution=t.resolution,
                                          origin=t.origin, closed_world=t.closed_world,
                                          name=t.name)
        self.reach = reachable_free(t, world.start)
        self.n_reach = int(self.reach.sum())
        self.pose = world.start
        self.tick = 0
        self.path = 0.0
        self.tier = ""
        self.ledger = FrontierLedger()
        self.blacklist: list[tuple[int, int]] = []
        self.rec = RunRecord(world.name, strategy, seed)
        self._stages: list[str] = []
        self._entropy = 0.0

    # bookkeeping ---------------------------------------------------------
    def stage(self, name: str):
        if name not in self._stages:
            self._stages.append(name)

    def scan(self):
        self.stage("sense")
        sense(self.truth, self.known, self.pose, self.cfg.sensor)
        self._entropy = map_entropy(self.known)

    def explored(self) -> float:
        return int(np.count_nonzero((self.known.cells == FREE) & self.reach)) / self.n_reach

    def row(self):
        p = self.pose
        n = self.ledger.counts()
        self.rec.rows.append((self.tick, self.tick * self.cfg.robot.dt, p.x, p.y, p.heading,
                              self._entropy, self.path, self.tier, *n))

    def blacklisted(self, cell: tuple[int, int]) -> bool:
        reach = self.cfg.blacklist_radius / self.known.resolution
        return any((cell[0] - b[0]) ** 2 + (cell[1] - b[1]) ** 2 <= reach * reach + 1e-9
                   for b in self.blacklist)

    def ban(self, f: Frontier):
        self.blacklist.append(f.cell)
        self.ledger.discard([g.cell for g in self.ledger.all() if self.blacklisted(g.cell)])

    # motion --------------------------------------------------------------
    def spin(self):
        """Turn once in place so the rear blind sector gets scanned too."""
        r = self.cfg.robot
        turned = 0.0
        while turned < 2 * math.pi - 1e-9 and self.tick < self.cfg.max_steps:
            d = min(r.w_max * r.dt, 2 * math.pi - turned)
            turned += d
            self.pose = Pose(self.pose.x, self.pose.y, self.pose.heading + d)
            self.tick += 1
            if self.tick % self.cfg.sense_every == 0 or turned >= 2 * math.pi - 1e-9:
                self.scan()
            self.row()

    def follow(self, waypoints, target: Frontier | None, watch: bool) -> str:
        """Drive along ``waypoints``; returns arrived, replan, stale, explored or timeout."""
        cfg, known = self.cfg, self.known
        i = 0
        while True:
            if self.tick >= cfg.max_steps:
                return "timeout"
            t = advance(self.pose, waypoints, cfg.robot, known, cfg.align_tol, i)
            if t.replan:
                return "replan"
            if t.waypoint >= len(waypoints) and t.distance == 0.0 and t.elapsed == 0.0:
                return "arrived"
            col, row = known.world_to_cell(t.pose.x, t.pose.y)
            if known.cells[row, col] != FREE:
                # never drive into a cell the map has not confirmed free
                self.scan()
                if known.cells[row, col] != FREE:
                    return "replan"
            self.stage("advance")
            self.pose = t.pose
            self.path += t.distance
            self.tick += 1
            i = t.waypoint
            sensed = self.tick % cfg.sense_every == 0
            if sensed:
                self.scan()
            self.row()
            if sensed:
                if self.explored() >= cfg.explored_target:
                    return "explored"
                if watch and target is not None:
                    if cfg.counter(known, target.cell, target.radius) <= cfg.delta:
                        return "stale"
                    for c, r in (known.world_to_cell(*p) for p in waypoints[i:]):
                        if known.cells[r, c] == OCCUPIED:
                            return "replan"
            if i >= len(waypoints):
                return "arrived"

    # decisions -----------------------------------------------------------
    def select(self, step: int, planner: GvdPlanner) -> Decision:
        cfg = self.cfg
        robot = self.pose

        def pathcoster(p: Pose, f: Frontier) -> float:
            return planner.cost((p.x, p.y), f.position)

        def pair_cost(a: Frontier, b: Frontier) -> float:
            return planner.cost(a.position, b.position)

        if self.strategy == "gvd":
            self.stage("select:gvd")
            seed = int(np.random.SeedSequence([self.seed, step]).generate_state(1)[0])
            params = replace(cfg.assignment, aco=replace(cfg.assignment.aco, seed=seed))
            return decide_next(self.ledger, robot, self.known, pathcoster, params, pair_cost)
        self.stage(f"select:{self.strategy}")
        pool = refresh_gains(self.known, self.ledger.all(), cfg.assignment.tier2.gain_radius)
        for f in baseline_rank(pool, robot, self.strategy):
            g = pathcoster(robot, f)
            if not math.isinf(g):
                return Decision(Tier.GLOBAL, f, cost=g)
        return Decision(Tier.DONE, warning=bool(pool))

    def decision_label(self, d: Decision) -> str:
        if self.strategy == "gvd" or d.tier == Tier.DONE:
            return d.tier.value
        return self.strategy.capitalize()

    def run(self) -> RunRecord:
        cfg, rec = self.cfg, self.rec
        started = time.perf_counter()
        self.scan()
        self.row()
        if cfg.initial_spin:
            self.spin()
        step = 0
        reason = ""
        stalls = 0
        failures: dict[tuple[int, int], int] = {}
        while not reason:
            if self.explored() >= cfg.explored_target:
                reason = "explored"
                break
            if self.tick >= cfg.max_steps:
                reason = "timeout"
                break
            self.stage("gvd")
            gvd = build_gvd(self.known, cfg.tau, cfg.r_min).graph
            rec.gvd = gvd
            planner = GvdPlanner(gvd, self.known, cfg.attach_cap, cfg.bridge_cap)
            self.stage("extract")
            counter = cfg.counter
            fresh_local = extract_scoped(self.known, gvd, Local(self.pose, cfg.window), cfg.delta,
                                         counter, step)
            fresh_global = extract_scoped(self.known, gvd, GLOBAL, cfg.delta, counter, step)
            fresh_local = [f for f in fresh_local if not self.blacklisted(f.cell)]
            fresh_global = [f for f in fresh_global if not self.blacklisted(f.cell)]
            self.stage("ledger")
            self.ledger = ledger_update(self.ledger, fresh_local, fresh_global, self.known, step,
                                        counter, keep_above=cfg.delta)
            self.ledger.discard([f.cell for f in self.ledger.all() if self.blacklisted(f.cell)])

            if not self.ledger.empty() and planner.attach((self.pose.x, self.pose.y)) is None:
                # off the skeleton: walk to it over known free space first
                route = _grid_path_to_skeleton(self.known, self.pose, gvd)
                if route is not None and len(route) > 1:
                    self.tier = "Rescue"
                    before = self.tick
                    out = self.follow(route, None, False)
                    if out in ("explored", "timeout"):
                        reason = out
                    elif self.tick == before:
                        stalls += 1
                        if stalls > 3:
                            reason = "done"
                            rec.warning = True
                    step += 1
                    continue

            d = self.select(step, planner)
            label = self.decision_label(d)
            rec.frontiers.extend(frontier_rows(step, self.ledger.all()))
            if d.target is None:
                rec.decisions.append((step, label, "", "", "", 0))
                rec.warning = rec.warning or d.warning
                reason = "done"
                break
            rec.decisions.append((step, label, d.target.cell[0], d.target.cell[1],
                                  repr(float(d.cost)), len(d.tour)))
            self.stage("plan")
            path = planner.path((self.pose.x, self.pose.y), d.target.position)
            if path is None:
                self.ban(d.target)
                step += 1
                continue
            self.tier = label
            before_path, before_unknown = self.path, self._entropy
            out = self.follow(path.waypoints, d.target, watch=d.tier != Tier.GLOBAL or
                              self.strategy != "gvd")
            if out in ("explored", "timeout"):
                reason = out
            elif out == "arrived":
                self.ban(d.target)
            elif out == "replan":
                # a target that keeps blocking the robot without revealing anything is dropped
                idle = self.path == before_path and self._entropy == before_unknown
                tries = failures[d.target.cell] = failures.get(d.target.cell, 0) + 1
                if idle or tries >= cfg.max_replans:
                    self.ban(d.target)
            step += 1

        rec.reason = reason
        rec.total_time = self.tick * cfg.robot.dt
        rec.total_path = self.path
        rec.explored_fraction = self.explored()
        rec.stages = tuple(self._stages)
        rec.known = self.known
        rec.compute_s = time.perf_counter() - started
        return rec


def run_exploration(world: World, strategy: str = "gvd", cfg: SimConfig = SimConfig(),
                    seed: int = 0) -> RunRecord:
    """Explore ``world`` until it is covered, no frontier is left, or the step cap hits."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {', '.join(STRATEGIES)}")
    col, row = world.truth.world_to_cell(world.start.x, world.start.y)
    if world.truth.cells[row, col] != FREE:
        raise ValueError("start pose must be on a Free truth cell")
    return _Explorer(world, strategy, cfg, seed).run()


def record_csvs(rec: RunRecord) -> dict[str, str]:
    """CSV texts of a run keyed by their stable file names."""
    return {
        "run.csv": csv_text(RUN_COLUMNS, rec.rows),
        "decisions.csv": csv_text(DECISION_COLUMNS, rec.decisions),
        "frontiers.csv": csv_text(FRONTIER_COLUMNS, rec.frontiers),
        "trajectory.csv": csv_text(("step", "x", "y"), [(r[0], r[2], r[3]) for r in rec.rows]),
    }
