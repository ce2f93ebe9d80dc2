"""Three-tier frontier assignment.

Tier 1 takes the cheapest real-time local frontier by path cost alone, tier 2
the cheapest reserved local frontier with information gain folded in, and
tier 3 orders clustered global frontiers with an ant-colony TSP from a
virtual start.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .frontiers import Frontier, FrontierLedger, count_unknown_in_disc
from .grid import OccupancyGrid, Pose

log = logging.getLogger(__name__)

PathCoster = Callable[[Pose, Frontier], float]


class NoReachableFrontier(RuntimeError):
    """Every candidate in a tier is unreachable along the GVD."""


class Tier(str, enum.Enum):
    REALTIME_LOCAL = "RealtimeLocal"
    RESERVED_LOCAL = "ReservedLocal"
    GLOBAL = "Global"
    DONE = "Done"


@dataclass(frozen=True)
class CostParams:
    lam: float = math.inf  # path length (m) from which information gain counts
    gamma: float = 2.0
    gain_radius: float = 5.0

    def __post_init__(self):
        if not self.gain_radius > 0:
            raise ValueError("gain_radius must be positive")
        if self.lam != math.inf and not self.gamma > 1:
            raise ValueError("gamma must exceed 1 when gain is weighed")


TIER1 = CostParams(lam=math.inf)
TIER2 = CostParams(lam=0.0, gamma=2.0)


@dataclass(frozen=True)
class AcoParams:
    ants: int = 20
    iterations: int = 100
    alpha: float = 1.0
    beta: float = 2.0
    rho: float = 0.5
    q: float = 100.0
    seed: int = 0
    zero_cost_heuristic: float = 1e3

    def __post_init__(self):
        if self.ants < 1 or self.iterations < 1:
            raise ValueError("ants and iterations must be at least 1")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")


@dataclass
class TspInstance:
    """Site 0 is the virtual start (the robot); sites 1..k are frontiers."""
    cost: np.ndarray
    sites: list = field(default_factory=list)

    def __post_init__(self):
        c = np.asarray(self.cost, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 2:
            raise ValueError("cost must be a square matrix over the start and >= 1 frontier")
        if np.any(np.diag(c) != 0) or np.any(c < 0) or np.any(c[1:, 0] != 0):
            raise ValueError("cost needs a zero diagonal, non-negative entries and "
                             "zero-cost returns to the virtual start")
        self.cost = c

    @property
    def k(self) -> int:
        return self.cost.shape[0] - 1


@dataclass(frozen=True)
class Tour:
    order: tuple[int, ...]  # site indices, starting with 0
    cost: float


@dataclass(frozen=True)
class Decision:
    tier: Tier
    target: Frontier | None = None
    tour: tuple[Frontier, ...] = ()
    cost: float = math.nan
    warning: bool = False


def info_gain(grid: OccupancyGrid, f: Frontier, gain_radius: float) -> int:
    """Unknown cells within a fixed radius of the frontier."""
    return count_unknown_in_disc(grid, f.cell, gain_radius)


def frontier_cost(path_cost: float, gain: float, p: CostParams) -> float:
    """``G - t*I`` where ``t`` is 0 below ``lam`` meters and ``gamma`` otherwise."""
    t = 0.0 if path_cost < p.lam else p.gamma
    return path_cost - t * gain


def select_min_cost(frontiers: Sequence[Frontier], robot: Pose, p: CostParams,
                    pathcoster: PathCoster) -> tuple[Frontier, float]:
    """Lowest-cost reachable frontier (ties: lowest row, then column)."""
    if not frontiers:
        raise ValueError("no frontiers to choose from")
    best = None
    for f in frontiers:
        g = pathcoster(robot, f)
        if math.isinf(g):
            continue
        c = frontier_cost(g, f.gain, p)
        if best is None or (c, f.sort_key) < (best[1], best[0].sort_key):
            best = (f, c)
    if best is None:
        raise NoReachableFrontier("no reachable frontier in tier")
    return best


def _rep_key(f: Frontier):
    return (-f.unknown_count, -f.radius, f.cell[1], f.cell[0])


def cluster_global(frontiers: Sequence[Frontier], d_c: float,
                   pair_cost: Callable[[Frontier, Frontier], float]) -> list[tuple[Frontier, list[Frontier]]]:
    """Single-linkage clusters under ``pair_cost`` with merge threshold ``d_c``.

    Returns ``(representative, members)`` pairs; the representative has the
    largest unknown count (then largest radius, then lowest row/column).
    Clusters are listed in order of their representative.
    """
    if not d_c > 0:
        raise ValueError("d_c must be positive")
    n = len(frontiers)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if pair_cost(frontiers[i], frontiers[j]) <= d_c:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[Frontier]] = {}
    for i, f in enumerate(frontiers):
        groups.setdefault(find(i), []).append(f)
    clusters = [(min(members, key=_rep_key), members) for members in groups.values()]
    clusters.sort(key=lambda c: _rep_key(c[0]))
    return clusters


def build_tsp_instance(robot: Pose, sites: Sequence[Frontier], pathcoster: PathCoster,
                       pair_cost: Callable[[Frontier, Frontier], float]) -> TspInstance:
    k = len(sites)
    cost = np.zeros((k + 1, k + 1))
    for i, f in enumerate(sites, 1):
        cost[0, i] = pathcoster(robot, f)
        for j in range(i + 1, k + 1):
            cost[i, j] = cost[j, i] = pair_cost(f, sites[j - 1])
    return TspInstance(cost, list(sites))


def tour_cost(cost: np.ndarray, order: Sequence[int]) -> float:
    return float(sum(cost[order[i], order[i + 1]] for i in range(len(order) - 1)))


def aco_tsp(inst: TspInstance, p: AcoParams = AcoParams()) -> Tour:
    """Ant System over an open tour from site 0; returns the best tour ever built.

    Ants pick the next site with probability proportional to
    ``pheromone**alpha * (1/cost)**beta``; zero-cost edges get a fixed large
    heuristic. After each iteration pheromone evaporates by ``rho`` and each
    ant deposits ``q / tour_length`` on its edges.
    """
    cost = inst.cost
    n = cost.shape[0]
    k = n - 1
    if k == 1:
        return Tour((0, 1), float(cost[0, 1]))
    rng = np.random.default_rng(p.seed)
    with np.errstate(divide="ignore"):
        eta = np.where(cost > 0, 1.0 / np.where(cost > 0, cost, 1.0), p.zero_cost_heuristic)
    np.fill_diagonal(eta, 0.0)
    eta_b = eta ** p.beta
    tau = np.ones((n, n))
    best_order: tuple[int, ...] | None = None
    best_cost = math.inf
    ants = p.ants
    rows = np.arange(ants)
    for _ in range(p.iterations):
        weight = (tau ** p.alpha) * eta_b
        visited = np.zeros((ants, n), dtype=bool)
        visited[:, 0] = True
        pos = np.zeros(ants, dtype=np.int64)
        orders = np.zeros((ants, n), dtype=np.int64)
        lengths = np.zeros(ants)
        for step in range(1, n):
            w = weight[pos] * ~visited
            total = w.sum(axis=1)
            # all-zero weights (pheromone underflow) fall back to uniform choice
            flat = total <= 0
            if flat.any():
                w[flat] = (~visited[flat]).astype(np.float64)
                total[flat] = w[flat].sum(axis=1)
            cdf = np.cumsum(w, axis=1) / total[:, None]
            u = rng.random(ants)
            nxt = (cdf < u[:, None]).sum(axis=1)
            nxt = np.minimum(nxt, n - 1)
            # guard against rounding landing on a visited site
            bad = visited[rows, nxt]
            if bad.any():
                for a in np.flatnonzero(bad):
                    nxt[a] = int(np.flatnonzero(~visited[a])[-1])
            lengths += cost[pos, nxt]
            visited[rows, nxt] = True
            orders[:, step] = nxt
            pos = nxt
        a_best = int(np.argmin(lengths))
        if lengths[a_best] < best_cost:
            best_cost = float(lengths[a_best])
            best_order = tuple(int(x) for x in orders[a_best])
        tau *= (1.0 - p.rho)
        deposit = p.q / np.maximum(lengths, 1e-9)
        for a in range(ants):
            o = orders[a]
            tau[o[:-1], o[1:]] += deposit[a]
            tau[o[1:], o[:-1]] += deposit[a]
    return Tour(best_order, tour_cost(cost, best_order))


@dataclass(frozen=True)
class AssignmentParams:
    tier1: CostParams = TIER1
    tier2: CostParams = TIER2
    d_c: float = 4.0
    aco: AcoParams = AcoParams()


def refresh_gains(grid: OccupancyGrid, frontiers: Sequence[Frontier], gain_radius: float) -> list[Frontier]:
    return [replace(f, gain=info_gain(grid, f, gain_radius)) for f in frontiers]


def decide_next(ledger: FrontierLedger, robot: Pose, grid: OccupancyGrid,
                pathcoster: PathCoster, params: AssignmentParams = AssignmentParams(),
                pair_cost: Callable[[Frontier, Frontier], float] | None = None) -> Decision:
    """Pick the next target, trying the three tiers in strict priority order.

    Reserved and global frontiers with zero information gain are removed from
    ``ledger`` in place before their tier is evaluated.
    """
    unreachable = False
    if ledger.v_current:
        ledger.v_current = refresh_gains(grid, ledger.v_current, params.tier1.gain_radius)
        try:
            f, c = select_min_cost(ledger.v_current, robot, params.tier1, pathcoster)
            return Decision(Tier.REALTIME_LOCAL, f, cost=c)
        except NoReachableFrontier:
            unreachable = True

    ledger.v_local = [f for f in refresh_gains(grid, ledger.v_local, params.tier2.gain_radius)
                      if f.gain > 0]
    if ledger.v_local:
        try:
            f, c = select_min_cost(ledger.v_local, robot, params.tier2, pathcoster)
            return Decision(Tier.RESERVED_LOCAL, f, cost=c)
        except NoReachableFrontier:
            unreachable = True

    ledger.v_global = [f for f in refresh_gains(grid, ledger.v_global, params.tier2.gain_radius)
                       if f.gain > 0]
    if ledger.v_global:
        reachable = [f for f in ledger.v_global if not math.isinf(pathcoster(robot, f))]
        if reachable:
            if pair_cost is None:
                raise ValueError("global assignment needs a frontier-to-frontier pair_cost")
            reps = [rep for rep, _ in cluster_global(reachable, params.d_c, pair_cost)]
            inst = build_tsp_instance(robot, reps, pathcoster, pair_cost)
            tour = aco_tsp(inst, params.aco)
            ordered = tuple(reps[i - 1] for i in tour.order[1:])
            return Decision(Tier.GLOBAL, ordered[0], tour=ordered, cost=tour.cost)
        unreachable = True
    if unreachable:
        log.warning("frontiers remain but none is reachable along the GVD")
    return Decision(Tier.DONE, warning=unreachable)


def decision_row(step: int, d: Decision) -> tuple:
    """Trace row ``step,tier,target_col,target_row,cost,tour_len``."""
    if d.target is None:
        return (step, d.tier.value, "", "", "", 0)
    return (step, d.tier.value, d.target.cell[0], d.target.cell[1], f"{d.cost:.6f}", len(d.tour))
