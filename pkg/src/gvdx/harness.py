"""Benchmark orchestration: configs, parallel runs, summary tables and output files."""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import tomli

from .assignment import AcoParams, AssignmentParams, CostParams
from .baselines import BASELINES, baseline_rank, baseline_select  # noqa: F401  (re-exported)
from .grid import load_map, save_map
from .plotting import plot_entropy, plot_gvd_overlay, plot_trajectory
from .sim import (STRATEGIES, RobotModel, RunRecord, SensorModel, SimConfig, World, csv_text,
                  record_csvs, run_exploration)
from .worlds import KINDS, generate_world, world_from_grid

SUMMARY_COLUMNS = ("world", "strategy", "runs", "failures",
                   "time_mean", "time_min", "time_max", "path_mean", "path_min", "path_max",
                   "time_pct_vs_gvd", "path_pct_vs_gvd")
RUNS_COLUMNS = ("world", "strategy", "seed", "total_time", "total_path", "explored_fraction",
                "reason", "warning", "decisions")


class ConfigError(ValueError):
    """Invalid benchmark configuration."""


# ------------------------------------------------------------------ worlds


def resolve_world(spec: str, seed: int = 0) -> World:
    """``gen:kind:size[:seed]`` builds a world (seed defaults to ``seed``); else a map file."""
    if spec.startswith("gen:"):
        parts = spec.split(":")
        if len(parts) not in (3, 4) or parts[1] not in KINDS:
            raise ConfigError(f"bad world spec {spec!r}; expected gen:<{'|'.join(KINDS)}>:<size>[:seed]")
        try:
            wseed = int(parts[3]) if len(parts) == 4 else seed
            return generate_world(parts[1], parts[2], wseed)
        except ValueError as exc:
            raise ConfigError(f"bad world spec {spec!r}: {exc}") from exc
    if not os.path.exists(spec):
        raise ConfigError(f"world file {spec!r} not found")
    return world_from_grid(load_map(spec), os.path.splitext(os.path.basename(spec))[0], seed)


def world_label(spec: str) -> str:
    if spec.startswith("gen:"):
        return "-".join(spec.split(":")[1:])
    return os.path.splitext(os.path.basename(spec))[0]


# ------------------------------------------------------------------ config


@dataclass(frozen=True)
class BenchmarkConfig:
    worlds: tuple[str, ...]
    strategies: tuple[str, ...] = STRATEGIES
    seeds: tuple[int, ...] = (0,)
    sim: SimConfig = SimConfig()

    def __post_init__(self):
        if not self.worlds or not self.strategies or not self.seeds:
            raise ConfigError("worlds, strategies and seeds must all be non-empty")
        bad = [s for s in self.strategies if s not in STRATEGIES]
        if bad:
            raise ConfigError(f"unknown strategies {bad}; choose from {list(STRATEGIES)}")

    def cells(self) -> list[tuple[str, str, int]]:
        return [(w, s, seed) for w in self.worlds for s in self.strategies for seed in self.seeds]


def _table(doc: dict, name: str) -> dict:
    t = doc.get(name, {})
    if not isinstance(t, dict):
        raise ConfigError(f"[{name}] must be a table")
    return t


def _pick(table: dict, name: str, allowed: dict) -> dict:
    unknown = set(table) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    out = {}
    for key, value in table.items():
        kind = allowed[key]
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
            raise ConfigError(f"[{name}] {key} must be {kind.__name__}")
        out[key] = value
    return out


def config_from_dict(doc: dict) -> BenchmarkConfig:
    """Build a config from the parsed TOML document (see README for the keys)."""
    bench = _table(doc, "benchmark")
    worlds = bench.get("worlds")
    if not isinstance(worlds, list) or not all(isinstance(w, str) for w in worlds):
        raise ConfigError("[benchmark] worlds must be a list of strings")
    strategies = bench.get("strategies", list(STRATEGIES))
    seeds = bench.get("seeds")
    trials = bench.get("trials")
    if seeds is None:
        if trials is None:
            seeds = [0]
        elif isinstance(trials, int) and trials >= 1:
            seeds = list(range(trials))
        else:
            raise ConfigError("[benchmark] trials must be a positive integer")
    if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("[benchmark] seeds must be a list of integers")
    extra = set(bench) - {"worlds", "strategies", "seeds", "trials", "max_steps"}
    if extra:
        raise ConfigError(f"unknown keys in [benchmark]: {sorted(extra)}")

    p = _pick(_table(doc, "params"), "params", {
        "delta": int, "tau": float, "r_min": float, "window": float, "gamma": float,
        "lam": float, "gain_radius": float, "d_c": float, "sense_every": int,
        "align_tol": float, "count_margin": float, "occlusion": bool, "attach_cap": float,
        "explored_target": float, "initial_spin": bool})
    sensor = _pick(_table(doc, "sensor"), "sensor", {"range": float, "fov_deg": float, "rays": int})
    robot = _pick(_table(doc, "robot"), "robot",
                  {"v_max": float, "w_max": float, "radius": float, "dt": float})
    aco = _pick(_table(doc, "aco"), "aco", {"ants": int, "iterations": int, "alpha": float,
                                            "beta": float, "rho": float, "q": float})
    try:
        if "fov_deg" in sensor:
            sensor["fov"] = math.radians(sensor.pop("fov_deg"))
        gain_radius = p.pop("gain_radius", 5.0)
        tier1 = CostParams(lam=math.inf, gain_radius=gain_radius)
        tier2 = CostParams(lam=p.pop("lam", 0.0), gamma=p.pop("gamma", 2.0), gain_radius=gain_radius)
        assignment = AssignmentParams(tier1, tier2, p.pop("d_c", 4.0), AcoParams(**aco))
        if not assignment.d_c > 0:
            raise ValueError("d_c must be positive")
        kw = dict(p)
        if "max_steps" in bench:
            kw["max_steps"] = bench["max_steps"]
        sim = SimConfig(sensor=SensorModel(**sensor), robot=RobotModel(**robot),
                        assignment=assignment, **kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return BenchmarkConfig(tuple(worlds), tuple(strategies), tuple(seeds), sim)


def load_config(path: str | os.PathLike) -> BenchmarkConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config {path} is not valid TOML: {exc}") from exc
    return config_from_dict(doc)


# ------------------------------------------------------------------ summary


@dataclass
class SummaryTable:
    rows: list[dict] = field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(r["failures"] for r in self.rows)

    def row(self, world: str, strategy: str) -> dict:
        for r in self.rows:
            if r["world"] == world and r["strategy"] == strategy:
                return r
        raise KeyError((world, strategy))

    def csv(self) -> str:
        return csv_text(SUMMARY_COLUMNS, [tuple(r[c] for c in SUMMARY_COLUMNS) for r in self.rows])


def pct_vs(other: float, ours: float) -> float:
    """Relative saving of ``ours`` against ``other``, in percent of ``other``."""
    if other == 0:
        return 0.0 if ours == 0 else -math.inf
    return (other - ours) / other * 100.0


def summarize(runs: Iterable[dict]) -> SummaryTable:
    """Aggregate per-run summaries (``world, strategy, total_time, total_path, reason``)."""
    groups: dict[tuple[str, str], list[dict]] = {}
    for r in runs:
        groups.setdefault((r["world"], r["strategy"]), []).append(r)
    table = SummaryTable()
    means: dict[tuple[str, str], tuple[float, float]] = {}
    for key, items in groups.items():
        times = [float(r["total_time"]) for r in items]
        paths = [float(r["total_path"]) for r in items]
        means[key] = (sum(times) / len(times), sum(paths) / len(paths))
        table.rows.append({
            "world": key[0], "strategy": key[1], "runs": len(items),
            "failures": sum(r["reason"] == "timeout" for r in items),
            "time_mean": means[key][0], "time_min": min(times), "time_max": max(times),
            "path_mean": means[key][1], "path_min": min(paths), "path_max": max(paths),
        })
    for row in table.rows:
        ours = means.get((row["world"], "gvd"))
        if ours is None:
            row["time_pct_vs_gvd"] = row["path_pct_vs_gvd"] = ""
        else:
            row["time_pct_vs_gvd"] = pct_vs(row["time_mean"], ours[0])
            row["path_pct_vs_gvd"] = pct_vs(row["path_mean"], ours[1])
    return table


def run_summary_from_csv(path: str | os.PathLike) -> dict:
    """Total time and path of one run, read back from its per-tick CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    last = rows[-1]
    return {"total_time": float(last["sim_time"]), "total_path": float(last["path"])}


# ------------------------------------------------------------------ outputs


def write_text(path: str | os.PathLike, text: str):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def entropy_curve(rec: RunRecord) -> list[tuple[float, float]]:
    return [(r[1], r[5]) for r in rec.rows]


def render_outputs(rec: RunRecord, world: World, out_dir: str | os.PathLike,
                   figures: bool = True) -> list[str]:
    """CSV traces, final known map and SVG figures of one run; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, text in record_csvs(rec).items():
        p = os.path.join(out_dir, name)
        write_text(p, text)
        written.append(p)
    s = rec.summary()
    p = os.path.join(out_dir, "summary.csv")
    write_text(p, csv_text(RUNS_COLUMNS, [tuple(s[c] for c in RUNS_COLUMNS)]))
    written.append(p)
    if rec.known is not None:
        p = os.path.join(out_dir, "known_map.pgm")
        save_map(rec.known, p)
        written.append(p)
    if figures:
        p = os.path.join(out_dir, "trajectory.svg")
        plot_trajectory(world.truth, rec.trajectory(), p, title=f"{rec.world} {rec.strategy}")
        written.append(p)
        p = os.path.join(out_dir, "entropy.svg")
        plot_entropy({rec.strategy: entropy_curve(rec)}, p, title=f"{rec.world} map entropy")
        written.append(p)
        p = os.path.join(out_dir, "gvd_overlay.svg")
        plot_gvd_overlay(rec.known if rec.known is not None else world.truth, rec.gvd, p,
                         route=rec.trajectory(), title=f"{rec.world} final GVD")
        written.append(p)
    return written


def _run_cell(args):
    spec, strategy, seed, sim = args
    world = resolve_world(spec, seed)
    return run_exploration(world, strategy, sim, seed)


def pool_size(n_tasks: int) -> int:
    env = os.environ.get("GVDX_THREADS", "").strip()
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise ConfigError(f"GVDX_THREADS must be an integer, got {env!r}") from None
    return max(1, min(cap, n_tasks))


def run_records(cfg: BenchmarkConfig, workers: int | None = None) -> list[tuple[str, RunRecord]]:
    """All (world spec, record) pairs in config order; runs in a process pool when allowed."""
    cells = cfg.cells()
    for spec in dict.fromkeys(w for w, _, _ in cells):
        resolve_world(spec, cfg.seeds[0])  # fail fast on bad specs
    tasks = [(w, s, seed, cfg.sim) for w, s, seed in cells]
    workers = pool_size(len(tasks)) if workers is None else workers
    if workers <= 1:
        records = [_run_cell(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            records = list(ex.map(_run_cell, tasks))
    return [(w, r) for (w, _, _), r in zip(cells, records)]


def run_benchmark(cfg: BenchmarkConfig, out_dir: str | os.PathLike, figures: bool = True,
                  workers: int | None = None) -> SummaryTable:
    """Run every (world, strategy, seed) cell and write per-run and summary CSVs under ``out_dir``."""
    os.makedirs(os.path.join(out_dir, "runs"), exist_ok=True)
    results = run_records(cfg, workers)
    summaries = []
    for spec, rec in results:
        label = world_label(spec)
        stem = f"{label}__{rec.strategy}__s{rec.seed}"
        write_text(os.path.join(out_dir, "runs", stem + ".csv"), record_csvs(rec)["run.csv"])
        s = rec.summary()
        s["world"] = label
        summaries.append(s)
    write_text(os.path.join(out_dir, "runs.csv"),
               csv_text(RUNS_COLUMNS, [tuple(s[c] for c in RUNS_COLUMNS) for s in summaries]))
    table = summarize(summaries)
    write_text(os.path.join(out_dir, "summary.csv"), table.csv())
    if figures:
        first = cfg.seeds[0]
        for spec in cfg.worlds:
            label = world_label(spec)
            recs = {r.strategy: r for w, r in results if w == spec and r.seed == first}
            plot_entropy({k: entropy_curve(r) for k, r in recs.items()},
                         os.path.join(out_dir, f"{label}__entropy.svg"), title=f"{label} map entropy")
            world = resolve_world(spec, first)
            for strategy, r in recs.items():
                plot_trajectory(world.truth, r.trajectory(),
                                os.path.join(out_dir, f"{label}__{strategy}__trajectory.svg"),
                                title=f"{label} {strategy}")
    return table
