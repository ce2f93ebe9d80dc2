"""Command line: ``gvdx gvd|plan|explore|bench``.

Exit status is 0 on success, 1 on bad input or configuration and 2 when any
exploration run hit its step cap.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .grid import MapFormatError, load_map, write_scaled_pgm
from .gvd import build_gvd
from .gvd_path import GvdPlanner
from .harness import ConfigError, load_config, render_outputs, resolve_world, run_benchmark
from .plotting import plot_gvd_overlay
from .sim import STRATEGIES, SimConfig, csv_text, run_exploration

EXIT_OK, EXIT_CONFIG, EXIT_TIMEOUT = 0, 1, 2


def _point(text: str) -> tuple[float, float]:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y in meters, got {text!r}") from None
    return x, y


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gvdx", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gvd", help="build the skeleton of a map and print its edge list")
    g.add_argument("--map", required=True)
    g.add_argument("--out", default=".", help="directory for dumps and the overlay figure")
    g.add_argument("--tau", type=float, default=-0.5)
    g.add_argument("--r-min", type=float, default=0.0)
    g.add_argument("--dump-clearance", action="store_true", help="write clearance.pgm")
    g.add_argument("--dump-ridges", action="store_true", help="write ridges.pgm")

    p = sub.add_parser("plan", help="GVD path between two world points")
    p.add_argument("--map", required=True)
    p.add_argument("--from", dest="start", type=_point, required=True)
    p.add_argument("--to", dest="goal", type=_point, required=True)
    p.add_argument("--tau", type=float, default=-0.5)
    p.add_argument("--r-min", type=float, default=0.0)
    p.add_argument("--out", help="also write path.csv and path.svg here")

    e = sub.add_parser("explore", help="run one exploration and write its traces")
    e.add_argument("--world", required=True, help="map file or gen:kind:size:seed")
    e.add_argument("--strategy", choices=STRATEGIES, default="gvd")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--max-steps", type=int, default=SimConfig.max_steps)
    e.add_argument("--out", required=True)
    e.add_argument("--no-figures", action="store_true")

    b = sub.add_parser("bench", help="run a benchmark described by a TOML config")
    b.add_argument("--config", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--no-figures", action="store_true")
    return ap


def cmd_gvd(args) -> int:
    grid = load_map(args.map)
    build = build_gvd(grid, args.tau, args.r_min)
    gvd = build.graph
    os.makedirs(args.out, exist_ok=True)
    if args.dump_clearance:
        clear = np.where(build.binary == 1, 0.0, build.dmap.clearance)
        write_scaled_pgm(clear, os.path.join(args.out, "clearance.pgm"))
    if args.dump_ridges:
        write_scaled_pgm(gvd.mask.astype(float), os.path.join(args.out, "ridges.pgm"))
    plot_gvd_overlay(grid, gvd, os.path.join(args.out, "gvd_overlay.svg"))
    sys.stdout.write(gvd.edge_list_text())
    print(f"# nodes={len(gvd)} components={gvd.n_components if len(gvd) else 0}", file=sys.stderr)
    return EXIT_OK


def cmd_plan(args) -> int:
    grid = load_map(args.map)
    gvd = build_gvd(grid, args.tau, args.r_min).graph
    planner = GvdPlanner(gvd, grid)
    path = planner.path(args.start, args.goal)
    if path is None:
        print("cost,inf")
        print("unreachable", file=sys.stderr)
        return EXIT_OK
    rows = [(i, x, y) for i, (x, y) in enumerate(path.waypoints)]
    print(f"cost,{path.cost!r}")
    sys.stdout.write(csv_text(("i", "x", "y"), rows))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "path.csv"), "w") as fh:
            fh.write(csv_text(("i", "x", "y"), rows))
        plot_gvd_overlay(grid, gvd, os.path.join(args.out, "path.svg"), route=path.waypoints,
                         title=f"GVD path {path.cost:.2f} m")
    return EXIT_OK


def cmd_explore(args) -> int:
    world = resolve_world(args.world, args.seed)
    try:
        cfg = SimConfig(max_steps=args.max_steps)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rec = run_exploration(world, args.strategy, cfg, args.seed)
    render_outputs(rec, world, args.out, figures=not args.no_figures)
    print(f"{rec.world},{rec.strategy},{rec.seed},{rec.reason},"
          f"{rec.total_time:.1f}s,{rec.total_path:.2f}m,{rec.explored_fraction:.4f}")
    return EXIT_TIMEOUT if rec.timed_out else EXIT_OK


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    table = run_benchmark(cfg, args.out, figures=not args.no_figures)
    sys.stdout.write(table.csv())
    return EXIT_TIMEOUT if table.failures else EXIT_OK


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"gvd": cmd_gvd, "plan": cmd_plan, "explore": cmd_explore, "bench": cmd_bench}
    try:
        return handler[args.command](args)
    except (ConfigError, MapFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
