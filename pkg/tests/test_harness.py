from __future__ import annotations

import csv
import math
import os

import pytest

from gvdx.harness import (BenchmarkConfig, ConfigError, config_from_dict, load_config, pct_vs,
                          pool_size, render_outputs, resolve_world, run_benchmark,
                          run_summary_from_csv, summarize, world_label)
from gvdx.sim import SimConfig, run_exploration


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_pct_convention():
    assert pct_vs(100.0, 100.0) == 0.0
    assert pct_vs(200.0, 150.0) == 25.0
    assert pct_vs(100.0, 150.0) == -50.0
    assert pct_vs(0.0, 0.0) == 0.0 and pct_vs(0.0, 1.0) == -math.inf


def test_summarize_examples():
    runs = [
        {"world": "w", "strategy": "gvd", "total_time": 10.0, "total_path": 4.0, "reason": "explored"},
        {"world": "w", "strategy": "gvd", "total_time": 20.0, "total_path": 6.0, "reason": "timeout"},
        {"world": "w", "strategy": "greedy", "total_time": 30.0, "total_path": 10.0, "reason": "done"},
    ]
    t = summarize(runs)
    gvd, greedy = t.row("w", "gvd"), t.row("w", "greedy")
    assert gvd["runs"] == 2 and gvd["failures"] == 1 and t.failures == 1
    assert gvd["time_mean"] == 15.0 and gvd["path_min"] == 4.0 and gvd["path_max"] == 6.0
    assert gvd["time_pct_vs_gvd"] == 0.0
    assert greedy["time_pct_vs_gvd"] == 50.0 and greedy["path_pct_vs_gvd"] == 50.0
    with pytest.raises(KeyError):
        t.row("w", "nearest")


def test_summary_without_gvd_leaves_percent_blank():
    t = summarize([{"world": "w", "strategy": "nearest", "total_time": 1.0, "total_path": 1.0,
                    "reason": "explored"}])
    assert t.rows[0]["time_pct_vs_gvd"] == ""


def test_config_parsing(tmp_path):
    p = tmp_path / "bench.toml"
    p.write_text("""
[benchmark]
worlds = ["gen:rooms:40:1", "gen:open:40"]
strategies = ["gvd", "greedy"]
trials = 2
max_steps = 500

[params]
delta = 8
lam = 0.5
d_c = 3

[sensor]
fov_deg = 180

[aco]
ants = 5
""")
    cfg = load_config(p)
    assert cfg.seeds == (0, 1) and cfg.strategies == ("gvd", "greedy")
    assert cfg.sim.delta == 8 and cfg.sim.max_steps == 500
    assert cfg.sim.sensor.fov == pytest.approx(math.pi)
    assert cfg.sim.assignment.tier2.lam == 0.5 and cfg.sim.assignment.d_c == 3.0
    assert cfg.sim.assignment.aco.ants == 5
    assert len(cfg.cells()) == 8


@pytest.mark.parametrize("doc,msg", [
    ({}, "worlds"),
    ({"benchmark": {"worlds": ["gen:open:40"], "strategies": ["astar"]}}, "unknown strategies"),
    ({"benchmark": {"worlds": ["gen:open:40"], "trials": 0}}, "trials"),
    ({"benchmark": {"worlds": ["gen:open:40"], "color": 1}}, "unknown keys"),
    ({"benchmark": {"worlds": ["gen:open:40"]}, "params": {"delta": "ten"}}, "delta"),
    ({"benchmark": {"worlds": ["gen:open:40"]}, "params": {"tau": 1.0}}, "tau"),
    ({"benchmark": {"worlds": ["gen:open:40"]}, "sensor": {"range": -1.0}}, "range"),
    ({"benchmark": {"worlds": ["gen:open:40"]}, "params": {"d_c": 0}}, "d_c"),
    ({"benchmark": {"worlds": ["gen:open:40"], "seeds": []}}, "non-empty"),
])
def test_config_errors(doc, msg):
    with pytest.raises(ConfigError, match=msg):
        config_from_dict(doc)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[benchmark\nworlds=")
    with pytest.raises(ConfigError, match="TOML"):
        load_config(bad)


def test_resolve_world(tmp_path):
    w = resolve_world("gen:maze:40:3")
    assert w.name == "maze-40x40-s3" and w.seed == 3
    assert resolve_world("gen:maze:40", seed=3).truth == w.truth
    assert world_label("gen:maze:40:3") == "maze-40-3"
    with pytest.raises(ConfigError, match="bad world spec"):
        resolve_world("gen:cave:40")
    with pytest.raises(ConfigError, match="bad world spec"):
        resolve_world("gen:rooms:5")
    with pytest.raises(ConfigError, match="not found"):
        resolve_world(str(tmp_path / "nope.pgm"))


def test_resolve_world_from_file(tmp_path):
    p = tmp_path / "box.txt"
    p.write_text("#######\n#.....#\n#.....#\n#######\n")
    w = resolve_world(str(p))
    assert w.name == "box" and world_label(str(p)) == "box"


def test_pool_size(monkeypatch):
    monkeypatch.setenv("GVDX_THREADS", "3")
    assert pool_size(10) == 3 and pool_size(2) == 2
    monkeypatch.setenv("GVDX_THREADS", "x")
    with pytest.raises(ConfigError):
        pool_size(4)
    monkeypatch.delenv("GVDX_THREADS")
    assert 1 <= pool_size(4) <= 4


@pytest.fixture(scope="module")
def bench(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench")
    cfg = BenchmarkConfig(("gen:open:40:2",), ("gvd", "nearest"), (0,))
    return out, cfg, run_benchmark(cfg, out, figures=True, workers=1)


def test_benchmark_cardinality_and_files(bench):
    out, _, table = bench
    runs = sorted(os.listdir(out / "runs"))
    assert runs == ["open-40-2__gvd__s0.csv", "open-40-2__nearest__s0.csv"]
    assert len(table.rows) == 2 and table.failures == 0
    assert (out / "summary.csv").read_text() == table.csv()
    for name in ("open-40-2__entropy.svg", "open-40-2__gvd__trajectory.svg",
                 "open-40-2__nearest__trajectory.svg", "runs.csv"):
        assert (out / name).exists()


def test_summary_recomputes_from_run_csvs(bench):
    out, _, table = bench
    runs = []
    for row in _read(out / "runs.csv"):
        stem = f"{row['world']}__{row['strategy']}__s{row['seed']}.csv"
        s = run_summary_from_csv(out / "runs" / stem)
        assert s["total_time"] == float(row["total_time"])
        assert s["total_path"] == float(row["total_path"])
        runs.append({**s, "world": row["world"], "strategy": row["strategy"],
                     "reason": row["reason"]})
    assert summarize(runs).csv() == table.csv()


def test_parallel_pool_matches_serial(bench, tmp_path, monkeypatch):
    out, cfg, table = bench
    table2 = run_benchmark(cfg, tmp_path, figures=False, workers=2)
    assert table2.csv() == table.csv()
    for name in os.listdir(out / "runs"):
        assert (tmp_path / "runs" / name).read_bytes() == (out / "runs" / name).read_bytes()


def test_timeouts_counted_not_raised(tmp_path):
    cfg = BenchmarkConfig(("gen:maze:48:0",), ("gvd",), (0,), SimConfig(max_steps=30))
    table = run_benchmark(cfg, tmp_path, figures=False, workers=1)
    assert table.failures == 1
    assert _read(tmp_path / "runs.csv")[0]["reason"] == "timeout"


def test_render_outputs(tmp_path):
    w = resolve_world("gen:open:40:1")
    rec = run_exploration(w, "gvd", SimConfig(), 1)
    written = render_outputs(rec, w, tmp_path)
    names = sorted(os.path.basename(p) for p in written)
    assert names == sorted(["run.csv", "decisions.csv", "frontiers.csv", "trajectory.csv",
                            "summary.csv", "known_map.pgm", "trajectory.svg", "entropy.svg",
                            "gvd_overlay.svg"])
    svg = (tmp_path / "trajectory.svg").read_text()
    assert f"path {rec.total_path:.2f} m" in svg
