#!/usr/bin/env python3
"""
Tests for replica execution, aggregation, sweeps and CSV output
"""

import math
import random
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

from harness import (CSV_HEADER, aggregate_rows, aggregate_to_csv, compare_methods, neighbor_ids, rows_to_csv,
                     run_experiment, run_replica, sweep, write_experiment)
from sim_config import ConfigError, ExperimentConfig

SMALL_GRID = ExperimentConfig(scenario="grid", width=6, height=5, agents=2, targets=4, obstacles=3,
                              runs=2, rounds=3, budget=50)
SMALL_LOAD = ExperimentConfig(scenario="load", agents=3, item_types=2, max_stock=3, runs=2, rounds=4,
                              round_length=20, budget=50)


def strip_method(rows):
    return [row.as_list()[1:] for row in rows]


def test_neighbor_topologies():
    assert neighbor_ids(1, 4, "complete") == [0, 2, 3]
    assert neighbor_ids(0, 4, "ring") == [1, 3]
    assert neighbor_ids(0, 2, "ring") == [1]
    assert neighbor_ids(0, 1, "complete") == []


def test_replica_is_deterministic():
    for config in (SMALL_GRID, SMALL_LOAD):
        assert rows_to_csv(run_replica(config, 1)) == rows_to_csv(run_replica(config, 1))
        assert rows_to_csv(run_replica(config, 0)) != rows_to_csv(run_replica(config, 1))


def test_rl_never_communicates():
    for row in run_replica(replace(SMALL_GRID, method="rl"), 0):
        assert row.asks == 0 and row.gives == 0 and row.budget_left == 2 * 50


def test_zero_budget_methods_equal_rl():
    rl = run_replica(replace(SMALL_GRID, method="rl", budget=0), 0)
    for method in ("da-rl", "sa-rl"):
        rows = run_replica(replace(SMALL_GRID, method=method, budget=0), 0)
        assert strip_method(rows) == strip_method(rl), method
    rl_load = run_replica(replace(SMALL_LOAD, method="rl", budget=0), 0)
    da_load = run_replica(replace(SMALL_LOAD, method="da-rl", budget=0), 0)
    assert strip_method(da_load) == strip_method(rl_load)


def test_rows_keep_budget_and_step_invariants():
    for method in ("da-rl", "sa-rl"):
        config = replace(SMALL_GRID, method=method)
        previous_left = config.agents * config.budget
        for row in run_replica(config, 0):
            assert row.asks + row.gives == config.agents * config.budget - row.budget_left
            assert row.budget_left <= previous_left
            previous_left = row.budget_left
            assert row.steps_total > 0
            assert abs(row.steps_per_target - row.steps_total / config.targets) < 1e-9


def test_grid_with_map_file_and_fixed_layout():
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "room.map"
        path.write_text("T....\n.##..\n...T.\n")
        rows = run_replica(replace(SMALL_GRID, map_file=str(path)), 0)
    assert len(rows) == 3 and all(row.steps_per_target == row.steps_total / 2 for row in rows)
    fixed = run_replica(replace(SMALL_GRID, fixed_layout=True), 0)
    assert len(fixed) == 3


def test_round_cap_stops_long_rounds():
    rows = run_replica(replace(SMALL_GRID, max_round_steps=5, method="rl"), 0)
    assert all(row.steps_total <= 5 for row in rows)


def test_load_rows():
    rows = run_replica(SMALL_LOAD, 0)
    assert [row.round_id for row in rows] == [0, 1, 2, 3]
    for row in rows:
        assert row.steps_total == 20 and row.steps_per_target is None and row.hits == 0
        assert row.mean_reward <= 50.0


def test_single_run_aggregate_equals_replica():
    config = replace(SMALL_GRID, runs=1)
    result = run_experiment(config, progress=False)
    replica = run_replica(config, 0)
    for agg in result.aggregate:
        row = replica[agg.round_id]
        assert agg.n == 1 and agg.stderr == 0.0
        assert agg.mean == float(getattr(row, agg.metric))


def test_aggregation_ignores_row_order():
    rows = run_experiment(replace(SMALL_LOAD, runs=4), progress=False).rows
    shuffled = list(rows)
    random.Random(3).shuffle(shuffled)
    assert aggregate_to_csv(aggregate_rows(rows)) == aggregate_to_csv(aggregate_rows(shuffled))


def test_process_pool_matches_sequential():
    sequential = run_experiment(replace(SMALL_LOAD, runs=3), progress=False)
    pooled = run_experiment(replace(SMALL_LOAD, runs=3, workers=2), progress=False)
    assert rows_to_csv(sequential.rows) == rows_to_csv(pooled.rows)


def test_csv_header_and_outputs():
    result = run_experiment(replace(SMALL_GRID, audit_log=True), progress=False)
    text = rows_to_csv(result.rows)
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    assert CSV_HEADER == ["method", "run_id", "round_id", "steps_total", "steps_per_target", "hits",
                          "mean_reward", "asks", "gives", "budget_left"]
    assert len(text.splitlines()) == 1 + 2 * 3
    assert set(result.audits) == {0, 1}
    with tempfile.TemporaryDirectory() as tmp:
        paths = write_experiment(result, Path(tmp))
        assert paths["metrics"].read_text() == text
        assert (Path(tmp) / "audit" / "replica_0.csv").exists()


def test_sweep_long_format():
    text = sweep(replace(SMALL_LOAD, runs=1, rounds=2), "agents", ["2", "3"], progress=False)
    lines = text.splitlines()
    assert lines[0] == "axis,value,method,round_id,metric,mean,stderr,n"
    assert {line.split(",")[1] for line in lines[1:]} == {"2", "3"}
    assert {line.split(",")[2] for line in lines[1:]} == {"da-rl", "sa-rl", "rl"}


def test_sweep_size_axis_and_errors():
    text = sweep(replace(SMALL_GRID, runs=1, rounds=1), "size", ["6x5", "7x6"], methods=("rl",), progress=False)
    assert {line.split(",")[1] for line in text.splitlines()[1:]} == {"6x5", "7x6"}
    for axis, values in (("agents", []), ("size", ["big"]), ("agents", ["0"])):
        try:
            sweep(SMALL_GRID, axis, values, progress=False)
            assert False, f"{axis}={values} accepted"
        except ConfigError:
            pass


def test_compare_methods():
    da = run_experiment(replace(SMALL_LOAD, runs=4), progress=False).rows
    rl = run_experiment(replace(SMALL_LOAD, runs=4, method="rl"), progress=False).rows
    comparison = compare_methods(da, rl, "mean_reward", window=2)
    assert comparison.metric == "mean_reward"
    assert 0.0 <= comparison.p_value <= 1.0
    assert comparison.mean_a <= 50.0 and comparison.mean_b <= 50.0


def test_compare_methods_with_one_replica():
    da = run_experiment(replace(SMALL_LOAD, runs=1), progress=False).rows
    rl = run_experiment(replace(SMALL_LOAD, runs=1, method="rl"), progress=False).rows
    comparison = compare_methods(da, rl, "mean_reward", window=2)
    assert comparison.stderr_a == 0.0 and comparison.stderr_b == 0.0
    assert math.isnan(comparison.p_value) and math.isnan(comparison.t_statistic)


def test_load_with_many_item_types_keeps_reward_bounded():
    config = replace(SMALL_LOAD, item_types=7, max_stock=3, runs=1, rounds=6)
    for row in run_replica(config, 0):
        assert row.mean_reward <= 50.0


if __name__ == "__main__":
    success = True
    for name, test in list(globals().items()):
        if name.startswith("test_") and callable(test):
            try:
                test()
                print(f"✅ {name}")
            except Exception as e:
                print(f"❌ {name}: {e!r}")
                success = False
    sys.exit(0 if success else 1)
