#!/usr/bin/env python3
"""
Tests for the acceptance checks on small experiments
"""

import sys
from dataclasses import replace

from acceptance import (check_budget, check_determinism, check_grid_ordering, check_hits_decrease,
                        check_load_ordering, reach_round)
from harness import ExperimentResult, MetricsRow, run_experiment
from sim_config import METHODS, ExperimentConfig

SMALL_GRID = ExperimentConfig(scenario="grid", width=6, height=5, agents=2, targets=4, obstacles=3,
                              runs=3, rounds=6, budget=40)
SMALL_LOAD = ExperimentConfig(scenario="load", agents=3, runs=3, rounds=12, round_length=10, budget=40)


def test_budget_check_on_real_runs():
    results = [run_experiment(replace(SMALL_GRID, method=m), progress=False) for m in METHODS]
    check = check_budget(results)
    assert check.passed and check.measured["violations"] == 0.0


def test_budget_check_flags_bad_rows():
    result = run_experiment(replace(SMALL_LOAD, runs=1), progress=False)
    result.rows[0] = MetricsRow("da-rl", 0, 0, 10, None, 0, 40.0, asks=5, gives=5, budget_left=120)
    assert not check_budget([result]).passed


def test_determinism_check():
    config = replace(SMALL_GRID, runs=2)
    first = run_experiment(config, progress=False)
    assert check_determinism(config, first).passed


def test_hits_and_ordering_checks_report_all_methods():
    grid = {m: run_experiment(replace(SMALL_GRID, method=m), progress=False) for m in METHODS}
    hits = check_hits_decrease(grid)
    assert set(hits.measured) == {f"{m}_{side}" for m in METHODS for side in ("first", "last")}
    load = {m: run_experiment(replace(SMALL_LOAD, method=m), progress=False) for m in METHODS}
    ordering = check_load_ordering(load)
    assert {"da-rl_reward", "sa-rl_reward", "rl_reward"} <= set(ordering.measured)


def synthetic(config, method, value, metric, runs=6, rounds=12):
    """Rows whose metric is value + 0.1 * run_id in every round"""
    rows = []
    for run_id in range(runs):
        for round_id in range(rounds):
            fields = {"steps_total": 50, "steps_per_target": None, "hits": 0, "mean_reward": 0.0}
            fields[metric] = value + 0.1 * run_id
            rows.append(MetricsRow(method, run_id, round_id, asks=0, gives=0,
                                   budget_left=config.agents * config.budget, **fields))
    return ExperimentResult(replace(config, method=method), rows, [])


def test_grid_ordering_passes_on_clear_separation_and_fails_when_reversed():
    steps = {"da-rl": 100.0, "sa-rl": 200.0, "rl": 300.0}
    good = check_grid_ordering({m: synthetic(SMALL_GRID, m, v, "steps_total") for m, v in steps.items()})
    assert good.passed and good.measured["da_rl_gain_over_rl"] > 0.6
    assert 0.0 <= good.measured["da_vs_sa_p"] < 0.01
    reversed_steps = {"da-rl": 300.0, "sa-rl": 200.0, "rl": 100.0}
    assert not check_grid_ordering({m: synthetic(SMALL_GRID, m, v, "steps_total")
                                    for m, v in reversed_steps.items()}).passed


def test_load_ordering_passes_on_clear_separation_and_fails_when_reversed():
    rewards = {"da-rl": 45.0, "sa-rl": 42.0, "rl": 40.0}
    good = check_load_ordering({m: synthetic(SMALL_LOAD, m, v, "mean_reward") for m, v in rewards.items()})
    assert good.passed and good.measured["da_vs_rl_p"] < 0.01
    reversed_rewards = {"da-rl": 40.0, "sa-rl": 42.0, "rl": 45.0}
    assert not check_load_ordering({m: synthetic(SMALL_LOAD, m, v, "mean_reward")
                                    for m, v in reversed_rewards.items()}).passed


def test_reach_round_is_within_run():
    result = run_experiment(SMALL_LOAD, progress=False)
    assert 0 <= reach_round(result, "mean_reward", 5) < SMALL_LOAD.rounds


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
