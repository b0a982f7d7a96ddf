#!/usr/bin/env python3
"""
Desk-scale acceptance run
Runs the three methods on the small grid and load configurations and
reports method ordering, hit convergence, budget accounting and
determinism, in the same pass/fail format as the verification suite.
"""

import math
from dataclasses import replace
from typing import Dict, List, Optional

import numpy as np
from loguru import logger

from harness import (ExperimentResult, MethodComparison, MetricsRow, aggregate_rows, compare_methods,
                     final_window_means, rows_to_csv, run_experiment)
from sim_config import METHODS, ExperimentConfig, preset_config
from verify import CheckResult, VerificationReport

GRID_WINDOW = 5
LOAD_WINDOW = 10
MIN_GRID_GAIN = 0.05
REACH_FRACTION = 0.95


def _window_mean(rows: List[MetricsRow], metric: str, window: int, first: bool = False) -> float:
    samples = final_window_means(rows, metric, window, first)
    return float(samples.mean()) if samples.size else math.nan


def _disjoint(lower: MethodComparison) -> bool:
    """mean_a + 2 stderr_a below mean_b - 2 stderr_b"""
    return lower.mean_a + 2 * lower.stderr_a < lower.mean_b - 2 * lower.stderr_b


def check_grid_ordering(results: Dict[str, ExperimentResult]) -> CheckResult:
    """DA-RL < SA-RL < RL on final-window steps, 2-stderr intervals disjoint, DA-RL >= 5% below RL"""
    da_sa = compare_methods(results["da-rl"].rows, results["sa-rl"].rows, "steps_total", GRID_WINDOW)
    sa_rl = compare_methods(results["sa-rl"].rows, results["rl"].rows, "steps_total", GRID_WINDOW)
    da, sa, rl = da_sa.mean_a, sa_rl.mean_a, sa_rl.mean_b
    gain = 1.0 - da / rl if rl else 0.0
    return CheckResult("grid_method_ordering", _disjoint(da_sa) and _disjoint(sa_rl) and gain >= MIN_GRID_GAIN,
                       {"da-rl_steps": da, "sa-rl_steps": sa, "rl_steps": rl, "da_rl_gain_over_rl": gain,
                        "da_vs_sa_p": da_sa.p_value, "sa_vs_rl_p": sa_rl.p_value},
                       {"da_rl_gain_over_rl": MIN_GRID_GAIN},
                       f"steps {da:.1f} < {sa:.1f} < {rl:.1f}, gain {gain:.1%}, "
                       f"Welch p {da_sa.p_value:.3g} / {sa_rl.p_value:.3g}")


def reach_round(result: ExperimentResult, metric: str, window: int) -> int:
    """First round whose mean reaches 95% of the final-window mean"""
    curve = [row.mean for row in aggregate_rows(result.rows) if row.metric == metric]
    final = float(np.mean(curve[-window:]))
    for round_id, value in enumerate(curve):
        if value >= REACH_FRACTION * final:
            return round_id
    return len(curve) - 1


def check_load_ordering(results: Dict[str, ExperimentResult]) -> CheckResult:
    da_rl = compare_methods(results["da-rl"].rows, results["rl"].rows, "mean_reward", LOAD_WINDOW)
    sa = _window_mean(results["sa-rl"].rows, "mean_reward", LOAD_WINDOW)
    da, rl = da_rl.mean_a, da_rl.mean_b
    margin = 2 * math.hypot(da_rl.stderr_a, da_rl.stderr_b)
    significant = da - rl > margin
    ordered = da >= sa >= rl
    reach_da = reach_round(results["da-rl"], "mean_reward", LOAD_WINDOW)
    reach_rl = reach_round(results["rl"], "mean_reward", LOAD_WINDOW)
    return CheckResult("load_method_ordering", ordered and significant and reach_da <= reach_rl,
                       {"da-rl_reward": da, "sa-rl_reward": sa, "rl_reward": rl, "da_vs_rl_p": da_rl.p_value,
                        "da_rl_reach_round": float(reach_da), "rl_reach_round": float(reach_rl)},
                       {"da_minus_rl_min": margin},
                       f"reward {da:.3f} >= {sa:.3f} >= {rl:.3f}, Welch p {da_rl.p_value:.3g}, "
                       f"95% reached at rounds {reach_da} vs {reach_rl}")


def check_hits_decrease(results: Dict[str, ExperimentResult]) -> CheckResult:
    measured, passed = {}, True
    for method in METHODS:
        first = _window_mean(results[method].rows, "hits", GRID_WINDOW, first=True)
        last = _window_mean(results[method].rows, "hits", GRID_WINDOW)
        measured[f"{method}_first"], measured[f"{method}_last"] = first, last
        passed &= last < first
    return CheckResult("grid_hits_decrease", passed, measured, {},
                       ", ".join(f"{m} {measured[m + '_first']:.1f}->{measured[m + '_last']:.1f}" for m in METHODS))


def check_budget(results: List[ExperimentResult]) -> CheckResult:
    """Per-agent conservation is enforced each round; rows must add up across agents"""
    broken = 0
    for result in results:
        total = result.config.agents * result.config.budget
        for row in result.rows:
            if row.asks + row.gives != total - row.budget_left or row.budget_left < 0:
                broken += 1
    return CheckResult("budget_conservation", broken == 0, {"violations": float(broken)}, {"violations": 0.0},
                       f"{broken} rows violate asks + gives = C - C'")


def check_determinism(config: ExperimentConfig, first: ExperimentResult) -> CheckResult:
    again = run_experiment(config, progress=False)
    same = rows_to_csv(first.rows) == rows_to_csv(again.rows)
    return CheckResult("determinism", same, {"identical": float(same)}, {"identical": 1.0},
                       "repeated run produced byte-identical CSV" if same else "CSV differs between runs")


def run_acceptance(runs: Optional[int] = None, workers: int = 1, seed: int = 1,
                   progress: bool = True) -> VerificationReport:
    grid = replace(preset_config("grid-desk"), seed=seed, workers=workers)
    load = replace(preset_config("load-desk"), seed=seed, workers=workers)
    if runs:
        grid, load = replace(grid, runs=runs), replace(load, runs=runs)

    grid_results = {m: run_experiment(replace(grid, method=m), progress) for m in METHODS}
    load_results = {m: run_experiment(replace(load, method=m), progress) for m in METHODS}
    logger.info("📋 evaluating acceptance checks")

    report = VerificationReport()
    report.add(check_grid_ordering(grid_results))
    report.add(check_load_ordering(load_results))
    report.add(check_hits_decrease(grid_results))
    report.add(check_budget(list(grid_results.values()) + list(load_results.values())))
    report.add(check_determinism(replace(grid, method="da-rl"), grid_results["da-rl"]))
    return report
