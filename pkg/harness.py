#!/usr/bin/env python3
"""
Experiment orchestration
Seeded replicas of the advising loop, per-round metrics, aggregation over
replicas, parameter sweeps and CSV output.
"""

import concurrent.futures
import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy import stats
from tqdm import tqdm

from advising import ActionSelectionPlan, AdvisingParams, AuditLog, advising_step
from baselines import SarlParams, rl_step, sarl_step
from environments import (GridWorld, LoadWorld, generate_grid, generate_obstacles, grid_observe,
                          grid_round_done, grid_step, load_grid_map, load_observe, load_step,
                          populate_grid)
from learning import LearnerParams, LearningAgent, StateVec, select_action
from numerics import RngStream
from sim_config import METHODS, ConfigError, ExperimentConfig

CSV_HEADER = ["method", "run_id", "round_id", "steps_total", "steps_per_target", "hits",
              "mean_reward", "asks", "gives", "budget_left"]
AGGREGATE_HEADER = ["method", "round_id", "metric", "mean", "stderr", "n"]
SWEEP_HEADER = ["axis", "value"] + AGGREGATE_HEADER
METRIC_NAMES = CSV_HEADER[3:]

# replica r owns stream ids [r * STREAM_STRIDE, (r + 1) * STREAM_STRIDE)
STREAM_STRIDE = 1 << 16


@dataclass
class MetricsRow:
    method: str
    run_id: int
    round_id: int
    steps_total: int
    steps_per_target: Optional[float]
    hits: int
    mean_reward: float
    asks: int
    gives: int
    budget_left: int

    def as_list(self) -> list:
        per_target = "" if self.steps_per_target is None else self.steps_per_target
        return [self.method, self.run_id, self.round_id, self.steps_total, per_target, self.hits,
                self.mean_reward, self.asks, self.gives, self.budget_left]

    def metric(self, name: str) -> Optional[float]:
        value = getattr(self, name)
        return None if value is None else float(value)


@dataclass
class AggregateRow:
    method: str
    round_id: int
    metric: str
    mean: float
    stderr: float
    n: int

    def as_list(self) -> list:
        return [self.method, self.round_id, self.metric, self.mean, self.stderr, self.n]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: List[MetricsRow]
    aggregate: List[AggregateRow]
    audits: Dict[int, str] = field(default_factory=dict)


def neighbor_ids(agent_id: int, agent_count: int, topology: str) -> List[int]:
    """Agents an advisee may ask, ascending id"""
    if topology == "ring":
        return sorted({(agent_id - 1) % agent_count, (agent_id + 1) % agent_count} - {agent_id})
    return [other for other in range(agent_count) if other != agent_id]


def build_agents(config: ExperimentConfig, replica_id: int) -> List[LearningAgent]:
    base = replica_id * STREAM_STRIDE
    learner = LearnerParams(alpha=config.alpha0, alpha0=config.alpha0, gamma=config.gamma,
                            zeta=config.zeta, decay=config.alpha_decay)
    delta_q = config.resolved_delta_q()
    agents = []
    for agent_id in range(config.agents):
        agent = LearningAgent(agent_id, config.action_count, learner,
                              RngStream(config.seed, base + 1 + agent_id), config.policy_floor)
        agent.advising = AdvisingParams(epsilon=config.epsilon, delta_q=delta_q,
                                        ask_threshold=config.ask_threshold, budget_total=config.budget,
                                        self_advice=config.self_advice,
                                        track_alpha0=config.alpha0 if config.tracks_step_size else None)
        agent.sarl = SarlParams(v_ask=config.v_ask, v_give=config.v_give)
        agents.append(agent)
    return agents


def choose_actions(agents: Sequence[LearningAgent], states: Sequence[StateVec], config: ExperimentConfig,
                   t: int, audit: Optional[AuditLog] = None) -> Dict[int, int]:
    """Advising (or baseline) step for every agent in id order, then one action each"""
    plans: List[Optional[ActionSelectionPlan]] = []
    for agent, state in zip(agents, states):
        neighbors = [agents[j] for j in neighbor_ids(agent.agent_id, len(agents), config.topology)]
        if config.method == "da-rl":
            plan = advising_step(agent, neighbors, state, agent.rng)
        elif config.method == "sa-rl":
            plan = sarl_step(agent, neighbors, state, agent.rng)
        else:
            plan = None
        if audit is not None and plan is not None:
            audit.record(t, agent.agent_id, plan.audit, agent.advising.budget_left)
        plans.append(plan)

    actions = {}
    for agent, state, plan in zip(agents, states, plans):
        if plan is None:
            actions[agent.agent_id] = rl_step(agent, state, agent.rng)
        elif plan.forced_action is not None:
            actions[agent.agent_id] = plan.forced_action
        else:
            actions[agent.agent_id] = select_action(plan.policy_row, agent.rng)
    return actions


def _budget_totals(agents: Sequence[LearningAgent]) -> Tuple[int, int, int]:
    for agent in agents:
        agent.advising.check_conservation()
    return (sum(a.advising.asks for a in agents), sum(a.advising.gives for a in agents),
            sum(a.advising.budget_left for a in agents))


def _new_grid(config: ExperimentConfig, rng: RngStream, layout, fixed_obstacles) -> GridWorld:
    if layout is not None:
        world = GridWorld(layout.width, layout.height, config.setting, config.p_spawn, config.p_move)
        populate_grid(world, layout.obstacles, len(layout.targets), config.agents, rng, targets=layout.targets)
        return world
    return generate_grid(config.width, config.height, config.agents, config.targets, config.obstacles, rng,
                         config.setting, config.p_spawn, config.p_move, obstacles=fixed_obstacles)


def _run_grid(config: ExperimentConfig, replica_id: int, agents: List[LearningAgent],
              env_rng: RngStream, audit: Optional[AuditLog]) -> List[MetricsRow]:
    layout = load_grid_map(config.map_file) if config.map_file else None
    fixed_obstacles = None
    if layout is None and config.fixed_layout:
        fixed_obstacles = generate_obstacles(config.width, config.height, config.obstacles, env_rng)

    rows = []
    t = 0
    for round_id in range(config.rounds):
        world = _new_grid(config, env_rng, layout, fixed_obstacles)
        returns = [0.0] * len(agents)
        hits = 0
        steps = 0
        while not grid_round_done(world) and steps < config.max_round_steps:
            states = [grid_observe(world, agent.agent_id) for agent in agents]
            for agent, state in zip(agents, states):
                agent.observe(state)
            actions = choose_actions(agents, states, config, t, audit)
            outcomes = grid_step(world, actions, env_rng)
            done = grid_round_done(world)
            for agent, state in zip(agents, states):
                outcome = outcomes[agent.agent_id]
                next_state = None if done else grid_observe(world, agent.agent_id)
                agent.learn(state, actions[agent.agent_id], outcome.reward, next_state)
                returns[agent.agent_id] += outcome.reward
                hits += int(outcome.hit)
            steps += 1
            t += 1
        if not grid_round_done(world):
            logger.warning(f"⚠️  replica {replica_id} round {round_id} stopped at {steps} steps "
                           f"with {world.target_count()} targets left")
        asks, gives, budget_left = _budget_totals(agents)
        per_target = steps / world.achieved if world.achieved else None
        rows.append(MetricsRow(config.method, replica_id, round_id, steps, per_target, hits,
                               float(np.mean(returns)), asks, gives, budget_left))
        logger.debug(f"🎯 replica {replica_id} round {round_id}: {steps} steps, {hits} hits")
    return rows


def _run_load(config: ExperimentConfig, replica_id: int, agents: List[LearningAgent],
              env_rng: RngStream, audit: Optional[AuditLog]) -> List[MetricsRow]:
    world = LoadWorld(config.agents, config.item_types, config.max_stock, config.p_process, config.p_arrive)
    rows = []
    t = 0
    for round_id in range(config.rounds):
        total = 0.0
        for _ in range(config.round_length):
            states = [load_observe(world, agent.agent_id) for agent in agents]
            for agent, state in zip(agents, states):
                agent.observe(state)
            decisions = choose_actions(agents, states, config, t, audit)
            outcomes = load_step(world, decisions, env_rng)
            for agent, state in zip(agents, states):
                reward = outcomes[agent.agent_id].reward
                agent.learn(state, decisions[agent.agent_id], reward, load_observe(world, agent.agent_id))
                total += reward
            t += 1
        asks, gives, budget_left = _budget_totals(agents)
        mean_reward = total / (len(agents) * config.round_length)
        rows.append(MetricsRow(config.method, replica_id, round_id, config.round_length, None, 0,
                               mean_reward, asks, gives, budget_left))
    return rows


def run_replica(config: ExperimentConfig, replica_id: int,
                audit: Optional[AuditLog] = None) -> List[MetricsRow]:
    """One seeded run of `rounds` learning rounds; deterministic in (config, replica_id)"""
    if replica_id < 0 or replica_id * STREAM_STRIDE + config.agents >= 1 << 64:
        raise ConfigError("runs", f"replica id {replica_id} out of range")
    agents = build_agents(config, replica_id)
    env_rng = RngStream(config.seed, replica_id * STREAM_STRIDE)
    if config.scenario == "grid":
        return _run_grid(config, replica_id, agents, env_rng, audit)
    return _run_load(config, replica_id, agents, env_rng, audit)


def _replica_job(config: ExperimentConfig, replica_id: int) -> Tuple[int, List[MetricsRow], Optional[str]]:
    audit = AuditLog() if config.audit_log else None
    rows = run_replica(config, replica_id, audit)
    return replica_id, rows, audit.to_csv() if audit else None


def aggregate_rows(rows: Sequence[MetricsRow]) -> List[AggregateRow]:
    """Mean and standard error per (method, round, metric); order of `rows` does not matter"""
    groups: Dict[Tuple[str, int], List[MetricsRow]] = {}
    for row in rows:
        groups.setdefault((row.method, row.round_id), []).append(row)
    result = []
    for (method, round_id) in sorted(groups, key=lambda key: (METHODS.index(key[0]), key[1])):
        members = sorted(groups[(method, round_id)], key=lambda r: r.run_id)
        for name in METRIC_NAMES:
            values = np.array([v for v in (r.metric(name) for r in members) if v is not None])
            if values.size == 0:
                continue
            stderr = float(np.std(values, ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
            result.append(AggregateRow(method, round_id, name, float(np.mean(values)), stderr, int(values.size)))
    return result


def run_experiment(config: ExperimentConfig, progress: bool = True) -> ExperimentResult:
    """`runs` replicas, optionally over a process pool; merged in replica order"""
    logger.info(f"🚀 {config.method} on {config.scenario}: {config.runs} runs x {config.rounds} rounds, "
                f"seed {config.seed}, {config.workers} worker(s)")
    results: Dict[int, Tuple[List[MetricsRow], Optional[str]]] = {}
    with tqdm(total=config.runs, desc=config.method, disable=not progress, leave=False) as bar:
        if config.workers > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=config.workers) as pool:
                futures = [pool.submit(_replica_job, config, r) for r in range(config.runs)]
                for future in concurrent.futures.as_completed(futures):
                    replica_id, rows, audit = future.result()
                    results[replica_id] = (rows, audit)
                    bar.update(1)
        else:
            for r in range(config.runs):
                replica_id, rows, audit = _replica_job(config, r)
                results[replica_id] = (rows, audit)
                bar.update(1)

    rows = [row for r in range(config.runs) for row in results[r][0]]
    audits = {r: results[r][1] for r in range(config.runs) if results[r][1] is not None}
    logger.info(f"✅ {config.method}: {len(rows)} metric rows")
    return ExperimentResult(config, rows, aggregate_rows(rows), audits)


def rows_to_csv(rows: Sequence[MetricsRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.as_list())
    return buffer.getvalue()


def aggregate_to_csv(aggregate: Sequence[AggregateRow], prefix: Sequence = ()) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SWEEP_HEADER if prefix else AGGREGATE_HEADER)
    for row in aggregate:
        writer.writerow(list(prefix) + row.as_list())
    return buffer.getvalue()


def write_experiment(result: ExperimentResult, out_dir: Path) -> Dict[str, Path]:
    """metrics.csv, aggregate.csv and audit/replica_<id>.csv under out_dir"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"metrics": out_dir / "metrics.csv", "aggregate": out_dir / "aggregate.csv"}
    paths["metrics"].write_text(rows_to_csv(result.rows))
    paths["aggregate"].write_text(aggregate_to_csv(result.aggregate))
    if result.audits:
        audit_dir = out_dir / "audit"
        audit_dir.mkdir(exist_ok=True)
        for replica_id, text in result.audits.items():
            (audit_dir / f"replica_{replica_id}.csv").write_text(text)
    logger.info(f"📁 wrote results to {out_dir}")
    return paths


def sweep_values(base: ExperimentConfig, axis: str, value: str) -> ExperimentConfig:
    """Apply one sweep value; axis `size` takes WxH"""
    if axis == "size":
        try:
            width, height = (int(part) for part in value.lower().split("x"))
        except ValueError:
            raise ConfigError("size", f"expected WxH, got '{value}'") from None
        return replace(base, width=width, height=height)
    return base.with_value(axis, value)


def sweep(base: ExperimentConfig, axis: str, values: Sequence[str],
          methods: Sequence[str] = METHODS, progress: bool = True) -> str:
    """One run_experiment per value and method; long-format CSV"""
    if not values:
        raise ConfigError(axis, "empty sweep value list")
    lines = [",".join(SWEEP_HEADER)]
    for value in values:
        config = sweep_values(base, axis, value)
        for method in methods:
            result = run_experiment(replace(config, method=method), progress)
            text = aggregate_to_csv(result.aggregate, prefix=(axis, value))
            lines.extend(text.splitlines()[1:])
        logger.info(f"📊 sweep {axis}={value} done")
    return "\n".join(lines) + "\n"


@dataclass
class MethodComparison:
    metric: str
    mean_a: float
    mean_b: float
    stderr_a: float
    stderr_b: float
    t_statistic: float
    p_value: float


def final_window_means(rows: Sequence[MetricsRow], metric: str, window: int,
                       first: bool = False) -> np.ndarray:
    """Per-replica mean of `metric` over the last (or first) `window` rounds"""
    by_run: Dict[int, List[MetricsRow]] = {}
    for row in rows:
        by_run.setdefault(row.run_id, []).append(row)
    means = []
    for run_id in sorted(by_run):
        ordered = sorted(by_run[run_id], key=lambda r: r.round_id)
        picked = ordered[:window] if first else ordered[-window:]
        values = [v for v in (r.metric(metric) for r in picked) if v is not None]
        if values:
            means.append(float(np.mean(values)))
    return np.array(means)


def _summary(values: np.ndarray) -> Tuple[float, float]:
    mean = float(values.mean()) if len(values) else math.nan
    stderr = float(stats.sem(values)) if len(values) > 1 else 0.0
    return mean, stderr


def compare_methods(rows_a: Sequence[MetricsRow], rows_b: Sequence[MetricsRow], metric: str,
                    window: int = 5) -> MethodComparison:
    """Welch t-test on per-replica final-window means; t and p are NaN below two replicas a side"""
    a = final_window_means(rows_a, metric, window)
    b = final_window_means(rows_b, metric, window)
    mean_a, stderr_a = _summary(a)
    mean_b, stderr_b = _summary(b)
    t_statistic = p_value = math.nan
    if len(a) > 1 and len(b) > 1 and (stderr_a > 0 or stderr_b > 0):
        test = stats.ttest_ind(a, b, equal_var=False)
        t_statistic, p_value = float(test.statistic), float(test.pvalue)
    return MethodComparison(metric, mean_a, mean_b, stderr_a, stderr_b, t_statistic, p_value)
