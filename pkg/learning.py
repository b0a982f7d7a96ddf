#!/usr/bin/env python3
"""
Tabular Q-learning with incremental policy improvement
The learning part of the advising loop: action selection, Q update,
policy step towards better-than-average actions and step-size decay
"""

import math
from dataclasses import dataclass, replace
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from numerics import DEFAULT_POLICY_FLOOR, ParameterError, RngStream, normalize_policy

StateVec = Tuple[int, ...]


def make_state(dims: Sequence[int]) -> StateVec:
    state = tuple(int(d) for d in dims)
    if not state:
        raise ParameterError("A state needs at least one dimension")
    return state


@dataclass
class QEntry:
    q_values: List[float]
    visits: int = 0


class QTable:
    """Visited states only; every entry holds k Q-values and the visit counter n_s"""

    def __init__(self, action_count: int):
        if action_count < 1:
            raise ParameterError(f"action_count must be >= 1, got {action_count}")
        self.action_count = action_count
        self.entries: Dict[StateVec, QEntry] = {}

    def __contains__(self, state: StateVec) -> bool:
        return state in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[StateVec]:
        return iter(self.entries)

    def get(self, state: StateVec) -> Optional[QEntry]:
        return self.entries.get(state)

    def visits(self, state: StateVec) -> int:
        entry = self.entries.get(state)
        return entry.visits if entry else 0

    def q_values(self, state: StateVec) -> List[float]:
        entry = self.entries.get(state)
        return list(entry.q_values) if entry else [0.0] * self.action_count

    def max_q(self, state: StateVec) -> float:
        entry = self.entries.get(state)
        return max(entry.q_values) if entry else 0.0


class PolicyTable:
    """Per-state action distributions, uniform on first visit"""

    def __init__(self, action_count: int, floor: float = DEFAULT_POLICY_FLOOR):
        if not floor > 0 or floor * action_count >= 1.0:
            raise ParameterError(f"policy floor {floor} invalid for {action_count} actions")
        self.action_count = action_count
        self.floor = floor
        self.entries: Dict[StateVec, List[float]] = {}

    def __contains__(self, state: StateVec) -> bool:
        return state in self.entries

    def row(self, state: StateVec) -> List[float]:
        pi = self.entries.get(state)
        if pi is None:
            pi = [1.0 / self.action_count] * self.action_count
            self.entries[state] = pi
        return pi

    def set_row(self, state: StateVec, pi: Sequence[float]) -> None:
        if len(pi) != self.action_count:
            raise ParameterError(f"policy row has {len(pi)} entries, expected {self.action_count}")
        self.entries[state] = list(pi)


@dataclass(frozen=True)
class LearnerParams:
    alpha: float = 0.2
    alpha0: float = 0.2
    gamma: float = 0.8
    zeta: float = 0.1
    t: int = 1
    decay: str = "harmonic"

    def __post_init__(self):
        for name in ("alpha0", "gamma", "zeta"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0 and not (name == "alpha0" and value == 1.0):
                raise ParameterError(f"{name} must lie in (0,1), got {value}")
        if self.t < 1:
            raise ParameterError(f"step counter must be >= 1, got {self.t}")
        if self.decay not in ("harmonic", "constant"):
            raise ParameterError(f"unknown alpha decay '{self.decay}'")


def q_update(q_sa: float, r: float, max_q_next: float, alpha: float, gamma: float) -> float:
    """(1-alpha)*Q(s,a) + alpha*(r + gamma*max_a' Q(s',a'))"""
    return (1.0 - alpha) * q_sa + alpha * (r + gamma * max_q_next)


def policy_improve(pi_s: Sequence[float], q_s: Sequence[float], zeta: float,
                   floor: float = DEFAULT_POLICY_FLOOR) -> List[float]:
    """Move probability towards actions whose Q beats the policy-weighted average"""
    if len(pi_s) != len(q_s):
        raise ParameterError(f"policy has {len(pi_s)} entries but Q-vector has {len(q_s)}")
    r_bar = math.fsum(p * q for p, q in zip(pi_s, q_s))
    raw = [p + zeta * (q - r_bar) for p, q in zip(pi_s, q_s)]
    return normalize_policy(raw, floor)


def decay_alpha(params: LearnerParams) -> LearnerParams:
    """alpha <- t/(t+1) * alpha, so alpha_t = alpha0 / t"""
    if params.decay == "constant":
        return replace(params, t=params.t + 1)
    t = params.t
    # recomputed from alpha0 so repeated decays stay exact
    return replace(params, alpha=params.alpha0 / (t + 1), t=t + 1)


def select_action(pi_s: Sequence[float], rng: RngStream) -> int:
    """Inverse-CDF draw over the cumulative policy, one uniform"""
    if not pi_s or abs(math.fsum(pi_s) - 1.0) > 1e-6 or min(pi_s) < 0.0:
        raise ParameterError(f"select_action needs a probability vector, got {list(pi_s)}")
    u = rng.uniform()
    cumulative = 0.0
    for index, p in enumerate(pi_s):
        cumulative += p
        if u < cumulative:
            return index
    return len(pi_s) - 1


def record_visit(qtable: QTable, state: StateVec, policy: Optional[PolicyTable] = None) -> QTable:
    """Create the entry (zero Q, uniform policy row) if needed and bump n_s"""
    entry = qtable.entries.get(state)
    if entry is None:
        entry = QEntry([0.0] * qtable.action_count, 0)
        qtable.entries[state] = entry
    entry.visits += 1
    if policy is not None:
        policy.row(state)
    return qtable


def dump_qtable(qtable: QTable) -> str:
    """One `state-dims | q-values | visits` line per state, states sorted"""
    lines = []
    for state in sorted(qtable.entries):
        entry = qtable.entries[state]
        dims = " ".join(str(d) for d in state)
        q = " ".join(repr(float(v)) for v in entry.q_values)
        lines.append(f"{dims} | {q} | {entry.visits}")
    return "\n".join(lines) + ("\n" if lines else "")


def load_qtable(text: str) -> QTable:
    table: Optional[QTable] = None
    for number, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split("|")]
        if len(parts) != 3:
            raise ParameterError(f"line {number}: expected 'dims | q-values | visits'")
        state = make_state(parts[0].split())
        q_values = [float(v) for v in parts[1].split()]
        if table is None:
            table = QTable(len(q_values))
        elif len(q_values) != table.action_count:
            raise ParameterError(f"line {number}: {len(q_values)} Q-values, expected {table.action_count}")
        table.entries[state] = QEntry(q_values, int(parts[2]))
    if table is None:
        raise ParameterError("empty Q-table snapshot")
    return table


class LearningAgent:
    """
    One learner: its Q-table, policy table, step-size state and RNG stream.
    Advising state (budget, SA-RL parameters) is attached by the harness.
    """

    def __init__(self, agent_id: int, action_count: int, params: LearnerParams,
                 rng: RngStream, floor: float = DEFAULT_POLICY_FLOOR):
        self.agent_id = agent_id
        self.qtable = QTable(action_count)
        self.policy = PolicyTable(action_count, floor)
        self.params = params
        self.rng = rng
        self.advising = None
        self.sarl = None

    @property
    def action_count(self) -> int:
        return self.qtable.action_count

    @property
    def floor(self) -> float:
        return self.policy.floor

    def observe(self, state: StateVec) -> None:
        record_visit(self.qtable, state, self.policy)

    def learn(self, state: StateVec, action: int, reward: float, next_state: Optional[StateVec]) -> None:
        """Q update, policy step and alpha decay for one transition; next_state None means terminal"""
        entry = self.qtable.entries.get(state)
        if entry is None:
            raise ParameterError(f"agent {self.agent_id} learns on unvisited state {state}")
        max_next = 0.0 if next_state is None else self.qtable.max_q(next_state)
        entry.q_values[action] = q_update(entry.q_values[action], reward, max_next,
                                          self.params.alpha, self.params.gamma)
        improved = policy_improve(self.policy.row(state), entry.q_values, self.params.zeta, self.policy.floor)
        self.policy.set_row(state, improved)
        self.params = decay_alpha(self.params)
