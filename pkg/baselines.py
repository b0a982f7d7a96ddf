#!/usr/bin/env python3
"""
Comparison methods: plain RL and same-state action advising (SA-RL)
"""

import math
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

from advising import ActionSelectionPlan, AdviceAudit
from learning import LearningAgent, QTable, StateVec, select_action
from numerics import ParameterError, RngStream


@dataclass(frozen=True)
class SarlParams:
    v_ask: float = 0.4
    v_give: float = 0.9

    def __post_init__(self):
        if not self.v_ask > 0 or not self.v_give > 0:
            raise ParameterError(f"v_ask and v_give must be positive, got ({self.v_ask}, {self.v_give})")


def rl_step(agent: LearningAgent, s_t: StateVec, rng: RngStream) -> int:
    """No advising: draw from the agent's own policy row"""
    return select_action(agent.policy.row(s_t), rng)


def sarl_ask_prob(n: int, v_ask: float) -> float:
    """(1 + v_a)^(-sqrt(n)); falls with experience and with v_a"""
    if n < 0:
        raise ParameterError(f"visit count must be non-negative, got {n}")
    return (1.0 + v_ask) ** (-math.sqrt(n))


def sarl_give_prob(n: int, v_give: float) -> float:
    """1 - (1 + v_g)^(-sqrt(n)); zero for a state the adviser never saw"""
    if n < 0:
        raise ParameterError(f"visit count must be non-negative, got {n}")
    return 1.0 - (1.0 + v_give) ** (-math.sqrt(n))


def sarl_advise(adviser_table: QTable, s: StateVec) -> Optional[int]:
    """Greedy action for exactly s (smallest index on ties), None if s was never visited"""
    entry = adviser_table.get(s)
    if entry is None or entry.visits == 0:
        return None
    q = entry.q_values
    return max(range(len(q)), key=lambda a: (q[a], -a))


def sarl_step(agent: LearningAgent, neighbors: Sequence[LearningAgent], s_t: StateVec,
              rng: RngStream) -> ActionSelectionPlan:
    """
    Ask every neighbor about exactly s_t; advisers that accept send their
    greedy action. Several recommendations are settled by majority vote,
    ties to the smallest action. The advised action is executed as is.
    """
    params = agent.advising
    sarl: SarlParams = agent.sarl
    row = agent.policy.row(s_t)
    if params.budget_left <= 0:
        return ActionSelectionPlan(row)
    n = agent.qtable.visits(s_t)
    if not rng.bernoulli(sarl_ask_prob(n, sarl.v_ask)):
        return ActionSelectionPlan(row)

    params.spend_ask()
    audit = AdviceAudit(asked=True)
    votes = Counter()
    first_adviser = {}
    for neighbor in neighbors:
        if neighbor.advising.budget_left <= 0:
            continue
        n_j = neighbor.qtable.visits(s_t)
        if not neighbor.rng.bernoulli(sarl_give_prob(n_j, neighbor.sarl.v_give)):
            continue
        action = sarl_advise(neighbor.qtable, s_t)
        if action is None:
            continue
        neighbor.advising.spend_give()
        votes[action] += 1
        first_adviser.setdefault(action, neighbor.agent_id)
    audit.replies = sum(votes.values())
    if not votes:
        return ActionSelectionPlan(row, audit=audit)
    action = min(votes, key=lambda a: (-votes[a], a))
    audit.adviser = first_adviser[action]
    audit.difference = 0.0
    return ActionSelectionPlan(row, forced_action=action, audit=audit)
