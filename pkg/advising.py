#!/usr/bin/env python3
"""
Differential advising between learning agents

Agents ask for advice about their current state, advisers answer with the
Q-vector of the same or a neighboring state (L1 difference at most 1), and
advice coming from a different state is perturbed with Laplace noise of
scale dQ/epsilon before it moves the advisee's policy.
"""

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from learning import LearningAgent, QTable, StateVec, policy_improve
from numerics import ParameterError, RngStream, laplace_sample, laplace_samples

NEIGHBOR_LIMIT = 1.0


@dataclass
class AdvisingParams:
    epsilon: float = 1.0
    delta_q: float = 3.0
    ask_threshold: int = 3
    budget_total: int = 500
    budget_left: Optional[int] = None
    asks: int = 0
    gives: int = 0
    self_advice: bool = True
    # when set, dQ follows the advisee's step size: dQ_t = dQ_1 * alpha_t / alpha0
    track_alpha0: Optional[float] = None
    base_delta_q: float = field(init=False)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if not self.delta_q > 0:
            raise ParameterError(f"delta_q must be positive, got {self.delta_q}")
        if self.ask_threshold < 1:
            raise ParameterError(f"ask threshold must be a positive integer, got {self.ask_threshold}")
        if self.budget_total < 0:
            raise ParameterError(f"budget must be non-negative, got {self.budget_total}")
        if self.budget_left is None:
            self.budget_left = self.budget_total
        if not 0 <= self.budget_left <= self.budget_total:
            raise ParameterError(f"remaining budget {self.budget_left} outside [0, {self.budget_total}]")
        if self.track_alpha0 is not None and not 0.0 < self.track_alpha0 <= 1.0:
            raise ParameterError(f"tracked alpha0 must lie in (0,1], got {self.track_alpha0}")
        self.base_delta_q = self.delta_q

    @property
    def scale(self) -> float:
        """Laplace scale b = dQ / epsilon"""
        return self.delta_q / self.epsilon

    def follow_step_size(self, alpha: float) -> None:
        if self.track_alpha0 is None:
            return
        if not alpha > 0:
            raise ParameterError(f"step size must be positive, got {alpha}")
        self.delta_q = self.base_delta_q * alpha / self.track_alpha0

    def _spend(self) -> None:
        if self.budget_left <= 0:
            raise RuntimeError("communication budget exhausted")
        self.budget_left -= 1

    def spend_ask(self) -> None:
        self._spend()
        self.asks += 1

    def spend_give(self) -> None:
        self._spend()
        self.gives += 1

    def check_conservation(self) -> None:
        spent = self.budget_total - self.budget_left
        if self.asks + self.gives != spent or spent > self.budget_total:
            raise RuntimeError(
                f"budget conservation broken: asks={self.asks} gives={self.gives} "
                f"C={self.budget_total} C'={self.budget_left}")


@dataclass(frozen=True)
class AdviceRequest:
    concerned_state: StateVec
    advisee_visits: int
    advisee_id: int


@dataclass(frozen=True)
class Advice:
    source_state: StateVec
    q_vector: Tuple[float, ...]
    adviser_id: int
    difference: float

    def __post_init__(self):
        if not 0.0 <= self.difference <= NEIGHBOR_LIMIT:
            raise ParameterError(f"advice from a non-neighboring state (difference {self.difference})")


@dataclass
class AdviceAudit:
    asked: bool = False
    self_advised: bool = False
    adviser: Optional[int] = None
    difference: Optional[float] = None
    noisy: bool = False
    replies: int = 0


@dataclass
class ActionSelectionPlan:
    policy_row: List[float]
    forced_action: Optional[int] = None
    audit: AdviceAudit = field(default_factory=AdviceAudit)


class AuditLog:
    """Line-oriented record of every advising event"""

    HEADER = "t,advisee,asked,adviser,difference,noisy,budget_left"

    def __init__(self):
        self.lines: List[str] = []

    def record(self, t: int, advisee: int, audit: AdviceAudit, budget_left: int) -> None:
        if not audit.asked:
            return
        adviser = -1 if audit.adviser is None else audit.adviser
        difference = "" if audit.difference is None else f"{audit.difference:g}"
        self.lines.append(f"{t},{advisee},{1 if audit.asked else 0},{adviser},{difference},"
                          f"{1 if audit.noisy else 0},{budget_left}")

    def to_csv(self) -> str:
        return "\n".join([self.HEADER] + self.lines) + "\n"


def state_difference(s: Sequence[int], s2: Sequence[int]) -> float:
    """L1 distance between two states of equal dimension"""
    if len(s) != len(s2):
        raise ParameterError(f"states have different dimensions ({len(s)} vs {len(s2)})")
    return float(sum(abs(a - b) for a, b in zip(s, s2)))


def is_neighboring(s: Sequence[int], s2: Sequence[int]) -> bool:
    """Identical states count as neighboring"""
    return state_difference(s, s2) <= NEIGHBOR_LIMIT


def _unit_neighbors(s: StateVec) -> Iterable[StateVec]:
    for i, value in enumerate(s):
        yield s[:i] + (value - 1,) + s[i + 1:]
        yield s[:i] + (value + 1,) + s[i + 1:]


def nearest_neighbor_state(s: StateVec, table: QTable, require_strict: bool,
                           min_visits: int = 1) -> Optional[Tuple[StateVec, float]]:
    """
    Visited state closest to s with difference <= 1 and at least min_visits
    visits. Ties go to more visits, then to the lexicographically smaller state.

    For integer vectors the difference-1 states are exactly s +/- e_i, so
    those 2m candidates are looked up instead of scanning the whole table.
    """
    candidates = [] if require_strict else [s]
    candidates.extend(_unit_neighbors(s))
    best = None
    best_key = None
    for candidate in candidates:
        entry = table.get(candidate)
        if entry is None or entry.visits < min_visits:
            continue
        difference = 0.0 if candidate == s else 1.0
        key = (difference, -entry.visits, candidate)
        if best_key is None or key < best_key:
            best, best_key = (candidate, difference), key
    return best


def p_ask(n: int, budget_left: int, budget_total: int, ask_threshold: int) -> float:
    """(1/sqrt(n)) * sqrt(C'/C) once the state was seen N times, else 0"""
    if budget_total <= 0 or budget_left <= 0:
        return 0.0
    if n < max(ask_threshold, 1):
        return 0.0
    return (1.0 / math.sqrt(n)) * math.sqrt(budget_left / budget_total)


def p_give(n_j: int, n_i: int, budget_left: int, budget_total: int) -> float:
    """(1 - 1/sqrt(n_j)) * sqrt(C'/C) when the adviser knows the state at least as well"""
    if budget_total <= 0 or budget_left <= 0:
        return 0.0
    if n_j < n_i or n_j <= 0:
        return 0.0
    return (1.0 - 1.0 / math.sqrt(n_j)) * math.sqrt(budget_left / budget_total)


def advice_sensitivity(alpha: float, r_hi: float, r_lo: float) -> float:
    """dQ ~ alpha * (largest reward - smallest reward)"""
    if not r_hi > r_lo:
        raise ParameterError(f"reward range needs r_hi > r_lo, got [{r_lo}, {r_hi}]")
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must lie in (0,1], got {alpha}")
    return alpha * (r_hi - r_lo)


def perturb_advice(q_vector: Sequence[float], scale: float, rng: RngStream) -> List[float]:
    """Add one Laplace(scale) draw per action, in action-index order"""
    return [q + laplace_sample(scale, rng) for q in q_vector]


def apply_differential_advice(pi_st: Sequence[float], advice: Advice, zeta: float,
                              params: AdvisingParams, floor: float, rng: RngStream) -> List[float]:
    """Policy step for the current state driven by the noisy advised Q-vector"""
    if len(advice.q_vector) != len(pi_st):
        raise ParameterError(f"advice carries {len(advice.q_vector)} Q-values for {len(pi_st)} actions")
    noisy = perturb_advice(advice.q_vector, params.scale, rng)
    return policy_improve(pi_st, noisy, zeta, floor)


def handle_request(adviser_table: QTable, req: AdviceRequest, adviser_params: AdvisingParams,
                   rng: RngStream, adviser_id: int = 0) -> Optional[Advice]:
    """Adviser side: pick the best matching state, gate with p_give, pay one budget unit on reply"""
    found = nearest_neighbor_state(req.concerned_state, adviser_table, require_strict=False)
    if found is None:
        return None
    source_state, difference = found
    n_j = adviser_table.visits(source_state)
    probability = p_give(n_j, req.advisee_visits, adviser_params.budget_left, adviser_params.budget_total)
    if not rng.bernoulli(probability):
        return None
    adviser_params.spend_give()
    return Advice(source_state, tuple(adviser_table.q_values(source_state)), adviser_id, difference)


def choose_advice(received: Sequence[Advice], s: StateVec) -> Optional[Advice]:
    """Minimum difference wins; ties go to the smallest adviser id"""
    if not received:
        return None
    return min(received, key=lambda advice: (advice.difference, advice.adviser_id))


def advising_step(agent: LearningAgent, neighbors: Sequence[LearningAgent], s_t: StateVec,
                  rng: RngStream) -> ActionSelectionPlan:
    """
    Ask/self-advise/broadcast decision tree for one agent at one time step.
    The agent must already have recorded its visit to s_t. Any advice that is
    used rewrites the agent's policy row for s_t before the action is drawn.
    """
    params: AdvisingParams = agent.advising
    policy = agent.policy
    n = agent.qtable.visits(s_t)
    probability = p_ask(n, params.budget_left, params.budget_total, params.ask_threshold)
    if not rng.bernoulli(probability):
        return ActionSelectionPlan(policy.row(s_t))

    audit = AdviceAudit(asked=True)
    params.follow_step_size(agent.params.alpha)
    own = None
    if params.self_advice:
        own = nearest_neighbor_state(s_t, agent.qtable, require_strict=True, min_visits=params.ask_threshold)
    if own is not None:
        source_state, difference = own
        advice = Advice(source_state, tuple(agent.qtable.q_values(source_state)), agent.agent_id, difference)
        pi = apply_differential_advice(policy.row(s_t), advice, agent.params.zeta, params, policy.floor, rng)
        policy.set_row(s_t, pi)
        audit.self_advised = True
        audit.adviser = agent.agent_id
        audit.difference = difference
        audit.noisy = True
        return ActionSelectionPlan(policy.row(s_t), audit=audit)

    params.spend_ask()
    request = AdviceRequest(s_t, n, agent.agent_id)
    replies = []
    for neighbor in neighbors:
        reply = handle_request(neighbor.qtable, request, neighbor.advising, neighbor.rng, neighbor.agent_id)
        if reply is not None:
            replies.append(reply)
    audit.replies = len(replies)
    chosen = choose_advice(replies, s_t)
    if chosen is None:
        return ActionSelectionPlan(policy.row(s_t), audit=audit)

    audit.adviser = chosen.adviser_id
    audit.difference = chosen.difference
    if chosen.difference == 0.0:
        pi = policy_improve(policy.row(s_t), chosen.q_vector, agent.params.zeta, policy.floor)
    else:
        pi = apply_differential_advice(policy.row(s_t), chosen, agent.params.zeta, params, policy.floor, rng)
        audit.noisy = True
    policy.set_row(s_t, pi)
    return ActionSelectionPlan(policy.row(s_t), audit=audit)


def utility_delta_bound(delta_q: float, epsilon: float, t: int, beta: float) -> float:
    """-(dQ/epsilon) * (1/t) * ln(2 - 2*beta), the average-reward gain bound"""
    if not 0.0 < beta < 1.0:
        raise ParameterError(f"beta must lie in (0,1), got {beta}")
    if t < 1:
        raise ParameterError(f"t must be >= 1, got {t}")
    return -(delta_q / epsilon) * (1.0 / t) * math.log(2.0 - 2.0 * beta)


def utility_tail_bound(lam: float, v: float, t: int, k: int, delta_q: float, epsilon: float) -> float:
    """exp(-t*lam^2 / (8 v^2)), valid for v >= sqrt(k)*dQ/eps and 0 < lam < 2*sqrt(2)*eps*v^2/dQ"""
    if v < math.sqrt(k) * delta_q / epsilon:
        raise ParameterError(f"v={v} below sqrt(k)*dQ/eps={math.sqrt(k) * delta_q / epsilon}")
    if not 0.0 < lam < 2.0 * math.sqrt(2.0) * epsilon * v * v / delta_q:
        raise ParameterError(f"lambda={lam} outside (0, 2*sqrt(2)*eps*v^2/dQ)")
    if t < 1:
        raise ParameterError(f"t must be >= 1, got {t}")
    return math.exp(-t * lam * lam / (8.0 * v * v))


def noisy_reward_shift(pi: Sequence[float], scale: float, rng: RngStream, trials: int) -> np.ndarray:
    """Samples of sum_a pi_a * Lap_a(b): the change in r-bar after one noisy advice application"""
    weights = np.asarray(pi, dtype=float)
    noise = laplace_samples(scale, rng, trials * len(weights)).reshape(trials, len(weights))
    shift = noise @ weights
    logger.debug(f"📐 reward shift sampled: {trials} trials, k={len(weights)}, b={scale}")
    return shift
