#!/usr/bin/env python3
"""
Tests for the RL and SA-RL comparison methods
"""

import sys

from advising import AdvisingParams
from baselines import SarlParams, rl_step, sarl_advise, sarl_ask_prob, sarl_give_prob, sarl_step
from learning import LearnerParams, LearningAgent, QTable, record_visit, select_action
from numerics import ParameterError, RngStream


def make_agent(agent_id, budget=500):
    agent = LearningAgent(agent_id, 4, LearnerParams(), RngStream(3, agent_id + 1))
    agent.advising = AdvisingParams(budget_total=budget)
    agent.sarl = SarlParams()
    return agent


def test_rl_step_is_plain_policy_draw():
    agent = make_agent(0)
    agent.observe((0, 0))
    twin = RngStream(3, 1)
    picks = [rl_step(agent, (0, 0), agent.rng) for _ in range(20)]
    assert picks == [select_action([0.25] * 4, twin) for _ in range(20)]


def test_sarl_probabilities():
    assert sarl_ask_prob(0, 0.4) == 1.0
    assert abs(sarl_ask_prob(4, 0.4) - 1.4 ** -2) < 1e-12
    assert sarl_give_prob(0, 0.9) == 0.0
    assert abs(sarl_give_prob(9, 0.9) - (1 - 1.9 ** -3)) < 1e-12
    try:
        sarl_ask_prob(-1, 0.4)
        assert False
    except ParameterError:
        pass


def test_sarl_params_validation():
    try:
        SarlParams(v_ask=0.0)
        assert False
    except ParameterError:
        pass


def test_sarl_advise_greedy_with_low_index_ties():
    table = QTable(4)
    assert sarl_advise(table, (0,)) is None
    record_visit(table, (0,))
    table.entries[(0,)].q_values = [1.0, 3.0, 3.0, 0.0]
    assert sarl_advise(table, (0,)) == 1


def test_sarl_step_majority_vote():
    advisee = make_agent(0)
    advisers = [make_agent(i) for i in (1, 2, 3)]
    for adviser, q in zip(advisers, ([0, 5, 0, 0], [0, 0, 5, 0], [0, 0, 5, 0])):
        for _ in range(400):
            adviser.observe((1, 1))
        adviser.qtable.entries[(1, 1)].q_values = [float(v) for v in q]
    plan = sarl_step(advisee, advisers, (1, 1), advisee.rng)
    assert plan.audit.asked and plan.audit.replies == 3
    assert plan.forced_action == 2 and plan.audit.adviser == 2
    assert advisee.advising.asks == 1
    assert sum(a.advising.gives for a in advisers) == plan.audit.replies


def test_sarl_step_with_exhausted_budget_draws_nothing():
    agent = make_agent(0, budget=0)
    agent.observe((0, 0))
    plan = sarl_step(agent, [make_agent(1)], (0, 0), agent.rng)
    assert plan.forced_action is None and not plan.audit.asked
    assert agent.rng.consumed == 0


def test_sarl_step_adviser_without_experience_stays_silent():
    advisee, adviser = make_agent(0), make_agent(1)
    plan = sarl_step(advisee, [adviser], (4, 4), advisee.rng)
    assert plan.audit.asked and plan.audit.replies == 0 and plan.forced_action is None
    assert adviser.rng.consumed == 0 and adviser.advising.gives == 0


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
