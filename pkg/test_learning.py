#!/usr/bin/env python3
"""
Tests for tabular Q-learning, policy improvement and the step-size schedule
"""

import sys

from learning import (LearnerParams, LearningAgent, PolicyTable, QTable, decay_alpha, dump_qtable, load_qtable,
                      policy_improve, q_update, record_visit, select_action)
from numerics import ParameterError, RngStream


def test_q_update_examples():
    assert abs(q_update(0.0, 10.0, 5.0, 0.2, 0.8) - 2.8) < 1e-12
    assert q_update(7.0, 123.0, -4.0, 0.0, 0.8) == 7.0
    assert q_update(-2.0, 3.0, 9.0, 1.0, 0.0) == 3.0


def test_q_values_stay_within_reward_bounds():
    rng = RngStream(4)
    q, gamma = 0.0, 0.8
    for _ in range(2000):
        r = -5.0 + 15.0 * rng.uniform()
        q = q_update(q, r, q, 0.3, gamma)
        assert -5.0 / (1 - gamma) - 1e-9 <= q <= 10.0 / (1 - gamma) + 1e-9


def test_policy_improve_examples():
    uniform = [0.25] * 4
    assert policy_improve(uniform, [3.0] * 4, 0.5) == uniform
    pi = [0.7, 0.2, 0.1]
    assert all(abs(a - b) < 1e-12 for a, b in zip(policy_improve(pi, [1.0, 5.0, -2.0], 0.0), pi))
    out = policy_improve([0.5, 0.5], [1.0, 0.0], 0.1, 0.01)
    assert abs(out[0] - 0.55) < 1e-12 and abs(out[1] - 0.45) < 1e-12


def test_policy_improve_keeps_argmax():
    out = policy_improve([0.25] * 4, [0.1, 0.4, 0.2, 0.3], 0.1)
    assert max(range(4), key=lambda a: out[a]) == 1


def test_policy_improve_length_mismatch():
    try:
        policy_improve([0.5, 0.5], [1.0, 2.0, 3.0], 0.1)
        assert False, "mismatched lengths accepted"
    except ParameterError:
        pass


def test_decay_alpha_follows_harmonic_schedule():
    params = LearnerParams(alpha=0.2, alpha0=0.2)
    params = decay_alpha(params)
    assert abs(params.alpha - 0.1) < 1e-15 and params.t == 2
    for _ in range(8):
        params = decay_alpha(params)
    assert params.alpha == 0.2 / 10
    previous = params.alpha
    for _ in range(100):
        params = decay_alpha(params)
        assert params.alpha < previous
        previous = params.alpha
    assert params.alpha == 0.2 / (params.t)


def test_constant_decay_keeps_alpha():
    params = decay_alpha(LearnerParams(alpha=0.2, alpha0=0.2, decay="constant"))
    assert params.alpha == 0.2 and params.t == 2


def test_learner_params_validation():
    for kwargs in ({"gamma": 1.0}, {"zeta": 0.0}, {"t": 0}, {"decay": "linear"}, {"alpha0": 1.5}):
        try:
            LearnerParams(**kwargs)
            assert False, f"{kwargs} accepted"
        except ParameterError:
            pass
    LearnerParams(alpha=1.0, alpha0=1.0)


def test_select_action_frequencies():
    rng = RngStream(21)
    counts = [0] * 4
    for _ in range(100_000):
        counts[select_action([0.25] * 4, rng)] += 1
    assert all(abs(c / 100_000 - 0.25) < 0.01 for c in counts)

    skewed = [0.98, 0.01, 0.01]
    hits = sum(select_action(skewed, rng) == 0 for _ in range(20_000))
    assert abs(hits / 20_000 - 0.98) < 0.005


def test_select_action_replays():
    pi = [0.1, 0.2, 0.3, 0.4]
    a, b = RngStream(6, 1), RngStream(6, 1)
    assert [select_action(pi, a) for _ in range(50)] == [select_action(pi, b) for _ in range(50)]


def test_select_action_rejects_bad_distribution():
    for pi in ([], [0.5, 0.6], [1.2, -0.2]):
        try:
            select_action(pi, RngStream(1))
            assert False, f"{pi} accepted"
        except ParameterError:
            pass


def test_record_visit_initialises_and_counts():
    table, policy = QTable(4), PolicyTable(4)
    record_visit(table, (0, 1), policy)
    assert table.visits((0, 1)) == 1 and table.q_values((0, 1)) == [0.0] * 4
    assert policy.row((0, 1)) == [0.25] * 4
    for _ in range(4):
        record_visit(table, (0, 1))
    assert table.visits((0, 1)) == 5
    record_visit(table, (1, 1))
    assert len(table) == 2 and table.visits((1, 1)) == 1


def test_qtable_snapshot_roundtrip():
    table = QTable(2)
    record_visit(table, (2, 0))
    record_visit(table, (0, 1))
    table.entries[(2, 0)].q_values = [0.1, -3.25]
    text = dump_qtable(table)
    assert text.splitlines()[0] == "0 1 | 0.0 0.0 | 1"
    loaded = load_qtable(text)
    assert loaded.q_values((2, 0)) == [0.1, -3.25] and loaded.visits((0, 1)) == 1


def test_agent_learn_updates_q_policy_and_alpha():
    agent = LearningAgent(0, 2, LearnerParams(alpha=0.2, alpha0=0.2), RngStream(1))
    agent.observe((0,))
    agent.learn((0,), 0, 10.0, None)
    assert abs(agent.qtable.q_values((0,))[0] - 2.0) < 1e-12
    assert agent.policy.row((0,))[0] > 0.5
    assert abs(agent.params.alpha - 0.1) < 1e-15


def test_agent_learn_on_unvisited_state_fails():
    agent = LearningAgent(0, 2, LearnerParams(), RngStream(1))
    try:
        agent.learn((3,), 0, 1.0, None)
        assert False
    except ParameterError:
        pass


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
