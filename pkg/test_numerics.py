#!/usr/bin/env python3
"""
Tests for RNG streams, the Laplace sampler and policy normalization
"""

import math
import sys

import numpy as np

from numerics import (ParameterError, RngStream, laplace_sample, laplace_samples, laplace_tail_prob,
                      normalize_policy)


def test_stream_replay_is_identical():
    a, b = RngStream(7, 3), RngStream(7, 3)
    assert [a.uniform() for _ in range(5000)] == [b.uniform() for _ in range(5000)]


def test_distinct_streams_differ():
    a, b = RngStream(7, 0), RngStream(7, 1)
    assert [a.uniform() for _ in range(10)] != [b.uniform() for _ in range(10)]


def test_uniforms_matches_scalar_draws():
    a, b = RngStream(11, 0), RngStream(11, 0)
    a.uniform()
    b.uniform()
    block = a.uniforms(5000)
    scalars = [b.uniform() for _ in range(5000)]
    assert block.tolist() == scalars
    assert a.consumed == b.consumed == 5001


def test_zero_probability_bernoulli_draws_nothing():
    rng = RngStream(1)
    assert rng.bernoulli(0.0) is False
    assert rng.consumed == 0
    rng.bernoulli(0.5)
    assert rng.consumed == 1


def test_sample_is_distinct_and_in_range():
    rng = RngStream(5)
    picked = rng.sample(range(20), 20)
    assert sorted(picked) == list(range(20))
    try:
        rng.sample([1, 2], 3)
        assert False, "oversized sample accepted"
    except ParameterError:
        pass


def test_laplace_matches_inverse_cdf_oracle():
    rng, twin = RngStream(99, 4), RngStream(99, 4)
    b = 3.0
    for _ in range(200):
        u = twin.uniform()
        v = u - 0.5
        expected = -b * (1.0 if v >= 0 else -1.0) * math.log(1.0 - 2.0 * abs(v))
        assert laplace_sample(b, rng) == expected


def test_laplace_sample_consumes_one_uniform():
    rng = RngStream(3)
    laplace_sample(1.0, rng)
    laplace_sample(2.0, rng)
    assert rng.consumed == 2


def test_vectorised_laplace_matches_scalar():
    a, b = RngStream(8, 2), RngStream(8, 2)
    block = laplace_samples(3.0, a, 1000)
    scalars = np.array([laplace_sample(3.0, b) for _ in range(1000)])
    assert np.allclose(block, scalars, rtol=0, atol=1e-12)


def test_laplace_tail_law():
    samples = laplace_samples(1.0, RngStream(2024, 1), 1_000_000)
    assert abs(np.mean(samples > 1.0) - 0.183940) < 0.005
    assert abs(np.mean(samples > 0.0) - 0.5) < 0.002


def test_laplace_rejects_bad_scale():
    for scale in (0.0, -1.0, float("inf")):
        try:
            laplace_sample(scale, RngStream(1))
            assert False, f"scale {scale} accepted"
        except ParameterError:
            pass


def test_laplace_tail_prob_values():
    assert laplace_tail_prob(1.0, 0.0) == 0.5
    assert abs(laplace_tail_prob(1.0, 1.0) - 0.183940) < 1e-6
    assert abs(laplace_tail_prob(2.0, 2.0) - laplace_tail_prob(1.0, 1.0)) < 1e-15
    try:
        laplace_tail_prob(0.0, 1.0)
        assert False
    except ParameterError:
        pass


def test_normalize_policy_examples():
    assert normalize_policy([0.25] * 4, 0.01) == [0.25] * 4
    out = normalize_policy([0.9, -0.1, 0.1, 0.1], 0.01)
    expected = [0.81081, 0.00901, 0.09009, 0.09009]
    assert all(abs(o - e) < 1e-5 for o, e in zip(out, expected))
    assert normalize_policy([1.0, 1.0], 0.01) == [0.5, 0.5]


def test_normalize_policy_sums_to_one_and_stays_positive():
    rng = RngStream(12)
    for _ in range(500):
        raw = (rng.uniforms(5) * 4 - 2).tolist()
        out = normalize_policy(raw, 0.01)
        assert abs(sum(out) - 1.0) < 1e-9
        assert min(out) > 0


def test_normalize_policy_errors():
    for raw, floor in (([], 0.01), ([0.5, 0.5], 0.5), ([1.0] * 4, 0.3)):
        try:
            normalize_policy(raw, floor)
            assert False, f"{raw} with floor {floor} accepted"
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
