#!/usr/bin/env python3
"""
Numerics shared by every learner and advising step
Seeded RNG streams, the Laplace sampler and policy normalization
"""

import math
from typing import List, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

# Uniforms are pulled from the bit generator in blocks of this size
UNIFORM_BLOCK = 4096
MASK_64 = (1 << 64) - 1

DEFAULT_POLICY_FLOOR = 0.01


class ParameterError(ValueError):
    """Raised when an operation receives parameters outside its domain"""


class RngStream:
    """
    Deterministic uniform stream identified by (seed, stream_id).

    Backed by numpy's PCG64 seeded through SeedSequence with the stream id as
    spawn key, so the same pair gives the same sequence on every platform and
    distinct ids give independent sequences. Every scalar draw below consumes
    exactly one uniform.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if not 0 <= seed <= MASK_64 or not 0 <= stream_id <= MASK_64:
            raise ParameterError(f"seed and stream_id must be 64-bit unsigned, got ({seed}, {stream_id})")
        self.seed = seed
        self.stream_id = stream_id
        sequence = np.random.SeedSequence(seed, spawn_key=(stream_id,))
        self._generator = np.random.Generator(np.random.PCG64(sequence))
        self._buffer = np.empty(0)
        self._index = 0
        self.consumed = 0

    def _refill(self) -> None:
        self._buffer = self._generator.random(UNIFORM_BLOCK)
        self._index = 0

    def uniform(self) -> float:
        """Next uniform in [0, 1)"""
        if self._index >= len(self._buffer):
            self._refill()
        value = float(self._buffer[self._index])
        self._index += 1
        self.consumed += 1
        return value

    def uniforms(self, count: int) -> np.ndarray:
        """Next `count` uniforms, identical to `count` calls of uniform()"""
        if count < 0:
            raise ParameterError(f"count must be non-negative, got {count}")
        out = np.empty(count)
        filled = 0
        while filled < count:
            if self._index >= len(self._buffer):
                self._refill()
            take = min(count - filled, len(self._buffer) - self._index)
            out[filled:filled + take] = self._buffer[self._index:self._index + take]
            self._index += take
            filled += take
        self.consumed += count
        return out

    def integers(self, bound: int) -> int:
        """Uniform integer in [0, bound)"""
        if bound <= 0:
            raise ParameterError(f"bound must be positive, got {bound}")
        return min(int(self.uniform() * bound), bound - 1)

    def bernoulli(self, p: float) -> bool:
        """True with probability p; p <= 0 consumes nothing"""
        if p <= 0.0:
            return False
        return self.uniform() < p

    def choice(self, seq: Sequence[T]) -> T:
        if not seq:
            raise ParameterError("Cannot choose from empty sequence")
        return seq[self.integers(len(seq))]

    def sample(self, population: Sequence[T], k: int) -> List[T]:
        """k distinct elements, partial Fisher-Yates"""
        n = len(population)
        if k < 0 or k > n:
            raise ParameterError(f"Cannot sample {k} from a population of {n}")
        pool = list(population)
        result = []
        for i in range(k):
            j = self.integers(n - i)
            result.append(pool[j])
            pool[j] = pool[n - 1 - i]
        return result


def _check_scale(b: float) -> None:
    if not b > 0 or not math.isfinite(b):
        raise ParameterError(f"Laplace scale must be positive and finite, got {b}")


def _laplace_from_uniform(u: float, b: float) -> float:
    v = u - 0.5
    magnitude = 1.0 - 2.0 * abs(v)
    if magnitude <= 0.0:
        # u == 0 maps to the far left tail; clamp to the smallest positive double
        magnitude = np.nextafter(0.0, 1.0)
    return -b * math.copysign(1.0, v) * math.log(magnitude)


def laplace_sample(scale: float, rng: RngStream) -> float:
    """One zero-mean Laplace(b) draw via the inverse CDF of one uniform"""
    _check_scale(scale)
    return _laplace_from_uniform(rng.uniform(), scale)


def laplace_samples(scale: float, rng: RngStream, count: int) -> np.ndarray:
    """Vectorised laplace_sample; same values as `count` scalar calls"""
    _check_scale(scale)
    u = rng.uniforms(count)
    v = u - 0.5
    magnitude = np.maximum(1.0 - 2.0 * np.abs(v), np.nextafter(0.0, 1.0))
    return -scale * np.where(v < 0, -1.0, 1.0) * np.log(magnitude)


def laplace_tail_prob(b: float, delta: float) -> float:
    """Pr(Lap(b) > delta) = exp(-delta / b) / 2"""
    _check_scale(b)
    if delta < 0:
        raise ParameterError(f"delta must be non-negative, got {delta}")
    return 0.5 * math.exp(-delta / b)


def normalize_policy(raw: Sequence[float], floor: float = DEFAULT_POLICY_FLOOR) -> List[float]:
    """
    Clip every entry to at least `floor`, then divide by the post-clip sum.

    The result sums to 1 and keeps every action above floor / S, which is the
    positive lower bound the convergence argument needs.
    """
    k = len(raw)
    if k == 0:
        raise ParameterError("Cannot normalize an empty policy")
    if not floor > 0 or floor * k >= 1.0:
        raise ParameterError(f"policy floor must satisfy 0 < floor*k < 1, got floor={floor}, k={k}")
    clipped = [x if x > floor else floor for x in raw]
    total = math.fsum(clipped)
    return [x / total for x in clipped]
