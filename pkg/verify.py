#!/usr/bin/env python3
"""
Statistical verification suite
Monte-Carlo checks of the Laplace tail law, differential advising as a
histogram ratio test, the average-reward shift and its tail bound, and
convergence of the decaying-step Q update on a two-armed bandit.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy import stats

from advising import AdvisingParams, noisy_reward_shift, perturb_advice, utility_delta_bound, utility_tail_bound
from learning import LearnerParams, decay_alpha, q_update
from numerics import ParameterError, RngStream, laplace_samples, laplace_tail_prob

TAIL_PROB_TOLERANCE = 0.005
SIGN_PROB_TOLERANCE = 0.002
BANDIT_TOLERANCE = 0.05


@dataclass
class VerificationParams:
    """Bound parameters (delta, utility beta, lambda, v) plus Monte-Carlo sizes"""

    delta: float = 1.0
    beta_util: float = 0.05
    lam: float = 2.0
    v: float = 2.0
    trials: int = 1_000_000
    epsilon: float = 1.0
    delta_q: float = 1.0
    actions: int = 4
    policy: Tuple[float, ...] = (0.4, 0.3, 0.2, 0.1)
    bin_width: float = 0.5
    min_hits: int = 1000
    ratio_slack: float = 1.1
    bandit_means: Tuple[float, ...] = (0.5, 0.2)
    bandit_steps: int = 10_000
    bandit_reps: int = 100
    bandit_alpha0: float = 0.2
    bandit_checkpoints: Tuple[int, ...] = (100, 1000, 10_000)
    seed: int = 2024

    def __post_init__(self):
        if not self.delta > 0 or not self.lam > 0:
            raise ParameterError(f"delta and lambda must be positive, got ({self.delta}, {self.lam})")
        if not 0.0 < self.beta_util < 1.0:
            raise ParameterError(f"beta_util must lie in (0,1), got {self.beta_util}")
        if self.v < math.sqrt(self.actions) * self.scale:
            raise ParameterError(f"v={self.v} below sqrt(k)*dQ/eps={math.sqrt(self.actions) * self.scale}")
        if len(self.policy) != self.actions or abs(sum(self.policy) - 1.0) > 1e-9:
            raise ParameterError(f"policy must be a distribution over {self.actions} actions")
        if self.trials < 1000 or self.bandit_reps < 2:
            raise ParameterError("trials >= 1000 and bandit_reps >= 2 required")
        if max(self.bandit_checkpoints) > self.bandit_steps:
            raise ParameterError("bandit checkpoints beyond bandit_steps")

    @property
    def scale(self) -> float:
        return self.delta_q / self.epsilon


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: Dict[str, float]
    expected: Dict[str, float]
    detail: str = ""


@dataclass
class VerificationReport:
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def add(self, check: CheckResult) -> None:
        icon = "✅" if check.passed else "❌"
        logger.info(f"{icon} {check.name}: {check.detail}")
        self.checks.append(check)

    def to_text(self) -> str:
        lines = []
        for check in self.checks:
            icon = "✅" if check.passed else "❌"
            measured = ", ".join(f"{k}={v:.6g}" for k, v in check.measured.items())
            expected = ", ".join(f"{k}={v:.6g}" for k, v in check.expected.items())
            lines.append(f"{icon} {check.name} | measured {measured} | expected {expected}")
        lines.append(f"{'✅ all checks passed' if self.passed else '❌ verification failed'}")
        return "\n".join(lines)

    def to_dict(self) -> Dict[str, Any]:
        return {"passed": self.passed, "checks": [asdict(check) for check in self.checks]}


def check_laplace_tail(params: VerificationParams) -> CheckResult:
    """Fraction of Lap(b) draws above 0 and above delta against 1/2 exp(-delta/b)"""
    samples = laplace_samples(params.scale, RngStream(params.seed, 1), params.trials)
    above_delta = float(np.mean(samples > params.delta))
    above_zero = float(np.mean(samples > 0.0))
    analytic = laplace_tail_prob(params.scale, params.delta)
    passed = abs(above_delta - analytic) < TAIL_PROB_TOLERANCE and abs(above_zero - 0.5) < SIGN_PROB_TOLERANCE
    return CheckResult("laplace_tail", passed,
                       {"pr_above_delta": above_delta, "pr_above_zero": above_zero},
                       {"pr_above_delta": analytic, "pr_above_zero": 0.5},
                       f"Pr(X>{params.delta:g})={above_delta:.5f} vs {analytic:.5f}")


def histogram_ratio(a: np.ndarray, b: np.ndarray, bin_width: float, min_hits: int) -> Tuple[float, int]:
    """Largest count ratio (either direction) over bins where both samples have >= min_hits"""
    low = math.floor(min(a.min(), b.min()) / bin_width) * bin_width
    high = math.ceil(max(a.max(), b.max()) / bin_width) * bin_width + bin_width
    edges = np.arange(low, high + bin_width / 2, bin_width)
    hist_a, _ = np.histogram(a, bins=edges)
    hist_b, _ = np.histogram(b, bins=edges)
    dense = (hist_a >= min_hits) & (hist_b >= min_hits)
    if not dense.any():
        return 1.0, 0
    ratios = hist_a[dense] / hist_b[dense]
    return float(max(ratios.max(), (1.0 / ratios).max())), int(dense.sum())


def check_dp_ratio(params: VerificationParams) -> CheckResult:
    """
    Noisy advice from q and from q' (one coordinate moved by dQ) must be
    indistinguishable up to e^epsilon on every coordinate's histogram.
    Outputs come from the advising noise path itself, and every coordinate
    needs overlapping dense bins.
    """
    k = params.actions
    scale = AdvisingParams(epsilon=params.epsilon, delta_q=params.delta_q).scale
    q = [0.0] * k
    q_shifted = [params.delta_q] + [0.0] * (k - 1)
    rng_a, rng_b = RngStream(params.seed, 2), RngStream(params.seed, 3)
    out_a = np.array([perturb_advice(q, scale, rng_a) for _ in range(params.trials)])
    out_b = np.array([perturb_advice(q_shifted, scale, rng_b) for _ in range(params.trials)])

    worst, bins_per_coordinate = 1.0, []
    for coordinate in range(k):
        ratio, bins = histogram_ratio(out_a[:, coordinate], out_b[:, coordinate], params.bin_width, params.min_hits)
        worst = max(worst, ratio)
        bins_per_coordinate.append(bins)
    limit = math.exp(params.epsilon) * params.ratio_slack
    dense_bins = sum(bins_per_coordinate)
    return CheckResult("dp_histogram_ratio", worst <= limit and min(bins_per_coordinate) > 0,
                       {"max_ratio": worst, "dense_bins": float(dense_bins),
                        "min_dense_bins_per_coordinate": float(min(bins_per_coordinate))},
                       {"max_ratio": limit},
                       f"max bin ratio {worst:.4f} over {dense_bins} bins "
                       f"(fewest on one coordinate {min(bins_per_coordinate)}), limit {limit:.4f}")


def check_reward_shift(params: VerificationParams) -> CheckResult:
    """
    r-bar' - r-bar = sum_a pi_a Lap_a(b). Its upper tail at delta is reported
    against 1/2 exp(-delta/b); a weighted average of iid Laplace draws is
    never heavier-tailed than one draw, and the shift is symmetric.
    """
    shift = noisy_reward_shift(params.policy, params.scale, RngStream(params.seed, 4), params.trials)
    upper = float(np.mean(shift > params.delta))
    lower = float(np.mean(shift < -params.delta))
    analytic = laplace_tail_prob(params.scale, params.delta)
    stderr = math.sqrt(max(analytic * (1 - analytic), 1e-12) / params.trials)
    symmetric = abs(upper - lower) < 4 * math.sqrt(2) * stderr
    bounded = upper <= analytic + 3 * stderr
    delta_bound = utility_delta_bound(params.delta_q, params.epsilon, 1, params.beta_util)
    return CheckResult("reward_shift", symmetric and bounded,
                       {"pr_shift_above_delta": upper, "pr_shift_below_minus_delta": lower},
                       {"single_laplace_tail": analytic, "delta_bound_t1": delta_bound},
                       f"Pr(shift>{params.delta:g})={upper:.5f}, Pr(shift<-{params.delta:g})={lower:.5f}, "
                       f"single-draw tail {analytic:.5f}")


def check_sum_tail_bound(params: VerificationParams) -> CheckResult:
    """Pr(sum of k Lap(b) > lambda) <= exp(-lambda^2 / (8 v^2)) for one iteration"""
    bound = utility_tail_bound(params.lam, params.v, 1, params.actions, params.delta_q, params.epsilon)
    draws = laplace_samples(params.scale, RngStream(params.seed, 5), params.trials * params.actions)
    sums = draws.reshape(params.trials, params.actions).sum(axis=1)
    measured = float(np.mean(sums > params.lam))
    return CheckResult("sum_tail_bound", measured <= bound,
                       {"pr_sum_above_lambda": measured}, {"bound": bound},
                       f"Pr(sum>{params.lam:g})={measured:.5f} <= {bound:.5f}")


def bandit_run(alpha0: float, means: Sequence[float], steps: int, rng: RngStream,
               checkpoints: Sequence[int] = ()) -> Tuple[np.ndarray, np.ndarray, Dict[int, np.ndarray]]:
    """
    Single-state bandit with terminal next state and uniformly sampled
    actions. Returns final Q, the schedule expectation mu*(1 - prod(1-alpha))
    per action, and Q at each checkpoint.
    """
    k = len(means)
    q = np.zeros(k)
    untouched = np.ones(k)
    params = LearnerParams(alpha=alpha0, alpha0=alpha0, gamma=0.5)
    snapshots = {}
    wanted = set(checkpoints)
    for step in range(1, steps + 1):
        action = rng.integers(k)
        reward = 1.0 if rng.bernoulli(means[action]) else 0.0
        q[action] = q_update(q[action], reward, 0.0, params.alpha, params.gamma)
        untouched[action] *= 1.0 - params.alpha
        params = decay_alpha(params)
        if step in wanted:
            snapshots[step] = q.copy()
    expected = np.asarray(means) * (1.0 - untouched)
    return q, expected, snapshots


def check_bandit(params: VerificationParams) -> CheckResult:
    """
    At the configured alpha0 the estimate is unbiased for its step schedule
    and the error shrinks across checkpoints; with alpha0 = 1 (sample-mean
    like weights) every action lands within tolerance in 95% of repetitions.
    """
    means = np.asarray(params.bandit_means)
    deviations, errors_at = [], {c: [] for c in params.bandit_checkpoints}
    final_errors = []
    for rep in range(params.bandit_reps):
        q, expected, snapshots = bandit_run(params.bandit_alpha0, means, params.bandit_steps,
                                            RngStream(params.seed, 1000 + rep), params.bandit_checkpoints)
        deviations.extend(q - expected)
        final_errors.append(np.abs(q - means).max())
        for checkpoint, snapshot in snapshots.items():
            errors_at[checkpoint].append(float(np.abs(snapshot - means).mean()))
    unbiased = stats.ttest_1samp(deviations, 0.0).pvalue > 0.001
    curve = [float(np.mean(errors_at[c])) for c in sorted(errors_at)]
    shrinking = all(later < earlier for earlier, later in zip(curve, curve[1:]))

    hits = 0
    for rep in range(params.bandit_reps):
        q, _, _ = bandit_run(1.0, means, params.bandit_steps, RngStream(params.seed, 5000 + rep))
        hits += int(np.all(np.abs(q - means) < BANDIT_TOLERANCE))
    within = hits / params.bandit_reps

    measured = {"deviation_pvalue": float(stats.ttest_1samp(deviations, 0.0).pvalue),
                "within_tolerance_alpha0_1": within,
                f"mean_abs_error_alpha0_{params.bandit_alpha0:g}": float(np.mean(final_errors))}
    for checkpoint, value in zip(sorted(errors_at), curve):
        measured[f"mean_abs_error_at_{checkpoint}"] = value
    return CheckResult("bandit_convergence", unbiased and shrinking and within >= 0.95, measured,
                       {"within_tolerance_alpha0_1": 0.95, "tolerance": BANDIT_TOLERANCE},
                       f"{within:.0%} of reps within {BANDIT_TOLERANCE} at alpha0=1, "
                       f"error curve {', '.join(f'{v:.4f}' for v in curve)}")


def verify(params: VerificationParams = None) -> VerificationReport:
    params = params or VerificationParams()
    logger.info(f"🔬 verification: {params.trials} trials, b={params.scale:g}, seed {params.seed}")
    report = VerificationReport()
    for check in (check_laplace_tail, check_dp_ratio, check_reward_shift, check_sum_tail_bound, check_bandit):
        report.add(check(params))
    return report
