"""Closed-form tail bounds and their Monte Carlo counterparts."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import ConfigError, DomainError, ParameterError
from .kernels import conditional_variance_all, correlate_real, kernel_sup_matrix, lemma_tech_statistic
from .random_model import check_alpha, sample_selectors, selector_probabilities
from .rng import trial_seed
from .weights import CONSTANT, Weight

STATISTICS = ("martingale_sum", "kernel_sup", "lemma_tech_statistic", "simple_term_excess")
CI_LEVEL = 0.99


def freedman_bound(a: float, b: float) -> float:
    """``2 exp(-a**2 / (2 (a + b)))`` for ``P(|sum Z_i| >= a, T_n <= b)``."""
    if not a > 0 or not b > 0:
        raise DomainError(f"Freedman's bound needs a > 0 and b > 0, got a={a!r}, b={b!r}")
    return 2.0 * math.exp(-a * a / (2.0 * (a + b)))


def clopper_pearson(hits: int, trials: int, level: float = CI_LEVEL) -> tuple[float, float]:
    """Exact two-sided binomial confidence interval."""
    tail = (1.0 - level) / 2.0
    lo = 0.0 if hits == 0 else float(stats.beta.ppf(tail, hits, trials - hits + 1))
    hi = 1.0 if hits == trials else float(stats.beta.ppf(1.0 - tail, hits + 1, trials - hits))
    return lo, hi


@dataclass(frozen=True)
class TailEstimate:
    statistic: str
    threshold: float
    variance_cap: float
    N: int
    alpha: float
    trials: int
    hits: int
    ci_low: float
    ci_high: float
    bound: float

    @property
    def estimate(self) -> float:
        return self.hits / self.trials

    @property
    def capped_bound(self) -> float:
        return min(self.bound, 1.0)

    def to_json(self) -> str:
        d = asdict(self)
        d["estimate"] = self.estimate
        return json.dumps(d, sort_keys=True)


@dataclass(frozen=True)
class TailParams:
    alpha: float
    N: int
    weights: tuple[Weight, ...] = field(default=(CONSTANT,))


def variance_envelope(alpha: float, N: int) -> float:
    """Deterministic conditional-variance cap ``sum_{n<=N} sigma_n (1 - sigma_n)`` of ``sum Y_n``."""
    sig = selector_probabilities(alpha, N)
    return float(np.sum(sig * (1.0 - sig)))


def _square_variance(sig: np.ndarray) -> np.ndarray:
    # Var(Y_n^2) for Y_n = X_n - sigma_n
    return sig * (1.0 - sig) * (1.0 - 2.0 * sig) ** 2


def statistic_values(statistic: str, path, schedule: Sequence[int],
                     weights=(CONSTANT,)) -> tuple[list[float], list[float]]:
    """Statistic and the measured ``sup_h T_N(h)`` (kernel_sup only) for each ``N``."""
    values, caps = [], []
    for N in schedule:
        if statistic == "martingale_sum":
            values.append(abs(float(path.s[N]) - float(path.w[N])))
        elif statistic == "kernel_sup":
            values.append(float(kernel_sup_matrix(path, weights, N).max()))
            # E[Y_{n+h}^2 | past] = sigma(1 - sigma) <= sigma: the single power caps the variance
            caps.append(float(conditional_variance_all(path, N, power=1).max()))
        elif statistic == "lemma_tech_statistic":
            values.append(lemma_tech_statistic(path, N))
        else:
            sig = path.sigma[:N]
            excess = np.sum(path.y[:N] ** 2 - sig * (1.0 - sig))
            values.append(abs(float(excess)) / N ** (2.0 - 2.0 * path.alpha))
    return values, caps


def _bound(statistic: str, alpha: float, N: int, threshold: float, n_weights: int,
           measured_cap: float | None) -> tuple[float, float]:
    """Variance cap and the matching Freedman-type bound."""
    sig = selector_probabilities(alpha, N)
    if statistic == "martingale_sum":
        # at N = 1 the sum is identically zero (sigma_1 = 1)
        b = max(variance_envelope(alpha, N), 1e-300)
        return b, freedman_bound(threshold, b)
    if statistic == "kernel_sup":
        b = max(measured_cap, 1e-300)
        # union over lags and ordered weight pairs
        return b, 2.0 * n_weights ** 2 * N * math.exp(-threshold ** 2 / (2.0 * (threshold + b)))
    if statistic == "lemma_tech_statistic":
        var = _square_variance(sig)
        caps = correlate_real(sig ** 2, var)[1:]
        b = max(float(np.max(caps)) if caps.size else 0.0, 1e-300)
        return b, N * freedman_bound(threshold, b)
    a = threshold * N ** (2.0 - 2.0 * alpha)
    b = max(float(np.sum(_square_variance(sig))), 1e-300)
    return b, freedman_bound(a, b)


def _check_statistic(statistic: str) -> None:
    if statistic not in STATISTICS:
        raise ConfigError(f"unknown statistic {statistic!r}; expected one of {STATISTICS}",
                          field="statistic")


def tail_estimates(statistic: str, alpha: float, schedule: Sequence[int],
                   thresholds: Sequence[Sequence[float]], values: np.ndarray,
                   caps: np.ndarray | None = None, n_weights: int = 1) -> list[TailEstimate]:
    """Aggregate per-trial statistic values into tail estimates.

    ``values[t, i]`` is trial ``t`` at ``schedule[i]``; ``thresholds[i]`` lists
    the thresholds tried at that horizon.  ``caps`` holds the measured
    ``sup_h T_N(h)`` per trial and horizon (kernel_sup only).
    """
    _check_statistic(statistic)
    values = np.asarray(values, dtype=np.float64)
    trials = values.shape[0]
    out = []
    for i, N in enumerate(schedule):
        cap = float(np.percentile(caps[:, i], 95)) if statistic == "kernel_sup" else None
        for a in thresholds[i]:
            hits = int(np.sum(values[:, i] >= a))
            b, bound = _bound(statistic, alpha, int(N), float(a), n_weights, cap)
            lo, hi = clopper_pearson(hits, trials)
            out.append(TailEstimate(statistic, float(a), b, int(N), alpha, trials, hits, lo, hi, bound))
    return out


def mc_tail_schedule(statistic: str, alpha: float, schedule: Sequence[int],
                     thresholds: Sequence[float], trials: int, master_seed: int,
                     weights: Iterable[Weight] = (CONSTANT,), threads: int = 1) -> list[TailEstimate]:
    """Tail frequencies ``P(stat_N >= threshold_N)`` along ``schedule`` from shared paths.

    Trial ``t`` uses the path seeded by ``trial_seed(master_seed, t)``; hit
    counts are merged by addition, so the result does not depend on ``threads``.
    """
    _check_statistic(statistic)
    alpha = check_alpha(alpha)
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    schedule = [int(N) for N in schedule]
    if len(thresholds) != len(schedule):
        raise ParameterError("one threshold per schedule entry is required")
    weights = tuple(weights)
    n_hi = max(schedule)

    def one(t: int):
        path = sample_selectors(alpha, n_hi, trial_seed(master_seed, t))
        return statistic_values(statistic, path, schedule, weights)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(one, range(trials)))
    values = np.array([r[0] for r in results])
    caps = np.array([r[1] for r in results]) if statistic == "kernel_sup" else None
    return tail_estimates(statistic, alpha, schedule, [[a] for a in thresholds], values, caps,
                          len(weights))


def mc_tail(statistic: str, params: TailParams, threshold: float, trials: int,
            master_seed: int, threads: int = 1) -> TailEstimate:
    """Monte Carlo tail estimate with a 99% Clopper-Pearson interval and its theoretical bound."""
    return mc_tail_schedule(statistic, params.alpha, [params.N], [threshold], trials, master_seed,
                            params.weights, threads)[0]


def borel_cantelli_sum(estimates: Sequence[TailEstimate]) -> float:
    """Sum of upper confidence limits along a schedule."""
    ids = {e.statistic for e in estimates}
    if len(ids) > 1:
        raise ParameterError(f"estimates mix statistics {sorted(ids)}")
    return float(sum(e.ci_high for e in estimates))


def theoretical_sum(estimates: Sequence[TailEstimate]) -> float:
    return float(sum(e.capped_bound for e in estimates))
