import json
import math

import numpy as np
import pytest

from ergolab.concentration import (STATISTICS, TailEstimate, TailParams, borel_cantelli_sum,
                                   clopper_pearson, freedman_bound, mc_tail, mc_tail_schedule,
                                   theoretical_sum, variance_envelope)
from ergolab.errors import ConfigError, DomainError, ParameterError
from ergolab.random_model import selector_probabilities


def test_freedman_examples():
    assert freedman_bound(1e-12, 1.0) == pytest.approx(2.0)
    assert freedman_bound(2, 2) == pytest.approx(2 * math.exp(-0.5))
    assert freedman_bound(2, 2) == pytest.approx(1.21306, abs=1e-5)
    assert freedman_bound(4, 1e-12) == pytest.approx(0.27067, abs=1e-5)


@pytest.mark.parametrize("a,b", [(0, 1), (-1, 1), (1, 0), (1, -2)])
def test_freedman_domain(a, b):
    with pytest.raises(DomainError):
        freedman_bound(a, b)


def test_freedman_monotone():
    a = np.linspace(0.1, 50, 200)
    b = np.linspace(0.1, 50, 200)
    va = [freedman_bound(x, 3.0) for x in a]
    vb = [freedman_bound(3.0, x) for x in b]
    assert np.all(np.diff(va) < 0)
    assert np.all(np.diff(vb) > 0)


def test_clopper_pearson():
    lo, hi = clopper_pearson(0, 100)
    assert lo == 0 and 0 < hi < 0.06
    lo, hi = clopper_pearson(100, 100)
    assert hi == 1 and lo > 0.94
    lo, hi = clopper_pearson(30, 100)
    assert lo < 0.3 < hi


def test_interval_shrinks_on_prefixes():
    rng = np.random.default_rng(0)
    hits = rng.random(6400) < 0.1
    widths = []
    for n in (100, 200, 400, 800, 1600, 3200, 6400):
        lo, hi = clopper_pearson(int(hits[:n].sum()), n)
        widths.append(hi - lo)
    assert np.all(np.diff(widths) < 0)


def test_threshold_above_maximum_gives_zero_hits():
    N = 1000
    est = mc_tail("martingale_sum", TailParams(0.3, N), N + 1.0, 100, master_seed=1)
    assert est.hits == 0 and est.estimate == 0
    assert est.ci_low == 0 and est.ci_high > 0


def test_unknown_statistic():
    with pytest.raises(ConfigError):
        mc_tail("bogus", TailParams(0.3, 100), 1.0, 100, 0)


def test_martingale_sum_under_freedman():
    N = 10_000
    b = variance_envelope(0.3, N)
    sig = selector_probabilities(0.3, N)
    assert b == pytest.approx(np.sum(sig * (1 - sig)))
    est = mc_tail("martingale_sum", TailParams(0.3, N), 3 * math.sqrt(b), 2000, master_seed=3)
    assert est.variance_cap == pytest.approx(b)
    assert est.bound == pytest.approx(freedman_bound(3 * math.sqrt(b), b))
    assert est.ci_high <= est.capped_bound


def test_kernel_sup_union_bound():
    N = 2**12
    a = N ** (1 - 0.6 - 2 * (0.4 / 12))
    est = mc_tail("kernel_sup", TailParams(0.3, N), a, 100, master_seed=5)
    assert 0 <= est.estimate <= 1
    assert est.variance_cap > 0
    want = 2 * N * math.exp(-a * a / (2 * (a + est.variance_cap)))
    assert est.bound == pytest.approx(want)


@pytest.mark.parametrize("statistic", STATISTICS)
def test_every_statistic_runs(statistic):
    ests = mc_tail_schedule(statistic, 0.3, [256, 1024], [1.0, 2.0], 20, master_seed=2)
    for e in ests:
        assert 0 <= e.estimate <= 1
        assert e.ci_low <= e.estimate <= e.ci_high
        assert e.bound >= 0
        d = json.loads(e.to_json())
        assert d["statistic"] == statistic and d["estimate"] == e.estimate


def test_thread_count_does_not_matter():
    a = mc_tail_schedule("lemma_tech_statistic", 0.3, [512, 1024], [5.0, 5.0], 40, 9, threads=1)
    b = mc_tail_schedule("lemma_tech_statistic", 0.3, [512, 1024], [5.0, 5.0], 40, 9, threads=4)
    assert a == b


def test_schedule_validation():
    with pytest.raises(ParameterError):
        mc_tail_schedule("martingale_sum", 0.3, [10, 20], [1.0], 10, 0)
    with pytest.raises(ParameterError):
        mc_tail_schedule("martingale_sum", 0.3, [10], [1.0], 0, 0)


def _est(ci_high, bound=0.5, statistic="martingale_sum"):
    return TailEstimate(statistic, 1.0, 1.0, 10, 0.3, 100, 0, 0.0, ci_high, bound)


def test_borel_cantelli_sums():
    assert borel_cantelli_sum([_est(0.0) for _ in range(5)]) == 0
    c, q = 0.3, 0.5
    chain = [_est(c * q ** k, bound=c * q ** k) for k in range(60)]
    assert borel_cantelli_sum(chain) == pytest.approx(c / (1 - q))
    assert theoretical_sum(chain) == pytest.approx(c / (1 - q))
    assert theoretical_sum([_est(0.1, bound=7.0)]) == 1.0
    with pytest.raises(ParameterError):
        borel_cantelli_sum([_est(0.1), _est(0.1, statistic="kernel_sup")])


def test_kernel_sup_borel_cantelli_along_schedule():
    sched = [2**10, 2**11, 2**12]
    thresholds = [N ** (1 - 0.6 - 2 * (0.4 / 12)) for N in sched]
    ests = mc_tail_schedule("kernel_sup", 0.3, sched, thresholds, 50, master_seed=8)
    total = borel_cantelli_sum(ests)
    assert 0 < total <= len(sched)
    assert theoretical_sum(ests) <= len(sched)
