import cmath
import math

import numpy as np
import pytest

from ergolab.dynamics import (GOLDEN_THETA, DynSystem, character, coboundary, coboundary_eval,
                              constant, cyclic, doubling, function, mean_estimate,
                              observable_from_params, orbit_eval, rotation, system_from_params,
                              table)
from ergolab.errors import DomainError, ParameterError, PrecisionError


def e(t):
    return cmath.exp(2j * math.pi * t)


def test_rotation_character_closed_form():
    sys = rotation()
    for x, n in [(0.1, 0), (0.37, 5), (0.9, 10**6)]:
        assert orbit_eval(sys, character(1), x, n) == pytest.approx(e(x + n * GOLDEN_THETA), abs=1e-8)


@pytest.mark.parametrize("sys,x", [(rotation(), 0.3), (doubling(), 0.3), (cyclic(5), 3)])
def test_time_zero_is_identity(sys, x):
    f = character(2)
    direct = orbit_eval(sys, f, x, 0)
    if sys.kind == "cyclic":
        assert direct == pytest.approx(e(2 * x / 5))
    else:
        assert direct == pytest.approx(e(2 * x))


def test_cyclic_table_lookup():
    f = table([1, 1j, -1, -1j])
    assert orbit_eval(cyclic(4), f, 0, 3) == pytest.approx(-1j)


def test_doubling_character_matches_exact_dyadic():
    x = 0.3
    for n in range(0, 40):
        frac = math.ldexp(x, n) % 1.0
        assert orbit_eval(doubling(), character(3), x, n) == pytest.approx(e(3 * frac), abs=1e-9)


def test_doubling_precision_error():
    f = function(lambda y: np.cos(2 * np.pi * y), sup=1.0)
    orbit_eval(doubling(), f, 0.3, 52)
    with pytest.raises(PrecisionError):
        orbit_eval(doubling(), f, 0.3, 53)


def test_coboundary_rotation_identity():
    sys = rotation()
    h = character(1)
    for n in (0, 3, 1000):
        x = 0.2
        want = e(x + n * GOLDEN_THETA) * (1 - e(GOLDEN_THETA))
        assert coboundary_eval(sys, h, x, n) == pytest.approx(want, abs=1e-9)


@pytest.mark.parametrize("sys,x", [(rotation(), 0.41), (doubling(), 0.41), (cyclic(7), 2)])
def test_telescoping(sys, x):
    h = character(1)
    n = np.arange(1, 201)
    total = np.sum(coboundary_eval(sys, h, x, n))
    assert total == pytest.approx(orbit_eval(sys, h, x, 1) - orbit_eval(sys, h, x, 201), abs=1e-9)
    assert abs(total) <= 2 * h.bound + 1e-12


def test_cyclic_period_sum_is_zero():
    m = 6
    h = table(np.arange(m) ** 2 + 1j)
    s = np.sum(coboundary_eval(cyclic(m), h, 1, np.arange(m)))
    assert s == 0


def test_means():
    assert mean_estimate(rotation(), character(0)) == 1
    assert mean_estimate(rotation(), character(3)) == 0
    assert mean_estimate(cyclic(6), table([1, 2, 3, -1, -2, -3])) == 0
    f = function(lambda y: np.sin(2 * np.pi * y) ** 2, sup=1.0)
    assert abs(mean_estimate(rotation(), coboundary(f), 4096)) <= 1e-10
    assert mean_estimate(rotation(), f, 4096).real == pytest.approx(0.5)


def test_semigroup_law():
    rng = np.random.default_rng(3)
    sys = rotation()
    f = character(2)
    for _ in range(20):
        n, m = rng.integers(0, 10**5, 2)
        x = rng.random()
        shifted = function(lambda y, m=m: orbit_eval(sys, f, y, m), sup=1.0)
        assert orbit_eval(sys, f, x, n + m) == pytest.approx(orbit_eval(sys, shifted, x, n), abs=1e-8)


def test_cyclic_is_bijection():
    sys = cyclic(9)
    assert sorted(sys.step(np.arange(9)).tolist()) == list(range(9))


def test_rotation_preserves_lebesgue():
    grid = (np.arange(10_000) + 0.5) / 10_000
    image = rotation().step(grid)
    hist, _ = np.histogram(image, bins=10, range=(0, 1))
    assert np.all(hist == 1000)


def test_broadcasting():
    x = np.array([[0.1], [0.2]])
    n = np.arange(5)
    assert orbit_eval(rotation(), character(1), x, n).shape == (2, 5)


def test_errors():
    with pytest.raises(ParameterError):
        DynSystem("tent")
    with pytest.raises(ParameterError):
        rotation(1.5)
    with pytest.raises(DomainError):
        orbit_eval(rotation(), character(1), 1.2, 0)
    with pytest.raises(DomainError):
        orbit_eval(cyclic(4), character(1), 4, 0)
    with pytest.raises(DomainError):
        orbit_eval(rotation(), character(1), 0.2, -1)


def test_params_helpers():
    sys = system_from_params("cyclic", m=3)
    assert sys.m == 3
    f = observable_from_params(2, True)
    assert f.kind == "coboundary" and f.base.k == 2 and f.bound == 2.0
    assert constant(2).bound == 2
