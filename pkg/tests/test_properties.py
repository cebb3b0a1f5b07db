import math

import numpy as np
from hypothesis import given, settings, strategies as st

from ergolab.averages import average_selector_form, lacunary_schedule, sigma_part_average, y_part_average
from ergolab.concentration import freedman_bound
from ergolab.dynamics import character, coboundary, rotation
from ergolab.kernels import (LinearizedPartition, ZSignal, hl_maximal, kernel_all_h, tt_star_apply)
from ergolab.random_model import SelectorPath, counting_function
from ergolab.weights import CONSTANT, Weight, build_net, net_approx_error

bits_st = st.lists(st.integers(0, 1), min_size=1, max_size=300).map(lambda b: [1] + b)
alpha_st = st.floats(0.01, 0.49)


@given(bits_st, alpha_st)
def test_y_sum_identity(bits, alpha):
    path = SelectorPath.from_bits(bits, alpha=alpha)
    np.testing.assert_allclose(np.cumsum(path.y), path.s[1:] - path.w[1:], rtol=1e-12, atol=1e-10)


@given(bits_st)
def test_counting_round_trip(bits):
    path = SelectorPath.from_bits(bits)
    a = counting_function(path).a
    assert np.all(np.diff(a) > 0)
    assert np.array_equal(path.s[a], np.arange(1, a.size + 1))


@given(st.floats(1.01, 10.0), st.integers(1, 10**6))
def test_lacunary_schedule_structure(rho, n_max):
    vals = lacunary_schedule(rho, n_max).values
    assert vals[0] == 1 and vals[-1] <= n_max
    assert all(a < b for a, b in zip(vals, vals[1:]))
    floors = {math.floor(rho ** k) for k in range(int(math.log(n_max) / math.log(rho)) + 2)}
    assert set(vals) <= floors
    assert set(vals) == {v for v in floors if v <= n_max}


@settings(max_examples=40, deadline=None)
@given(bits_st, st.floats(0.0, 0.999), st.floats(1.0, 3.0), st.integers(1, 300))
def test_split_identity(bits, x, c, N):
    path = SelectorPath.from_bits(bits)
    N = min(N, path.n_max)
    f = coboundary(character(1))
    sys = rotation()
    b = Weight(c)
    whole = average_selector_form(path, b, sys, f, x, N, "power")
    parts = y_part_average(path, b, sys, f, x, N) + sigma_part_average(path, b, sys, f, x, N)
    assert abs(whole - parts) <= 1e-12 * max(1.0, abs(whole))


@given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(1.01, 2.0))
def test_freedman_monotonicity(a, b, k):
    assert freedman_bound(a * k, b) < freedman_bound(a, b)
    assert freedman_bound(a, b * k) > freedman_bound(a, b)
    assert 0 < freedman_bound(a, b) <= 2


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.5), st.integers(1, 2), st.integers(2, 200), st.floats(0.1, 1.0),
       st.floats(0.0, 1.0), st.integers(1, 2))
def test_net_coverage(delta, m_max, N, kappa, u, m):
    net = build_net(delta, m_max, N, kappa)
    m = min(m, m_max)
    c = m + delta + u * (1 - 2 * delta)
    c0, err = net_approx_error(c, net)
    assert err <= net.guaranteed_error + 1e-12


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=40))
def test_hl_brute_force(vals):
    v = np.array(vals)
    a = np.abs(v)
    p = np.concatenate([[0], np.cumsum(a)])
    L = a.size
    want = [max((p[j + 1] - p[i]) / (j - i + 1) for i in range(x + 1) for j in range(x, L))
            for x in range(L)]
    np.testing.assert_allclose(hl_maximal(ZSignal(0, v)).values.real, want, rtol=1e-9, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(bits_st, st.floats(1.0, 3.0))
def test_kernel_conjugate_symmetry(bits, c):
    path = SelectorPath.from_bits(bits)
    N = path.n_max
    k = kernel_all_h(path, Weight(c), Weight(c), N)
    np.testing.assert_allclose(k, np.conj(k[::-1]), atol=1e-9)
    k1 = kernel_all_h(path, CONSTANT, CONSTANT, N)
    np.testing.assert_allclose(k1.imag, 0, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(bits_st, st.integers(1, 64), st.integers(0, 2**32 - 1))
def test_tt_star_psd(bits, L, seed):
    path = SelectorPath.from_bits(bits)
    rng = np.random.default_rng(seed)
    net = [CONSTANT, Weight(1.5)]
    part = LinearizedPartition(0, rng.integers(0, 2, L))
    f = ZSignal(0, rng.standard_normal(L) + 1j * rng.standard_normal(L))
    q = np.vdot(f.values, tt_star_apply(part, net, path, path.n_max, f).values)
    assert q.real >= -1e-10
