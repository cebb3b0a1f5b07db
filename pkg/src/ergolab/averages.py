"""Modulated random ergodic averages.

Three equivalent ways of writing the average along the random times are
supported:

* sequence form  ``(1/N) sum_{n<=N} b(n) f(T^{a_n} x)``
* selector form  ``(1/D_N) sum_{n<=N} X_n b(S_{n-1}+1) f(T^n x)`` with
  ``D_N`` one of ``S_N``, ``W_N`` or ``N**(1-alpha)``
* its split ``X_n = Y_n + sigma_n`` into a ``Y`` part and a ``sigma`` part,
  both normalized by ``N**(1-alpha)``.

Functions take a single state ``x`` or an array of states; with arrays the
result has one entry per state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import DynSystem, Observable, orbit_eval
from .errors import HorizonError, ParameterError, RangeError
from .random_model import CountingTable, SelectorPath, counting_function
from .weights import CONSTANT, Weight, WeightNet

NORMALIZATIONS = ("S", "W", "power")
FORMS = ("selector", "y_part", "sigma_part")
# summation by parts gives |sigma-part| <= 2 * lemma_final_bound
LEMMA_FINAL_CONSTANT = 2.0


@dataclass(frozen=True)
class LacunarySchedule:
    rho: float
    values: tuple[int, ...]

    def __iter__(self):
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)


def lacunary_schedule(rho: float, n_max: int, n_min: int = 1) -> LacunarySchedule:
    """Distinct values of ``floor(rho**k)``, ``k >= 0``, between ``n_min`` and ``n_max``."""
    if not rho > 1.0:
        raise ParameterError(f"lacunarity constant rho must exceed 1, got {rho!r}")
    values: list[int] = []
    k = 0
    while True:
        v = math.floor(rho ** k)
        if v > n_max:
            break
        if v >= n_min and (not values or v > values[-1]):
            values.append(v)
        k += 1
    return LacunarySchedule(float(rho), tuple(values))


def _states(x) -> tuple[np.ndarray, bool]:
    xa = np.asarray(x)
    return xa.reshape(-1, 1), xa.ndim == 0


def _unwrap(values: np.ndarray, scalar: bool):
    values = values.reshape(-1) if values.ndim else values
    return complex(values[0]) if scalar else values


def _coefficients(path: SelectorPath, form: str, n_hi: int) -> np.ndarray:
    if form == "selector":
        return path.x[:n_hi].astype(np.float64)
    if form == "y_part":
        return path.y[:n_hi]
    if form == "sigma_part":
        return path.sigma[:n_hi]
    raise ParameterError(f"unknown form {form!r}; expected one of {FORMS}")


def _prefix(path: SelectorPath, weight: Weight, sys: DynSystem, f: Observable, states: np.ndarray,
            n_hi: int, form: str) -> np.ndarray:
    """Cumulative sums ``sum_{n<=N} c_n b(S_{n-1}+1) f(T^n x)`` for ``N = 0..n_hi``."""
    n = np.arange(1, n_hi + 1)
    terms = _coefficients(path, form, n_hi) * weight(path.s[:n_hi] + 1)
    fx = orbit_eval(sys, f, states, n[None, :])
    out = np.zeros((states.shape[0], n_hi + 1), dtype=np.complex128)
    np.cumsum(fx * terms[None, :], axis=1, out=out[:, 1:])
    return out


def normalizer(path: SelectorPath, N: int, normalization: str) -> float:
    if normalization == "S":
        return float(path.s[N])
    if normalization == "W":
        return float(path.w[N])
    if normalization == "power":
        return float(N) ** (1.0 - path.alpha)
    raise ParameterError(f"unknown normalization {normalization!r}; expected one of {NORMALIZATIONS}")


def _check_N(path: SelectorPath, N: int) -> int:
    N = int(N)
    if not 1 <= N <= path.n_max:
        raise RangeError(f"N = {N} outside 1..{path.n_max}")
    return N


def average_sequence_form(path: SelectorPath, table: CountingTable, weight: Weight,
                          sys: DynSystem, f: Observable, x, N: int):
    """``(1/N) sum_{n<=N} b(n) f(T^{a_n} x)``."""
    N = int(N)
    if N < 1 or N > len(table):
        raise RangeError(f"N = {N} exceeds the {len(table)} selected times of the path")
    states, scalar = _states(x)
    n = np.arange(1, N + 1)
    fx = orbit_eval(sys, f, states, table.a[None, :N])
    total = (fx * weight(n)[None, :]).sum(axis=1) / N
    return _unwrap(total, scalar)


def average_selector_form(path: SelectorPath, weight: Weight, sys: DynSystem, f: Observable, x,
                          N: int, normalization: str = "S"):
    """``(1/D_N) sum_{n<=N} X_n b(S_{n-1}+1) f(T^n x)``."""
    N = _check_N(path, N)
    states, scalar = _states(x)
    total = _prefix(path, weight, sys, f, states, N, "selector")[:, N]
    return _unwrap(total / normalizer(path, N, normalization), scalar)


def y_part_average(path: SelectorPath, weight: Weight, sys: DynSystem, f: Observable, x, N: int):
    """``N**(alpha-1) sum_{n<=N} Y_n b(S_{n-1}+1) f(T^n x)``."""
    N = _check_N(path, N)
    states, scalar = _states(x)
    total = _prefix(path, weight, sys, f, states, N, "y_part")[:, N]
    return _unwrap(total / normalizer(path, N, "power"), scalar)


def sigma_part_average(path: SelectorPath, weight: Weight, sys: DynSystem, f: Observable, x, N: int):
    """``N**(alpha-1) sum_{n<=N} sigma_n b(S_{n-1}+1) f(T^n x)``."""
    N = _check_N(path, N)
    states, scalar = _states(x)
    total = _prefix(path, weight, sys, f, states, N, "sigma_part")[:, N]
    return _unwrap(total / normalizer(path, N, "power"), scalar)


def _form_normalization(form: str, normalization: str | None) -> str:
    if normalization is None:
        return "power"
    if form != "selector" and normalization != "power":
        raise ParameterError("the y/sigma parts are only defined with the N^(1-alpha) normalizer")
    return normalization


def _schedule_sums(fx: np.ndarray, terms: np.ndarray, schedule: Sequence[int]) -> np.ndarray:
    """``sum_{n<=N} fx[s, n-1] terms[n-1, w]`` for every ``N`` of ``schedule``.

    Block matrix products between consecutive schedule points keep the cost
    at one pass over ``n`` for all weights at once.  Shape ``(len(schedule), S, W)``.
    """
    out = np.empty((len(schedule), fx.shape[0], terms.shape[1]), dtype=np.complex128)
    acc = np.zeros((fx.shape[0], terms.shape[1]), dtype=np.complex128)
    prev = 0
    for i, N in enumerate(schedule):
        acc = acc + fx[:, prev:N] @ terms[prev:N]
        out[i] = acc
        prev = N
    return out


def maximal_series_forms(path: SelectorPath, net: WeightNet, sys: DynSystem, f: Observable, x,
                         schedule: Sequence[int], forms: Sequence[str] = FORMS,
                         normalization: str | None = None) -> dict[str, np.ndarray]:
    """:func:`maximal_series` for several forms sharing one orbit evaluation."""
    norms_by_form = {form: _form_normalization(form, normalization) for form in forms}
    schedule = [_check_N(path, N) for N in schedule]
    if not schedule:
        raise ParameterError("empty schedule")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ParameterError("schedule must be strictly increasing")
    n_hi = schedule[-1]
    if net.horizon < n_hi:
        raise HorizonError(f"net horizon {net.horizon} is shorter than N = {n_hi}")
    states, _ = _states(x)
    fx = orbit_eval(sys, f, states, np.arange(1, n_hi + 1)[None, :])
    bvals = np.stack([w(path.s[:n_hi] + 1) for w in net.weights()], axis=1)
    out = {}
    for form, normalization in norms_by_form.items():
        terms = _coefficients(path, form, n_hi)[:, None] * bvals
        sums = _schedule_sums(fx, terms, schedule)
        norms = np.array([normalizer(path, N, normalization) for N in schedule])
        out[form] = np.abs(sums).max(axis=2) / norms[:, None]
    return out


def maximal_series(path: SelectorPath, net: WeightNet, sys: DynSystem, f: Observable, x,
                   schedule: Sequence[int], form: str = "selector",
                   normalization: str | None = None) -> np.ndarray:
    """``sup_{b in net} |average|`` for every ``N`` of ``schedule``.

    Returns shape ``(len(schedule), n_states)``.
    """
    return maximal_series_forms(path, net, sys, f, x, schedule, (form,), normalization)[form]


def maximal_average(path: SelectorPath, net: WeightNet, sys: DynSystem, f: Observable, x, N: int,
                    form: str = "selector", normalization: str | None = None):
    """``max_{b in net} |form average at N|``."""
    vals = maximal_series(path, net, sys, f, x, [N], form, normalization)[0]
    return float(vals[0]) if np.ndim(x) == 0 else vals


@dataclass(frozen=True)
class AverageSeries:
    schedule: LacunarySchedule
    rows: tuple[dict, ...]


def average_series(path: SelectorPath, weight: Weight, sys: DynSystem, f: Observable, x,
                   schedule: LacunarySchedule, net: WeightNet | None = None) -> AverageSeries:
    """All forms at a single state ``x`` along ``schedule``."""
    states, _ = _states(x)
    if states.shape[0] != 1:
        raise ParameterError("average_series takes a single state")
    ns = [_check_N(path, N) for N in schedule]
    n_hi = max(ns)
    sel = _prefix(path, weight, sys, f, states, n_hi, "selector")[0]
    yp = _prefix(path, weight, sys, f, states, n_hi, "y_part")[0]
    sp = _prefix(path, weight, sys, f, states, n_hi, "sigma_part")[0]
    maxima = maximal_series(path, net, sys, f, x, ns, "selector")[:, 0] if net is not None else None
    table = None
    rows = []
    for i, N in enumerate(ns):
        power = normalizer(path, N, "power")
        seq = None
        if N <= path.s[path.n_max]:
            if table is None:
                table = counting_function(path)
            seq = average_sequence_form(path, table, weight, sys, f, x, N)
        rows.append({
            "N": N,
            "seq_form": seq,
            "selector_form": complex(sel[N] / power),
            "y_part": complex(yp[N] / power),
            "sigma_part": complex(sp[N] / power),
            "maximal_over_net": None if maxima is None else float(maxima[i]),
        })
    return AverageSeries(schedule, tuple(rows))


def lemma_final_bound(path: SelectorPath, h_bound: float, N: int, alpha: float | None = None) -> float:
    """Summation-by-parts majorant of the sigma part for ``f = h - Th``.

    ``|h| [N^(a-1) + N^(a-1) sum_{2<=m<=N} (m-1)^(-a-1)
    + N^(a-1) sum_{2<=m<=N} (m-1)^(-a) X_{m-1}]``; the maximal sigma-part
    average never exceeds ``LEMMA_FINAL_CONSTANT`` times this value.
    """
    N = _check_N(path, N)
    if N < 2:
        raise ParameterError("the majorant needs N >= 2")
    a = path.alpha if alpha is None else float(alpha)
    m1 = np.arange(1, N, dtype=np.float64)  # m - 1 for m = 2..N
    scale = float(N) ** (a - 1.0)
    second = float(np.sum(m1 ** (-a - 1.0)))
    third = float(np.sum(m1 ** (-a) * path.x[:N - 1]))
    return h_bound * scale * (1.0 + second + third)


def dyadic_block_constant(path: SelectorPath, K_max: int | None = None,
                          alpha: float | None = None) -> float:
    """``max_K sum_{K/2<m<=K} (m-1)^(-a) X_{m-1} / K^(1-2a)`` over dyadic ``2 <= K <= K_max``."""
    a = path.alpha if alpha is None else float(alpha)
    K_max = path.n_max if K_max is None else min(K_max, path.n_max)
    worst = 0.0
    K = 2
    while K <= K_max:
        m1 = np.arange(K // 2, K, dtype=np.float64)  # m - 1 for K/2 < m <= K
        block = float(np.sum(m1 ** (-a) * path.x[K // 2 - 1:K - 1]))
        worst = max(worst, block / K ** (1.0 - 2.0 * a))
        K *= 2
    return worst


def mlv_maximal(path: SelectorPath, sys: DynSystem, f: Observable, x, schedule: Sequence[int]):
    """``sup_N (1/W_N) sum_{n<=N} X_n |f|(T^n x)`` over ``schedule``."""
    ns = [_check_N(path, N) for N in schedule]
    states, scalar = _states(x)
    n_hi = max(ns)
    n = np.arange(1, n_hi + 1)
    fx = np.abs(orbit_eval(sys, f, states, n[None, :]))
    sums = np.cumsum(fx * path.x[:n_hi][None, :], axis=1)
    ratios = sums[:, [N - 1 for N in ns]] / path.w[ns][None, :]
    best = ratios.max(axis=1)
    return float(best[0]) if scalar else best


def state_grid(sys: DynSystem, count: int = 64) -> np.ndarray:
    """Evenly spread sample states used to approximate almost-everywhere behaviour."""
    if sys.kind == "cyclic":
        if sys.m <= count:
            return np.arange(sys.m)
        return np.unique(np.linspace(0, sys.m - 1, count).astype(np.int64))
    return (np.arange(count) + 0.5) / count


__all__ = [
    "CONSTANT", "FORMS", "NORMALIZATIONS", "LEMMA_FINAL_CONSTANT", "AverageSeries",
    "LacunarySchedule", "average_selector_form", "average_sequence_form", "average_series",
    "dyadic_block_constant", "lacunary_schedule", "lemma_final_bound", "maximal_average",
    "maximal_series", "maximal_series_forms", "mlv_maximal", "normalizer", "sigma_part_average", "state_grid",
    "y_part_average",
]
