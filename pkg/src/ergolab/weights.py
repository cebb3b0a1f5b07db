"""Oscillating weights ``b(t) = e(t**c)`` and finite nets approximating them.

A :class:`WeightNet` stores its points as a union of uniform grids, so that
certified nets (which can hold ~10**13 points for modest horizons) are
represented exactly without being materialized.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import DomainError, NetBudgetError, ParameterError, ResourceError

TWO_PI = 2.0 * math.pi
MATERIALIZE_CAP = 10**7


def e(t: np.ndarray | float) -> np.ndarray | complex:
    """``exp(2 pi i t)`` with ``t`` reduced mod 1 first."""
    return np.exp(TWO_PI * 1j * np.mod(t, 1.0))


@dataclass(frozen=True)
class Weight:
    """``b(t) = e(t**c)``; ``c=None`` is the constant weight ``b = 1``."""

    c: float | None

    @property
    def is_constant(self) -> bool:
        return self.c is None

    def phase(self, t: np.ndarray | int) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if self.c is None:
            return np.zeros_like(t)
        return np.mod(t ** self.c, 1.0)

    def __call__(self, t: np.ndarray | int) -> np.ndarray:
        # t = 0 is allowed here (S_0 = 0 appears as an argument): 0**c = 0, b(0) = 1
        t = np.asarray(t, dtype=np.float64)
        if self.c is None:
            return np.ones(t.shape, dtype=np.complex128)
        return np.exp(TWO_PI * 1j * self.phase(t))

    def label(self) -> str:
        return "1" if self.c is None else repr(self.c)


CONSTANT = Weight(None)


def weight_value(c: float, t: int) -> complex:
    """``e(t**c)`` for an integer ``t >= 1``."""
    if t < 1:
        raise DomainError(f"weights are evaluated at t >= 1, got {t}")
    return complex(Weight(float(c))(t))


def phase_gap(c: float, c0: float, t: np.ndarray) -> np.ndarray:
    """``t**c - t**c0`` computed without cancellation."""
    t = np.asarray(t, dtype=np.float64)
    return t ** c0 * np.expm1((c - c0) * np.log(t))


def sup_weight_gap(c: float, c0: float, horizon: int) -> float:
    """Exact ``sup_{1 <= t <= horizon} |e(t**c) - e(t**c0)|`` by full scan."""
    t = np.arange(1, horizon + 1, dtype=np.float64)
    return float(np.max(2.0 * np.abs(np.sin(math.pi * phase_gap(c, c0, t)))))


@dataclass(frozen=True)
class Grid:
    start: float
    step: float
    count: int

    @property
    def stop(self) -> float:
        return self.start + self.step * (self.count - 1)

    def point(self, k: int) -> float:
        if k == self.count - 1 and self.count > 1:
            return self.stop
        return self.start + self.step * k


@dataclass(frozen=True)
class WeightNet:
    """A finite set of exponents ``c`` standing in for a weight family at horizon ``N``."""

    horizon: int
    grids: tuple[Grid, ...]
    intervals: tuple[tuple[float, float], ...]
    guaranteed_error: float
    delta: float | None = None
    m_min: int | None = None
    m_max: int | None = None
    kappa: float | None = None
    c_delta: float = 1.0
    c_kappa: float = 1.0
    include_constant: bool = False

    @property
    def size(self) -> int:
        """Number of exponent points (the constant weight is not counted)."""
        return sum(g.count for g in self.grids)

    def __len__(self) -> int:
        return self.size + int(self.include_constant)

    @property
    def budget(self) -> float:
        """``C_delta * exp(N**delta)``, the allowed size."""
        if self.delta is None:
            return math.inf
        try:
            return self.c_delta * math.exp(self.horizon ** self.delta)
        except OverflowError:
            return math.inf

    @property
    def within_budget(self) -> bool:
        return self.size <= self.budget

    @property
    def points(self) -> np.ndarray:
        if self.size > MATERIALIZE_CAP:
            raise ResourceError(f"net has {self.size} points; refusing to materialize", self.size)
        parts = []
        for g in self.grids:
            p = g.start + g.step * np.arange(g.count, dtype=np.float64)
            p[-1] = g.point(g.count - 1)
            parts.append(p)
        return np.concatenate(parts) if parts else np.zeros(0)

    def point(self, index: int) -> float:
        for g in self.grids:
            if index < g.count:
                return g.point(index)
            index -= g.count
        raise IndexError("net index out of range")

    def weights(self) -> list[Weight]:
        """All weights of the net; the constant weight (if included) comes first."""
        ws = [CONSTANT] if self.include_constant else []
        return ws + [Weight(float(c)) for c in self.points]

    def covers(self, c: float, tol: float = 1e-12) -> bool:
        return any(lo - tol <= c <= hi + tol for lo, hi in self.intervals)

    def nearest(self, c: float) -> tuple[int, float]:
        """Index and value of the net point closest to ``c``; ties go to the smaller point."""
        if not self.grids:
            raise DomainError("net has no exponent points")
        starts = [g.start for g in self.grids]
        j = bisect.bisect_right(starts, c) - 1
        candidates: list[tuple[float, int]] = []
        offset = sum(g.count for g in self.grids[:max(j, 0)])
        if j >= 0:
            g = self.grids[j]
            if g.count == 1 or g.step == 0.0:
                k = 0
            else:
                k = min(max(int(math.floor((c - g.start) / g.step)), 0), g.count - 1)
            for kk in (k, k + 1):
                if kk < g.count:
                    candidates.append((g.point(kk), offset + kk))
            nxt = offset + g.count
        else:
            nxt = 0
        if j + 1 < len(self.grids):
            candidates.append((self.grids[j + 1].start, nxt))
        best = min(candidates, key=lambda pc: (abs(c - pc[0]), pc[0]))
        return best[1], best[0]


def _check_net_params(delta: float, m_max: int, N: int, kappa: float) -> None:
    if not 0.0 < delta <= 0.5:
        raise ParameterError(f"delta must lie in (0, 1/2], got {delta!r}")
    if m_max < 1:
        raise ParameterError(f"m_max must be >= 1, got {m_max!r}")
    if N < 2:
        raise ParameterError(f"horizon N must be >= 2, got {N!r}")
    if kappa <= 0:
        raise ParameterError(f"kappa must be positive, got {kappa!r}")


def build_net(delta: float, m_max: int, N: int, kappa: float = 0.5, *, m_min: int = 1,
              c_delta: float = 1.0, c_kappa: float = 1.0, max_size: int = 2**62,
              certify: bool = False, include_constant: bool = False) -> WeightNet:
    """Certified net for ``{e(t**c) : m + delta <= c <= m + 1 - delta, m_min <= m <= m_max}``.

    On ``[m + delta, m + 1 - delta]`` the derivative bound
    ``|d/dc e(t**c)| <= 2 pi N**(m+1-delta) ln N`` (for ``t <= N``) gives a
    spacing ``c_kappa * N**-(m+1-delta+kappa) / (2 pi ln N)`` under which every
    ``c`` is within ``c_kappa * N**-kappa`` of its nearest point uniformly in ``t``.

    ``certify=True`` additionally requires ``size <= c_delta * exp(N**delta)``
    and raises :class:`NetBudgetError` otherwise.
    """
    _check_net_params(delta, m_max, N, kappa)
    if not 1 <= m_min <= m_max:
        raise ParameterError(f"m_min must lie in 1..m_max, got {m_min!r}")
    log_n = math.log(N)
    grids = []
    intervals = []
    for m in range(m_min, m_max + 1):
        lo, hi = m + delta, m + 1 - delta
        intervals.append((lo, hi))
        if hi - lo <= 0.0:
            grids.append(Grid(lo, 0.0, 1))
            continue
        log_spacing = math.log(c_kappa) - (hi + kappa) * log_n - math.log(TWO_PI * log_n)
        log_steps = math.log(hi - lo) - log_spacing
        if log_steps > math.log(max_size):
            raise ResourceError(
                f"net spacing underflow on [{lo}, {hi}]: about e^{log_steps:.1f} points "
                f"exceeds the size cap {max_size}", size=None)
        steps = math.ceil(math.exp(log_steps))
        grids.append(Grid(lo, (hi - lo) / steps, steps + 1))
    net = WeightNet(horizon=N, grids=tuple(grids), intervals=tuple(intervals),
                    guaranteed_error=c_kappa * N ** (-kappa), delta=delta, m_min=m_min,
                    m_max=m_max, kappa=kappa, c_delta=c_delta, c_kappa=c_kappa,
                    include_constant=include_constant)
    if net.size > max_size:
        raise ResourceError(f"net would hold {net.size} points, cap is {max_size}", net.size)
    if certify and not net.within_budget:
        raise NetBudgetError(
            f"net holds {net.size} points, budget C_delta*exp(N^delta) = {net.budget:.6g}",
            net.size)
    return net


def covering_radius(points: Sequence[float], intervals: Iterable[tuple[float, float]]) -> float:
    """Largest distance from a point of ``intervals`` to its nearest element of ``points``."""
    pts = np.sort(np.asarray(points, dtype=np.float64))
    radius = 0.0
    for lo, hi in intervals:
        inside = pts[(pts >= lo) & (pts <= hi)]
        probes = [lo, hi]
        if inside.size > 1:
            probes.extend(((inside[:-1] + inside[1:]) / 2).tolist())
        for c in probes:
            radius = max(radius, float(np.min(np.abs(pts - c))))
    return radius


def net_from_points(points: Sequence[float], horizon: int, *, include_constant: bool = False,
                    intervals: Sequence[tuple[float, float]] | None = None,
                    guaranteed_error: float | None = None, **meta) -> WeightNet:
    """Net made of an explicit list of exponents.

    Unless given, ``guaranteed_error`` is the derivative-bound certificate
    ``min(2, 2 pi N**c_max ln N * r)`` with ``r`` the covering radius.
    """
    pts = sorted(set(float(c) for c in points))
    if horizon < 1:
        raise ParameterError("horizon must be positive")
    if intervals is None:
        intervals = [(pts[0], pts[-1])] if pts else []
    intervals = tuple((float(lo), float(hi)) for lo, hi in intervals)
    if guaranteed_error is None:
        if pts and horizon >= 2:
            c_top = max(hi for _, hi in intervals)
            r = covering_radius(pts, intervals)
            guaranteed_error = min(2.0, TWO_PI * horizon ** c_top * math.log(horizon) * r)
        else:
            guaranteed_error = 0.0
    return WeightNet(horizon=horizon, grids=tuple(Grid(c, 0.0, 1) for c in pts),
                     intervals=intervals, guaranteed_error=float(guaranteed_error),
                     include_constant=include_constant, **meta)


def sample_net(delta: float, m_max: int, per_interval: int, horizon: int, *,
               include_constant: bool = True) -> WeightNet:
    """Coarse, evenly spaced exponents in each ``[m + delta, m + 1 - delta]``.

    Used by experiments, where the certified net is far too large to sweep.
    """
    if per_interval < 1:
        raise ParameterError("per_interval must be >= 1")
    _check_net_params(delta, m_max, max(horizon, 2), 1.0)
    pts = []
    intervals = []
    for m in range(1, m_max + 1):
        lo, hi = m + delta, m + 1 - delta
        intervals.append((lo, hi))
        if per_interval == 1:
            pts.append((lo + hi) / 2)
        else:
            pts.extend(np.linspace(lo, hi, per_interval).tolist())
    return net_from_points(pts, horizon, include_constant=include_constant, intervals=intervals,
                           delta=delta, m_min=1, m_max=m_max)


def net_approx_error(c: float, net: WeightNet) -> tuple[float, float]:
    """Nearest net point ``c0`` and the exact ``sup_{t <= N} |e(t**c) - e(t**c0)|``."""
    if not net.covers(c):
        raise DomainError(f"c = {c!r} is outside the intervals covered by the net")
    _, c0 = net.nearest(c)
    return c0, sup_weight_gap(c, c0, net.horizon)


def write_net_csv(net: WeightNet, fh: IO[str], max_points: int = 10**6) -> None:
    if net.size > max_points:
        raise ResourceError(f"net has {net.size} points, CSV export capped at {max_points}",
                            net.size)
    fh.write(f"# delta={net.delta!r}\n# m_max={net.m_max!r}\n# N={net.horizon}\n")
    fh.write(f"# kappa={net.kappa!r}\n# guaranteed_error={net.guaranteed_error!r}\n")
    fh.write(f"# include_constant={int(net.include_constant)}\n")
    fh.write("# intervals=" + ";".join(f"{lo!r}:{hi!r}" for lo, hi in net.intervals) + "\n")
    fh.write("c\n")
    for c in net.points:
        fh.write(f"{float(c)!r}\n")


def read_net_csv(fh: IO[str]) -> WeightNet:
    meta: dict[str, str] = {}
    pts: list[float] = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            meta[key.strip()] = value.strip()
        elif line != "c":
            pts.append(float(line))

    def opt(key: str, cast):
        v = meta.get(key, "None")
        return None if v == "None" else cast(v)

    intervals = None
    if meta.get("intervals"):
        intervals = [tuple(float(v) for v in part.split(":")) for part in meta["intervals"].split(";")]
    return net_from_points(pts, int(meta["N"]), include_constant=meta.get("include_constant") == "1",
                           intervals=intervals, guaranteed_error=opt("guaranteed_error", float),
                           delta=opt("delta", float), m_max=opt("m_max", int),
                           kappa=opt("kappa", float))
