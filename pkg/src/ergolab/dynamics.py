"""Concrete measure-preserving systems and observables on them.

Three systems are provided: the circle rotation ``x -> x + theta``, the
doubling map ``x -> 2x`` (both on ``[0, 1)`` with Lebesgue measure) and the
cyclic shift ``j -> j + 1`` on ``Z/mZ``.  Orbits are evaluated in closed form,
so ``f(T^n x)`` costs the same for every ``n``.

States and times broadcast like numpy arrays, e.g. ``x`` of shape ``(S, 1)``
against ``n`` of shape ``(N,)`` gives an ``(S, N)`` table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, ParameterError, PrecisionError
from .weights import TWO_PI

GOLDEN_THETA = (math.sqrt(5.0) - 1.0) / 2.0
DOUBLING_FLOAT_LIMIT = 52
_TWO64 = float(2**64)

KINDS = ("rotation", "doubling", "cyclic")


@dataclass(frozen=True)
class DynSystem:
    kind: str
    theta: float = GOLDEN_THETA
    m: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown system kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "rotation" and not 0.0 < self.theta < 1.0:
            raise ParameterError("rotation angle must lie in (0, 1)")
        if self.kind == "cyclic" and self.m < 1:
            raise ParameterError("cyclic order m must be positive")

    @property
    def is_circle(self) -> bool:
        return self.kind != "cyclic"

    def step(self, x):
        """One application of ``T``."""
        if self.kind == "rotation":
            return np.mod(np.asarray(x, dtype=np.float64) + self.theta, 1.0)
        if self.kind == "doubling":
            return np.mod(2.0 * np.asarray(x, dtype=np.float64), 1.0)
        return np.mod(np.asarray(x) + 1, self.m)


def rotation(theta: float = GOLDEN_THETA) -> DynSystem:
    return DynSystem("rotation", theta=float(theta))


def doubling() -> DynSystem:
    return DynSystem("doubling")


def cyclic(m: int) -> DynSystem:
    return DynSystem("cyclic", m=int(m))


@dataclass(frozen=True, eq=False)
class Observable:
    """An observable ``f``; build with :func:`character`, :func:`coboundary`, etc."""

    kind: str
    k: int = 0
    value: complex = 1.0
    base: "Observable | None" = None
    table: np.ndarray | None = field(default=None, repr=False)
    func: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    sup: float | None = None

    @property
    def bound(self) -> float:
        """Sup norm (an upper bound for ``coboundary``)."""
        if self.kind == "character":
            return 1.0
        if self.kind == "constant":
            return abs(self.value)
        if self.kind == "table":
            return float(np.max(np.abs(self.table))) if self.table.size else 0.0
        if self.kind == "coboundary":
            return 2.0 * self.base.bound
        if self.sup is None:
            raise ParameterError("function observables need an explicit sup bound")
        return self.sup


def character(k: int) -> Observable:
    """``e(kx)`` on the circle, ``e(kj/m)`` on ``Z/mZ``."""
    return Observable("character", k=int(k))


def constant(value: complex = 1.0) -> Observable:
    return Observable("constant", value=complex(value))


def coboundary(h: Observable) -> Observable:
    """``f = h - h o T``."""
    return Observable("coboundary", base=h)


def table(values) -> Observable:
    """Arbitrary observable on ``Z/mZ`` given by its values."""
    return Observable("table", table=np.asarray(values, dtype=np.complex128))


def function(func: Callable[[np.ndarray], np.ndarray], sup: float | None = None) -> Observable:
    return Observable("function", func=func, sup=sup)


def _check_state(sys: DynSystem, x) -> None:
    xa = np.asarray(x)
    if sys.is_circle:
        if np.any((xa < 0.0) | (xa >= 1.0)):
            raise DomainError("circle states must lie in [0, 1)")
    else:
        if not np.issubdtype(xa.dtype, np.integer) or np.any((xa < 0) | (xa >= sys.m)):
            raise DomainError(f"cyclic states must be integers in 0..{sys.m - 1}")


def _doubling_fraction(x, n) -> np.ndarray:
    """``2**n x mod 1`` as a 64-bit fixed-point fraction (uint64 numerator of 2**64)."""
    xf = (np.asarray(x, dtype=np.float64) * _TWO64).astype(np.uint64)
    n = np.asarray(n, dtype=np.uint64)
    shifted = np.left_shift(xf, np.minimum(n, np.uint64(63)))
    return np.where(n >= 64, np.uint64(0), shifted)


def _orbit(sys: DynSystem, f: Observable, x, n) -> np.ndarray:
    n = np.asarray(n, dtype=np.int64)
    if f.kind == "constant":
        return np.full(np.broadcast(np.asarray(x), n).shape, f.value, dtype=np.complex128)
    if f.kind == "coboundary":
        return _orbit(sys, f.base, x, n) - _orbit(sys, f.base, x, n + 1)
    if sys.kind == "cyclic":
        j = np.mod(np.asarray(x, dtype=np.int64) + n, sys.m)
        if f.kind == "character":
            return np.exp(TWO_PI * 1j * (np.mod(f.k * j, sys.m) / sys.m))
        if f.kind == "table":
            if f.table.size != sys.m:
                raise DomainError(f"table has {f.table.size} entries, system order is {sys.m}")
            return f.table[j]
        return np.asarray(f.func(j), dtype=np.complex128)
    if f.kind == "table":
        raise DomainError("table observables live on cyclic systems only")
    if sys.kind == "rotation":
        y = np.mod(np.asarray(x, dtype=np.float64) + n * sys.theta, 1.0)
        if f.kind == "character":
            return np.exp(TWO_PI * 1j * np.mod(f.k * y, 1.0))
        return np.asarray(f.func(y), dtype=np.complex128)
    # doubling map
    if f.kind == "character":
        frac = _doubling_fraction(x, n)
        kk = np.uint64(f.k % (1 << 64))
        with np.errstate(over="ignore"):
            phase = (frac * kk).astype(np.float64) / _TWO64
        return np.exp(TWO_PI * 1j * phase)
    if np.any(n > DOUBLING_FLOAT_LIMIT):
        raise PrecisionError(
            f"doubling orbit of a non-character observable beyond n={DOUBLING_FLOAT_LIMIT}: "
            "the double-precision state carries no more information")
    y = np.mod(np.asarray(x, dtype=np.float64) * np.exp2(n.astype(np.float64)), 1.0)
    return np.asarray(f.func(y), dtype=np.complex128)


def orbit_eval(sys: DynSystem, f: Observable, x, n):
    """``f(T^n x)``; ``x`` and ``n`` broadcast against each other."""
    if np.any(np.asarray(n) < 0):
        raise DomainError("orbit times must be nonnegative")
    _check_state(sys, x)
    out = _orbit(sys, f, x, n)
    return complex(out) if out.ndim == 0 else out


def coboundary_eval(sys: DynSystem, h: Observable, x, n):
    """``h(T^n x) - h(T^{n+1} x)``."""
    return orbit_eval(sys, coboundary(h), x, n)


def _closed_form_mean(sys: DynSystem, f: Observable) -> complex | None:
    if f.kind == "constant":
        return f.value
    if f.kind == "character":
        period = sys.m if sys.kind == "cyclic" else None
        zero = f.k % period == 0 if period else f.k == 0
        return 1.0 + 0j if zero else 0j
    if f.kind == "coboundary" and _closed_form_mean(sys, f.base) is not None:
        # T preserves the reference measure, so h and h o T have equal means
        return 0j
    return None


def mean_estimate(sys: DynSystem, f: Observable, grid_size: int = 4096) -> complex:
    """Average of ``f`` over the state space.

    Exact for cyclic systems and for constants, characters and their
    coboundaries; otherwise a midpoint rule with ``grid_size`` nodes.
    """
    if grid_size < 1:
        raise ParameterError("grid_size must be >= 1")
    if sys.kind == "cyclic":
        return complex(np.mean(_orbit(sys, f, np.arange(sys.m), 0)))
    exact = _closed_form_mean(sys, f)
    if exact is not None:
        return complex(exact)
    grid = (np.arange(grid_size) + 0.5) / grid_size
    return complex(np.mean(_orbit(sys, f, grid, 0)))


def system_from_params(kind: str, theta: float = GOLDEN_THETA, m: int = 1) -> DynSystem:
    return DynSystem(kind, theta=float(theta), m=int(m))


def observable_from_params(k: int = 1, is_coboundary: bool = True) -> Observable:
    f = character(k)
    return coboundary(f) if is_coboundary else f
