"""The random selector process ``X_n`` and its partial sums.

``X_n`` are independent Bernoulli variables with ``P(X_n = 1) = sigma_n =
n**-alpha``.  All arrays use 0-based storage with 1-based meaning:
``x[n - 1] == X_n`` while the prefix arrays carry a leading zero so that
``s[N] == S_N`` and ``w[N] == W_N``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import EmptyDomainError, ParameterError
from .rng import SEED_MASK, generator

PATH_FORMAT = "ergolab-path v1"
KAHAN_THRESHOLD = 10**6
_BLOCK = 1 << 16


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 0.5:
        raise ParameterError(f"alpha must lie in (0, 1/2), got {alpha!r}")
    return alpha


def selector_probabilities(alpha: float, n_max: int) -> np.ndarray:
    """``sigma_n = n**-alpha`` for ``n = 1..n_max`` (``sigma_1 == 1`` exactly)."""
    n = np.arange(1, n_max + 1, dtype=np.float64)
    return n ** (-alpha)


def compensated_cumsum(values: np.ndarray) -> np.ndarray:
    """Prefix sums with a leading zero.

    Above ``KAHAN_THRESHOLD`` terms the sum is formed block-wise and the block
    offsets are carried with Kahan compensation.
    """
    values = np.asarray(values, dtype=np.float64)
    out = np.zeros(values.size + 1)
    if values.size <= KAHAN_THRESHOLD:
        np.cumsum(values, out=out[1:])
        return out
    total = 0.0
    comp = 0.0
    for start in range(0, values.size, _BLOCK):
        block = values[start:start + _BLOCK]
        partial = np.cumsum(block)
        out[start + 1:start + 1 + block.size] = total + partial
        # Kahan update of the running offset with the exact block total
        y = math.fsum(block) - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return out


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SelectorPath:
    """One realised trajectory of the selector process."""

    alpha: float
    seed: int
    x: np.ndarray
    sigma: np.ndarray
    s: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)

    @classmethod
    def from_bits(cls, bits: Sequence[int] | np.ndarray, alpha: float = 0.3,
                  sigma: Sequence[float] | np.ndarray | None = None,
                  seed: int = 0) -> "SelectorPath":
        """Build a path from an explicit bit pattern.

        This is the test constructor: any pattern is accepted, and ``sigma``
        may override ``n**-alpha`` (e.g. all ones for the ``alpha -> 0`` limit).
        """
        x = np.asarray(bits, dtype=np.uint8).copy()
        if x.ndim != 1 or x.size == 0:
            raise EmptyDomainError("a path needs at least one selector")
        if np.any(x > 1):
            raise ParameterError("selector bits must be 0 or 1")
        if sigma is None:
            sig = selector_probabilities(alpha, x.size)
        else:
            sig = np.asarray(sigma, dtype=np.float64).copy()
            if sig.shape != x.shape:
                raise ParameterError("sigma must have the same length as the bits")
        s = np.zeros(x.size + 1, dtype=np.int64)
        np.cumsum(x, out=s[1:])
        w = compensated_cumsum(sig)
        return cls(float(alpha), int(seed) & SEED_MASK, _readonly(x), _readonly(sig),
                   _readonly(s), _readonly(w))

    @property
    def n_max(self) -> int:
        return int(self.x.size)

    @property
    def y(self) -> np.ndarray:
        """Centered selectors ``Y_n = X_n - sigma_n`` (0-based storage)."""
        return self.x - self.sigma

    def s_prev(self, n_hi: int | None = None) -> np.ndarray:
        """``S_{n-1}`` for ``n = 1..n_hi``."""
        n_hi = self.n_max if n_hi is None else n_hi
        return self.s[:n_hi]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SelectorPath):
            return NotImplemented
        return (self.alpha == other.alpha and self.seed == other.seed
                and np.array_equal(self.x, other.x) and np.array_equal(self.sigma, other.sigma))

    def to_bytes(self) -> bytes:
        header = f"{self.alpha!r}|{self.n_max}|{self.seed}|".encode()
        return header + np.packbits(self.x).tobytes()


@dataclass(frozen=True, eq=False)
class CountingTable:
    """``a[n - 1] == a_n``: the index of the ``n``-th selected integer."""

    a: np.ndarray

    def __len__(self) -> int:
        return int(self.a.size)

    def __getitem__(self, n: int) -> int:
        """1-based access: ``table[n] == a_n``."""
        if n < 1 or n > self.a.size:
            raise IndexError(n)
        return int(self.a[n - 1])


def sample_selectors(alpha: float, n_max: int, seed: int) -> SelectorPath:
    """Draw ``X_1..X_{n_max}`` with ``P(X_n = 1) = n**-alpha``.

    Identical ``(alpha, n_max, seed)`` give bit-identical paths.
    """
    alpha = check_alpha(alpha)
    if n_max < 1:
        raise EmptyDomainError("n_max must be at least 1")
    sigma = selector_probabilities(alpha, n_max)
    u = generator(seed).random(n_max)
    # u < 1 always, so X_1 = 1 because sigma_1 = 1
    x = (u < sigma).astype(np.uint8)
    return SelectorPath.from_bits(x, alpha=alpha, sigma=sigma, seed=seed)


def counting_function(path: SelectorPath) -> CountingTable:
    a = np.flatnonzero(path.x).astype(np.int64) + 1
    return CountingTable(_readonly(a))


def w_asymptotic(alpha: float, N: int | np.ndarray) -> float | np.ndarray:
    """Leading term ``N**(1 - alpha) / (1 - alpha)`` of ``W_N``."""
    alpha = check_alpha(alpha)
    value = np.asarray(N, dtype=np.float64) ** (1.0 - alpha) / (1.0 - alpha)
    return float(value) if value.ndim == 0 else value


def sllr_ratio_series(path: SelectorPath, schedule: Iterable[int]) -> list[tuple[int, float]]:
    """``(N, S_N / W_N)`` for each ``N`` of ``schedule``."""
    out = []
    for N in schedule:
        N = int(N)
        if not 1 <= N <= path.n_max:
            raise ParameterError(f"schedule value {N} outside 1..{path.n_max}")
        out.append((N, float(path.s[N] / path.w[N])))
    return out


def loglog_slope(x: Sequence[float] | np.ndarray, y: Sequence[float] | np.ndarray) -> float:
    """Ordinary least-squares slope of ``log y`` against ``log x``."""
    lx = np.log(np.asarray(x, dtype=np.float64))
    ly = np.log(np.asarray(y, dtype=np.float64))
    return float(np.polyfit(lx, ly, 1)[0])


def growth_exponent(table: CountingTable, n_min: int = 100) -> float:
    """Fitted exponent of ``a_n ~ n**p`` over ``n >= n_min``."""
    if len(table) < n_min + 1:
        raise EmptyDomainError(f"counting table has {len(table)} entries, need more than {n_min}")
    n = np.arange(n_min, len(table) + 1)
    return loglog_slope(n, table.a[n_min - 1:])


def write_path(path: SelectorPath, fh: IO[str]) -> None:
    """Run-length text export: header lines then ``start`` bit and run lengths."""
    expected = selector_probabilities(path.alpha, path.n_max)
    if not np.array_equal(expected, path.sigma):
        raise ParameterError("only paths with sigma_n = n**-alpha can be exported")
    x = path.x
    change = np.flatnonzero(np.diff(x)) + 1
    bounds = np.concatenate([[0], change, [x.size]])
    runs = np.diff(bounds)
    fh.write(f"# {PATH_FORMAT}\n")
    fh.write(f"alpha={path.alpha!r}\nn_max={path.n_max}\nseed={path.seed}\n")
    fh.write(f"start={int(x[0])}\n")
    fh.write("runs=" + " ".join(str(int(r)) for r in runs) + "\n")


def read_path(fh: IO[str]) -> SelectorPath:
    fields: dict[str, str] = {}
    for line in fh:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    alpha = float(fields["alpha"])
    n_max = int(fields["n_max"])
    bit = int(fields["start"])
    runs = [int(r) for r in fields["runs"].split()]
    x = np.empty(n_max, dtype=np.uint8)
    pos = 0
    for r in runs:
        x[pos:pos + r] = bit
        pos += r
        bit ^= 1
    if pos != n_max:
        raise ParameterError(f"run lengths cover {pos} selectors, header says {n_max}")
    return SelectorPath.from_bits(x, alpha=alpha, seed=int(fields["seed"]))


def write_series_csv(path: SelectorPath, fh: IO[str], schedule: Iterable[int] | None = None) -> None:
    """CSV of ``(N, S_N, W_N, a_N)``; ``a_N`` is blank once ``N > S_{n_max}``."""
    table = counting_function(path)
    ns = range(1, path.n_max + 1) if schedule is None else schedule
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["N", "S_N", "W_N", "a_N"])
    for N in ns:
        a = table[N] if N <= len(table) else ""
        writer.writerow([N, int(path.s[N]), repr(float(path.w[N])), a])
