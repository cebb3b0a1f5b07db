"""l^2(Z) machinery for the centered selector convolution operators.

For a finite set of weights ``B`` and a horizon ``N`` the operator family is

    T_b f(x) = N**(alpha-1) sum_{n<=N} Y_n b(S_{n-1}) f(x - n),

``M_N f = max_b |T_b f|`` is its maximal function, and fixing the maximizing
weight at every ``x`` (a partition ``{E_b}``) linearizes ``M_N`` into a linear
operator ``T``.  ``T T*`` is a sum over lags ``h`` of the kernels
``K_N(h; b, b')`` plus the diagonal "simple term".

Lag convention: composing ``T`` with its adjoint gives
``T T* f(x) = N**(2a-2) sum_{b,b'} 1_{E_b}(x) sum_h K_N(h; b, b') (1_{E_b'} f)(x - h)``,
which is what :func:`tt_star_apply` computes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np
from scipy import fft as sfft

from .errors import DomainError, ParameterError, RangeError
from .random_model import SelectorPath, loglog_slope
from .rng import generator
from .weights import CONSTANT, Weight, WeightNet


def default_epsilon(alpha: float) -> float:
    """``(1 - 2 alpha) / 12``, inside the admissible range ``1 - 2a - 10 eps > 0``."""
    return (1.0 - 2.0 * alpha) / 12.0


def _weights(net) -> list[Weight]:
    ws = net.weights() if isinstance(net, WeightNet) else list(net)
    if not ws:
        raise DomainError("empty net")
    return ws


def _check_N(path: SelectorPath, N: int) -> int:
    N = int(N)
    if not 1 <= N <= path.n_max:
        raise RangeError(f"N = {N} outside 1..{path.n_max}")
    return N


def modulated_y(path: SelectorPath, weight: Weight, N: int) -> np.ndarray:
    """``u_b(n) = Y_n b(S_{n-1})`` for ``n = 1..N``."""
    return path.y[:N] * weight(path.s[:N])


def _fft_len(n: int) -> int:
    return sfft.next_fast_len(n)


# --------------------------------------------------------------------- kernels

def kernel_K(path: SelectorPath, b: Weight, b_prime: Weight, N: int, h: int) -> complex:
    """``K_N(h; b, b') = sum_{1<=n, n+h<=N} Y_{n+h} Y_n b(S_{n+h-1}) conj(b'(S_{n-1}))``."""
    N = _check_N(path, N)
    h = int(h)
    if h == 0:
        raise DomainError("h = 0 belongs to the simple term")
    if abs(h) > N:
        raise DomainError(f"|h| = {abs(h)} exceeds N = {N}")
    u = modulated_y(path, b, N)
    v = modulated_y(path, b_prime, N)
    if h > 0:
        return complex(np.sum(u[h:] * np.conj(v[:N - h])))
    return complex(np.sum(u[:N + h] * np.conj(v[-h:])))


def kernel_all_h(path: SelectorPath, b: Weight, b_prime: Weight, N: int) -> np.ndarray:
    """``K_N(h; b, b')`` for ``h = -(N-1)..N-1`` (index ``h + N - 1``) by FFT."""
    N = _check_N(path, N)
    u = modulated_y(path, b, N)
    v = u if b_prime == b else modulated_y(path, b_prime, N)
    L = _fft_len(2 * N)
    U = sfft.fft(u, L)
    V = U if b_prime == b else sfft.fft(v, L)
    c = sfft.ifft(U * np.conj(V))
    return np.concatenate([c[L - N + 1:], c[:N]])


@dataclass(frozen=True)
class KernelScanReport:
    N: int
    alpha: float
    net_id: str
    pair_sups: np.ndarray = field(repr=False)
    exponent_fit: float | None = None

    @property
    def global_sup(self) -> float:
        return float(self.pair_sups.max())

    @property
    def ref_scale(self) -> float:
        """``N**(1 - 2 alpha)``."""
        return self.N ** (1.0 - 2.0 * self.alpha)

    @property
    def ref_half_scale(self) -> float:
        return self.N ** ((1.0 - 2.0 * self.alpha) / 2.0)


def kernel_sup_matrix(path: SelectorPath, weights: Sequence[Weight], N: int) -> np.ndarray:
    """``sup_{1<=|h|<=N} |K_N(h; b, b')|`` for every ordered pair, full lag scan by FFT."""
    N = _check_N(path, N)
    L = _fft_len(2 * N)
    spectra = [sfft.fft(modulated_y(path, w, N), L) for w in weights]
    out = np.zeros((len(weights), len(weights)))
    for i, Ui in enumerate(spectra):
        for j, Uj in enumerate(spectra):
            c = np.abs(sfft.ifft(Ui * np.conj(Uj)))
            c[0] = 0.0
            c[N:L - N + 1] = 0.0
            out[i, j] = c.max()
    return out


def kernel_scan(path: SelectorPath, net, schedule: Sequence[int], net_id: str = "") -> list[KernelScanReport]:
    """Kernel sup statistics along ``schedule``, with the log-log exponent of the global sup."""
    weights = _weights(net)
    sups = [kernel_sup_matrix(path, weights, N) for N in schedule]
    fit = None
    globals_ = [s.max() for s in sups]
    if len(schedule) >= 2 and min(globals_) > 0:
        fit = loglog_slope(schedule, globals_)
    return [KernelScanReport(int(N), path.alpha, net_id, s, fit) for N, s in zip(schedule, sups)]


def correlate_real(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``c(h) = sum_n a(n + h) b(n)`` for ``h = 0..len-1`` (same-length inputs)."""
    n = a.size
    L = _fft_len(2 * n)
    c = sfft.irfft(sfft.rfft(a, L) * np.conj(sfft.rfft(b, L)), L)
    return c[:n]


def conditional_variance(path: SelectorPath, N: int, h: int, power: int = 2) -> float:
    """``T_N(h) = sum_{n=1}^{N-h} sigma_{n+h}**power Y_n**2``.

    ``power=2`` is the conditional variance of ``K_N(h; b, b')``; ``power=1``
    is the single-power variant appearing in its expansion.
    """
    N = _check_N(path, N)
    if not 1 <= h <= N:
        raise DomainError(f"h must lie in 1..N, got {h}")
    y2 = path.y[:N - h] ** 2
    return float(np.sum(path.sigma[h:N] ** power * y2))


def conditional_variance_all(path: SelectorPath, N: int, power: int = 2) -> np.ndarray:
    """``T_N(h)`` for ``h = 1..N`` (the last entry is the empty sum 0)."""
    N = _check_N(path, N)
    c = correlate_real(path.sigma[:N] ** power, path.y[:N] ** 2)
    return np.concatenate([np.maximum(c[1:], 0.0), [0.0]])


def lemma_tech_statistic(path: SelectorPath, N: int, power: int = 1) -> float:
    """``sup_{1<=h<=N} |sum_{n<=N-h} sigma_{n+h}**power (Y_n**2 - E Y_n**2)|``."""
    N = _check_N(path, N)
    sig = path.sigma[:N]
    centered = path.y[:N] ** 2 - sig * (1.0 - sig)
    c = correlate_real(sig ** power, centered)
    return float(np.max(np.abs(c[1:]))) if N > 1 else 0.0


def simple_term(path: SelectorPath, N: int) -> float:
    """``N**(2 alpha - 2) sum_{n<=N} Y_n**2``."""
    N = _check_N(path, N)
    return float(np.sum(path.y[:N] ** 2)) / N ** (2.0 - 2.0 * path.alpha)


# ---------------------------------------------------------------- signals on Z

@dataclass(frozen=True, eq=False)
class ZSignal:
    """Finitely supported ``f : Z -> C``; ``values[i] = f(lo + i)``."""

    lo: int
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.complex128))

    @property
    def hi(self) -> int:
        return self.lo + self.values.size - 1

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def __call__(self, x: int) -> complex:
        i = x - self.lo
        return complex(self.values[i]) if 0 <= i < self.values.size else 0j

    def on_window(self, lo: int, hi: int) -> "ZSignal":
        """Restriction/zero-extension to ``[lo, hi]``."""
        out = np.zeros(hi - lo + 1, dtype=np.complex128)
        a, b = max(lo, self.lo), min(hi, self.hi)
        if a <= b:
            out[a - lo:b - lo + 1] = self.values[a - self.lo:b - self.lo + 1]
        return ZSignal(lo, out)

    @classmethod
    def spike(cls, lo: int, hi: int, at: int = 0) -> "ZSignal":
        v = np.zeros(hi - lo + 1, dtype=np.complex128)
        v[at - lo] = 1.0
        return cls(lo, v)


@dataclass(frozen=True, eq=False)
class LinearizedPartition:
    """``labels[i]`` is the index of the weight whose cell ``E_b`` contains ``lo + i``."""

    lo: int
    labels: np.ndarray

    @property
    def hi(self) -> int:
        return self.lo + self.labels.size - 1

    def cells(self, count: int) -> list[np.ndarray]:
        return [self.lo + np.flatnonzero(self.labels == b) for b in range(count)]


def _conv_T(u: np.ndarray, f: ZSignal, out_lo: int, out_hi: int) -> np.ndarray:
    """``sum_{n=1}^{len(u)} u(n) f(x - n)`` for ``x`` in ``[out_lo, out_hi]``."""
    N = u.size
    full = sfft.ifft(sfft.fft(u, _fft_len(N + len(f))) * sfft.fft(f.values, _fft_len(N + len(f))))
    full = full[:N + len(f) - 1]
    # full[j] sits at x = f.lo + j + 1
    out = np.zeros(out_hi - out_lo + 1, dtype=np.complex128)
    a, b = max(out_lo, f.lo + 1), min(out_hi, f.hi + N)
    if a <= b:
        out[a - out_lo:b - out_lo + 1] = full[a - f.lo - 1:b - f.lo]
    return out


def _branches(weights, path: SelectorPath, N: int, f: ZSignal, out_lo: int, out_hi: int) -> np.ndarray:
    scale = float(N) ** (path.alpha - 1.0)
    return np.stack([scale * _conv_T(modulated_y(path, w, N), f, out_lo, out_hi) for w in weights])


def maximal_function(net, path: SelectorPath, N: int, f: ZSignal) -> tuple[ZSignal, np.ndarray]:
    """``M_N f`` on its whole support ``[f.lo + 1, f.hi + N]`` and the maximizing labels."""
    N = _check_N(path, N)
    weights = _weights(net)
    lo, hi = f.lo + 1, f.hi + N
    vals = np.abs(_branches(weights, path, N, f, lo, hi))
    labels = np.argmax(vals, axis=0)
    return ZSignal(lo, vals[labels, np.arange(labels.size)]), labels


def linearize(net, path: SelectorPath, N: int, f: ZSignal,
              window: tuple[int, int] | None = None) -> LinearizedPartition:
    """Partition of ``window`` (default: the window of ``f``) by the weight maximizing ``|T_b f(x)|``.

    Ties go to the lowest net index.
    """
    N = _check_N(path, N)
    weights = _weights(net)
    if isinstance(net, WeightNet) and net.horizon < N:
        raise DomainError(f"net horizon {net.horizon} is shorter than N = {N}")
    lo, hi = window if window is not None else (f.lo, f.hi)
    vals = np.abs(_branches(weights, path, N, f, lo, hi))
    return LinearizedPartition(lo, np.argmax(vals, axis=0).astype(np.int64))


def _check_window(partition: LinearizedPartition, f: ZSignal) -> ZSignal:
    nz = np.flatnonzero(f.values)
    if nz.size and (f.lo + nz[0] < partition.lo or f.lo + nz[-1] > partition.hi):
        raise DomainError("signal support is not inside the partition window")
    return f.on_window(partition.lo, partition.hi)


def apply_T(partition: LinearizedPartition, net, path: SelectorPath, N: int, g: ZSignal) -> ZSignal:
    """Linearized operator, evaluated on the partition window."""
    N = _check_N(path, N)
    weights = _weights(net)
    branches = _branches(weights, path, N, g, partition.lo, partition.hi)
    return ZSignal(partition.lo, branches[partition.labels, np.arange(partition.labels.size)])


def apply_T_adjoint(partition: LinearizedPartition, net, path: SelectorPath, N: int,
                    f: ZSignal) -> ZSignal:
    """Adjoint of :func:`apply_T`; the result lives on ``[lo - N, hi - 1]``."""
    N = _check_N(path, N)
    weights = _weights(net)
    f = _check_window(partition, f)
    L = len(f)
    n_fft = _fft_len(N + L)
    scale = float(N) ** (path.alpha - 1.0)
    acc = np.zeros(n_fft, dtype=np.complex128)
    for b, w in enumerate(weights):
        mask = partition.labels == b
        if not mask.any():
            continue
        r = np.conj(modulated_y(path, w, N))[::-1]
        acc += sfft.fft(r, n_fft) * sfft.fft(np.where(mask, f.values, 0), n_fft)
    out = sfft.ifft(acc)[:N + L - 1] * scale
    return ZSignal(partition.lo - N, out)


def tt_star_apply(partition: LinearizedPartition, net, path: SelectorPath, N: int,
                  f: ZSignal) -> ZSignal:
    """``T T* f`` on the partition window (kernel sum plus simple term)."""
    return apply_T(partition, net, path, N, apply_T_adjoint(partition, net, path, N, f))


def tt_star_kernel_form(partition: LinearizedPartition, net, path: SelectorPath, N: int,
                        f: ZSignal) -> ZSignal:
    """Same operator as :func:`tt_star_apply`, assembled from ``K_N`` and the simple term.

    Builds the dense window matrix, so it is meant for windows of a few
    thousand points at most.
    """
    N = _check_N(path, N)
    weights = _weights(net)
    f = _check_window(partition, f)
    L = len(f)
    scale = float(N) ** (2.0 * path.alpha - 2.0)
    kernels = {}
    labels = partition.labels
    used = sorted(set(labels.tolist()))
    for b in used:
        for bp in used:
            kernels[b, bp] = kernel_all_h(path, weights[b], weights[bp], N)
    x = np.arange(L)
    lag = x[:, None] - x[None, :]
    mat = np.zeros((L, L), dtype=np.complex128)
    inside = (np.abs(lag) < N) & (lag != 0)
    for (b, bp), k in kernels.items():
        sel = inside & (labels[:, None] == b) & (labels[None, :] == bp)
        mat[sel] = k[lag[sel] + N - 1]
    out = scale * (mat @ f.values) + simple_term(path, N) * f.values
    return ZSignal(partition.lo, out)


# ------------------------------------------------------- Hardy-Littlewood

@numba.njit(cache=True)
def _hl_hull(p):
    L = p.size - 1
    prv = np.empty(L + 1, np.int64)   # lower hull of {0..i}: i, prv[i], ...
    nxt = np.empty(L + 1, np.int64)   # upper hull of {j..L}: j, nxt[j], ...
    stack = np.empty(L + 1, np.int64)
    top = 0
    for i in range(L + 1):
        while top >= 2:
            a = stack[top - 2]
            b = stack[top - 1]
            # pop b unless (a, b, i) turns strictly left (strict convexity)
            if (b - a) * (p[i] - p[a]) - (p[b] - p[a]) * (i - a) <= 0.0:
                top -= 1
            else:
                break
        prv[i] = stack[top - 1] if top > 0 else -1
        stack[top] = i
        top += 1
    top = 0
    for j in range(L, -1, -1):
        while top >= 2:
            a = stack[top - 2]
            b = stack[top - 1]
            # points ordered j < b < a; keep b only if strictly above segment j-a
            if (b - j) * (p[a] - p[j]) - (p[b] - p[j]) * (a - j) >= 0.0:
                top -= 1
            else:
                break
        nxt[j] = stack[top - 1] if top > 0 else -1
        stack[top] = j
        top += 1
    out = np.empty(L)
    for x in range(L):
        a = x
        b = x + 1
        best = (p[b] - p[a]) / (b - a)
        changed = True
        while changed:
            changed = False
            # best right endpoint for fixed a (walk the upper hull of {x+1..L})
            j = x + 1
            bj = j
            sj = (p[j] - p[a]) / (j - a)
            while nxt[j] != -1:
                k = nxt[j]
                sk = (p[k] - p[a]) / (k - a)
                if sk > sj:
                    j, sj, bj = k, sk, k
                else:
                    break
            if sj > best:
                best = sj
                changed = True
            b = bj
            # best left endpoint for fixed b (walk the lower hull of {0..x})
            i = x
            ai = i
            si = (p[b] - p[i]) / (b - i)
            while prv[i] != -1:
                k = prv[i]
                sk = (p[b] - p[k]) / (b - k)
                if sk > si:
                    i, si, ai = k, sk, k
                else:
                    break
            if si > best:
                best = si
                changed = True
            a = ai
        out[x] = best
    return out


def hl_maximal(f: ZSignal) -> ZSignal:
    """Uncentered Hardy-Littlewood maximal function, intervals restricted to the window of ``f``.

    ``M f(x) = max_{l <= x <= r} (1/(r-l+1)) sum_{y=l}^{r} |f(y)|``.  The maximum
    is the steepest chord between the lower hull of prefix sums left of ``x``
    and the upper hull right of ``x``.
    """
    p = np.concatenate([[0.0], np.cumsum(np.abs(f.values))])
    return ZSignal(f.lo, _hl_hull(p).astype(np.complex128))


def hl_domination_constant(partition: LinearizedPartition, net, path: SelectorPath, N: int,
                           f: ZSignal, eps: float | None = None) -> float:
    """Smallest ``C`` with ``|TT*f| <= C N**(-2 eps) M_HL f + simple_term |f|`` on the window."""
    eps = default_epsilon(path.alpha) if eps is None else eps
    f = _check_window(partition, f)
    tt = np.abs(tt_star_apply(partition, net, path, N, f).values)
    excess = np.maximum(tt - simple_term(path, N) * np.abs(f.values), 0.0)
    hl = hl_maximal(f).values.real
    ok = hl > 0
    if not ok.any():
        return 0.0
    return float(np.max(excess[ok] / (N ** (-2.0 * eps) * hl[ok])))


# ------------------------------------------------------- operator norm probe

@dataclass(frozen=True, eq=False)
class OpNormProbe:
    estimate: float
    probe_ratios: np.ndarray
    power_value: float
    partition: LinearizedPartition | None = field(default=None, repr=False)


def _probe_signals(rng: np.random.Generator, trials: int, length: int):
    x = np.arange(length)
    for t in range(trials):
        if t % 2 == 0:
            v = rng.standard_normal(length) + 1j * rng.standard_normal(length)
        else:
            v = np.exp(2j * np.pi * rng.random() * x)
        yield ZSignal(0, v / np.linalg.norm(v))


def probe_maximal_opnorm(net, path: SelectorPath, N: int, trials: int, seed: int = 0,
                         power_iters: int = 20, length: int | None = None) -> OpNormProbe:
    """Lower estimates of ``||M_N||_{l2 -> l2}``.

    Each probe ratio ``||M_N f|| / ||f||`` is exact for its test signal.  The
    partition of the best probe then fixes a linear operator ``T`` with
    ``|T f| <= M_N f`` pointwise; the power-iteration Rayleigh quotient of
    ``T T*`` on the window bounds ``||T||**2`` from below.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    N = _check_N(path, N)
    weights = _weights(net)
    length = N if length is None else int(length)
    rng = generator(seed, N)
    ratios = []
    best = (-1.0, None, None)
    for f in _probe_signals(rng, trials, length):
        mf, labels = maximal_function(weights, path, N, f)
        r = mf.norm()
        ratios.append(r)
        if r > best[0]:
            best = (r, mf, labels)
    ratios = np.array(ratios)
    _, mf, labels = best
    partition = LinearizedPartition(mf.lo, labels.astype(np.int64))
    v = mf if mf.norm() > 0 else ZSignal(mf.lo, np.ones(len(mf)))
    v = ZSignal(v.lo, v.values / np.linalg.norm(v.values))
    lam = 0.0
    for _ in range(power_iters):
        w = tt_star_apply(partition, weights, path, N, v)
        lam = max(lam, float(np.vdot(v.values, w.values).real))
        nw = w.norm()
        if nw == 0.0:
            break
        v = ZSignal(w.lo, w.values / nw)
    power_value = math.sqrt(max(lam, 0.0))
    return OpNormProbe(max(float(ratios.max()), power_value), ratios, power_value, partition)


def maximal_opnorm_probe(net, path: SelectorPath, N: int, trials: int, seed: int = 0,
                         power_iters: int = 20, length: int | None = None) -> float:
    return probe_maximal_opnorm(net, path, N, trials, seed, power_iters, length).estimate


__all__ = [
    "CONSTANT", "KernelScanReport", "LinearizedPartition", "OpNormProbe", "ZSignal", "apply_T",
    "apply_T_adjoint", "conditional_variance", "conditional_variance_all", "default_epsilon",
    "hl_domination_constant", "hl_maximal", "kernel_K", "kernel_all_h", "kernel_scan",
    "kernel_sup_matrix", "lemma_tech_statistic", "linearize", "maximal_function",
    "maximal_opnorm_probe", "modulated_y", "probe_maximal_opnorm", "simple_term",
    "tt_star_apply", "tt_star_kernel_form",
]
