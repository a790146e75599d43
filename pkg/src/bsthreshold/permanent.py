"""Matrix permanents: brute-force oracle, Gray-code Ryser, and the closed form
for unit-diagonal matrices with a constant off-diagonal entry.

Normalized results (``perm(A) / n!``) are carried in the log domain so that
large uniform matrices (n in the hundreds) neither overflow nor underflow.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit
from scipy.special import gammaln, logsumexp

NAIVE_MAX_DIM = 9
RYSER_MAX_DIM = 30
# Fixed partition of the Gray-code sequence; independent of worker count so
# the reduction order never changes.
RYSER_CHUNKS = 64


class DimensionError(ValueError):
    """Matrix dimension outside the range an engine accepts."""


@dataclass(frozen=True)
class NormalizedPermanent:
    """``perm(A) / n!`` stored as a log-magnitude and a unit phase.

    A vanishing permanent has ``log_magnitude == -inf`` and ``phase == 0``.
    """

    log_magnitude: float
    phase: complex

    @property
    def value(self) -> complex:
        if self.log_magnitude == -math.inf:
            return 0j
        return self.phase * math.exp(self.log_magnitude)

    @property
    def real(self) -> float:
        return self.value.real

    @classmethod
    def from_permanent(cls, perm: complex, n: int) -> "NormalizedPermanent":
        mag = abs(perm)
        if mag == 0.0:
            return cls(-math.inf, 0j)
        return cls(math.log(mag) - math.lgamma(n + 1), complex(perm) / mag)


@dataclass(frozen=True)
class CostModel:
    """Classical FLOP count ``c * k**a * 2**k`` for a k-dimensional permanent."""

    c: float = 1.0
    a: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"cost prefactor c must be positive, got {self.c}")


def _as_square(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        raise DimensionError("permanent of a 0x0 matrix is not supported")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


@lru_cache(maxsize=None)
def _all_permutations(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), dtype=np.intp)


def perm_naive(m) -> complex:
    """Permanent by direct summation over all n! permutations (n <= 9)."""
    a = _as_square(m)
    n = a.shape[0]
    if n > NAIVE_MAX_DIM:
        raise DimensionError(
            f"perm_naive refuses n={n}: factorial cost, cap is {NAIVE_MAX_DIM}"
        )
    perms = _all_permutations(n)
    terms = a[np.arange(n), perms].prod(axis=1)
    return complex(terms.sum())


@njit(cache=True, nogil=True)
def _ryser_chunk(a, start, stop):
    n = a.shape[0]
    g = start ^ (start >> 1)
    row_sums = np.zeros(n, dtype=np.complex128)
    popcount = 0
    for j in range(n):
        if (g >> j) & 1:
            popcount += 1
            for i in range(n):
                row_sums[i] += a[i, j]
    total = 0j
    k = start
    while True:
        if k > 0:
            prod = 1.0 + 0j
            for i in range(n):
                prod *= row_sums[i]
            if popcount & 1:
                total -= prod
            else:
                total += prod
        k += 1
        if k >= stop:
            break
        # bit flipped between gray(k-1) and gray(k) is the lowest set bit of k
        j = 0
        while not (k >> j) & 1:
            j += 1
        if (g >> j) & 1:
            for i in range(n):
                row_sums[i] -= a[i, j]
            popcount -= 1
        else:
            for i in range(n):
                row_sums[i] += a[i, j]
            popcount += 1
        g ^= 1 << j
    return total


def perm_ryser(m, threads: int = 1) -> complex:
    """Permanent by Ryser inclusion-exclusion in Gray-code order.

    ``O(n 2**n)`` work. The subset lattice is split into a fixed number of
    contiguous Gray-code chunks whose partial sums are reduced in chunk order,
    so the result is bitwise identical for every ``threads`` value.
    """
    a = _as_square(m)
    n = a.shape[0]
    if n > RYSER_MAX_DIM:
        raise DimensionError(
            f"perm_ryser refuses n={n}: time budget cap is {RYSER_MAX_DIM}"
        )
    a = np.ascontiguousarray(a, dtype=np.complex128)
    total = 1 << n
    nchunks = min(RYSER_CHUNKS, total)
    edges = [total * c // nchunks for c in range(nchunks + 1)]
    bounds = list(zip(edges[:-1], edges[1:]))
    if threads <= 1:
        partials = [_ryser_chunk(a, lo, hi) for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(lambda b: _ryser_chunk(a, *b), bounds))
    acc = 0j
    for p in partials:
        acc += p
    return complex(-acc if n & 1 else acc)


@lru_cache(maxsize=64)
def _log_derangement_ratios(n: int) -> np.ndarray:
    """log(D_m / m!) for m = 0..n; D_1 = 0 gives -inf."""
    r = np.empty(n + 1)
    r[0] = 1.0
    if n >= 1:
        r[1] = 0.0
    for m in range(2, n + 1):
        # D_m = (m-1)(D_{m-1} + D_{m-2}), divided through by m!
        r[m] = ((m - 1) * r[m - 1] + r[m - 2]) / m
    with np.errstate(divide="ignore"):
        return np.log(r)


def perm_uniform_normalized(n: int, x: float) -> NormalizedPermanent:
    """``perm(S) / n!`` for ``S = (1 - x) I + x J``.

    A permutation with ``m`` non-fixed points contributes ``x**m``, and there
    are ``C(n, m) D_m`` of them, so the normalized permanent is
    ``sum_m D_m x**m / (m! (n-m)!)``. The sum is evaluated with logsumexp.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"off-diagonal overlap must lie in [0, 1], got {x}")
    if x == 1.0:
        return NormalizedPermanent(0.0, 1.0 + 0j)
    m = np.arange(n + 1)
    logr = _log_derangement_ratios(n)
    if x == 0.0:
        logx_m = np.where(m == 0, 0.0, -np.inf)
    else:
        logx_m = m * math.log(x)
    terms = logr + logx_m - gammaln(n - m + 1)
    terms = terms[np.isfinite(terms)]
    return NormalizedPermanent(float(logsumexp(terms)), 1.0 + 0j)


def perm_normalized(m, threads: int = 1) -> NormalizedPermanent:
    a = _as_square(m)
    return NormalizedPermanent.from_permanent(perm_ryser(a, threads), a.shape[0])


def classical_flops(k: int, cost: CostModel = CostModel()) -> float:
    """FLOPs to evaluate one k-dimensional permanent under ``cost``."""
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    return cost.c * float(k) ** cost.a * 2.0**k
