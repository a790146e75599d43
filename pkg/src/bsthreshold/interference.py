"""Small-scale boson-sampling probabilities.

Conventions: a photon entering input mode ``i`` leaves in output mode ``j``
with amplitude ``U[i, j]``. Occupation vectors are tuples of length M.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from collections.abc import Iterable, Mapping

import numpy as np
from scipy.special import gammaln

from .distinguishability import DistinguishabilityMatrix
from .permanent import perm_ryser

MAX_PHOTONS = 8
ORACLE_MAX_PHOTONS = 5
ORACLE_MAX_MODES = 8


def haar_unitary(m: int, seed: int) -> np.ndarray:
    """Haar-random M x M unitary from the QR decomposition of a Ginibre matrix.

    The triangular factor's diagonal is made real positive so the
    distribution is exactly Haar; the same seed always gives the same matrix.
    """
    if m < 1:
        raise ValueError(f"mode count must be >= 1, got {m}")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))[None, :]


def check_unitary(u, atol: float = 1e-10) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"network matrix must be square, got {u.shape}")
    err = np.abs(u.conj().T @ u - np.eye(u.shape[0])).max()
    if err > atol:
        raise ValueError(f"network matrix is not unitary (max deviation {err:.3g})")
    return u


def _occupation(config, m: int) -> tuple[int, ...]:
    occ = tuple(int(c) for c in config)
    if len(occ) != m:
        raise ValueError(f"occupation vector has {len(occ)} modes, network has {m}")
    if any(c < 0 for c in occ):
        raise ValueError(f"negative occupation in {occ}")
    return occ


def _mode_list(occ: tuple[int, ...]) -> list[int]:
    return [mode for mode, count in enumerate(occ) for _ in range(count)]


def _mu(occ: tuple[int, ...]) -> int:
    return math.prod(math.factorial(c) for c in occ)


def _submatrix(u: np.ndarray, inp, out) -> np.ndarray:
    return u[np.ix_(_mode_list(inp), _mode_list(out))]


def _checked_pair(u, input, output):
    u = np.asarray(u, dtype=complex)
    m = u.shape[0]
    inp, out = _occupation(input, m), _occupation(output, m)
    if sum(inp) != sum(out):
        raise ValueError(f"photon number mismatch: input {sum(inp)}, output {sum(out)}")
    if sum(inp) > MAX_PHOTONS:
        raise ValueError(f"at most {MAX_PHOTONS} photons supported, got {sum(inp)}")
    return u, inp, out


def prob_ideal(u, input, output) -> float:
    """Output probability for perfectly indistinguishable photons."""
    u, inp, out = _checked_pair(u, input, output)
    if sum(inp) == 0:
        return 1.0
    amp = perm_ryser(_submatrix(u, inp, out))
    return abs(amp) ** 2 / (_mu(inp) * _mu(out))


def prob_distinguishable(u, input, output) -> float:
    """Output probability for fully distinguishable photons.

    Rows of the submatrix are labelled photons, so the permanent already
    counts every photon-to-mode assignment once per ordering of the photons
    that share an output mode; dividing by the output multiplicities removes
    that overcount.
    """
    u, inp, out = _checked_pair(u, input, output)
    if sum(inp) == 0:
        return 1.0
    p = perm_ryser(np.abs(_submatrix(u, inp, out)) ** 2).real
    return p / _mu(out)


def enumerate_outputs(m: int, n: int) -> list[tuple[int, ...]]:
    """All occupation vectors of ``n`` photons in ``m`` modes, lexicographic."""
    outs = []
    for modes in itertools.combinations_with_replacement(range(m), n):
        occ = [0] * m
        for mode in modes:
            occ[mode] += 1
        outs.append(tuple(occ))
    return sorted(outs)


def ideal_distribution(u, input) -> dict[tuple[int, ...], float]:
    u = np.asarray(u, dtype=complex)
    inp = _occupation(input, u.shape[0])
    return {out: prob_ideal(u, inp, out) for out in enumerate_outputs(u.shape[0], sum(inp))}


def distinguishable_distribution(u, input) -> dict[tuple[int, ...], float]:
    u = np.asarray(u, dtype=complex)
    inp = _occupation(input, u.shape[0])
    return {
        out: prob_distinguishable(u, inp, out)
        for out in enumerate_outputs(u.shape[0], sum(inp))
    }


def _group_distribution(u, modes_in: list[int]) -> dict[tuple[int, ...], float]:
    m = u.shape[0]
    occ = [0] * m
    for mode in modes_in:
        occ[mode] += 1
    return ideal_distribution(u, occ)


def _add_single_photons(dist, u, modes_in):
    """Convolve a distribution with independent single photons."""
    m = u.shape[0]
    for src in modes_in:
        row = np.abs(u[src]) ** 2
        nxt: dict[tuple[int, ...], float] = {}
        for occ, p in dist.items():
            for j in range(m):
                key = occ[:j] + (occ[j] + 1,) + occ[j + 1 :]
                nxt[key] = nxt.get(key, 0.0) + p * row[j]
        dist = nxt
    return dist


def brute_force_distribution(u, input, S: DistinguishabilityMatrix) -> dict[tuple[int, ...], float]:
    """Exact output distribution for photons with uniform pairwise overlap x.

    Each photon's internal state is split as ``sqrt(x)|c> + sqrt(1-x)|u_i>``.
    The 2**N branches (which photons sit in the common state ``c``) carry
    orthogonal internal-state multisets, so they add incoherently: photons in
    ``c`` interfere as ideal bosons, the rest act as distinguishable particles.
    Branch weights carry the branch norm, which matters for bunched inputs.
    """
    u = np.asarray(u, dtype=complex)
    m = u.shape[0]
    inp = _occupation(input, m)
    n = sum(inp)
    if n > ORACLE_MAX_PHOTONS or m > ORACLE_MAX_MODES:
        raise ValueError(
            f"brute-force oracle limited to N <= {ORACLE_MAX_PHOTONS}, "
            f"M <= {ORACLE_MAX_MODES} (got N={n}, M={m})"
        )
    if S.n != n:
        raise ValueError(f"overlap matrix is {S.n}x{S.n} but input has {n} photons")
    x = S.uniform_overlap()
    if x is None:
        raise ValueError("brute-force oracle requires a uniform overlap matrix")

    photons = _mode_list(inp)
    result = {out: 0.0 for out in enumerate_outputs(m, n)}
    total = 0.0
    for size in range(n + 1):
        weight_size = x**size * (1.0 - x) ** (n - size)
        if weight_size == 0.0:
            continue
        for common in itertools.combinations(range(n), size):
            shared = [photons[i] for i in common]
            rest = [photons[i] for i in range(n) if i not in common]
            # squared norm of the branch: common photons sharing an input
            # mode are identical bosons
            weight = weight_size * _mu(tuple(shared.count(k) for k in range(m)))
            total += weight
            dist = _group_distribution(u, shared)
            dist = _add_single_photons(dist, u, rest)
            for occ, p in dist.items():
                result[occ] += weight * p
    # total is 1 unless some input mode holds several photons
    return {occ: p / total for occ, p in result.items()}


def variational_distance(p: Mapping, q: Mapping) -> float:
    """Half the L1 distance between two distributions over the same outputs."""
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def collision_free_prob(m: int, n: int) -> float:
    """Haar-averaged probability of a collision-free output, C(M,N)/C(M+N-1,N)."""
    if n < 1 or m < n:
        raise ValueError(f"need M >= N >= 1, got M={m}, N={n}")
    log_p = gammaln(m + 1) - gammaln(m - n + 1) + gammaln(m) - gammaln(m + n)
    return float(math.exp(log_p))


_LOGS = {"e": math.log, "2": math.log2, "10": math.log10}


def coupon_collector_events(m: float, n: int, log_base: str = "e") -> float:
    """Events needed to see every output mode at least once, M log(M) / N."""
    if log_base not in _LOGS:
        raise ValueError(f"log base must be one of {sorted(_LOGS)}, got {log_base!r}")
    if n < 1:
        raise ValueError(f"photon count must be >= 1, got {n}")
    return m * _LOGS[log_base](m) / n


def distribution_to_csv(dist: Mapping, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["occupation", "probability"])
    for occ in sorted(dist):
        w.writerow(["-".join(str(c) for c in occ), repr(float(dist[occ]))])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def distribution_from_csv(lines: Iterable[str]) -> dict[tuple[int, ...], float]:
    reader = csv.reader(lines)
    header = next(reader)
    if header != ["occupation", "probability"]:
        raise ValueError(f"unexpected distribution header {header}")
    return {tuple(int(c) for c in occ.split("-")): float(p) for occ, p in reader}
