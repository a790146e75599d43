"""Photon overlap matrices and the variational-distance bound they imply."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .permanent import RYSER_MAX_DIM, DimensionError, perm_normalized, perm_uniform_normalized

DecayKind = Literal["uniform", "geometric", "linear"]


class DistinguishabilityMatrix:
    """Symmetric overlap matrix ``S_ij = sqrt(V_ij)`` with unit diagonal."""

    def __init__(self, entries, atol: float = 1e-12):
        s = np.array(entries, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] < 1:
            raise ValueError(f"overlap matrix must be square and non-empty, got {s.shape}")
        if not np.allclose(s, s.T, atol=atol, rtol=0):
            raise ValueError("overlap matrix must be symmetric")
        if not np.allclose(np.diag(s), 1.0, atol=atol, rtol=0):
            raise ValueError("overlap matrix must have unit diagonal")
        if s.min() < -atol or s.max() > 1 + atol:
            raise ValueError("overlap entries must lie in [0, 1]")
        s = np.clip((s + s.T) / 2, 0.0, 1.0)
        np.fill_diagonal(s, 1.0)
        s.setflags(write=False)
        self.entries = s

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def visibilities(self) -> np.ndarray:
        return self.entries**2

    def uniform_overlap(self) -> float | None:
        """The common off-diagonal value if ``S`` is of uniform form, else None."""
        if self.n == 1:
            return 1.0
        off = self.entries[~np.eye(self.n, dtype=bool)]
        if np.all(off == off[0]):
            return float(off[0])
        return None

    def __repr__(self):
        return f"DistinguishabilityMatrix(n={self.n})"


@dataclass(frozen=True)
class DecayModel:
    """Pairwise visibility ``V_ij = V0 * f(|i - j|)`` along the pulse train.

    ``uniform``: f = 1; ``geometric``: f(d) = exp(-rate d);
    ``linear``: f(d) = max(0, 1 - rate d).
    """

    kind: DecayKind = "uniform"
    V0: float = 1.0
    rate: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("uniform", "geometric", "linear"):
            raise ValueError(f"unknown decay kind {self.kind!r}")
        if not 0.0 <= self.V0 <= 1.0:
            raise ValueError(f"V0 must lie in [0, 1], got {self.V0}")
        if not (self.rate >= 0.0 and math.isfinite(self.rate)):
            raise ValueError(f"decay rate must be finite and >= 0, got {self.rate}")

    @property
    def label(self) -> str:
        return self.name or f"{self.kind}_V{self.V0:g}_r{self.rate:g}"

    def visibility(self, distance):
        d = np.asarray(distance, dtype=float)
        if self.kind == "uniform":
            f = np.ones_like(d)
        elif self.kind == "geometric":
            f = np.exp(-self.rate * d)
        else:
            f = 1.0 - self.rate * d
        return np.clip(self.V0 * f, 0.0, 1.0)

    def is_uniform(self) -> bool:
        return self.kind == "uniform" or self.rate == 0.0


def _check_visibility(v: float) -> None:
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {v}")


def build_uniform(n: int, V: float) -> DistinguishabilityMatrix:
    if n < 1:
        raise ValueError(f"photon count must be >= 1, got {n}")
    _check_visibility(V)
    s = np.full((n, n), math.sqrt(V))
    np.fill_diagonal(s, 1.0)
    return DistinguishabilityMatrix(s)


def build_decaying(n: int, model: DecayModel) -> DistinguishabilityMatrix:
    if n < 1:
        raise ValueError(f"photon count must be >= 1, got {n}")
    idx = np.arange(n)
    v = model.visibility(np.abs(idx[:, None] - idx[None, :]))
    s = np.sqrt(v)
    np.fill_diagonal(s, 1.0)
    return DistinguishabilityMatrix(s)


def _normalized_perm(S: DistinguishabilityMatrix):
    x = S.uniform_overlap()
    if x is not None:
        return perm_uniform_normalized(S.n, x)
    if S.n > RYSER_MAX_DIM:
        raise DimensionError(
            f"non-uniform overlap matrix with n={S.n} exceeds the exact permanent "
            f"cap of {RYSER_MAX_DIM}; only uniform S is supported beyond it"
        )
    return perm_normalized(S.entries)


def variational_distance_bound(S: DistinguishabilityMatrix) -> float:
    """Upper bound ``1 - perm(S)/n!`` on the distance from the ideal sampler."""
    np_ = _normalized_perm(S)
    # perm(S)/n! <= 1 for a Gram matrix; -expm1 keeps precision near D = 0
    return float(min(1.0, max(0.0, -math.expm1(min(np_.log_magnitude, 0.0)))))


def distance_distinguishable(n: int) -> float:
    """Haar-averaged distance between ideal and fully distinguishable photons."""
    if n < 1:
        raise ValueError(f"photon count must be >= 1, got {n}")
    return (n - 1) / n


def delta_separation(S: DistinguishabilityMatrix) -> float:
    """``1 - D_bound / D_dist`` clipped to [0, 1]; 1 for a single photon."""
    d_dist = distance_distinguishable(S.n)
    if d_dist == 0.0:
        return 1.0
    return float(np.clip(1.0 - variational_distance_bound(S) / d_dist, 0.0, 1.0))
