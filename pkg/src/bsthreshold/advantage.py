"""Quantum-advantage threshold model for a boson sampler fed by a single-photon
source of efficiency eta_S and pairwise visibility V.

Three ingredients are compared photon number by photon number:

* the truncation error bound ``sqrt((eta V)**(k+1) / (1 - eta V))`` of the
  classical approximation that keeps ``k`` interfering photons,
* the largest ``k`` a classical machine can afford within the runtime budget
  (``N_s`` permanents of size ``k`` at ``c k**a 2**k`` FLOPs each),
* the source efficiency an experiment needs to collect ``N_s`` collision-free
  events within the same budget.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Literal, Sequence

from .distinguishability import (
    DecayModel,
    build_decaying,
    distance_distinguishable,
    delta_separation,
    variational_distance_bound,
)
from .interference import collision_free_prob, coupon_collector_events
from .permanent import RYSER_MAX_DIM, CostModel, classical_flops
from .tables import CurveTable

SECONDS_PER_DAY = 86400.0
MAX_BISECTION_ITER = 100

ModeRule = Literal["quadratic", "linear", "fixed"]


class DomainError(ArithmeticError):
    """A well-posed query with no solution (no root, no crossing)."""


class NoAdvantageError(DomainError):
    def __init__(self, message, classical_curve=None, experimental_curve=None):
        super().__init__(message)
        self.classical_curve = classical_curve
        self.experimental_curve = experimental_curve


@dataclass(frozen=True)
class AdvantageScenario:
    visibility: float = 0.96
    error_tolerance: float = 1e-3
    runtime_budget: float = 30 * SECONDS_PER_DAY
    flops: float = 1e17
    rep_rate: float = 1e9
    eta_dx: float = 0.90
    eta_net: float = 0.92
    eta_d: float = 0.92
    mode_rule: ModeRule = "quadratic"
    # slope c for M = cN, or the mode count for a fixed network
    mode_constant: float = 3.0
    cost_c: float = 1.0
    cost_a: float = 1.0
    log_base: str = "e"

    def __post_init__(self):
        if not 0.0 < self.error_tolerance < 1.0:
            raise ValueError(f"error_tolerance must lie in (0, 1), got {self.error_tolerance}")
        if not 0.0 < self.visibility <= 1.0:
            raise ValueError(f"visibility must lie in (0, 1], got {self.visibility}")
        for name in ("eta_dx", "eta_net", "eta_d"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        for name in ("runtime_budget", "flops", "rep_rate"):
            v = getattr(self, name)
            if not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")
        if self.mode_rule not in ("quadratic", "linear", "fixed"):
            raise ValueError(f"unknown mode_rule {self.mode_rule!r}")
        if not self.mode_constant > 0:
            raise ValueError(f"mode_constant must be positive, got {self.mode_constant}")
        if self.log_base not in ("e", "2", "10"):
            raise ValueError(f"log_base must be 'e', '2' or '10', got {self.log_base!r}")
        CostModel(self.cost_c, self.cost_a)

    @property
    def cost_model(self) -> CostModel:
        return CostModel(self.cost_c, self.cost_a)

    @property
    def eta_rest(self) -> float:
        """Per-photon efficiency of everything downstream of the source."""
        return self.eta_dx * self.eta_net * self.eta_d

    def modes(self, n: int) -> int:
        if self.mode_rule == "quadratic":
            m = n * n
        elif self.mode_rule == "linear":
            m = int(round(self.mode_constant * n))
        else:
            m = int(round(self.mode_constant))
        if m < n:
            raise ValueError(f"mode rule {self.mode_rule} gives M={m} < N={n}")
        return m

    def n_events(self, n: int) -> float:
        return coupon_collector_events(self.modes(n), n, self.log_base)

    def replace(self, **changes) -> "AdvantageScenario":
        return AdvantageScenario(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "AdvantageScenario":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown scenario keys: {', '.join(unknown)}")
        return cls(**data)


@dataclass
class ThresholdResult:
    n_star: int
    eta_star: float
    classical_curve: CurveTable
    experimental_curve: CurveTable
    ceiling_at_n_star: float = math.nan
    meta: dict = field(default_factory=dict)


def _bisect_increasing(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-15):
    """Root of an increasing function on [lo, hi] by interval halving.

    Stops once the bracket is below ``tol`` (relative to its upper end) or
    cannot shrink further in floating point; at most 100 halvings.
    """
    for _ in range(MAX_BISECTION_ITER):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= tol * hi:
            break
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def error_bound(eta: float, v: float, k: int) -> float:
    """Truncation error bound at order ``k``; diverges as ``eta * v -> 1``."""
    if k < 0:
        raise ValueError(f"truncation order must be >= 0, got {k}")
    x = eta * v
    if x >= 1.0:
        raise ValueError(f"eta*V = {x} >= 1: error bound diverges")
    if x < 0.0:
        raise ValueError(f"eta*V must be non-negative, got {x}")
    if x == 0.0:
        return 0.0
    return math.sqrt(x ** (k + 1) / (1.0 - x))


def required_truncation_order(E: float, eta: float, v: float) -> int:
    """Smallest ``k`` with ``error_bound(eta, v, k) <= E``."""
    if E <= 0.0:
        raise ValueError(f"error tolerance must be positive, got {E}")
    x = eta * v
    if not 0.0 <= x < 1.0:
        raise ValueError(f"eta*V must lie in [0, 1), got {x}")
    if x == 0.0:
        return 0
    k = max(0, math.ceil((2 * math.log(E) + math.log1p(-x)) / math.log(x)) - 1)
    while k > 0 and error_bound(eta, v, k - 1) <= E:
        k -= 1
    while error_bound(eta, v, k) > E:
        k += 1
    return k


def _error_bound_root(k: int, v: float, E: float) -> float:
    """eta in (0, 1/v) with ``error_bound(eta, v, k) == E``."""
    log_e2 = 2.0 * math.log(E)

    def f(eta):
        x = eta * v
        return (k + 1) * math.log(x) - math.log1p(-x) - log_e2

    return _bisect_increasing(f, 0.0, 1.0 / v)


def min_eta_hardness(n: int, v: float, E: float) -> float:
    """Source efficiency at which the order-``n`` truncation error equals ``E``.

    Below this efficiency a classical algorithm keeping ``n`` photons already
    meets the tolerance. Raises DomainError when the root exceeds 1.
    """
    if n < 0:
        raise ValueError(f"photon number must be >= 0, got {n}")
    if not 0.0 < v <= 1.0:
        raise ValueError(f"visibility must lie in (0, 1], got {v}")
    if not 0.0 < E < 1.0:
        raise ValueError(f"error tolerance must lie in (0, 1), got {E}")
    eta = _error_bound_root(n, v, E)
    if eta > 1.0:
        raise DomainError(f"unreachable at this V: required eta_S = {eta:.6g} > 1")
    return eta


def classical_runtime(n: int, k: int, scenario: AdvantageScenario, n_events: float | None = None) -> float:
    """Seconds to evaluate ``N_s`` permanents of dimension ``k``."""
    if k < 0:
        raise ValueError(f"truncation order must be >= 0, got {k}")
    ns = scenario.n_events(n) if n_events is None else n_events
    return ns * classical_flops(k, scenario.cost_model) / scenario.flops


def max_k_within_budget(n: int, scenario: AdvantageScenario) -> int:
    """Largest affordable truncation order, capped at ``n - 1``.

    Returns 0 when not even a single-photon truncation fits the budget.
    """
    if n < 2:
        raise ValueError(f"photon number must be >= 2, got {n}")
    ns = scenario.n_events(n)
    for k in range(n - 1, 0, -1):
        if classical_runtime(n, k, scenario, ns) <= scenario.runtime_budget:
            return k
    return 0


def classical_eta_ceiling(n: int, scenario: AdvantageScenario) -> float:
    """Largest eta_S a budget-limited classical algorithm still approximates.

    The raw root is returned, so values above 1 mean every physical source
    efficiency is classically simulable at this ``n``.
    """
    k = max_k_within_budget(n, scenario)
    return _error_bound_root(k, scenario.visibility, scenario.error_tolerance)


def _log_sampler_runtime(n, eta_s, scenario, ns, m):
    eta_total = eta_s * scenario.eta_rest
    if eta_total <= 0.0:
        return math.inf
    return (
        math.log(ns)
        - math.log(scenario.rep_rate / n)
        - n * math.log(eta_total)
        - math.log(collision_free_prob(m, n))
    )


def sampler_runtime(
    n: int,
    eta_s: float,
    scenario: AdvantageScenario,
    n_events: float | None = None,
    modes: int | None = None,
) -> float:
    """Seconds for the experiment to collect ``N_s`` collision-free events.

    ``math.inf`` is the sentinel for a zero-efficiency source.
    """
    if n < 1:
        raise ValueError(f"photon number must be >= 1, got {n}")
    if not 0.0 <= eta_s <= 1.0:
        raise ValueError(f"source efficiency must lie in [0, 1], got {eta_s}")
    m = scenario.modes(n) if modes is None else modes
    ns = scenario.n_events(n) if n_events is None else n_events
    if ns <= 0.0:
        return 0.0
    log_rt = _log_sampler_runtime(n, eta_s, scenario, ns, m)
    if log_rt > 709.0:
        return math.inf
    return math.exp(log_rt)


def min_eta_experiment(n: int, scenario: AdvantageScenario) -> float:
    """Source efficiency at which the experiment exactly fills the budget."""
    if n < 1:
        raise ValueError(f"photon number must be >= 1, got {n}")
    m = scenario.modes(n)
    ns = scenario.n_events(n)
    if ns <= 0.0:
        return 0.0
    log_budget = math.log(scenario.runtime_budget)
    if _log_sampler_runtime(n, 1.0, scenario, ns, m) > log_budget:
        raise DomainError(f"infeasible at any source efficiency for N={n}")

    def f(eta):
        # increasing in eta: budget minus runtime, in logs
        return log_budget - _log_sampler_runtime(n, eta, scenario, ns, m)

    return _bisect_increasing(f, 0.0, 1.0)


def _threshold_row(n, scenario):
    k = max_k_within_budget(n, scenario)
    ceiling = _error_bound_root(k, scenario.visibility, scenario.error_tolerance)
    try:
        eta = min_eta_experiment(n, scenario)
    except DomainError:
        eta = math.inf
    return n, scenario.modes(n), scenario.n_events(n), k, ceiling, eta


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def scenario_meta(scenario: AdvantageScenario, prefix: str = "scenario.") -> dict:
    return {prefix + k: v for k, v in scenario.to_dict().items()}


def advantage_threshold(
    scenario: AdvantageScenario, n_min: int = 2, n_max: int = 120, threads: int = 1
) -> ThresholdResult:
    """First photon number at which the experiment's required eta_S reaches
    the classical ceiling.

    Below the crossing an experiment running at its minimum efficiency is
    still inside the classically approximable region; at ``n*`` it is not.
    Infeasible experiments (required eta_S > 1) are never a crossing.
    """
    if n_min < 2 or n_max < n_min:
        raise ValueError(f"invalid photon range [{n_min}, {n_max}]")
    rows = _map(lambda n: _threshold_row(n, scenario), range(n_min, n_max + 1), threads)
    meta = scenario_meta(scenario)
    classical = CurveTable(["N", "M", "N_s", "k_max", "eta_ceiling"], meta=dict(meta))
    experimental = CurveTable(["N", "M", "N_s", "eta_min_experiment"], meta=dict(meta))
    n_star = None
    for n, m, ns, k, ceiling, eta in rows:
        classical.add_row(n, m, ns, k, ceiling)
        experimental.add_row(n, m, ns, eta)
        if n_star is None and eta <= 1.0 and eta >= ceiling:
            n_star, eta_star, ceiling_star = n, eta, ceiling
    if n_star is None:
        raise NoAdvantageError(
            f"no advantage in range N in [{n_min}, {n_max}]", classical, experimental
        )
    for table in (classical, experimental):
        table.meta["n_star"] = n_star
        table.meta["eta_star"] = eta_star
    return ThresholdResult(n_star, eta_star, classical, experimental, ceiling_star, dict(meta))


def _distance_or_nan(n: int, model: DecayModel) -> tuple[float, float]:
    if not model.is_uniform() and n > RYSER_MAX_DIM:
        return math.nan, math.nan
    S = build_decaying(n, model)
    return variational_distance_bound(S), delta_separation(S)


def curve_fig3d(
    scenario: AdvantageScenario,
    sources: Sequence[DecayModel],
    n_values: Sequence[int],
    threads: int = 1,
) -> tuple[CurveTable, CurveTable]:
    """Distance-bound curves per source (top) and required eta_S (bottom).

    Non-uniform sources beyond the exact-permanent cap are reported as nan.
    """
    meta = scenario_meta(scenario)
    meta["sources"] = [source_dict(s) for s in sources]
    top = CurveTable(["N"] + [f"D_{s.label}" for s in sources], meta=dict(meta, panel="top"))
    bottom = CurveTable(["N", "eta_min_experiment"], meta=dict(meta, panel="bottom"))

    def row(n):
        ds = [_distance_or_nan(n, s)[0] for s in sources]
        try:
            eta = min_eta_experiment(n, scenario)
        except DomainError:
            eta = math.inf
        return n, ds, eta

    for n, ds, eta in _map(row, n_values, threads):
        top.add_row(n, *ds)
        bottom.add_row(n, eta)
    return top, bottom


def hardness_boundary_curve(scenario: AdvantageScenario, n_values: Sequence[int]) -> CurveTable:
    """Minimum eta_S such that no truncation below N meets the tolerance."""
    t = CurveTable(["N", "eta_min_hardness"], meta=scenario_meta(scenario))
    for n in n_values:
        eta = _error_bound_root(n, scenario.visibility, scenario.error_tolerance)
        t.add_row(n, eta if eta <= 1.0 else math.inf)
    return t


def truncation_order_curve(
    scenario: AdvantageScenario, n_values: Sequence[int], budgets_days: Sequence[float] = (1.0, 30.0)
) -> CurveTable:
    """Largest affordable truncation order for each runtime budget."""
    budgets = sorted(set(float(b) for b in budgets_days) | {scenario.runtime_budget / SECONDS_PER_DAY})
    meta = scenario_meta(scenario)
    meta["budgets_days"] = budgets
    t = CurveTable(["N"] + [f"k_max_{b:g}d" for b in budgets], meta=meta)
    variants = [scenario.replace(runtime_budget=b * SECONDS_PER_DAY) for b in budgets]
    for n in n_values:
        if n < 2:
            continue
        t.add_row(n, *[max_k_within_budget(n, s) for s in variants])
    for b, s in zip(budgets, variants):
        ks = t.column(f"k_max_{b:g}d")
        ns = t.column("N")
        onset = [n for n, k in zip(ns, ks) if k == n - 1]
        t.meta[f"plateau_onset_{b:g}d"] = int(max(onset)) if onset else None
    return t


def separation_curves(sources: Sequence[DecayModel], n_values: Sequence[int]) -> CurveTable:
    """Distance bound and separation Delta per source, plus the distinguishable reference."""
    headers = ["N", "D_distinguishable"]
    for s in sources:
        headers += [f"D_{s.label}", f"Delta_{s.label}"]
    t = CurveTable(headers, meta={"sources": [source_dict(s) for s in sources]})
    for n in n_values:
        vals = [distance_distinguishable(n)]
        for s in sources:
            vals.extend(_distance_or_nan(n, s))
        t.add_row(n, *vals)
    return t


def source_dict(model: DecayModel) -> dict:
    return {"name": model.label, "kind": model.kind, "V0": model.V0, "rate": model.rate}


def calibrate_cost_prefactor(
    scenario: AdvantageScenario, target_onset: int = 52
) -> tuple[float, float, float]:
    """Cost prefactors ``c`` that put the last ``k = N - 1`` point at ``target_onset``.

    Returns ``(c_low, c_high, c_mid)``: any ``c`` in ``(c_low, c_high]`` makes
    ``N = target_onset`` affordable at ``k = N - 1`` while ``N + 1`` is not;
    ``c_mid`` is the geometric midpoint. ``cost_a`` is held fixed.
    """
    if target_onset < 2:
        raise ValueError(f"target onset must be >= 2, got {target_onset}")
    a = scenario.cost_a
    budget_flop = scenario.runtime_budget * scenario.flops
    n0 = target_onset

    def unit_cost(n, k):
        return scenario.n_events(n) * float(k) ** a * 2.0**k

    c_high = budget_flop / unit_cost(n0, n0 - 1)
    c_low = budget_flop / unit_cost(n0 + 1, n0)
    if not c_low < c_high:
        raise DomainError(f"no cost prefactor places the plateau onset at N={n0}")
    return c_low, c_high, math.sqrt(c_low * c_high)
