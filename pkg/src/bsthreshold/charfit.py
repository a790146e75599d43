"""Single-photon source characterization: HOM visibility, purity, beta-factor,
lifetime, propagation loss, grating efficiency, blinking and the overall
efficiency budget."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.special import erfc, erfcx


class FitError(RuntimeError):
    """A fit that did not converge or whose data hold no usable signal."""


def _unit_interval(name: str, v: float, closed_right: bool = True) -> None:
    ok = 0.0 <= v <= 1.0 if closed_right else 0.0 <= v < 1.0
    if not ok:
        raise ValueError(f"{name} must lie in [0, 1{']' if closed_right else ')'}, got {v}")


# -- purity ------------------------------------------------------------------

def g2_from_impurity(xi: float) -> float:
    _unit_interval("impurity xi", xi)
    return 2.0 * xi - xi * xi


def impurity_from_g2(g2: float) -> float:
    _unit_interval("g2(0)", g2)
    # 1 - sqrt(1 - g2), written to avoid cancellation for small g2
    return g2 / (1.0 + math.sqrt(1.0 - g2))


# -- HOM visibility ----------------------------------------------------------

@dataclass
class HomScan:
    """Normalized zero-delay peak amplitude versus half-wave-plate angle."""

    theta_deg: np.ndarray
    a0: np.ndarray
    sigma: np.ndarray | None = None
    R: float = 0.5
    T: float = 0.5
    epsilon: float = 0.0
    g2: float = 0.0

    def __post_init__(self):
        self.theta_deg = np.asarray(self.theta_deg, dtype=float)
        self.a0 = np.asarray(self.a0, dtype=float)
        if self.sigma is not None:
            self.sigma = np.asarray(self.sigma, dtype=float)
            if np.any(self.sigma <= 0):
                raise ValueError("HOM uncertainties must be positive")
        if self.theta_deg.shape != self.a0.shape:
            raise ValueError("theta and A0 columns differ in length")
        if np.any(self.a0 < 0):
            raise ValueError("A0 amplitudes must be non-negative")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if not 0.0 <= self.g2 < 1.0:
            raise ValueError(f"g2 must lie in [0, 1), got {self.g2}")


@dataclass
class HomFit:
    A_m: float
    A_c: float
    phi_deg: float
    V_raw: float
    residual_norm: float
    warnings: list[str] = field(default_factory=list)


def hom_model(theta_deg, A_m, A_c, phi_deg):
    return A_m - A_c * np.sin(np.radians(2.0 * np.asarray(theta_deg) + phi_deg)) ** 2


def _wrap_phase(phi_deg: float) -> float:
    # sin^2 has period 180 deg in phi
    return (phi_deg + 90.0) % 180.0 - 90.0


def fit_hom_scan(scan: HomScan) -> HomFit:
    """Fit ``A_m - A_c sin^2(2 theta + phi)`` and return ``V_raw = A_c / A_m``.

    ``A_c = v A_m`` with ``v`` boxed to [0, 1] keeps ``0 <= A_c <= A_m``.
    Four phase starts; the lowest-cost converged solution wins.
    """
    th, y = scan.theta_deg, scan.a0
    if th.size < 4:
        raise ValueError(f"HOM fit needs at least 4 points, got {th.size}")
    if np.ptp(th) < 45.0:
        raise ValueError(f"HOM scan must span at least 45 deg, spans {np.ptp(th):g}")
    w = 1.0 / scan.sigma if scan.sigma is not None else np.ones_like(y)

    def resid(p):
        a_m, v, phi = p
        return (hom_model(th, a_m, v * a_m, phi) - y) * w

    a_m0 = max(float(y.max()), 1e-12)
    v0 = float(np.clip(1.0 - y.min() / a_m0, 0.05, 0.95))
    best = None
    for phi0 in (0.0, 45.0, 90.0, 135.0):
        res = least_squares(
            resid,
            [a_m0, v0, phi0],
            bounds=([0.0, 0.0, -np.inf], [np.inf, 1.0, np.inf]),
            x_scale=[a_m0, 1.0, 45.0],
            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000,
        )
        if res.status > 0 and (best is None or res.cost < best.cost):
            best = res
    if best is None:
        raise FitError("HOM fit failed to converge from every phase start")
    a_m, v, phi = best.x
    if a_m <= 0:
        raise FitError(f"HOM fit returned non-positive A_m (residual {np.sqrt(2 * best.cost):.3g})")
    return HomFit(float(a_m), float(v * a_m), _wrap_phase(float(phi)), float(v),
                  float(np.linalg.norm(best.fun)))


@dataclass
class CorrectedVisibility:
    V: float
    over_unity: bool
    warnings: list[str] = field(default_factory=list)


def corrected_visibility(v_raw: float, g2: float, R: float, T: float, epsilon: float) -> CorrectedVisibility:
    """Intrinsic visibility from the raw one, correcting splitter imbalance,
    interferometer contrast ``1 - epsilon`` and the two-photon component.

    Values above 1 are returned unclipped with ``over_unity`` set.
    """
    _unit_interval("V_raw", v_raw)
    if not (R > 0 and T > 0):
        raise ValueError(f"R and T must be positive, got R={R}, T={T}")
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"epsilon must lie in [0, 1), got {epsilon}")
    if not 0.0 <= g2 < 1.0:
        raise ValueError(f"g2 must lie in [0, 1), got {g2}")
    notes = []
    if abs(R + T - 1.0) > 0.01:
        msg = f"R + T = {R + T:.4f} deviates more than 1% from a lossless splitter"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    v = (1.0 + 2.0 * g2) * (R * R + T * T) * v_raw / (2.0 * R * T * (1.0 - epsilon) ** 2)
    over = v > 1.0
    if over:
        notes.append(f"corrected visibility {v:.4f} exceeds 1")
    return CorrectedVisibility(v, over, notes)


# -- resonant transmission and beta-factor ----------------------------------

def transmission_model(dnu, gamma: float, gamma_d: float, beta: float, chi: float):
    """Waveguide transmission through a dipole with dephasing and a Fano term."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if gamma_d < 0:
        raise ValueError(f"gamma_d must be non-negative, got {gamma_d}")
    d = np.asarray(dnu, dtype=float)
    g, gd = gamma, gamma_d
    d2 = 4.0 * d * d
    num = ((g + 2 * gd) * ((beta - 1) ** 2 * g + 2 * gd) + d2) * (1 + chi * chi)
    den = (g + 2 * gd) ** 2 + d2 + 4 * beta * g * chi * d + (((beta - 1) * g - 2 * gd) ** 2 + d2) * chi * chi
    return num / den


@dataclass
class TransmissionScan:
    detuning_ghz: np.ndarray
    transmission: np.ndarray

    def __post_init__(self):
        self.detuning_ghz = np.asarray(self.detuning_ghz, dtype=float)
        self.transmission = np.asarray(self.transmission, dtype=float)
        if self.detuning_ghz.shape != self.transmission.shape:
            raise ValueError("detuning and transmission columns differ in length")
        if np.any(np.diff(self.detuning_ghz) <= 0):
            raise ValueError("detunings must be strictly increasing")


@dataclass
class BetaFit:
    beta: float
    beta_halfwidth: float
    gamma_d: float
    chi: float
    resonance_offset: float
    residual_norm: float
    warnings: list[str] = field(default_factory=list)


def _noise_floor(y: np.ndarray) -> float:
    # robust point-to-point scatter, insensitive to a smooth dip
    d = np.diff(y)
    return 1.4826 * float(np.median(np.abs(d - np.median(d)))) / math.sqrt(2.0)


def fit_beta(scan: TransmissionScan, gamma_fixed: float) -> BetaFit:
    """Fit the transmission dip with the natural linewidth held fixed.

    Free parameters: beta in [0, 1], gamma_d >= 0, Fano parameter chi and the
    resonance offset. ``beta_halfwidth`` is the 95% half-width from the
    Jacobian at the optimum.
    """
    x, y = scan.detuning_ghz, scan.transmission
    if x.size < 8:
        raise ValueError(f"transmission fit needs at least 8 points, got {x.size}")
    if not gamma_fixed > 0:
        raise ValueError(f"gamma must be positive, got {gamma_fixed}")
    baseline = float(np.median(np.concatenate([y[: max(2, y.size // 8)], y[-max(2, y.size // 8):]])))
    depth = baseline - float(y.min())
    noise = _noise_floor(y)
    if depth <= max(5.0 * noise, 1e-3):
        raise FitError(f"no resonance detected (dip depth {depth:.3g}, noise floor {noise:.3g})")
    i_min = int(np.argmin(y))
    if i_min == 0 or i_min == x.size - 1:
        raise FitError("no resonance detected: dip minimum is not bracketed by the scan")

    def resid(p):
        beta, gd, chi, off = p
        return transmission_model(x - off, gamma_fixed, gd, beta, chi) - y

    beta0 = float(np.clip(1.0 - math.sqrt(max(y.min(), 0.0) / max(baseline, 1e-12)), 0.05, 0.99))
    best = None
    for chi0 in (0.0, 0.3, -0.3):
        for gd0 in (0.05 * gamma_fixed, 0.5 * gamma_fixed):
            res = least_squares(
                resid,
                [beta0, gd0, chi0, x[i_min]],
                bounds=([0.0, 0.0, -np.inf, x[0]], [1.0, np.inf, np.inf, x[-1]]),
                x_scale=[0.1, gamma_fixed, 0.1, gamma_fixed],
                xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=4000,
            )
            if res.status > 0 and (best is None or res.cost < best.cost):
                best = res
    if best is None:
        raise FitError("transmission fit failed to converge from every start")
    beta, gd, chi, off = (float(v) for v in best.x)
    dof = max(1, x.size - 4)
    s2 = 2.0 * best.cost / dof
    try:
        cov = np.linalg.inv(best.jac.T @ best.jac) * s2
        half = 1.96 * math.sqrt(max(cov[0, 0], 0.0))
    except np.linalg.LinAlgError:
        half = math.nan
    return BetaFit(beta, half, gd, chi, off, float(np.linalg.norm(best.fun)))


def beta_from_rates(gamma_total: float, gamma_nonguided: float) -> float:
    """beta = 1 - gamma_nonguided / gamma_total."""
    if not gamma_total > 0 or gamma_nonguided < 0:
        raise ValueError("decay rates must satisfy gamma_total > 0 and gamma_nonguided >= 0")
    if gamma_nonguided > gamma_total:
        raise ValueError(
            f"non-guided rate {gamma_nonguided} exceeds total rate {gamma_total}"
        )
    return 1.0 - gamma_nonguided / gamma_total


def linewidth_ghz(gamma_per_ns: float) -> float:
    """Natural linewidth (GHz, FWHM) of a transition with decay rate in 1/ns."""
    return gamma_per_ns / (2.0 * math.pi)


# -- lifetime ----------------------------------------------------------------

@dataclass
class DecayHistogram:
    time_ns: np.ndarray
    counts: np.ndarray
    irf_width: float = 0.0

    def __post_init__(self):
        self.time_ns = np.asarray(self.time_ns, dtype=float)
        self.counts = np.asarray(self.counts, dtype=float)
        if self.time_ns.shape != self.counts.shape:
            raise ValueError("time and counts columns differ in length")
        if np.any(np.diff(self.time_ns) <= 0):
            raise ValueError("histogram times must be increasing")
        if np.any(self.counts < 0):
            raise ValueError("histogram counts must be non-negative")
        if self.irf_width < 0:
            raise ValueError(f"IRF width must be non-negative, got {self.irf_width}")


@dataclass
class LifetimeFit:
    gamma: float
    amplitude: float
    offset: float
    t0: float
    gamma_stderr: float
    residual_norm: float
    warnings: list[str] = field(default_factory=list)


def exp_gauss(t, amplitude, gamma, t0, sigma):
    """``amplitude * exp(-gamma (t - t0))`` for t > t0, convolved with a
    normalized Gaussian of width ``sigma`` (closed form via erfc)."""
    t = np.asarray(t, dtype=float) - t0
    if sigma == 0.0:
        return np.where(t >= 0, amplitude * np.exp(-gamma * np.clip(t, 0, None)), 0.0)
    z = (gamma * sigma * sigma - t) / (sigma * math.sqrt(2.0))
    expo = 0.5 * gamma * gamma * sigma * sigma - gamma * t
    # exp(expo) * erfc(z) == exp(expo - z^2) * erfcx(z); use the stable branch
    out = np.where(
        z > 0,
        np.exp(expo - z * z) * erfcx(np.where(z > 0, z, 0.0)),
        np.exp(np.minimum(expo, 700.0)) * erfc(np.where(z > 0, 0.0, z)),
    )
    return 0.5 * amplitude * out


def fit_lifetime(h: DecayHistogram) -> LifetimeFit:
    """Exponential decay convolved with a Gaussian IRF plus constant background.

    The fit window starts at the histogram maximum. For a zero-width IRF the
    onset is pinned to that maximum (it is degenerate with the amplitude).
    """
    t, y = h.time_ns, h.counts
    i_peak = int(np.argmax(y))
    tt, yy = t[i_peak:], y[i_peak:]
    if tt.size < 20:
        raise ValueError(f"lifetime fit needs >= 20 bins past the peak, got {tt.size}")
    sigma = float(h.irf_width)
    peak = float(yy[0])
    bg0 = float(np.median(yy[-max(3, yy.size // 10):]))
    # initial rate from the 1/e crossing of the background-subtracted tail
    above = yy - bg0
    below = np.nonzero(above < above[0] / math.e)[0]
    span = tt[below[0]] - tt[0] if below.size else (tt[-1] - tt[0]) / 3
    g0 = 1.0 / max(span, 1e-6)
    free_t0 = sigma > 0.0

    def unpack(p):
        if free_t0:
            return p
        a, g, b = p
        return a, g, b, t[i_peak]

    def resid(p):
        a, g, b, t0 = unpack(p)
        return exp_gauss(tt, a, g, t0, sigma) + b - yy

    p0 = [peak, g0, bg0] + ([t[i_peak] - sigma] if free_t0 else [])
    lo = [0.0, 1e-9, -np.inf] + ([t[0] - 10 * sigma] if free_t0 else [])
    hi = [np.inf, np.inf, np.inf] + ([tt[-1]] if free_t0 else [])
    scale = [max(peak, 1.0), g0, max(peak, 1.0) * 1e-3] + ([sigma] if free_t0 else [])
    res = least_squares(resid, p0, bounds=(lo, hi), x_scale=scale,
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=4000)
    if res.status <= 0:
        raise FitError(f"lifetime fit did not converge ({res.message})")
    a, g, b, t0 = unpack(res.x)
    if not g > 0:
        raise FitError(f"non-positive decay rate {g}")
    dof = max(1, tt.size - len(p0))
    try:
        cov = np.linalg.inv(res.jac.T @ res.jac) * (2.0 * res.cost / dof)
        g_err = math.sqrt(max(cov[1, 1], 0.0))
    except np.linalg.LinAlgError:
        g_err = math.nan
    return LifetimeFit(float(g), float(a), float(b), float(t0), g_err, float(np.linalg.norm(res.fun)))


# -- chip-to-fiber -----------------------------------------------------------

@dataclass
class LossFit:
    loss_db_per_mm: float
    intercept_db: float
    residual_norm: float
    warnings: list[str] = field(default_factory=list)


def fit_propagation_loss(points: Sequence[tuple[float, float]]) -> LossFit:
    """Linear fit of ``10 log10(I)`` versus waveguide length."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("expected (length_mm, intensity) pairs")
    length, intensity = arr[:, 0], arr[:, 1]
    if np.unique(length).size < 3:
        raise ValueError("propagation-loss fit needs at least 3 distinct lengths")
    if np.any(intensity <= 0):
        raise ValueError("intensities must be positive")
    db = 10.0 * np.log10(intensity)
    slope, intercept = np.polyfit(length, db, 1)
    resid = db - (slope * length + intercept)
    return LossFit(float(abs(slope)), float(intercept), float(np.linalg.norm(resid)))


def propagation_efficiency(loss_db_per_mm: float, length_mm: float) -> float:
    if loss_db_per_mm < 0 or length_mm < 0:
        raise ValueError("loss and length must be non-negative")
    return 10.0 ** (-loss_db_per_mm * length_mm / 10.0)


def seg_efficiency(i_seg: float, i_ref: float, r_dbr: float) -> float:
    """Single-grating efficiency from a two-grating transmission measurement."""
    if i_seg < 0 or not i_ref > 0:
        raise ValueError("intensities must satisfy I_SEG >= 0 and I_Ref > 0")
    if not 0.0 < r_dbr <= 1.0:
        raise ValueError(f"reflectivity must lie in (0, 1], got {r_dbr}")
    return math.sqrt(i_seg * r_dbr / i_ref)


# -- source ------------------------------------------------------------------

BLINKING_MODEL = "two-state telegraph duty cycle 1/(1+b)"


def eta_rad_from_bunching(b: float) -> float:
    """Bright-state duty cycle for a g2 envelope ``1 + b exp(-tau / tau_b)``."""
    if b < 0:
        raise ValueError(f"bunching amplitude must be non-negative, got {b}")
    if math.isinf(b):
        return 0.0
    return 1.0 / (1.0 + b)


def source_efficiency(eta_y: float, beta: float, eta_zpl: float, eta_rad: float) -> float:
    for name, v in (("eta_y", eta_y), ("beta", beta), ("eta_zpl", eta_zpl), ("eta_rad", eta_rad)):
        _unit_interval(name, v)
    return eta_y * beta * eta_zpl * eta_rad


@dataclass(frozen=True)
class Stage:
    name: str
    efficiency: float
    uncertainty: float = 0.0

    def __post_init__(self):
        _unit_interval(f"efficiency of stage {self.name!r}", self.efficiency)
        if self.uncertainty < 0:
            raise ValueError(f"uncertainty of stage {self.name!r} must be non-negative")


@dataclass
class EfficiencyBudget:
    stages: list[Stage]
    rep_rate: float

    def __post_init__(self):
        if not self.rep_rate > 0:
            raise ValueError(f"repetition rate must be positive, got {self.rep_rate}")

    def cumulative(self) -> list[float]:
        return list(np.cumprod([s.efficiency for s in self.stages]))


def budget_rate(budget: EfficiencyBudget) -> tuple[float, float]:
    """Expected photon rate and its first-order uncertainty (both in Hz).

    Uses explicit partial derivatives, so a zero-efficiency stage is handled.
    """
    if not budget.stages:
        raise ValueError("efficiency budget has no stages")
    eff = np.array([s.efficiency for s in budget.stages])
    unc = np.array([s.uncertainty for s in budget.stages])
    rate = budget.rep_rate * float(np.prod(eff))
    partials = np.array([
        budget.rep_rate * float(np.prod(np.delete(eff, i))) for i in range(eff.size)
    ])
    return rate, float(math.sqrt(float(np.sum((partials * unc) ** 2))))
