"""Physical model of the counterpropagating pair source.

Units at the API surface: wavelengths in nm, angles in degrees, pump
geometry lengths in mm, rates in Hz. Internally angular frequencies are in
rad/ps, so that ``kappa`` (ps/mm) maps a frequency detuning to a
longitudinal wavevector mismatch in rad/mm.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .qstate import ModelParams, model_density_matrix

C_NM_PER_PS = 299792.458
BRACKET_SEGMENTS = 200
TUNING_CSV_HEADER = ("theta_deg", "lambda_s1_nm", "lambda_i1_nm", "lambda_s2_nm", "lambda_i2_nm")


class DispersionError(ValueError):
    """Invalid dispersion model, or an evaluation outside its validity window."""


class SolverError(RuntimeError):
    """No phase-matching root could be bracketed."""


@dataclass(frozen=True)
class DispersionModel:
    """Effective indices of the H and V guided modes.

    Each index is a polynomial in ``(wavelength - reference_nm)``, coefficients
    in increasing order. Evaluation outside ``window_nm`` raises.
    """

    reference_nm: float
    n_h_coeffs: tuple[float, ...]
    n_v_coeffs: tuple[float, ...]
    window_nm: tuple[float, float]

    def __post_init__(self):
        lo, hi = self.window_nm
        if not lo < hi:
            raise DispersionError(f"empty validity window {self.window_nm}")
        if not self.n_h_coeffs or not self.n_v_coeffs:
            raise DispersionError("index polynomials need at least one coefficient")
        grid = np.linspace(lo, hi, 201)
        for name in ("n_h", "n_v"):
            n = getattr(self, name)(grid)
            if np.any(n <= 1.0) or np.any(n >= 5.0):
                raise DispersionError(f"{name} leaves (1, 5) inside the validity window")

    def _check(self, lam):
        lo, hi = self.window_nm
        lam = np.asarray(lam, dtype=float)
        if np.any(lam < lo) or np.any(lam > hi):
            raise DispersionError(f"wavelength outside validity window [{lo}, {hi}] nm")
        return lam

    def _poly(self, coeffs, lam):
        x = self._check(lam) - self.reference_nm
        return np.polynomial.polynomial.polyval(x, coeffs)

    def n_h(self, lam):
        return self._poly(self.n_h_coeffs, lam)

    def n_v(self, lam):
        return self._poly(self.n_v_coeffs, lam)

    def n(self, pol: str, lam):
        return self.n_h(lam) if pol == "H" else self.n_v(lam)


def default_dispersion() -> DispersionModel:
    # birefringence 0.0122 at 1518 nm; base index and slope are placeholders
    return DispersionModel(
        reference_nm=1518.0,
        n_h_coeffs=(3.0622, -1.0e-4),
        n_v_coeffs=(3.0500, -1.0e-4),
        window_nm=(1400.0, 1650.0),
    )


@dataclass(frozen=True)
class PumpGeometry:
    lambda_p: float = 759.0
    theta: float = 0.35
    w_p: float = 2.4
    delta_z: float = 0.0
    L: float = 1.8
    filter_fwhm: float = 1.2

    def __post_init__(self):
        # the two-beam configuration is mirror symmetric, only |delta_z| matters
        object.__setattr__(self, "delta_z", abs(float(self.delta_z)))
        for name in ("lambda_p", "w_p", "L", "filter_fwhm"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not abs(self.theta) < 90.0:
            raise ValueError(f"|theta| must be below 90 degrees, got {self.theta}")

    @property
    def w_z(self) -> float:
        """Beam radius projected on the waveguide axis."""
        return self.w_p / math.cos(math.radians(self.theta))


class TuningPoint(NamedTuple):
    theta: float
    lambda_s1: float
    lambda_i1: float
    lambda_s2: float
    lambda_i2: float


@dataclass(frozen=True)
class RateBudget:
    pairs_per_pulse: float = 0.007
    rep_rate: float = 1.0e5
    eta_det: float = 0.25
    eta_coll: float = 0.13
    dark_prob_per_gate: float = 1.8e-4
    # fitted so that the accidental rate is ~0.04 Hz with the dark count above
    stray_singles_prob_per_gate: float = 4.5e-4

    def __post_init__(self):
        for name in ("eta_det", "eta_coll", "dark_prob_per_gate", "stray_singles_prob_per_gate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be a probability, got {v}")
        if self.pairs_per_pulse < 0 or self.rep_rate < 0:
            raise ValueError("pairs_per_pulse and rep_rate must be non-negative")

    @property
    def true_rate(self) -> float:
        return expected_rates(self)[0]

    @property
    def accidental_rate(self) -> float:
        return expected_rates(self)[1]


# --- phase matching -------------------------------------------------------

def idler_wavelength(lambda_p: float, lambda_s):
    """Energy conservation: 1/lambda_s + 1/lambda_i = 1/lambda_p."""
    return 1.0 / (1.0 / lambda_p - 1.0 / np.asarray(lambda_s, dtype=float))


def phase_mismatch(disp: DispersionModel, lambda_p: float, theta: float,
                   lambda_s, interaction: int):
    """Dimensionless longitudinal momentum mismatch.

    Interaction 1 has an H signal and V idler, interaction 2 the reverse.
    Zero when the pump's projected wavevector equals the signal/idler
    wavevector difference.
    """
    lambda_s = np.asarray(lambda_s, dtype=float)
    lambda_i = idler_wavelength(lambda_p, lambda_s)
    pol_s, pol_i = ("H", "V") if interaction == 1 else ("V", "H")
    k_diff = disp.n(pol_s, lambda_s) / lambda_s - disp.n(pol_i, lambda_i) / lambda_i
    g = lambda_p * k_diff - math.sin(math.radians(theta))
    return float(g) if g.ndim == 0 else g


def _signal_window(disp: DispersionModel, lambda_p: float) -> tuple[float, float]:
    lo, hi = disp.window_nm
    if lo <= lambda_p:
        lo = max(lo, lambda_p * (1 + 1e-9))
    # the idler must also fall inside the window; the map lambda_s -> lambda_i is its own inverse
    return max(lo, float(idler_wavelength(lambda_p, hi))), min(hi, float(idler_wavelength(lambda_p, lo)))


def solve_interaction(disp: DispersionModel, lambda_p: float, theta: float,
                      interaction: int) -> tuple[float, float]:
    """Signal and idler wavelengths (nm) of one interaction at pump angle ``theta``."""
    lo, hi = _signal_window(disp, lambda_p)
    if not lo < hi:
        raise SolverError("no signal wavelength keeps both photons inside the dispersion window")
    edges = np.linspace(lo, hi, BRACKET_SEGMENTS + 1)

    def g(lam):
        return phase_mismatch(disp, lambda_p, theta, lam, interaction)

    values = phase_mismatch(disp, lambda_p, theta, edges, interaction)
    for k in range(BRACKET_SEGMENTS):
        a, b = values[k], values[k + 1]
        if a == 0.0:
            lam_s = edges[k]
            break
        if a * b < 0:
            lam_s = brentq(g, edges[k], edges[k + 1], xtol=1e-10 * edges[k], rtol=1e-15)
            break
    else:
        if values[-1] == 0.0:
            lam_s = edges[-1]
        else:
            raise SolverError(f"no phase-matching root for interaction {interaction} at theta={theta} deg")
    return float(lam_s), float(idler_wavelength(lambda_p, lam_s))


def degeneracy_angle(disp: DispersionModel, lambda_p: float) -> float:
    """Pump angle (degrees) at which interaction 1 emits degenerate photons."""
    dn = float(disp.n_h(2 * lambda_p) - disp.n_v(2 * lambda_p))
    s = dn / 2.0
    if not -1.0 <= s <= 1.0:
        raise DispersionError(f"birefringence {dn} admits no degenerate pump angle")
    return math.degrees(math.asin(s))


def tuning_curves(disp: DispersionModel, lambda_p: float, theta_range: tuple[float, float],
                  n_points: int) -> list[TuningPoint]:
    """Signal/idler wavelengths of both interactions over a range of pump angles.

    A failed solve leaves NaN for that interaction at that angle.
    """
    if n_points < 1:
        raise ValueError("n_points must be at least 1")
    t0, t1 = theta_range
    thetas = np.array([t0]) if n_points == 1 else np.linspace(t0, t1, n_points)
    points = []
    for theta in np.sort(thetas):
        row = [float(theta)]
        for interaction in (1, 2):
            try:
                row.extend(solve_interaction(disp, lambda_p, theta, interaction))
            except SolverError:
                row.extend([math.nan, math.nan])
        points.append(TuningPoint(*row))
    return points


def spectral_detuning(disp: DispersionModel, lambda_p: float, theta: float) -> float:
    """Wavelength mismatch (nm) between the H-signal of interaction 1 pumped at
    ``+theta`` and the V-signal of interaction 2 pumped at ``-theta``."""
    lam_s1, _ = solve_interaction(disp, lambda_p, theta, 1)
    lam_s2, _ = solve_interaction(disp, lambda_p, -theta, 2)
    return abs(lam_s1 - lam_s2)


def tuning_curves_csv(points: list[TuningPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TUNING_CSV_HEADER)
    for p in points:
        w.writerow([repr(float(v)) if not math.isnan(v) else "NaN" for v in p])
    return buf.getvalue()


# --- pump overlap -----------------------------------------------------------

def _profile_support(geom: PumpGeometry, beam: int) -> tuple[float, float]:
    """Interval of ``[-L/2, L/2]`` on which a beam is nonzero (may be empty)."""
    edge = -geom.delta_z / 2
    lo, hi = -geom.L / 2, min(edge, geom.L / 2)
    return (lo, hi) if beam == 1 else (-hi, -lo)


def _profile_norm(geom: PumpGeometry) -> float:
    # integral of exp(-2 u^2 / w^2) from the truncation to the peak; same for both mirror beams
    lo, hi = _profile_support(geom, 1)
    if hi <= lo:
        return 0.0
    w = geom.w_z
    depth = hi - lo
    return math.sqrt(w * math.sqrt(math.pi / 2) / 2 * math.erf(math.sqrt(2) * depth / w))


def pump_profile(geom: PumpGeometry, beam: int, n_samples: int = 1024):
    """Half-Gaussian amplitude of one biprism beam along the waveguide.

    Beam 1 peaks at ``z = -delta_z/2`` and keeps the half on its far side
    (``z <= -delta_z/2``); beam 2 is its mirror image. Both are cut to the
    illuminated length ``[-L/2, L/2]``.

    Returns ``(z, amplitude, l2_norm)``; the norm is exact, not a sampled sum.
    """
    if n_samples < 64:
        raise ValueError("n_samples must be at least 64")
    if beam not in (1, 2):
        raise ValueError("beam must be 1 or 2")
    z = np.linspace(-geom.L / 2, geom.L / 2, n_samples)
    sign = -1.0 if beam == 1 else 1.0
    peak = sign * geom.delta_z / 2
    amp = np.exp(-((z - peak) / geom.w_z) ** 2)
    amp = np.where(sign * (z - peak) >= 0, amp, 0.0)
    return z, amp, _profile_norm(geom)


def physical_kappa(disp: DispersionModel, lambda_deg: float) -> float:
    """``(n_H + n_V)/c`` in ps/mm at the degenerate wavelength."""
    n_sum = float(disp.n_h(lambda_deg) + disp.n_v(lambda_deg))
    return n_sum / C_NM_PER_PS * 1e6


@dataclass(frozen=True)
class OverlapGrid:
    n_z: int = 1024
    n_omega: int = 1024
    span_fwhm: float = 4.0

    def __post_init__(self):
        if self.n_omega < 1024:
            raise ValueError("the frequency grid needs at least 1024 points")


@lru_cache(maxsize=8)
def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def _angular_detuning(lambda_nm: float, lambda_p: float) -> float:
    return 2 * math.pi * C_NM_PER_PS * (1.0 / lambda_nm - 0.5 / lambda_p)


def overlap_beta(geom: PumpGeometry, disp: DispersionModel, kappa: float | None = None,
                 grid: OverlapGrid = OverlapGrid()) -> complex:
    """Coherence ``beta`` between the two interactions' filtered pair amplitudes.

    Each interaction's pair amplitude at signal detuning ``Omega`` is the
    Fourier transform of its pump profile evaluated at the wavevector
    mismatch ``kappa * (Omega - Omega_k)``, where ``Omega_k`` is that
    interaction's phase-matched detuning at the beam's pump angle. The
    filter weights both amplitudes. ``kappa`` defaults to ``(n_H + n_V)/c``.
    """
    lam_deg = 2 * geom.lambda_p
    if kappa is None:
        kappa = physical_kappa(disp, lam_deg)

    lam_s1, _ = solve_interaction(disp, geom.lambda_p, geom.theta, 1)
    lam_s2, _ = solve_interaction(disp, geom.lambda_p, -geom.theta, 2)
    centres = (_angular_detuning(lam_s1, geom.lambda_p), _angular_detuning(lam_s2, geom.lambda_p))

    fwhm = 2 * math.pi * C_NM_PER_PS * geom.filter_fwhm / lam_deg ** 2
    omega = np.linspace(-grid.span_fwhm * fwhm, grid.span_fwhm * fwhm, grid.n_omega)
    filt = np.exp(-4 * math.log(2) * (omega / fwhm) ** 2)  # intensity transmission T^2

    # Gauss-Legendre nodes on each beam's support: the integrand is smooth
    # there, whereas a uniform grid would straddle the sharp edge
    x, wts = _gauss_legendre(grid.n_z)
    amps = []
    for beam, centre in zip((1, 2), centres):
        lo, hi = _profile_support(geom, beam)
        if hi <= lo:
            return 0j
        z = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        peak = -geom.delta_z / 2 if beam == 1 else geom.delta_z / 2
        f = np.exp(-((z - peak) / geom.w_z) ** 2) * wts * 0.5 * (hi - lo)
        q = kappa * (omega - centre)
        amps.append(np.exp(1j * np.outer(q, z)) @ f)

    def integral(a, b):
        return np.trapezoid(filt * np.conj(a) * b, omega)

    i11 = integral(amps[0], amps[0]).real
    i22 = integral(amps[1], amps[1]).real
    if i11 <= 0.0 or i22 <= 0.0:
        return 0j
    beta = 0.5 * integral(amps[0], amps[1]) / math.sqrt(i11 * i22)
    if abs(beta) > 0.5:
        beta = 0.5 * beta / abs(beta)
    return complex(beta)


def source_state(geom: PumpGeometry, disp: DispersionModel, kappa: float | None = None,
                 grid: OverlapGrid = OverlapGrid()) -> np.ndarray:
    beta = overlap_beta(geom, disp, kappa, grid)
    return model_density_matrix(ModelParams(0.5, 0.5, beta))


# --- rates -------------------------------------------------------------------

def expected_rates(budget: RateBudget) -> tuple[float, float]:
    """True and accidental coincidence rates (Hz)."""
    eta = budget.eta_det * budget.eta_coll
    true_rate = budget.pairs_per_pulse * budget.rep_rate * eta ** 2
    g = budget.dark_prob_per_gate + budget.stray_singles_prob_per_gate
    accidental_rate = budget.rep_rate * g * g
    return true_rate, accidental_rate


def noise_fraction(true_rate: float, accidental_rate: float) -> float:
    """Weight of the pair state in the observed (raw) mixture."""
    if true_rate < 0 or accidental_rate < 0:
        raise ValueError("rates must be non-negative")
    if true_rate == 0 and accidental_rate == 0:
        raise ValueError("noise fraction is undefined when both rates are zero")
    return true_rate / (true_rate + accidental_rate)
