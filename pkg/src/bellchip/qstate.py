"""Two-qubit polarization states: model construction and entanglement metrics.

Every vector and matrix in this package uses the ordered product basis

    index  0    1    2    3
    state  HH   HV   VH   VV

with the signal photon first and the idler photon second. ``H = (1, 0)`` and
``V = (0, 1)`` in each single-photon space.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

BASIS = ("HH", "HV", "VH", "VV")

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SX, SY, SZ)
YY = np.kron(SY, SY)

# numerical slack used by the validators
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-9


class NonPhysicalStateError(ValueError):
    """Raised when parameters or a matrix do not describe a valid state."""


@dataclass(frozen=True)
class ModelParams:
    """Pair-generation probabilities of the two interactions and their coherence."""

    alpha1: float
    alpha2: float
    beta: complex

    def __post_init__(self):
        if not (0.0 <= self.alpha1 <= 1.0 and 0.0 <= self.alpha2 <= 1.0):
            raise NonPhysicalStateError("alpha1 and alpha2 must lie in [0, 1]")
        if abs(self.alpha1 + self.alpha2 - 1.0) > 1e-12:
            raise NonPhysicalStateError(
                f"alpha1 + alpha2 = {self.alpha1 + self.alpha2!r}, expected 1")
        bound = np.sqrt(self.alpha1 * self.alpha2)
        if abs(self.beta) > bound + 1e-12:
            raise NonPhysicalStateError(
                f"|beta| = {abs(self.beta):.6g} exceeds sqrt(alpha1*alpha2) = {bound:.6g}")


class AnalyzerAngles(NamedTuple):
    """Linear-polarizer angles (radians): a, a' on the signal arm, b, b' on the idler arm."""

    a: float
    a_prime: float
    b: float
    b_prime: float


def ket(label: str) -> np.ndarray:
    """Product ket for a two-letter H/V label, e.g. ``ket("HV")``."""
    return np.eye(4, dtype=complex)[BASIS.index(label)]


def bell_psi_plus() -> np.ndarray:
    return np.array([0, 1, 1, 0], dtype=complex) / np.sqrt(2)


def pure_density(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def maximally_mixed() -> np.ndarray:
    return np.eye(4, dtype=complex) / 4


def check_density_matrix(rho: np.ndarray) -> np.ndarray:
    """Return ``rho`` as a complex 4x4 array, raising if it is not a physical state."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise NonPhysicalStateError(f"expected a 4x4 matrix, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
        raise NonPhysicalStateError("matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > TRACE_TOL:
        raise NonPhysicalStateError(f"trace is {np.trace(rho).real!r}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -PSD_TOL:
        raise NonPhysicalStateError("matrix has a negative eigenvalue")
    return rho


def model_density_matrix(p: ModelParams) -> np.ndarray:
    """Polarization state of the source with no noise.

    Populations ``alpha1`` on HV and ``alpha2`` on VH, coherence ``beta``
    between them; every other element is zero.
    """
    rho = np.zeros((4, 4), dtype=complex)
    rho[1, 1] = p.alpha1
    rho[2, 2] = p.alpha2
    rho[1, 2] = p.beta
    rho[2, 1] = np.conj(p.beta)
    return rho


def mix_with_white_noise(rho: np.ndarray, p: float) -> np.ndarray:
    """``p * rho + (1 - p) * I/4``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"mixing probability must lie in [0, 1], got {p}")
    return p * np.asarray(rho, dtype=complex) + (1.0 - p) * maximally_mixed()


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def concurrence(rho: np.ndarray) -> float:
    """Wootters concurrence.

    The decreasing numbers lambda_i are taken as the singular values of
    ``sqrt(rho) @ sqrt(rho_tilde)``; they coincide with the square roots of
    the eigenvalues of ``rho @ rho_tilde`` but avoid squaring and re-rooting.
    """
    rho = np.asarray(rho, dtype=complex)
    rho_tilde = YY @ rho.conj() @ YY
    lam = np.linalg.svd(_psd_sqrt(rho) @ _psd_sqrt(rho_tilde), compute_uv=False)
    lam = np.sort(lam)[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def concurrence_eig(rho: np.ndarray) -> float:
    """Concurrence from the eigenvalues of ``rho @ rho_tilde`` (textbook route)."""
    rho = np.asarray(rho, dtype=complex)
    r = rho @ YY @ rho.conj() @ YY
    ev = np.linalg.eigvals(r).real
    ev = np.where(ev < 0, 0.0, ev)
    lam = np.sort(np.sqrt(ev))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def fidelity_to_pure(rho: np.ndarray, psi: np.ndarray) -> float:
    psi = np.asarray(psi, dtype=complex)
    return float(np.vdot(psi, np.asarray(rho) @ psi).real)


def correlation_matrix(rho: np.ndarray) -> np.ndarray:
    """3x3 real matrix ``T[i, j] = tr(rho sigma_i x sigma_j)``."""
    rho = np.asarray(rho, dtype=complex)
    t = np.empty((3, 3))
    for i, si in enumerate(PAULIS):
        for j, sj in enumerate(PAULIS):
            t[i, j] = np.trace(rho @ np.kron(si, sj)).real
    return t


def polarizer_observable(angle: float) -> np.ndarray:
    """+1/-1 observable of a linear polarizer at ``angle`` from H."""
    return np.cos(2 * angle) * SZ + np.sin(2 * angle) * SX


def correlation(rho: np.ndarray, a: float, b: float) -> float:
    op = np.kron(polarizer_observable(a), polarizer_observable(b))
    return float(np.trace(np.asarray(rho) @ op).real)


def chsh_value(rho: np.ndarray, angles: AnalyzerAngles) -> float:
    a, a2, b, b2 = angles
    s = (correlation(rho, a, b) - correlation(rho, a, b2)
         + correlation(rho, a2, b) + correlation(rho, a2, b2))
    return abs(s)


def chsh_max(rho: np.ndarray) -> float:
    """Largest CHSH value reachable with arbitrary projective measurements."""
    t = correlation_matrix(rho)
    m = np.sort(np.linalg.eigvalsh(t.T @ t))[::-1]
    return float(2.0 * np.sqrt(max(m[0] + m[1], 0.0)))


def optimal_linear_angles(rho: np.ndarray) -> AnalyzerAngles:
    """Linear-polarizer settings maximizing the CHSH value.

    Linear polarizers only reach the x-z plane of the Bloch sphere, so the
    optimum is taken over the x-z block of the correlation matrix. For states
    whose correlations live in that block (all states of the source model)
    the result reaches :func:`chsh_max`.
    """
    t = correlation_matrix(rho)
    k = t[np.ix_([0, 2], [0, 2])]
    u, s, vt = np.linalg.svd(k)
    phi = np.arctan2(s[1], s[0])
    v1, v2 = vt[0], vt[1]
    b = np.cos(phi) * v1 + np.sin(phi) * v2
    # S = a.K(b - b') + a'.K(b + b'), so b - b' must lie along v1 and b + b' along v2
    b2 = -np.cos(phi) * v1 + np.sin(phi) * v2
    a, a2 = u[:, 0], u[:, 1]

    def to_angle(vec):
        # Bloch direction (x, z) of a linear polarizer at angle t is (sin 2t, cos 2t)
        return 0.5 * float(np.arctan2(vec[0], vec[1]))

    return AnalyzerAngles(to_angle(a), to_angle(a2), to_angle(b), to_angle(b2))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    return float(0.5 * np.abs(np.linalg.eigvalsh(np.asarray(rho) - np.asarray(sigma))).sum())


def to_json_dict(rho: np.ndarray) -> dict:
    rho = np.asarray(rho, dtype=complex)
    return {"basis": list(BASIS), "re": rho.real.tolist(), "im": rho.imag.tolist()}


def from_json_dict(d: dict) -> np.ndarray:
    if list(d.get("basis", BASIS)) != list(BASIS):
        raise ValueError(f"unsupported basis order {d.get('basis')!r}, expected {list(BASIS)}")
    return np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)
