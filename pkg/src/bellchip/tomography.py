"""Density-matrix reconstruction from coincidence counts.

The maximum-likelihood estimate is searched over ``M = T^dagger T`` with
``T`` lower triangular (real diagonal, complex below it): 16 real numbers
that carry both the state and the overall count rate. The likelihood is
Poissonian in the observed counts.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.special import xlogy

from . import qstate
from .counting import CountRecord, TOMOGRAPHY_LABELS

_PAULI4 = (qstate.I2, qstate.SX, qstate.SY, qstate.SZ)
HERMITIAN_BASIS = np.array([np.kron(a, b) for a in _PAULI4 for b in _PAULI4]) / 4.0
_TRIL = np.tril_indices(4, -1)
METRICS = ("concurrence", "fidelity_to_psi_plus", "chsh_max")


class InvalidSettingsError(ValueError):
    """The measurement settings do not determine a two-qubit state."""


def _check_records(records: list[CountRecord]) -> None:
    labels = [r.setting.label for r in records]
    if len(records) != 16:
        missing = sorted(set(TOMOGRAPHY_LABELS) - set(labels))
        raise InvalidSettingsError(
            f"expected 16 records, got {len(records)}"
            + (f"; missing settings: {', '.join(missing)}" if missing else ""))
    if sum(r.coincidences for r in records) <= 0:
        raise InvalidSettingsError("total coincidence count is zero")


def transfer_matrix(records: list[CountRecord]) -> np.ndarray:
    """Maps the 16 Pauli-basis coefficients of a state to expected count rates."""
    kets = np.array([r.setting.ket for r in records])
    return np.einsum("ia,jab,ib->ij", kets.conj(), HERMITIAN_BASIS, kets).real


def linear_inversion(records: list[CountRecord]) -> np.ndarray:
    """Trace-one Hermitian matrix reproducing the measured rates exactly.

    May have negative eigenvalues for finite statistics.
    """
    _check_records(records)
    a = transfer_matrix(records)
    if np.linalg.cond(a) > 1e12:
        raise InvalidSettingsError("settings do not form a complete tomographic set")
    rates = np.array([r.coincidences / r.duration for r in records])
    x = np.linalg.solve(a, rates)
    m = np.einsum("j,jab->ab", x, HERMITIAN_BASIS)
    m = 0.5 * (m + m.conj().T)
    return m / np.trace(m).real


def psd_projection(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    w = np.clip(w, 0.0, None)
    rho = (v * w) @ v.conj().T
    return rho / np.trace(rho).real


def params_to_t(x: np.ndarray) -> np.ndarray:
    t = np.zeros((4, 4), dtype=complex)
    t[np.diag_indices(4)] = x[:4]
    t[_TRIL] = x[4:10] + 1j * x[10:16]
    return t


def t_to_params(t: np.ndarray) -> np.ndarray:
    return np.concatenate([np.diag(t).real, t[_TRIL].real, t[_TRIL].imag])


_T_BASIS = np.array([params_to_t(e) for e in np.eye(16)])  # T = sum_k x_k B_k


class _Likelihood:
    """Negative Poisson log-likelihood per detected count, up to a constant.

    Each expected count is a quadratic form ``mu_i = x^T Q_i x`` in the real
    Cholesky parameters, which gives the gradient and Hessian in closed form.
    """

    def __init__(self, records: list[CountRecord], scale: float):
        kets = np.array([r.setting.ket for r in records])
        t = np.array([r.duration for r in records], dtype=float) * scale
        v = np.einsum("kab,ib->ika", _T_BASIS, kets)  # v[i, k] = B_k psi_i
        self.q = t[:, None, None] * np.einsum("ika,ila->ikl", v.conj(), v).real
        self.n = np.array([r.coincidences for r in records], dtype=float)
        self.norm = self.n.sum()
        self.n_log_n = xlogy(self.n, self.n)

    def _weights(self, x):
        qx = self.q @ x
        mu = qx @ x
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(self.n > 0, 1.0 - self.n / mu, 1.0)
        return qx, mu, w

    def __call__(self, x):
        qx, mu, w = self._weights(x)
        # Poisson deviance: zero for a perfect fit, which keeps the optimizer
        # resolving improvements far below the size of the likelihood itself
        with np.errstate(divide="ignore"):
            f = np.sum(mu - self.n + self.n_log_n - xlogy(self.n, mu)) / self.norm
        return f, 2.0 * (w @ qx) / self.norm

    def hess(self, x):
        qx, mu, w = self._weights(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(self.n > 0, self.n / mu ** 2, 0.0)
        return (2.0 * np.einsum("i,ikl->kl", w, self.q)
                + 4.0 * np.einsum("i,ik,il->kl", c, qx, qx)) / self.norm


def log_likelihood(records: list[CountRecord], rho: np.ndarray) -> float:
    """Poisson log-likelihood of ``rho`` with the count rate at its best value.

    Constant terms ``-log(n!)`` are dropped.
    """
    n = np.array([r.coincidences for r in records], dtype=float)
    t = np.array([r.duration for r in records], dtype=float)
    p = np.array([qstate.fidelity_to_pure(rho, r.setting.ket) for r in records])
    scale = n.sum() / np.sum(t * p)
    mu = scale * t * p
    with np.errstate(divide="ignore"):
        return float(np.sum(xlogy(n, mu) - mu))


@dataclass
class MLEResult:
    rho: np.ndarray
    converged: bool
    log_likelihood: float
    n_iter: int
    grad_norm: float


def mle_reconstruct(records: list[CountRecord], tolerance: float = 1e-8,
                    max_iters: int = 2000) -> MLEResult:
    """Maximum-likelihood physical state for the given counts.

    Starts from the PSD projection of the linear-inversion estimate and runs a
    trust-region Newton search on the Cholesky parameters with the exact
    Hessian. Rank-deficient optima make the likelihood quartic in some
    parameters; Newton steps still shrink those by a fixed factor where a
    quasi-Newton search stalls. ``converged`` is set when the gradient norm
    drops below ``tolerance``.
    """
    _check_records(records)
    rho0 = psd_projection(linear_inversion(records))
    n = np.array([r.coincidences for r in records], dtype=float)
    t = np.array([r.duration for r in records], dtype=float)
    p0 = np.array([qstate.fidelity_to_pure(rho0, r.setting.ket) for r in records])
    scale = n.sum() / np.sum(t * p0)

    # tiny admixture of I/4 keeps the Cholesky factor defined for rank-deficient starts
    start = (1 - 1e-10) * rho0 + 1e-10 * qstate.maximally_mixed()
    x0 = t_to_params(np.linalg.cholesky(start))

    fun = _Likelihood(records, scale)
    # trial steps that zero a rate with counts give f = inf and are rejected
    with np.errstate(invalid="ignore", over="ignore"):
        res = minimize(fun, x0, jac=True, hess=fun.hess, method="trust-exact",
                       options={"gtol": tolerance, "maxiter": max_iters})
    x = res.x
    _, grad = fun(x)
    grad_norm = float(np.linalg.norm(grad))
    tm = params_to_t(x)
    m = tm.conj().T @ tm
    rho = m / np.trace(m).real
    rho = 0.5 * (rho + rho.conj().T)
    converged = grad_norm < tolerance
    return MLEResult(rho, bool(converged), log_likelihood(records, rho), int(res.nit), grad_norm)


def subtract_accidentals(records: list[CountRecord]) -> list[CountRecord]:
    """Counts with the expected accidental background removed, floored at zero."""
    return [replace(r, coincidences=max(r.coincidences - r.accidental_estimate, 0.0),
                    accidental_estimate=0.0) for r in records]


def state_metrics(rho: np.ndarray) -> dict[str, float]:
    return {
        "concurrence": qstate.concurrence(rho),
        "fidelity_to_psi_plus": qstate.fidelity_to_pure(rho, qstate.bell_psi_plus()),
        "chsh_max": qstate.chsh_max(rho),
    }


@dataclass
class Uncertainty:
    sigma: dict[str, float]
    n_samples: int
    n_dropped: int

    @property
    def flagged(self) -> bool:
        return self.n_dropped > 0.1 * (self.n_samples + self.n_dropped)


def mc_uncertainty(records: list[CountRecord], n_samples: int, seed: int, net: bool = False,
                   tolerance: float = 1e-8, max_iters: int = 2000) -> Uncertainty:
    """Spread of the metrics over Poisson resamples of the observed counts.

    Each resample draws every record's coincidences from a Poisson law with
    the observed count as mean. With ``net`` the accidental background is
    subtracted from each resample before reconstruction. Non-converged
    reconstructions are dropped.
    """
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    observed = np.array([r.coincidences for r in records], dtype=float)
    values = {k: [] for k in METRICS}
    dropped = 0
    for k in range(n_samples):
        rng = np.random.default_rng([int(seed), k])
        draw = rng.poisson(observed)
        sample = [replace(r, coincidences=float(c)) for r, c in zip(records, draw)]
        if net:
            sample = subtract_accidentals(sample)
        try:
            res = mle_reconstruct(sample, tolerance, max_iters)
        except (InvalidSettingsError, np.linalg.LinAlgError):
            dropped += 1
            continue
        if not res.converged:
            dropped += 1
            continue
        for name, v in state_metrics(res.rho).items():
            values[name].append(v)
    kept = n_samples - dropped
    sigma = {name: float(np.std(v, ddof=1)) if len(v) > 1 else float("nan")
             for name, v in values.items()}
    return Uncertainty(sigma, kept, dropped)


@dataclass
class TomographyResult:
    rho_raw: np.ndarray
    rho_net: np.ndarray
    metrics: dict[str, dict[str, tuple[float, float]]]
    n_mc_samples: int
    converged: dict[str, bool]
    log_likelihood: dict[str, float]
    flags: list[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "rho_raw": qstate.to_json_dict(self.rho_raw),
            "rho_net": qstate.to_json_dict(self.rho_net),
            "metrics": {
                kind: {name: {"value": v, "sigma": s} for name, (v, s) in m.items()}
                for kind, m in self.metrics.items()
            },
            "n_mc_samples": self.n_mc_samples,
            "converged": self.converged,
            "log_likelihood": self.log_likelihood,
            "flags": self.flags,
        }


def reconstruct(records: list[CountRecord], n_mc_samples: int = 200, seed: int = 0,
                tolerance: float = 1e-8, max_iters: int = 2000) -> TomographyResult:
    """Raw and net reconstructions with Monte-Carlo error bars.

    ``n_mc_samples = 0`` skips the error bars (sigmas reported as NaN).
    """
    raw = mle_reconstruct(records, tolerance, max_iters)
    net = mle_reconstruct(subtract_accidentals(records), tolerance, max_iters)
    metrics, flags = {}, []
    for kind, res, is_net in (("raw", raw, False), ("net", net, True)):
        values = state_metrics(res.rho)
        if n_mc_samples:
            unc = mc_uncertainty(records, n_mc_samples, seed, net=is_net,
                                 tolerance=tolerance, max_iters=max_iters)
            sig = unc.sigma
            if unc.flagged:
                flags.append(f"{kind}: {unc.n_dropped} of {n_mc_samples} resamples did not converge")
        else:
            sig = {k: float("nan") for k in METRICS}
        metrics[kind] = {k: (values[k], sig[k]) for k in METRICS}
        if not res.converged:
            flags.append(f"{kind}: maximum-likelihood search did not converge")
    return TomographyResult(raw.rho, net.rho, metrics, n_mc_samples,
                            {"raw": raw.converged, "net": net.converged},
                            {"raw": raw.log_likelihood, "net": net.log_likelihood}, flags)
