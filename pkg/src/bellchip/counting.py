"""Simulated coincidence counting for 16-setting polarization tomography."""
from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .qstate import maximally_mixed

SQ2 = np.sqrt(2.0)
SINGLE_QUBIT = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([1, 1], dtype=complex) / SQ2,
    "A": np.array([1, -1], dtype=complex) / SQ2,
    "R": np.array([1, -1j], dtype=complex) / SQ2,
    "L": np.array([1, 1j], dtype=complex) / SQ2,
}
TOMOGRAPHY_LABELS = (
    "HH", "HV", "VV", "VH", "RH", "RV", "DV", "DH",
    "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL",
)
COUNTS_CSV_HEADER = ("setting", "coincidences", "duration_s", "accidental_estimate")
HISTOGRAM_CSV_HEADER = ("bin_start_ns", "bin_end_ns", "counts")


@dataclass(frozen=True)
class MeasurementSetting:
    label: str

    def __post_init__(self):
        if len(self.label) != 2 or any(c not in SINGLE_QUBIT for c in self.label):
            raise ValueError(f"invalid setting label {self.label!r}")

    @property
    def projector(self) -> tuple[np.ndarray, np.ndarray]:
        return SINGLE_QUBIT[self.label[0]], SINGLE_QUBIT[self.label[1]]

    @property
    def ket(self) -> np.ndarray:
        return np.kron(*self.projector)


@dataclass(frozen=True)
class CountRecord:
    setting: MeasurementSetting
    coincidences: float
    duration: float
    accidental_estimate: float = 0.0

    def __post_init__(self):
        if self.coincidences < 0:
            raise ValueError("coincidences must be non-negative")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.accidental_estimate < 0:
            raise ValueError("accidental_estimate must be non-negative")


@dataclass(frozen=True)
class Histogram:
    label: str
    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def projector_set_16() -> list[MeasurementSetting]:
    return [MeasurementSetting(label) for label in TOMOGRAPHY_LABELS]


def coincidence_probability(rho: np.ndarray, setting: MeasurementSetting) -> float:
    psi = setting.ket
    p = float(np.vdot(psi, np.asarray(rho) @ psi).real)
    return min(max(p, 0.0), 1.0)


def setting_rng(seed: int, label: str) -> np.random.Generator:
    """Generator for one setting, independent of the order settings are visited in."""
    digest = hashlib.sha256(f"{int(seed)}:{label}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def expected_counts(rho: np.ndarray, setting: MeasurementSetting, true_rate: float,
                    accidental_rate: float, duration: float) -> float:
    p_pair = coincidence_probability(rho, setting)
    p_acc = coincidence_probability(maximally_mixed(), setting)
    return duration * (true_rate * p_pair + accidental_rate * p_acc)


def simulate_counts(rho: np.ndarray, settings: list[MeasurementSetting], true_rate: float,
                    accidental_rate: float, duration_per_setting: float,
                    seed: int) -> list[CountRecord]:
    """Poisson coincidence counts for each setting.

    ``rho`` is the pair state emitted by the source; accidental coincidences
    are added on top as polarization-independent noise, so the observed
    statistics follow the noisy (raw) state.
    """
    if true_rate < 0 or accidental_rate < 0:
        raise ValueError("rates must be non-negative")
    if not duration_per_setting > 0:
        raise ValueError("duration_per_setting must be positive")
    records = []
    for s in settings:
        mu = expected_counts(rho, s, true_rate, accidental_rate, duration_per_setting)
        n = int(setting_rng(seed, s.label).poisson(mu))
        records.append(CountRecord(s, n, duration_per_setting, duration_per_setting * accidental_rate / 4))
    return records


def simulate_histogram(setting: MeasurementSetting, rho: np.ndarray, true_rate: float,
                       accidental_rate: float, duration: float, window_ns: float = 80.0,
                       bin_ns: float = 0.5, jitter_ns: float = 0.25, seed: int = 0) -> Histogram:
    """Start-stop delay histogram of one setting.

    True coincidences are centred on zero delay with Gaussian jitter; every
    bin collects the same accidental floor, ``accidental_rate / 4`` per bin.
    """
    n_bins = window_ns / bin_ns
    if abs(n_bins - round(n_bins)) > 1e-9:
        raise ValueError("bin_ns must divide window_ns")
    n_bins = int(round(n_bins))
    edges = (np.arange(n_bins + 1) - n_bins / 2) * bin_ns
    peak_mass = np.diff(ndtr(edges / jitter_ns))
    true_counts = duration * true_rate * coincidence_probability(rho, setting)
    floor = duration * accidental_rate * coincidence_probability(maximally_mixed(), setting)
    mu = true_counts * peak_mass + floor
    rng = setting_rng(seed, "hist:" + setting.label)
    return Histogram(setting.label, edges, rng.poisson(mu))


def records_to_csv(records: list[CountRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COUNTS_CSV_HEADER)
    for r in records:
        c = r.coincidences
        w.writerow([r.setting.label, int(c) if float(c).is_integer() else repr(float(c)),
                    repr(float(r.duration)), repr(float(r.accidental_estimate))])
    return buf.getvalue()


class CountsFormatError(ValueError):
    pass


def records_from_csv(text: str) -> list[CountRecord]:
    """Parse a counts CSV; errors name the offending line."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(h.strip() for h in rows[0]) != COUNTS_CSV_HEADER:
        raise CountsFormatError(f"line 1: expected header {','.join(COUNTS_CSV_HEADER)}")
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise CountsFormatError(f"line {lineno}: expected 4 fields, got {len(row)}")
        try:
            records.append(CountRecord(MeasurementSetting(row[0].strip()), float(row[1]),
                                       float(row[2]), float(row[3])))
        except ValueError as exc:
            raise CountsFormatError(f"line {lineno}: {exc}") from None
    return records


def histogram_to_csv(h: Histogram) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HISTOGRAM_CSV_HEADER)
    for lo, hi, c in zip(h.bin_edges[:-1], h.bin_edges[1:], h.counts):
        w.writerow([repr(float(lo)), repr(float(hi)), int(c)])
    return buf.getvalue()
