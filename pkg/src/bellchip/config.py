"""Experiment configuration: one TOML (or echoed JSON) file, sections per module."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import source


class ConfigError(ValueError):
    pass


@dataclass
class DispersionSection:
    reference_nm: float = 1518.0
    n_h: list = field(default_factory=lambda: [3.0622, -1.0e-4])
    n_v: list = field(default_factory=lambda: [3.0500, -1.0e-4])
    window_nm: list = field(default_factory=lambda: [1400.0, 1650.0])


@dataclass
class PumpSection:
    lambda_p_nm: float = 759.0
    theta_deg: float | None = None
    w_p_mm: float = 2.4
    delta_z_over_wp: float = 0.3
    length_mm: float = 1.8
    filter_fwhm_nm: float = 1.2


@dataclass
class OverlapSection:
    kappa_ps_per_mm: float | None = 1.510
    n_z: int = 1024
    n_omega: int = 1024


@dataclass
class SourceSection:
    beta: float | None = None


@dataclass
class RatesSection:
    pairs_per_pulse: float = 0.007
    rep_rate_hz: float = 1.0e5
    eta_det: float = 0.25
    eta_coll: float = 0.13
    dark_prob_per_gate: float = 1.8e-4
    stray_singles_prob_per_gate: float = 4.5e-4
    true_rate_hz: float | None = 0.77
    accidental_rate_hz: float | None = 0.04


@dataclass
class CountingSection:
    duration_per_setting_s: float = 600.0
    histogram_duration_s: float = 3600.0
    window_ns: float = 80.0
    bin_ns: float = 0.5
    jitter_ns: float = 0.25


@dataclass
class TomographySection:
    mc_samples: int = 200
    tolerance: float = 1.0e-8
    max_iters: int = 2000


@dataclass
class TuningSection:
    theta_min_deg: float = -2.0
    theta_max_deg: float = 2.0
    n_points: int = 201


@dataclass
class SweepSection:
    theta_span_deg: float = 0.1
    n_theta: int = 11
    delta_z_max_over_wp: float = 1.0
    n_delta_z: int = 11


SECTIONS = {
    "dispersion": DispersionSection,
    "pump": PumpSection,
    "overlap": OverlapSection,
    "source": SourceSection,
    "rates": RatesSection,
    "counting": CountingSection,
    "tomography": TomographySection,
    "tuning": TuningSection,
    "sweep": SweepSection,
}


@dataclass
class ExperimentConfig:
    seed: int = 2013
    output_dir: str = "out"
    dispersion: DispersionSection = field(default_factory=DispersionSection)
    pump: PumpSection = field(default_factory=PumpSection)
    overlap: OverlapSection = field(default_factory=OverlapSection)
    source: SourceSection = field(default_factory=SourceSection)
    rates: RatesSection = field(default_factory=RatesSection)
    counting: CountingSection = field(default_factory=CountingSection)
    tomography: TomographySection = field(default_factory=TomographySection)
    tuning: TuningSection = field(default_factory=TuningSection)
    sweep: SweepSection = field(default_factory=SweepSection)

    # --- domain objects ---------------------------------------------------

    def dispersion_model(self) -> source.DispersionModel:
        d = self.dispersion
        return source.DispersionModel(float(d.reference_nm), tuple(map(float, d.n_h)),
                                      tuple(map(float, d.n_v)), tuple(map(float, d.window_nm)))

    def theta(self) -> float:
        if self.pump.theta_deg is not None:
            return float(self.pump.theta_deg)
        return source.degeneracy_angle(self.dispersion_model(), self.pump.lambda_p_nm)

    def geometry(self, theta: float | None = None, delta_z_over_wp: float | None = None) -> source.PumpGeometry:
        p = self.pump
        dz = p.delta_z_over_wp if delta_z_over_wp is None else delta_z_over_wp
        return source.PumpGeometry(
            lambda_p=p.lambda_p_nm, theta=self.theta() if theta is None else theta,
            w_p=p.w_p_mm, delta_z=dz * p.w_p_mm, L=p.length_mm, filter_fwhm=p.filter_fwhm_nm)

    def overlap_grid(self) -> source.OverlapGrid:
        return source.OverlapGrid(n_z=self.overlap.n_z, n_omega=self.overlap.n_omega)

    def budget(self) -> source.RateBudget:
        r = self.rates
        return source.RateBudget(r.pairs_per_pulse, r.rep_rate_hz, r.eta_det, r.eta_coll,
                                 r.dark_prob_per_gate, r.stray_singles_prob_per_gate)

    def rates_hz(self) -> tuple[float, float]:
        """True and accidental rates; explicit values override the budget model."""
        true_rate, acc_rate = source.expected_rates(self.budget())
        if self.rates.true_rate_hz is not None:
            true_rate = float(self.rates.true_rate_hz)
        if self.rates.accidental_rate_hz is not None:
            acc_rate = float(self.rates.accidental_rate_hz)
        return true_rate, acc_rate

    # --- validation and serialization -------------------------------------

    def validate(self) -> "ExperimentConfig":
        try:
            disp = self.dispersion_model()
            self.geometry()
            self.budget()
            self.overlap_grid()
            self.rates_hz()
            lo, hi = disp.window_nm
            if not lo <= 2 * self.pump.lambda_p_nm <= hi:
                raise ConfigError("pump.lambda_p_nm: degenerate wavelength outside dispersion window")
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        checks = [
            ("rates.true_rate_hz", self.rates.true_rate_hz is None or self.rates.true_rate_hz >= 0),
            ("rates.accidental_rate_hz", self.rates.accidental_rate_hz is None or self.rates.accidental_rate_hz >= 0),
            ("counting.duration_per_setting_s", self.counting.duration_per_setting_s > 0),
            ("counting.histogram_duration_s", self.counting.histogram_duration_s > 0),
            ("counting.bin_ns", self.counting.bin_ns > 0),
            ("counting.jitter_ns", self.counting.jitter_ns > 0),
            ("counting.window_ns", self.counting.window_ns > 0 and _divides(self.counting.bin_ns, self.counting.window_ns)),
            ("tomography.mc_samples", self.tomography.mc_samples == 0 or self.tomography.mc_samples >= 100),
            ("tomography.tolerance", self.tomography.tolerance > 0),
            ("tomography.max_iters", self.tomography.max_iters >= 1),
            ("tuning.n_points", self.tuning.n_points >= 1),
            ("sweep.n_theta", self.sweep.n_theta >= 1),
            ("sweep.n_delta_z", self.sweep.n_delta_z >= 1),
            ("source.beta", self.source.beta is None or 0 <= self.source.beta <= 0.5),
        ]
        for key, ok in checks:
            if not ok:
                raise ConfigError(f"{key}: invalid value")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def _divides(bin_ns: float, window_ns: float) -> bool:
    k = window_ns / bin_ns
    return math.isclose(k, round(k), abs_tol=1e-9)


def from_dict(data: dict) -> ExperimentConfig:
    """Build a config from nested dicts; unknown keys raise naming the key."""
    cfg = ExperimentConfig()
    for key, value in data.items():
        if key in SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: expected a section")
            section = getattr(cfg, key)
            allowed = {f.name for f in fields(section)}
            for k, v in value.items():
                if k not in allowed:
                    raise ConfigError(f"unknown key '{key}.{k}'")
                setattr(section, k, v)
        elif key in ("seed", "output_dir"):
            setattr(cfg, key, value)
        else:
            raise ConfigError(f"unknown key '{key}'")
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool):
        raise ConfigError("seed: expected an integer")
    return cfg.validate()


def load_config(path: str | Path | None = None) -> ExperimentConfig:
    """Read a TOML config, or the ``config`` echo inside a result JSON.

    ``None`` loads the shipped defaults.
    """
    if path is None:
        text = resources.files("bellchip").joinpath("data/defaults.toml").read_text()
        return from_dict(tomllib.loads(text))
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        data = json.loads(text)
        data = data.get("config", data)
    else:
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return from_dict(data)
