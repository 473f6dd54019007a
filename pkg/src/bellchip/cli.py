"""Command-line entry point.

    bellchip tuning-curves  [--config PATH] [--out DIR] [--theta-min D --theta-max D --n N]
    bellchip simulate       [--config PATH] [--seed N] [--out DIR]
    bellchip reconstruct    COUNTS_CSV [--config PATH] [--seed N] [--out DIR]
    bellchip sweep-overlap  [--config PATH] [--out DIR]

Exit status: 0 on success (a non-converged fit is only flagged), 2 on invalid
input, 3 on I/O failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import counting, qstate, source, tomography
from .config import ConfigError, ExperimentConfig, load_config

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 2, 3
SWEEP_CSV_HEADER = "theta_deg,delta_z_over_wp,concurrence_net"


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def g4(x: float) -> str:
    return f"{x:.4g}"


def pair_state(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.source.beta is not None:
        return qstate.model_density_matrix(qstate.ModelParams(0.5, 0.5, float(cfg.source.beta)))
    return source.source_state(cfg.geometry(), cfg.dispersion_model(),
                               cfg.overlap.kappa_ps_per_mm, cfg.overlap_grid())


# --- commands ------------------------------------------------------------------

def cmd_tuning_curves(cfg: ExperimentConfig, out: Path, theta_min=None, theta_max=None, n=None) -> Path:
    disp = cfg.dispersion_model()
    lam_p = cfg.pump.lambda_p_nm
    t0 = cfg.tuning.theta_min_deg if theta_min is None else theta_min
    t1 = cfg.tuning.theta_max_deg if theta_max is None else theta_max
    n = cfg.tuning.n_points if n is None else n
    if n < 1:
        raise ConfigError("--n must be at least 1")
    theta_deg = source.degeneracy_angle(disp, lam_p)
    points = source.tuning_curves(disp, lam_p, (t0, t1), n)
    if n > 1:
        # tabulate the degenerate angles of both interactions (+theta_deg for 1, -theta_deg for 2)
        for t in (theta_deg, -theta_deg):
            if min(t0, t1) <= t <= max(t0, t1):
                points += source.tuning_curves(disp, lam_p, (t, t), 1)
        points.sort(key=lambda p: p.theta)
    path = out / "tuning_curves.csv"
    write_atomic(path, source.tuning_curves_csv(points))
    lam_s, _ = source.solve_interaction(disp, lam_p, theta_deg, 1)
    print(f"theta_deg = {g4(theta_deg)} deg  (degenerate wavelength {lam_s:.2f} nm)")
    print(f"wrote {path}")
    return path


def cmd_simulate(cfg: ExperimentConfig, out: Path) -> dict:
    true_rate, acc_rate = cfg.rates_hz()
    rho = pair_state(cfg)
    p = source.noise_fraction(true_rate, acc_rate)
    rho_raw = qstate.mix_with_white_noise(rho, p)
    c = cfg.counting
    records = counting.simulate_counts(rho, counting.projector_set_16(), true_rate, acc_rate,
                                       c.duration_per_setting_s, cfg.seed)
    paths = {"counts": out / "counts.csv"}
    write_atomic(paths["counts"], counting.records_to_csv(records))
    for label in ("HH", "HV"):
        h = counting.simulate_histogram(counting.MeasurementSetting(label), rho, true_rate, acc_rate,
                                        c.histogram_duration_s, c.window_ns, c.bin_ns, c.jitter_ns,
                                        cfg.seed)
        paths[f"histogram_{label}"] = out / f"histogram_{label}.csv"
        write_atomic(paths[f"histogram_{label}"], counting.histogram_to_csv(h))
    summary = {
        "seed": cfg.seed,
        "true_rate_hz": true_rate,
        "accidental_rate_hz": acc_rate,
        "noise_fraction": p,
        "rho_source": qstate.to_json_dict(rho),
        "rho_raw_model": qstate.to_json_dict(rho_raw),
        "model_metrics": {"source": tomography.state_metrics(rho), "raw": tomography.state_metrics(rho_raw)},
        "config": cfg.to_dict(),
    }
    paths["summary"] = out / "simulate.json"
    write_atomic(paths["summary"], dump_json(summary))
    print(f"noise fraction p = {g4(p)}; model C_source = {g4(qstate.concurrence(rho))}, "
          f"C_raw = {g4(qstate.concurrence(rho_raw))}")
    for path in paths.values():
        print(f"wrote {path}")
    return paths


def cmd_reconstruct(counts_path: Path, cfg: ExperimentConfig, out: Path) -> tomography.TomographyResult:
    records = counting.records_from_csv(counts_path.read_text())
    labels = [r.setting.label for r in records]
    missing = [lab for lab in counting.TOMOGRAPHY_LABELS if lab not in labels]
    if missing:
        raise ConfigError(f"{counts_path}: missing setting(s) {', '.join(missing)}")
    extra = sorted({lab for lab in labels if labels.count(lab) > 1 or lab not in counting.TOMOGRAPHY_LABELS})
    if extra:
        raise ConfigError(f"{counts_path}: duplicate or unexpected setting(s) {', '.join(extra)}")
    order = {lab: k for k, lab in enumerate(counting.TOMOGRAPHY_LABELS)}
    records.sort(key=lambda r: order[r.setting.label])
    t = cfg.tomography
    result = tomography.reconstruct(records, t.mc_samples, cfg.seed, t.tolerance, t.max_iters)
    doc = result.to_json_dict()
    doc.update({"seed": cfg.seed, "counts_file": str(counts_path), "config": cfg.to_dict()})
    path = out / "tomography.json"
    write_atomic(path, dump_json(doc))

    print(f"{'metric':<22}{'raw':>18}{'net':>18}")
    for name in tomography.METRICS:
        cells = []
        for kind in ("raw", "net"):
            v, s = result.metrics[kind][name]
            cells.append(f"{g4(v)} +- {g4(s)}")
        print(f"{name:<22}{cells[0]:>18}{cells[1]:>18}")
    for flag in result.flags:
        print(f"warning: {flag}", file=sys.stderr)
    print(f"wrote {path}")
    return result


def cmd_sweep_overlap(cfg: ExperimentConfig, out: Path, thetas=None, dzs=None) -> Path:
    disp = cfg.dispersion_model()
    theta_deg = source.degeneracy_angle(disp, cfg.pump.lambda_p_nm)
    s = cfg.sweep
    if thetas is None:
        thetas = np.linspace(theta_deg - s.theta_span_deg, theta_deg + s.theta_span_deg, s.n_theta) \
            if s.n_theta > 1 else np.array([theta_deg])
    if dzs is None:
        dzs = np.linspace(0.0, s.delta_z_max_over_wp, s.n_delta_z) if s.n_delta_z > 1 else np.array([0.0])
    if len(thetas) == 0 or len(dzs) == 0:
        raise ConfigError("sweep grids must be non-empty")
    lines = [SWEEP_CSV_HEADER]
    grid = cfg.overlap_grid()
    for theta in thetas:
        for dz in dzs:
            rho = source.source_state(cfg.geometry(theta=float(theta), delta_z_over_wp=float(dz)),
                                      disp, cfg.overlap.kappa_ps_per_mm, grid)
            lines.append(f"{float(theta)!r},{float(dz)!r},{qstate.concurrence(rho)!r}")
    path = out / "overlap_sweep.csv"
    write_atomic(path, "\n".join(lines) + "\n")
    print(f"theta_deg = {g4(theta_deg)} deg; {len(lines) - 1} grid points")
    print(f"wrote {path}")
    return path


# --- argument handling -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="TOML config, or a result JSON carrying a config echo (default: shipped defaults)")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", type=Path, default=None, help="output directory")

    ap = argparse.ArgumentParser(prog="bellchip", description="Counterpropagating SPDC Bell-state toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tuning-curves", parents=[common], help="signal/idler wavelengths vs pump angle")
    p.add_argument("--theta-min", type=float, default=None)
    p.add_argument("--theta-max", type=float, default=None)
    p.add_argument("--n", type=int, default=None)

    sub.add_parser("simulate", parents=[common], help="simulate tomography counts and histograms")

    p = sub.add_parser("reconstruct", parents=[common], help="reconstruct raw and net states from counts")
    p.add_argument("counts", type=Path)

    p = sub.add_parser("sweep-overlap", parents=[common], help="net concurrence over pump angle and offset")
    p.add_argument("--theta", type=float, nargs="+", default=None, help="pump angles (deg)")
    p.add_argument("--delta-z", type=float, nargs="+", default=None, help="beam offsets in units of w_p")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        out = args.out if args.out is not None else Path(cfg.output_dir)
        if args.command == "tuning-curves":
            cmd_tuning_curves(cfg, out, args.theta_min, args.theta_max, args.n)
        elif args.command == "simulate":
            cmd_simulate(cfg, out)
        elif args.command == "reconstruct":
            cmd_reconstruct(args.counts, cfg, out)
        elif args.command == "sweep-overlap":
            cmd_sweep_overlap(cfg, out, args.theta, args.delta_z)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, source.SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
