"""Choose the per-setting acquisition time from the target spread of C_raw.

For each candidate duration the script simulates many independent runs of
the 16-setting tomography and reports the seed-to-seed spread of the raw
concurrence, together with the Monte-Carlo error bar that a single run
would quote. The shipped default is the shortest duration whose true
spread reaches the target.

    python scripts/calibrate_duration.py [--target 0.07] [--runs 200]
"""
import argparse

import numpy as np

from bellchip import counting, qstate, tomography


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--beta", type=float, default=0.375)
    ap.add_argument("--true-rate", type=float, default=0.77)
    ap.add_argument("--acc-rate", type=float, default=0.04)
    ap.add_argument("--durations", type=float, nargs="+", default=[150, 300, 600, 1200, 2400])
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--mc-samples", type=int, default=200)
    ap.add_argument("--target", type=float, default=0.07)
    args = ap.parse_args()

    rho = qstate.model_density_matrix(qstate.ModelParams(0.5, 0.5, args.beta))
    settings = counting.projector_set_16()
    print(f"{'duration_s':>10} {'mean C_raw':>11} {'true sigma':>11} {'MC sigma':>9} {'counts/setting':>15}")
    chosen = None
    for d in args.durations:
        cs = []
        for seed in range(args.runs):
            recs = counting.simulate_counts(rho, settings, args.true_rate, args.acc_rate, d, seed)
            cs.append(qstate.concurrence(tomography.mle_reconstruct(recs).rho))
        first = counting.simulate_counts(rho, settings, args.true_rate, args.acc_rate, d, 0)
        mc = tomography.mc_uncertainty(first, args.mc_samples, seed=0).sigma["concurrence"]
        spread = float(np.std(cs, ddof=1))
        per_setting = d * (args.true_rate + args.acc_rate) / 4
        print(f"{d:>10.0f} {np.mean(cs):>11.4f} {spread:>11.4f} {mc:>9.4f} {per_setting:>15.1f}")
        if chosen is None and spread <= args.target * 1.05:
            chosen = d
    print(f"shortest duration with true sigma within 5% of {args.target}: {chosen} s")


if __name__ == "__main__":
    main()
