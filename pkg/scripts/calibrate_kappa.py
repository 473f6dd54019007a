"""Fit the frequency-to-wavevector constant of the overlap model.

Two anchor values constrain the net concurrence 2|beta| at the
degenerate pump angle: 0.84 with perfectly aligned beams and 0.75 with the
beam peaks 0.3 waists apart. The script finds the kappa minimizing the
squared misfit to both and prints the curve at the optimum.

    python scripts/calibrate_kappa.py
"""
import argparse

import numpy as np
from scipy.optimize import minimize_scalar

from bellchip import source

ANCHORS = ((0.0, 0.84), (0.3, 0.75))


def concurrence_at(kappa, disp, base, dz_over_wp):
    geom = source.PumpGeometry(lambda_p=base.lambda_p, theta=base.theta, w_p=base.w_p,
                               delta_z=dz_over_wp * base.w_p, L=base.L,
                               filter_fwhm=base.filter_fwhm)
    return 2 * abs(source.overlap_beta(geom, disp, kappa))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lo", type=float, default=0.5)
    ap.add_argument("--hi", type=float, default=5.0)
    args = ap.parse_args()

    disp = source.default_dispersion()
    base = source.PumpGeometry(theta=source.degeneracy_angle(disp, 759.0))
    print(f"physical (n_H + n_V)/c = {source.physical_kappa(disp, 1518.0):.4f} ps/mm")
    for dz, target in ANCHORS:
        c = concurrence_at(None, disp, base, dz)
        print(f"  physical kappa: 2|beta|({dz} w_p) = {c:.4f} (target {target})")

    def misfit(k):
        return sum((concurrence_at(k, disp, base, dz) - target) ** 2 for dz, target in ANCHORS)

    res = minimize_scalar(misfit, bounds=(args.lo, args.hi), method="bounded",
                          options={"xatol": 1e-4})
    print(f"calibrated kappa = {res.x:.4f} ps/mm (rms misfit {np.sqrt(res.fun / 2):.4f})")
    for dz in np.linspace(0, 1.0, 11):
        print(f"  dz = {dz:.1f} w_p: 2|beta| = {concurrence_at(res.x, disp, base, dz):.4f}")


if __name__ == "__main__":
    main()
