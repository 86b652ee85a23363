"""Giant strong fraction versus the interference factor gamma at fixed density.

Also prints the headroom gamma_max = (P_max L(0) / beta - N0) / S, with S the mean
field shot noise lambda E[P] pi / shift. Past it, even a co-located pair of nodes
cannot communicate against typical interference.
"""

import argparse
import math
from pathlib import Path

import numpy as np

from sinrperc import ShiftedPowerLaw, SinrParams, UniformPower
from sinrperc.critical import GAMMA, Setup, SweepSpec, estimate_critical_gamma, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--density", type=float, default=4.0)
    ap.add_argument("--n", type=int, default=4000)
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--grid", type=float, nargs="+",
                    default=[0.0, 0.005, 0.01, 0.015, 0.02, 0.03, 0.05, 0.1, 0.25])
    ap.add_argument("--bisect", action="store_true")
    ap.add_argument("--out", type=Path, default=Path("results/gamma_sweep.csv"))
    args = ap.parse_args()
    params = SinrParams(0.25, 0.1)
    model = ShiftedPowerLaw.from_noise(params)
    law = UniformPower(1.0, 2.0)
    setup = Setup(law, params, model, density=args.density)

    shot = args.density * 0.5 * (law.p_min + law.p_max) * math.pi / model.shift
    gamma_max = (law.p_max * model.at_zero() / params.beta - params.n0) / shot
    print(f"mean shot noise {shot:.3f}; headroom gamma_max {gamma_max:.4f}")

    args.out.parent.mkdir(parents=True, exist_ok=True)
    spec = SweepSpec(GAMMA, tuple(args.grid), setup, n=args.n, replications=args.reps)
    res = run_sweep(spec)
    res.to_csv(args.out, {"density": args.density, "n": args.n})
    for g, m in zip(args.grid, res.mean_fraction()[:, -1]):
        print(f"gamma {g:<6g} strong fraction {m:.3f}")
    if args.bisect:
        est = estimate_critical_gamma(setup, "strong", hi=float(np.max(args.grid)), n=args.n,
                                      replications=args.reps, resolution=0.001)
        print(f"gamma_c {est.estimate:.4f} [{est.interval[0]:.4f}, {est.interval[1]:.4f}] ({est.status})")


if __name__ == "__main__":
    main()
