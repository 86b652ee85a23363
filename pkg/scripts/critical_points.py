"""Critical density of each radius law by bisection, with a two-size finite-size diagnostic.

The normalised product lambda_c * E[R^2] is printed next to each estimate; its drift
with n is the quantity to watch when comparing against infinite-plane values.
"""

import argparse

import numpy as np

from sinrperc import BinaryRadius, ConstantRadius, PowerLawRadius, SinrParams
from sinrperc.bounds import RadiusDistribution
from sinrperc.critical import DENSITY, Setup, SweepSpec, estimate_critical_density, two_size_crossing

LAWS = {
    "constant_1": ConstantRadius(1.0),
    "binary_half": BinaryRadius(1.0, 2.0, 0.5),
    "binary_80_20": BinaryRadius(1.0, 2.0, 0.8),
    "power_law": PowerLawRadius(3.0, 1.0, 2.0),
}


def second_moment(law):
    d = RadiusDistribution.from_law(law)
    rng = np.random.default_rng(0)
    return float(np.mean(d.sample(rng, 1_000_000) ** 2))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=4000)
    ap.add_argument("--reps", type=int, default=40)
    ap.add_argument("--kind", default="strong")
    ap.add_argument("--crossing", action="store_true", help="also run the n vs 4n crossing")
    args = ap.parse_args()
    params = SinrParams(0.25, 0.1)
    for name, law in LAWS.items():
        setup = Setup(law, params)
        est = estimate_critical_density(setup, args.kind, 0.1, 3.0, n=args.n, replications=args.reps)
        m2 = second_moment(law)
        line = (f"{name:13s} lambda_c {est.estimate:.4f} [{est.interval[0]:.4f}, {est.interval[1]:.4f}]"
                f"  lambda_c*E[R^2] {est.estimate * m2:.3f}")
        if args.crossing:
            lo, hi = est.interval
            grid = tuple(np.linspace(lo - 0.1 * est.estimate, hi + 0.1 * est.estimate, 7))
            spec = SweepSpec(DENSITY, grid, setup, n=args.n // 4, replications=args.reps)
            x, *_ = two_size_crossing(spec, args.kind, factor=4)
            line += f"  crossing(n/4, n) {x:.4f}"
        print(line, flush=True)


if __name__ == "__main__":
    main()
