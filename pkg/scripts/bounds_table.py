"""Cluster coefficients and analytic density bounds for the binary family and the reference laws."""

import argparse

from sinrperc import BinaryRadius, PowerLawRadius, SinrParams
from sinrperc.bounds import binary_bounds_table, density_bounds


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--b", type=float, nargs="+", default=[1, 2, 3, 4, 5])
    args = ap.parse_args()
    print(f"{'b':>4} {'coeff':>9} {'lower':>9} {'upper':>9}")
    for row in binary_bounds_table(args.b):
        print(f"{row['b']:4g} {row['coefficient']:9.5f} {row['lower']:9.5f} {row['upper']:9.5f}")
    print()
    for name, law in {"binary_80_20": BinaryRadius(1.0, 2.0, 0.8),
                      "power_law": PowerLawRadius(3.0, 1.0, 2.0)}.items():
        print(name, density_bounds(law, SinrParams(0.25, 0.1)).to_dict())


if __name__ == "__main__":
    main()
