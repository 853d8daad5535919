"""Sweep the restricted-norm estimate over levels for the worst-case family."""
import argparse

from nadim.dde import restricted_norm_estimate, worst_case_family


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'system':>6} {'level':>5} {'estimate':>10} {'rho':>8} within")
    for j, system in enumerate(worst_case_family()):
        for i in args.levels:
            r = restricted_norm_estimate(system, i, samples=args.samples, seed=args.seed)
            print(f"{j:>6} {i:>5} {r.estimate:>10.4f} {r.rho:>8.4f} {r.within}")


if __name__ == "__main__":
    main()
