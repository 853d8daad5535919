"""Print measured frame separation against the certificate envelope for a
random diagonal cocycle on a geometric ladder."""
import argparse

from nadim.cocycle import check_diagonal_cocycle
from nadim.growth import CompactnessLadder, certify


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=3)
    ap.add_argument("--varpi", type=float, default=0.9)
    ap.add_argument("--n-max", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ladder = CompactnessLadder((0, 1), (1.0, 0.5), generator={"kind": "geometric", "rho0": 1.0, "ratio": 0.5})
    cert = certify(ladder, args.varpi, args.m, 1)
    r = check_diagonal_cocycle(cert, args.m + 2, n_max=args.n_max, seed=args.seed)
    print(f"chi_star={cert.chi_star:.6g} ladder_ok={r.ladder_ok} growth_ok={r.growth_ok}")
    print(f"{'N':>4} {'separation':>14} {'envelope':>14}")
    for N, a, e in zip(r.N, r.separation, r.envelope):
        print(f"{N:>4} {a:>14.6e} {e:>14.6e}")


if __name__ == "__main__":
    main()
