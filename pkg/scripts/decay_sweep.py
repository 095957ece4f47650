"""Deviation decay rates of 1_{cyl(a)} on F_n against -ln(2n-1)/2.

    python scripts/decay_sweep.py --ranks 2 3 --radius 7 --out decay.csv
"""
import argparse
import csv
import math
import sys

from hypbound.deviation import decay_fit, deviation_table, lp_certificate
from hypbound.free_boundary import StepFunction


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ranks", type=int, nargs="+", default=[2, 3])
    ap.add_argument("--radius", type=int, default=6)
    ap.add_argument("--p", type=float, nargs="+", default=[2.0, 2.5, 3.0])
    ap.add_argument("--out", help="CSV path (stdout if omitted)")
    args = ap.parse_args()

    rows = []
    for n in args.ranks:
        table = deviation_table(StepFunction.indicator(n, "a"), radius=args.radius)
        fit = decay_fit(table)
        target = -math.log(2 * n - 1) / 2
        for p in args.p:
            cert = lp_certificate(table, p)
            rows.append([n, args.radius, fit.rate, target, abs(fit.rate / target - 1), p,
                         cert.verdict, cert.ratio_bound, (2 * n - 1) ** (1 - p / 2)])
    header = ["n", "radius", "fitted_rate", "target_rate", "rel_err", "p", "verdict", "ratio_bound",
              "predicted_ratio"]
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh)
    w.writerow(header)
    w.writerows(rows)
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
