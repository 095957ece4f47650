"""Singular values of the basic and twisted commutators over a range of truncations.

    python scripts/schatten_scan.py --radii 2 3 4 --p 2.5 --out sv_scan.csv
"""
import argparse
import csv
import sys

from hypbound.free_boundary import StepFunction
from hypbound.operators import CrossedProductElement, TruncationSpec, basic_commutator, twisted_commutator


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--radii", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--p", type=float, default=2.5)
    ap.add_argument("--prefix", default="a", help="cylinder of the indicator function")
    ap.add_argument("--out")
    args = ap.parse_args()

    phi = StepFunction.indicator(2, args.prefix)
    a, b = CrossedProductElement.function(phi), CrossedProductElement.group("a")
    rows = []
    prev = {}
    for R in args.radii:
        t = TruncationSpec(2, R, R + len(args.prefix))
        for kind, rep in (("basic", basic_commutator(phi, t)[1]),
                          ("twisted", twisted_commutator(a, b, t, prev.get("twisted"))[1])):
            prev[kind] = rep
            rows.append([kind, R, len(rep.nonzero), rep.schatten_sum(args.p), rep.fitted_exponent,
                         rep.stable_prefix])
            print(f"{kind:8s} R={R} nonzero={len(rep.nonzero):4d} S_p={rep.schatten_sum(args.p):.5f} "
                  f"exponent={rep.fitted_exponent}", file=sys.stderr)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh)
    w.writerow(["kind", "radius", "nonzero", "schatten_sum", "fitted_exponent", "stable_prefix"])
    w.writerows(rows)
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
