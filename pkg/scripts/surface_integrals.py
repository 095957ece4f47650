"""Monte-Carlo integral ratios on the genus-2 sphere proxy, shells 1..reach.

    python scripts/surface_integrals.py --radius 6 --reach 3 --samples 20000 --seed 1
"""
import argparse
import itertools
import json
from pathlib import Path

import numpy as np

from hypbound.approx_boundary import (
    SphereBoundaryModel,
    bounded_verdict,
    convergence_scan,
    double_integral_estimate,
    single_integral_estimate,
)
from hypbound.presentations import load_presentation

DATA = Path(__file__).resolve().parents[1] / "data"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--file", default=str(DATA / "genus2.grp"))
    ap.add_argument("--radius", type=int, default=5)
    ap.add_argument("--reach", type=int, default=2)
    ap.add_argument("--epsilon", type=float, default=0.05)
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--pairs", type=int, default=6, help="random (g, h) pairs for the single integral")
    args = ap.parse_args()

    p = load_presentation(args.file)
    model = SphereBoundaryModel.build(p, args.radius - args.reach, ball_radius=args.radius,
                                      epsilon=args.epsilon, seed=args.seed)
    rng = np.random.default_rng(args.seed)
    shells = [[w for w in model.ball.elements if len(w) == k] for k in range(1, args.reach + 1)]
    out = {"config": vars(args), "label": "heuristic proxy", "double": [], "single": []}
    for k, shell in enumerate(shells, 1):
        g = shell[rng.integers(len(shell))]
        est = double_integral_estimate(model, g, args.samples)
        out["double"].append({"g": g, "shell": k, **est.to_dict()})
    words = [w for sh in shells for w in sh]
    for _ in range(args.pairs):
        g, h = (words[i] for i in rng.choice(len(words), 2, replace=False))
        est = single_integral_estimate(model, g, h, args.samples)
        out["single"].append({"g": g, "h": h, **est.to_dict()})
    out["double_bounded"] = bounded_verdict([r["ratio"] for r in out["double"]])
    out["single_bounded"] = bounded_verdict([r["ratio"] for r in out["single"]])
    gen = p.generators.names[0]
    out["concentration"] = convergence_scan(model, [gen * k for k in range(1, args.reach + 1)])
    print(json.dumps(out, indent=2, default=str))


if __name__ == "__main__":
    main()
