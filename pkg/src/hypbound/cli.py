"""Command-line entry point: ``hypbound <subcommand> ...``.

Reports are JSON (stdout unless ``--json PATH``); tables go to CSV.
Exit codes: 0 ok, 1 error, 2 certificate failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import warnings
from fractions import Fraction
from pathlib import Path

from . import approx_boundary as ab
from .deviation import DeviationTable, decay_fit, deviation_table, extension_limit, lp_certificate
from .free_boundary import (
    StepFunction,
    VisualParams,
    ahlfors_check,
    exact_double_integral,
    exact_single_integral,
    format_rational,
)
from .operators import (
    TOL_GAP,
    TOL_KER,
    CrossedProductElement,
    TruncationSpec,
    basic_commutator,
    index_estimate,
    twisted_commutator,
)
from .presentations import (
    GroupPresentation,
    cayley_ball,
    check_hyperbolicity,
    check_small_cancellation,
    entropy_estimate,
    growth_counts,
    load_presentation,
)
from .words import ParseError

EXIT_OK, EXIT_ERROR, EXIT_CERT = 0, 1, 2


class CertificateFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("HYPBOUND_THREADS")
    return max(1, int(env)) if env else 1


def _presentation(args) -> GroupPresentation:
    if getattr(args, "file", None):
        return load_presentation(args.file)
    if getattr(args, "n", None):
        return GroupPresentation.free(args.n)
    raise ValueError("give --file PATH or --n RANK")


def _load_json_arg(text: str):
    if text.lstrip().startswith(("{", "[")):
        return json.loads(text)
    return json.loads(Path(text).read_text(encoding="utf-8"))


def _phi(spec: str, n: int) -> StepFunction:
    """A StepFunction JSON file / literal, or the shorthand ``indicator:<prefix>``."""
    if spec.startswith("indicator:"):
        return StepFunction.indicator(n, spec.split(":", 1)[1])
    phi = StepFunction.from_json(_load_json_arg(spec))
    if phi.n != n:
        raise ValueError(f"phi is defined on F_{phi.n}, expected F_{n}")
    return phi


def _element(spec: str, n: int) -> CrossedProductElement:
    """JSON {"terms": [{"g": word, "phi": StepFunction-json | null}]} or ``word:<w>`` / ``indicator:<p>``."""
    if spec.startswith("word:"):
        return CrossedProductElement.group(spec.split(":", 1)[1])
    if spec.startswith("indicator:"):
        return CrossedProductElement.function(_phi(spec, n))
    data = _load_json_arg(spec)
    terms = []
    for t in data["terms"]:
        phi = None if t.get("phi") is None else StepFunction.from_json(t["phi"])
        terms.append((phi, t.get("g", "")))
    return CrossedProductElement(terms)


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}


def _emit(args, result: dict, mode: str) -> None:
    report = {"command": args.command, "config": _config(args), "mode": mode, "result": result}
    text = json.dumps(report, indent=2, sort_keys=True, default=str) + "\n"
    if getattr(args, "json", None):
        Path(args.json).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _write_rows(path: str, header: list[str], rows) -> None:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


# subcommands

def cmd_check_hyp(args):
    p = _presentation(args)
    ball = cayley_ball(p, args.radius)
    delta = check_hyperbolicity(ball, threads=_threads(args))
    _emit(args, {
        "delta": format_rational(delta),
        "ball_size": len(ball),
        "certified_radius": ball.certified_radius,
        "graph_metric_certified": p.is_free,
    }, "exact-rational")


def cmd_check_c16(args):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = check_small_cancellation(_presentation(args))
    _emit(args, rep.to_dict(), "exact-rational")
    if not rep.passes_C16:
        raise CertificateFailure("presentation fails C'(1/6)")


def cmd_growth(args):
    p = _presentation(args)
    ball = cayley_ball(p, args.radius)
    counts = growth_counts(ball)
    res = {"counts": counts, "sphere_sizes": ball.sphere_sizes}
    if len(counts) >= 3:
        fit = entropy_estimate(counts)
        res["entropy"] = {"rate": fit.rate, "residual": fit.residual, "radii": list(fit.radii), "mode": "float64"}
    _emit(args, res, "exact-rational")


def cmd_deviation(args):
    phi = _phi(args.phi, args.n)
    table = deviation_table(phi, radius=args.radius, threads=_threads(args))
    if args.out:
        Path(args.out).write_text(table.to_csv(), encoding="utf-8")
    res = {"entries": len(table.entries), "shell_max_sigma": table.shell_max()}
    try:
        fit = decay_fit(table)
        res["decay_fit"] = {"rate": fit.rate, "constant": fit.constant, "residual": fit.residual,
                            "verdict": fit.verdict, "shells": list(fit.shells), "mode": "float64"}
    except ValueError as exc:
        res["decay_fit"] = {"verdict": f"not fitted: {exc}"}
    _emit(args, res, "exact-rational")


def cmd_lp(args):
    text = Path(args.table).read_text(encoding="utf-8")
    table = DeviationTable.from_csv(text, args.n)
    cert = lp_certificate(table, args.p)
    _emit(args, cert.to_dict(), "exact-rational" if cert.exact else "float64")
    if args.expect == "converge" and cert.verdict != "converges-geometric":
        raise CertificateFailure(f"expected convergence, got {cert.verdict}")
    if args.expect == "diverge" and cert.verdict != "diverges":
        raise CertificateFailure(f"expected divergence, got {cert.verdict}")


def _sv_output(args, report, extra: dict):
    if args.csv:
        _write_rows(args.csv, ["n", "s_n", "schatten_partial"], report.to_rows(args.p))
    res = dict(extra)
    res.update({
        "count": int(len(report.values)),
        "nonzero": int(len(report.nonzero)),
        "s_max": float(report.values[0]) if len(report.values) else 0.0,
        "schatten_sum": report.schatten_sum(args.p),
        "fitted_exponent": report.fitted_exponent,
    })
    _emit(args, res, "float64")


def cmd_kcycle(args):
    phi = _phi(args.phi, args.n)
    t = TruncationSpec(args.n, args.radius, args.depth)
    _, rep = basic_commutator(phi, t)
    _sv_output(args, rep, {"dim": t.dim})


def cmd_twisted(args):
    a, b = _element(args.a, args.n), _element(args.b, args.n)
    t = TruncationSpec(args.n, args.radius, args.depth)
    _, rep = twisted_commutator(a, b, t)
    _sv_output(args, rep, {"dim": t.dim})


def cmd_index(args):
    a = _element(args.a, args.n)
    radii = [int(r) for r in args.radii.split(",")]
    idx = index_estimate(a, args.n, radii, tol_ker=args.tol_ker, tol_gap=args.tol_gap)
    _emit(args, {"index": idx}, "float64")
    if idx == "unstable":
        raise CertificateFailure("index estimate did not stabilise")


def cmd_integrals(args):
    p = _presentation(args)
    reach = args.reach
    sphere = args.radius if p.is_free else args.radius - reach
    if sphere < 1:
        raise ValueError(f"--radius must exceed --reach ({reach}) for non-free presentations")
    model = ab.SphereBoundaryModel.build(p, sphere, ball_radius=args.radius, epsilon=args.epsilon, seed=args.seed)
    words = [w for w in args.words.split(",")] if args.words else _shell_reps(p, reach)
    res = {"epsilon": model.epsilon, "sphere_radius": sphere, "seed": args.seed, "label": "heuristic proxy",
           "double": {}, "single": {}}
    for g in words:
        est = ab.double_integral_estimate(model, g, args.samples, args.alpha)
        row = est.to_dict()
        if p.is_free:
            row["exact"] = exact_double_integral(p.generators.rank, g, model.epsilon, args.alpha)
        res["double"][g or "e"] = row
    for g, h in zip(words, words[1:]):
        est = ab.single_integral_estimate(model, g, h, args.samples, args.alpha)
        row = est.to_dict()
        if p.is_free and args.alpha == 1:
            row["exact"] = exact_single_integral(p.generators.rank, g, h, model.epsilon)
        res["single"][f"{g or 'e'},{h or 'e'}"] = row
    ratios = [r["ratio"] for r in res["double"].values()]
    res["double_bounded"] = ab.bounded_verdict(ratios)
    _emit(args, res, "monte-carlo")


def _shell_reps(p: GroupPresentation, reach: int) -> list[str]:
    """One geodesic word per shell 1..reach, cycling through the generators."""
    names = p.generators.alphabet[::2]
    return ["".join(names[i % len(names)] for i in range(k)) for k in range(1, reach + 1)]


def cmd_extension_limit(args):
    phi = _phi(args.phi, args.n)
    errs = extension_limit(phi, args.xi, K=args.K)
    _emit(args, {"errors": [format_rational(e) for e in errs]}, "exact-rational")


def cmd_ahlfors(args):
    if args.ratio is not None:
        vp = VisualParams.for_free_group(args.n, ratio=Fraction(args.ratio))
    else:
        vp = VisualParams.for_free_group(args.n, epsilon=args.epsilon)
    lo, hi = ahlfors_check(args.n, vp, args.depth)
    _emit(args, {"min": format_rational(lo), "max": format_rational(hi), "constant": lo == hi,
                 "hausdorff_dim": vp.hausdorff_dim}, "exact-rational")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hypbound", description="Boundary calculus toolkit for hyperbolic groups.")
    parser.add_argument("--threads", type=int, default=None, help="worker cap (default: $HYPBOUND_THREADS or 1)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--json", help="write the JSON report here instead of stdout")
        sp.add_argument("--threads", type=int, default=argparse.SUPPRESS, help=argparse.SUPPRESS)
        return sp

    def group_source(sp):
        sp.add_argument("--file", help="presentation file")
        sp.add_argument("--n", type=int, help="free group rank")

    sp = add("check-hyp", cmd_check_hyp, "delta of the Cayley ball (four-point condition)")
    group_source(sp)
    sp.add_argument("--radius", type=int, required=True)

    sp = add("check-c16", cmd_check_c16, "small cancellation report")
    group_source(sp)

    sp = add("growth", cmd_growth, "ball sizes and entropy estimate")
    group_source(sp)
    sp.add_argument("--radius", type=int, required=True)

    sp = add("deviation", cmd_deviation, "exact deviation table")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--phi", required=True, help="StepFunction JSON path/literal or indicator:<prefix>")
    sp.add_argument("--radius", type=int, required=True)
    sp.add_argument("--out", help="CSV table path")

    sp = add("lp", cmd_lp, "l^p summability certificate from a deviation table")
    sp.add_argument("--table", required=True)
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--expect", choices=["converge", "diverge"])

    for name, func, help_ in (("kcycle", cmd_kcycle, "singular values of [lambda(phi), P]"),
                              ("twisted", cmd_twisted, "singular values of the twisted commutator")):
        sp = add(name, func, help_)
        sp.add_argument("--n", type=int, default=2)
        if name == "kcycle":
            sp.add_argument("--phi", required=True)
        else:
            sp.add_argument("--a", required=True, help="element JSON or word:<w> / indicator:<p>")
            sp.add_argument("--b", required=True)
        sp.add_argument("--radius", type=int, required=True)
        sp.add_argument("--depth", type=int, required=True)
        sp.add_argument("--p", type=float, default=2.5)
        sp.add_argument("--csv", help="singular value CSV path")

    sp = add("index", cmd_index, "index of the compression P lambda(a) P across truncations")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--a", required=True)
    sp.add_argument("--radii", default="3,4")
    sp.add_argument("--tol-ker", type=float, default=TOL_KER, help="singular values below this count as kernel")
    sp.add_argument("--tol-gap", type=float, default=TOL_GAP, help="values in [tol-ker, tol-gap) make the estimate unstable")

    sp = add("integrals", cmd_integrals, "Monte-Carlo integral estimates on the sphere proxy")
    group_source(sp)
    sp.add_argument("--radius", type=int, required=True, help="ball radius")
    sp.add_argument("--reach", type=int, default=3, help="max |g| (non-free: sphere radius = radius - reach)")
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--samples", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--words", help="comma-separated translating words")

    sp = add("extension-limit", cmd_extension_limit, "|E phi(g_k) - phi(xi)| along a ray")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--phi", required=True)
    sp.add_argument("--xi", required=True, help="reduced prefix of the boundary point")
    sp.add_argument("--K", type=int)

    sp = add("ahlfors", cmd_ahlfors, "mu(B_r) / r^D over cylinder balls")
    sp.add_argument("--n", type=int, default=2)
    eps = sp.add_mutually_exclusive_group(required=True)
    eps.add_argument("--epsilon", type=float)
    eps.add_argument("--ratio", help="epsilon / ln(2n-1) as an exact rational, e.g. 1/2")
    sp.add_argument("--depth", type=int, default=6)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except CertificateFailure as exc:
        print(f"certificate failure: {exc}", file=sys.stderr)
        return EXIT_CERT
    except (ParseError, ValueError, ArithmeticError, KeyError, OSError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
