"""Acceptance criteria at their stated tolerances and time limits.

Each test prints one PASS/FAIL line; the lines are repeated in the pytest
terminal summary. Run standalone with ``python tests/test_acceptance.py``.
"""
import math
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from acceptance_log import record
from hypbound.approx_boundary import SphereBoundaryModel, double_integral_estimate, single_integral_estimate
from hypbound.deviation import (
    comparable_invariance,
    deviation,
    deviation_table,
    extension_limit,
    lp_certificate,
)
from hypbound.free_boundary import (
    StepFunction,
    VisualParams,
    ahlfors_check,
    exact_double_integral,
    exact_single_integral,
    ps_measure,
)
from hypbound.operators import (
    CrossedProductElement,
    TruncationSpec,
    basic_commutator,
    multiplier_decay,
    twisted_commutator,
    twisted_diagonal,
    twisted_diagonal_exact,
)
from hypbound.presentations import (
    GroupPresentation,
    cayley_ball,
    check_hyperbolicity,
    check_small_cancellation,
    free_growth_counts,
    load_presentation,
)
from hypbound.words import inverse, mul

DATA = Path(__file__).resolve().parents[1] / "data"
PHI = StepFunction.indicator(2, "a")
LN3 = math.log(3)


def closed_form(k: int) -> Fraction:
    p = 1 - Fraction(1, 4) * Fraction(1, 3) ** (k - 1)
    return p * (1 - p)


def enumerated_variance(phi: StepFunction, g: str) -> Fraction:
    """Oracle: integrate xi -> phi(g xi) cell by cell at depth depth(phi) + |g|."""
    mu = ps_measure(phi.n)
    moved = phi.translate(inverse(g))
    m1 = moved.integral(mu)
    m2 = moved.abs2().integral(mu)
    return m2.re - m1.abs2()


def test_c1_deviation_closed_form():
    t0 = time.perf_counter()
    bad = [k for k in range(1, 9)
           if not (deviation(PHI, "a" * k)[0] == closed_form(k) == enumerated_variance(PHI, "a" * k))]
    ok = record("1", not bad, f"sigma^2(a^k) = p(1-p) exactly for k=1..8; mismatches {bad}",
                time.perf_counter() - t0, 10)
    assert ok


def test_c2_summability_threshold():
    t0 = time.perf_counter()
    table = deviation_table(PHI, radius=8)
    parts, ok = [], True
    for p in (2.2, 2.5, 3, 4):
        c = lp_certificate(table, p)
        good = c.verdict == "converges-geometric" and c.ratio_bound <= 3 ** (1 - p / 2) + 0.01
        ok &= good and c.exact == (p == 4)
        parts.append(f"p={p}: {c.verdict} ratio {c.ratio_bound:.4f}")
    c2 = lp_certificate(table, 2)
    low = min(c2.shell_sums[2:9])
    ok &= c2.exact and c2.verdict == "diverges" and low >= Fraction(1, 8)
    parts.append(f"p=2: {c2.verdict}, min shell sum {low}")
    ok = record("2", ok, "; ".join(parts), time.perf_counter() - t0, 30)
    assert ok


def test_c3_operator_deviation_oracle():
    t0 = time.perf_counter()
    t = TruncationSpec(2, 3, 4)
    _, rep = basic_commutator(PHI, t)
    sig = np.array(sorted((deviation(PHI, w)[1] for w in t.words), reverse=True))
    head, tail = rep.values[: len(sig)], rep.values[len(sig):]
    err = max(float(np.max(np.abs(head - sig))), float(tail.max(initial=0.0)))
    ok = record("3", err <= 1e-10, f"{len(sig)} interior singular values vs deviation table, max error {err:.2e}",
                time.perf_counter() - t0, 60)
    assert ok


def test_c4_singular_value_decay():
    t0 = time.perf_counter()
    vp = VisualParams.for_free_group(2, ratio=Fraction(1))
    cert = multiplier_decay(2, vp, free_growth_counts(2, 10), bound=3.0)
    ok = cert.exact and cert.certified
    ok = record("4", ok, f"sup s_n n^(1/D) = {cert.sup:.6f} <= 3 over n <= m_10 "
                f"(sup^D = {cert.sup_power}, exact)", time.perf_counter() - t0, 5)
    assert ok


def test_c5_ahlfors_regularity():
    t0 = time.perf_counter()
    ok, parts = True, []
    for n in (2, 3):
        for r in (Fraction(1), Fraction(1, 2)):
            lo, hi = ahlfors_check(n, VisualParams.for_free_group(n, ratio=r), 6)
            ok &= lo == hi == Fraction(2 * n - 1, 2 * n)
            parts.append(f"n={n}, eps/e={r}: {lo}")
    ok = record("5", ok, "mu(B_r)/r^D constant: " + "; ".join(parts), time.perf_counter() - t0, 5)
    assert ok


def test_c6_extension_limit():
    t0 = time.perf_counter()
    errs = extension_limit(PHI, "a" * 8)
    want = [Fraction(1, 4) * Fraction(1, 3) ** (k - 1) for k in range(1, 9)]
    ok = record("6", errs == want, f"|E phi(a^k) - phi(xi)| = {', '.join(map(str, errs))}",
                time.perf_counter() - t0, 10)
    assert ok


def test_c7a_twisted_diagonal_identity():
    t0 = time.perf_counter()
    t = TruncationSpec(2, 4, 5)
    ex = twisted_diagonal_exact(PHI, "a", t)
    num = twisted_diagonal(PHI, "a", t)
    from hypbound.deviation import expectation

    exact_ok = all(v == expectation(PHI, mul(h, "A")) - expectation(PHI, h) for h, v in ex.items())
    float_err = max(abs(num[h] - complex(v)) for h, v in ex.items())
    ok = record("7a", exact_ok and float_err < 1e-12,
                f"diagonal = E phi(h g^-1) - E phi(h) on {len(ex)} interior h at R=4 "
                f"(exact; matrix form within {float_err:.1e})", time.perf_counter() - t0, 120)
    assert ok


def test_c7b_twisted_schatten_stability():
    t0 = time.perf_counter()
    a, b = CrossedProductElement.function(PHI), CrossedProductElement.group("a")
    r3 = twisted_commutator(a, b, TruncationSpec(2, 3, 4))[1]
    r4 = twisted_commutator(a, b, TruncationSpec(2, 4, 5), previous=r3)[1]
    n = min(len(r3.nonzero), len(r4.nonzero))
    p3, p4 = r3.schatten_partial(2.5)[:n], r4.schatten_partial(2.5)[:n]
    prefix_change = float(np.max(np.abs(p4 - p3) / p3))
    s3, s4 = r3.schatten_sum(2.5), r4.schatten_sum(2.5)
    total_change = abs(s4 - s3) / s3
    ok = record("7b", max(prefix_change, total_change) < 0.05,
                f"Schatten-2.5 interior sums R=3 -> R=4: total {s3:.4f} -> {s4:.4f} ({total_change:.1%}), "
                f"max change over first {n} partial sums {prefix_change:.1%}; need < 5%",
                time.perf_counter() - t0, 120)
    assert ok


def test_c8_hyperbolicity_and_small_cancellation():
    t0 = time.perf_counter()
    delta = check_hyperbolicity(cayley_ball(GroupPresentation.free(2), 6))
    rep = check_small_cancellation(load_presentation(DATA / "genus2.grp"))
    kappa = 15 * math.log(7) * 8
    ok = (delta == 0 and rep.passes_C16 and rep.max_piece_len == 1 and rep.euler_char == -2
          and math.isclose(rep.kappa, kappa))
    ok = record("8", ok, f"F2 R=6 delta={delta}; genus 2: C'(1/6) {rep.passes_C16}, max piece "
                f"{rep.max_piece_len}, euler {rep.euler_char}, kappa {rep.kappa:.4f}",
                time.perf_counter() - t0, 60)
    assert ok


def test_c9_comparable_measure_invariance():
    t0 = time.perf_counter()
    density = {"a": 2, "A": Fraction(1, 2), "b": 1, "B": Fraction(1, 2)}  # mean 1, extremes 1/2 and 2
    ok, parts = True, []
    for p in (2, 3):
        rep = comparable_invariance(PHI, density, 2, p, radius=6)
        ok &= rep.ratios_within and rep.verdicts_agree
        parts.append(f"p={p}: sigma'/sigma in [{rep.ratio_min:.3f}, {rep.ratio_max:.3f}], "
                     f"{rep.base.verdict} / {rep.perturbed.verdict}")
    ok = record("9", ok, "; ".join(parts), time.perf_counter() - t0, 30)
    assert ok


def test_c10_monte_carlo_calibration():
    t0 = time.perf_counter()
    model = SphereBoundaryModel.build(GroupPresentation.free(2), 12, epsilon=LN3, seed=20240601)
    N = 10**5
    worst, parts = 0.0, []
    for g in ("", "a", "ab"):
        est = double_integral_estimate(model, g, N)
        z = abs(est.value - exact_double_integral(2, g, LN3)) / est.stderr
        worst = max(worst, z)
        parts.append(f"double g={g or 'e'}: {z:.2f} SE")
    est = single_integral_estimate(model, "a", "b", N)
    z = abs(est.value - exact_single_integral(2, "a", "b", LN3)) / est.stderr
    worst = max(worst, z)
    parts.append(f"single (a,b): {z:.2f} SE")
    ok = record("10", worst <= 3, "; ".join(parts), time.perf_counter() - t0, 60)
    assert ok


if __name__ == "__main__":
    import sys

    failed = 0
    for name, fn in list(globals().items()):
        if name.startswith("test_c") and callable(fn):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
