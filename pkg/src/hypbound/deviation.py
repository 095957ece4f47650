"""Exact group expectation / deviation of step functions on the F_n boundary.

E phi(g) = int phi d(g_* mu) and sigma phi(g)^2 = E|phi|^2(g) - |E phi(g)|^2,
computed in exact rationals. Fits and square roots are float64.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from .free_boundary import (
    ComplexQ,
    CylinderMeasure,
    RefinementError,
    StepFunction,
    cylinders,
    density_measure,
    format_rational,
    preimage_mass,
    ps_measure,
)
from .words import GeneratorSet, Word, ball_words, inverse, mul, reduce

DEFAULT_CELL_CAP = 10**11


def expectation(phi: StepFunction, g: Word, mu: CylinderMeasure | None = None) -> ComplexQ:
    """int phi d(g_* mu) via exact pushforward masses."""
    mu = mu or ps_measure(phi.n)
    g = reduce(g)
    total = ComplexQ()
    for w, v in phi.values.items():
        if v.re or v.im:
            total = total + v * preimage_mass(mu, g, w)
    return total


def expectation_by_translation(phi: StepFunction, g: Word, mu: CylinderMeasure | None = None) -> ComplexQ:
    """int (g^-1 . phi) dmu, enumerating cylinders of depth depth(phi) + |g|."""
    mu = mu or ps_measure(phi.n)
    return phi.translate(inverse(reduce(g))).integral(mu)


def deviation(phi: StepFunction, g: Word, mu: CylinderMeasure | None = None) -> tuple[Fraction, float]:
    e = expectation(phi, g, mu)
    e2 = expectation(phi.abs2(), g, mu)
    sq = e2.re - e.abs2()
    if sq < 0:
        raise ArithmeticError(f"negative variance {sq} at g={g!r}")
    return sq, math.sqrt(sq)


def deviation_double_integral(phi: StepFunction, g: Word, mu: CylinderMeasure | None = None) -> Fraction:
    """1/2 iint |phi(gx) - phi(gy)|^2 dmu(x) dmu(y) over the exact partition."""
    mu = mu or ps_measure(phi.n)
    g = reduce(g)
    k = phi.depth + len(g)
    # the integrand only sees values, so pair up level sets instead of cells
    level: dict[ComplexQ, Fraction] = {}
    for v in cylinders(phi.n, k):
        fv = phi(mul(g, v))
        level[fv] = level.get(fv, Fraction(0)) + mu.mass(v)
    cells = list(level.items())
    total = Fraction(0)
    for i, (fx, mx) in enumerate(cells):
        for fy, my in cells[i + 1:]:
            total += (fx - fy).abs2() * mx * my
    # unordered pairs counted once, which absorbs the factor 1/2
    return total / mu.total**2


@dataclass
class DeviationTable:
    phi: StepFunction
    entries: dict[Word, tuple[ComplexQ, Fraction]]
    radius: int
    n: int

    def sigma(self, g: Word) -> float:
        return math.sqrt(self.entries[g][1])

    def shells(self) -> list[list[Word]]:
        out: list[list[Word]] = [[] for _ in range(self.radius + 1)]
        for w in self.entries:
            out[len(w)].append(w)
        return out

    def shell_max(self) -> list[float]:
        """max sigma over each sphere |g| = k."""
        return [max((self.sigma(w) for w in sh), default=0.0) for sh in self.shells()]

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["word", "E_re", "E_im", "sigma_sq", "sigma"])
        for w, (e, sq) in self.entries.items():
            wr.writerow([w or "e", format_rational(e.re), format_rational(e.im), format_rational(sq),
                         repr(math.sqrt(sq))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, n: int, phi: StepFunction | None = None) -> "DeviationTable":
        entries = {}
        for row in csv.DictReader(io.StringIO(text)):
            w = "" if row["word"] == "e" else row["word"]
            entries[w] = (ComplexQ(Fraction(row["E_re"]), Fraction(row["E_im"])), Fraction(row["sigma_sq"]))
        radius = max(len(w) for w in entries)
        return cls(phi or StepFunction.constant(n), entries, radius, n)


def deviation_table(
    phi: StepFunction,
    mu: CylinderMeasure | None = None,
    radius: int = 1,
    cell_cap: int = DEFAULT_CELL_CAP,
    threads: int = 1,
) -> DeviationTable:
    if radius < 0:
        raise ValueError("radius must be >= 0")
    n = phi.n
    mu = mu or ps_measure(n)
    words = ball_words(GeneratorSet.free(n), radius)
    cells = len(words) * (2 * n - 1) ** (phi.depth + radius)
    if cells > cell_cap:
        raise MemoryError(f"table needs ~{cells} partition cells, cap is {cell_cap}")
    phi2 = phi.abs2()

    def one(g: Word):
        e = expectation(phi, g, mu)
        return g, (e, expectation(phi2, g, mu).re - e.abs2())

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            entries = dict(ex.map(one, words))
    else:
        entries = dict(map(one, words))
    return DeviationTable(phi, entries, radius, n)


@dataclass(frozen=True)
class DecayFit:
    rate: float | None
    constant: float | None
    residual: float | None
    verdict: str
    shells: tuple[int, ...] = ()


def decay_fit(table: DeviationTable, min_shell: int | None = None) -> DecayFit:
    """Fit ln(max_{|g|=k} sigma(g)) = ln C + rate * k; zero shells skipped.

    By default only the upper half of the shells enters the fit.
    """
    mx = table.shell_max()
    if min_shell is None:
        min_shell = max(1, table.radius // 2)
    ks = [k for k in range(min_shell, len(mx)) if mx[k] > 0]
    if not any(m > 0 for m in mx):
        return DecayFit(None, None, None, "constant function")
    if len(ks) < 3:
        raise ValueError("need at least 3 shells with nonzero deviation")
    x = np.array(ks, dtype=float)
    y = np.log([mx[k] for k in ks])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return DecayFit(float(coef[0]), float(math.exp(coef[1])), resid, "fit", tuple(ks))


@dataclass
class SummabilityCertificate:
    p: float
    shell_sums: list
    exact: bool
    verdict: str
    ratio_bound: float | None
    k0: int
    ratios: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "mode": "exact-rational" if self.exact else "float64",
            "shell_sums": [format_rational(s) if self.exact else s for s in self.shell_sums],
            "ratios": self.ratios,
            "verdict": self.verdict,
            "ratio_bound": self.ratio_bound,
            "k0": self.k0,
        }


def lp_certificate(
    table: DeviationTable, p: float, k0: int | None = None, unit_tol: float = 0.05
) -> SummabilityCertificate:
    """Shell sums sum_{|g|=k} sigma(g)^p with a geometric-ratio verdict.

    converges-geometric: every ratio S_{k+1}/S_k for k >= k0 is below
    ratio_bound < 1 - unit_tol. diverges: every such ratio is >= 1 - unit_tol
    and the shells stay bounded away from 0.
    """
    if p <= 0:
        raise ValueError("p must be positive")
    if table.radius < 4:
        raise ValueError("table radius must be >= 4")
    shells = table.shells()
    exact = float(p).is_integer() and int(p) % 2 == 0
    if exact:
        half = int(p) // 2
        sums = [sum((table.entries[w][1] ** half for w in sh), Fraction(0)) for sh in shells]
    else:
        sums = [math.fsum(float(table.entries[w][1]) ** (p / 2) for w in sh) for sh in shells]
    if k0 is None:
        k0 = table.radius // 2
    if all(s == 0 for s in sums):
        return SummabilityCertificate(p, sums, exact, "converges-geometric", 0.0, 0, [])
    ratios = [float(sums[k + 1] / sums[k]) if sums[k] else math.inf for k in range(1, len(sums) - 1)]
    tail = ratios[k0 - 1:]
    bound = max(tail)
    if bound < 1 - unit_tol:
        verdict = "converges-geometric"
    elif min(tail) >= 1 - unit_tol:
        verdict = "diverges"
    else:
        verdict = "inconclusive"
    return SummabilityCertificate(p, sums, exact, verdict, bound, k0, ratios)


def extension_limit(
    phi: StepFunction, xi: Word, mu: CylinderMeasure | None = None, K: int | None = None
) -> list[Fraction]:
    """|E phi(g_k) - phi(xi)| for the length-k prefixes g_k of xi, k = 1..K.

    ``xi`` is a reduced prefix of the boundary point, at least as long as
    both K and depth(phi).
    """
    xi = reduce(xi)
    K = len(xi) if K is None else K
    if len(xi) < max(K, phi.depth):
        raise RefinementError(f"boundary point prefix {xi!r} too short for K={K}, depth={phi.depth}")
    target = phi(xi)
    out = []
    for k in range(1, K + 1):
        diff = expectation(phi, xi[:k], mu) - target
        out.append(_abs_exact(diff))
    return out


def _abs_exact(z: ComplexQ) -> Fraction:
    if z.im == 0:
        return abs(z.re)
    s = z.abs2()
    r = Fraction(math.isqrt(s.numerator), math.isqrt(s.denominator))
    if r * r != s:
        raise ArithmeticError("modulus is irrational; use abs2")
    return r


@dataclass
class ComparableReport:
    base: SummabilityCertificate
    perturbed: SummabilityCertificate
    ratio_min: float
    ratio_max: float
    density_bounds: tuple[Fraction, Fraction]
    verdicts_agree: bool
    ratios_within: bool
    fit_base: DecayFit | None = None
    fit_perturbed: DecayFit | None = None


def comparable_invariance(
    phi: StepFunction,
    density: Mapping[Word, Fraction],
    c: Fraction | float,
    p: float,
    radius: int = 6,
    mu: CylinderMeasure | None = None,
) -> ComparableReport:
    """Recompute the deviation table under mu' = density * mu (renormalised)."""
    n = phi.n
    d = {w: Fraction(v) for w, v in density.items()}
    if min(d.values()) <= 0:
        raise ValueError("density must be bounded away from 0")
    base_mu = mu or ps_measure(n)
    mu2 = density_measure(n, d)
    dens = mu2.density()
    lo, hi = min(dens.values()), max(dens.values())
    c = Fraction(c)
    if lo < 1 / c or hi > c:
        raise ValueError(f"renormalised density range [{lo}, {hi}] not within [1/{c}, {c}]")
    t1 = deviation_table(phi, base_mu, radius)
    t2 = deviation_table(phi, mu2, radius)
    ratios = []
    for g, (_, s1) in t1.entries.items():
        if s1:
            ratios.append(math.sqrt(t2.entries[g][1] / s1))
    c1, c2 = lp_certificate(t1, p), lp_certificate(t2, p)
    rmin, rmax = min(ratios, default=1.0), max(ratios, default=1.0)
    fits = (None, None)
    try:
        fits = (decay_fit(t1), decay_fit(t2))
    except ValueError:
        pass
    return ComparableReport(
        c1, c2, rmin, rmax, (lo, hi), c1.verdict == c2.verdict,
        float(1 / c) <= rmin and rmax <= float(c), *fits,
    )

