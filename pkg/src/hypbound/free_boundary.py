"""Exact cylinder-set model of the boundary of the free group F_n.

Boundary points are never materialised: measures and step functions live on
the partition of the boundary into depth-k cylinders (reduced prefixes of
length k), with exact rational weights.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .words import GeneratorSet, Word, cancellation, inv_letter, inverse, lcp, mul, reduce, words_of_length


class RefinementError(ValueError):
    """A computation needs a deeper cylinder partition."""


def _gens(n: int) -> GeneratorSet:
    if n < 2:
        raise ValueError(f"F_{n} is elementary; need rank n >= 2")
    return GeneratorSet.free(n)


def cylinders(n: int, k: int) -> list[Word]:
    """Depth-k cylinder prefixes, shortlex."""
    return list(words_of_length(_gens(n), k))


def uniform_mass(n: int, prefix: Word) -> Fraction:
    if not prefix:
        return Fraction(1)
    return Fraction(1, 2 * n * (2 * n - 1) ** (len(prefix) - 1))


def parse_rational(s: str | int | Fraction) -> Fraction:
    if isinstance(s, (int, Fraction)):
        return Fraction(s)
    return Fraction(s.strip())


def format_rational(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class Cylinder:
    prefix: Word

    def __post_init__(self):
        if not self.prefix or reduce(self.prefix) != self.prefix:
            raise ValueError(f"cylinder prefix must be a nonempty reduced word, got {self.prefix!r}")

    @property
    def depth(self) -> int:
        return len(self.prefix)


@dataclass(frozen=True)
class ComplexQ:
    """Exact complex rational."""

    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)

    @classmethod
    def of(cls, v) -> "ComplexQ":
        if isinstance(v, ComplexQ):
            return v
        if isinstance(v, Mapping):
            return cls(parse_rational(v.get("re", 0)), parse_rational(v.get("im", 0)))
        return cls(parse_rational(v))

    def __add__(self, o):
        o = ComplexQ.of(o)
        return ComplexQ(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, o):
        o = ComplexQ.of(o)
        return ComplexQ(self.re - o.re, self.im - o.im)

    def __mul__(self, o):
        o = ComplexQ.of(o)
        return ComplexQ(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def conj(self) -> "ComplexQ":
        return ComplexQ(self.re, -self.im)

    def abs2(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __eq__(self, o):
        try:
            o = ComplexQ.of(o)
        except (TypeError, ValueError):
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def to_json(self):
        if self.im == 0:
            return format_rational(self.re)
        return {"re": format_rational(self.re), "im": format_rational(self.im)}


class CylinderMeasure:
    """Finite measure given by exact weights on the depth-k cylinders.

    Below depth k the measure is split like the uniform measure, so the mass of
    any cylinder is defined exactly.
    """

    def __init__(self, n: int, depth: int, weights: Mapping[Word, Fraction]):
        _gens(n)
        self.n = n
        self.depth = depth
        cells = cylinders(n, depth) if depth > 0 else [""]
        missing = set(cells) - set(weights)
        extra = set(weights) - set(cells)
        if missing or extra:
            raise ValueError(f"weights must cover exactly the depth-{depth} cylinders")
        self.weights = {w: Fraction(weights[w]) for w in cells}
        if any(v < 0 for v in self.weights.values()):
            raise ValueError("negative weight")
        self._sums: dict[Word, Fraction] = dict(self.weights)
        for k in range(depth - 1, -1, -1):
            for w, v in list(self._sums.items()):
                if len(w) == k + 1:
                    self._sums[w[:-1]] = self._sums.get(w[:-1], Fraction(0)) + v

    @property
    def total(self) -> Fraction:
        return self._sums[""]

    def mass(self, prefix: Word) -> Fraction:
        if len(prefix) <= self.depth:
            return self._sums[prefix]
        head = prefix[: self.depth]
        return self._sums[head] * uniform_mass(self.n, prefix) / uniform_mass(self.n, head)

    def refine(self, k: int) -> "CylinderMeasure":
        if k < self.depth:
            raise RefinementError(f"cannot coarsen depth {self.depth} to {k}")
        return CylinderMeasure(self.n, k, {w: self.mass(w) for w in cylinders(self.n, k)})

    def density(self) -> dict[Word, Fraction]:
        """Radon-Nikodym derivative w.r.t. the uniform measure, per cylinder."""
        return {w: v / uniform_mass(self.n, w) for w, v in self.weights.items()}

    def normalized(self) -> "CylinderMeasure":
        t = self.total
        return CylinderMeasure(self.n, self.depth, {w: v / t for w, v in self.weights.items()})

    def __eq__(self, other):
        if not isinstance(other, CylinderMeasure) or other.n != self.n:
            return NotImplemented
        k = max(self.depth, other.depth)
        return all(self.mass(w) == other.mass(w) for w in cylinders(self.n, k))

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "depth": self.depth,
            "entries": [{"prefix": w, "value": format_rational(v)} for w, v in self.weights.items()],
        }

    @classmethod
    def from_json(cls, data: dict | str) -> "CylinderMeasure":
        if isinstance(data, str):
            data = json.loads(data)
        w = {e["prefix"]: parse_rational(e["value"]) for e in data["entries"]}
        return cls(int(data["n"]), int(data["depth"]), w)


def ps_measure(n: int, k: int = 1) -> CylinderMeasure:
    """Uniform (Patterson-Sullivan) probability measure on depth-k cylinders."""
    if k < 1:
        raise ValueError("depth must be >= 1")
    return CylinderMeasure(n, k, {w: uniform_mass(n, w) for w in cylinders(n, k)})


def density_measure(n: int, density: Mapping[Word, Fraction], normalize: bool = True) -> CylinderMeasure:
    """Measure with the given per-cylinder density relative to the uniform one."""
    depth = {len(w) for w in density}
    if len(depth) != 1:
        raise ValueError("density prefixes must share one depth")
    (k,) = depth
    m = CylinderMeasure(n, k, {w: Fraction(d) * uniform_mass(n, w) for w, d in density.items()})
    return m.normalized() if normalize else m


@dataclass
class StepFunction:
    """Complex function constant on each depth-k cylinder."""

    n: int
    depth: int
    values: dict[Word, ComplexQ] = field(default_factory=dict)

    def __post_init__(self):
        cells = cylinders(self.n, self.depth) if self.depth > 0 else [""]
        unknown = set(self.values) - set(cells)
        if unknown:
            raise ValueError(f"prefixes {sorted(unknown)} are not depth-{self.depth} cylinders")
        self.values = {w: ComplexQ.of(self.values.get(w, 0)) for w in cells}

    @classmethod
    def constant(cls, n: int, c=1, depth: int = 1) -> "StepFunction":
        return cls(n, depth, {w: ComplexQ.of(c) for w in cylinders(n, depth)})

    @classmethod
    def indicator(cls, n: int, prefix: Word) -> "StepFunction":
        k = len(prefix)
        return cls(n, k, {w: ComplexQ.of(1 if w == prefix else 0) for w in cylinders(n, k)})

    def __call__(self, point_prefix: Word) -> ComplexQ:
        """Value at any boundary point starting with ``point_prefix``."""
        if len(point_prefix) < self.depth:
            raise RefinementError(f"point prefix {point_prefix!r} shorter than depth {self.depth}")
        return self.values[point_prefix[: self.depth]]

    @property
    def is_real(self) -> bool:
        return all(v.im == 0 for v in self.values.values())

    def refine(self, k: int) -> "StepFunction":
        if k < self.depth:
            raise RefinementError(f"cannot coarsen depth {self.depth} to {k}")
        return StepFunction(self.n, k, {w: self(w) for w in cylinders(self.n, k)})

    def map(self, f) -> "StepFunction":
        return StepFunction(self.n, self.depth, {w: f(v) for w, v in self.values.items()})

    def abs2(self) -> "StepFunction":
        return self.map(lambda v: ComplexQ(v.abs2()))

    def __add__(self, other):
        if isinstance(other, StepFunction):
            k = max(self.depth, other.depth)
            a, b = self.refine(k), other.refine(k)
            return StepFunction(self.n, k, {w: a.values[w] + b.values[w] for w in a.values})
        return self.map(lambda v: v + other)

    def __mul__(self, other):
        if isinstance(other, StepFunction):
            k = max(self.depth, other.depth)
            a, b = self.refine(k), other.refine(k)
            return StepFunction(self.n, k, {w: a.values[w] * b.values[w] for w in a.values})
        return self.map(lambda v: v * other)

    def translate(self, g: Word) -> "StepFunction":
        """g.phi, i.e. xi -> phi(g^-1 xi), at depth depth + |g|."""
        g = reduce(g)
        gi = inverse(g)
        k = self.depth + len(g)
        return StepFunction(self.n, k, {v: self(mul(gi, v)) for v in cylinders(self.n, k)})

    def is_constant(self) -> bool:
        return len(set(self.values.values())) <= 1

    def integral(self, m: CylinderMeasure) -> ComplexQ:
        total = ComplexQ()
        for w, v in self.values.items():
            total = total + v * m.mass(w)
        return total

    def lipschitz_norm(self, epsilon: float) -> float:
        """max |phi(C) - phi(C')| / d_eps over distinct cylinder pairs."""
        best = 0.0
        items = list(self.values.items())
        for i, (u, a) in enumerate(items):
            for v, b in items[i + 1:]:
                diff = (a - b).abs2()
                if diff:
                    best = max(best, math.sqrt(diff) * math.exp(epsilon * lcp(u, v)))
        return best

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "depth": self.depth,
            "entries": [{"prefix": w, "value": v.to_json()} for w, v in self.values.items()],
        }

    @classmethod
    def from_json(cls, data: dict | str) -> "StepFunction":
        if isinstance(data, str):
            data = json.loads(data)
        vals = {e["prefix"]: ComplexQ.of(e["value"]) for e in data["entries"]}
        return cls(int(data["n"]), int(data["depth"]), vals)


@dataclass(frozen=True)
class VisualParams:
    epsilon: float
    entropy: float
    hausdorff_dim: float
    # epsilon / entropy as an exact rational when known
    ratio: Fraction | None = None

    @classmethod
    def for_free_group(cls, n: int, epsilon: float | None = None, ratio: Fraction | None = None):
        """Either ``epsilon`` directly or ``ratio`` = epsilon / ln(2n-1) exactly."""
        e = math.log(2 * n - 1)
        if ratio is not None:
            ratio = Fraction(ratio)
            epsilon = float(ratio) * e
        if epsilon is None or epsilon <= 0:
            raise ValueError("epsilon must be positive")
        return cls(epsilon, e, e / epsilon, ratio)


@dataclass(frozen=True)
class BoundaryProduct:
    value: int
    resolved: bool


def boundary_gromov_product(c1: Cylinder | Word, c2: Cylinder | Word) -> BoundaryProduct:
    u = c1.prefix if isinstance(c1, Cylinder) else c1
    v = c2.prefix if isinstance(c2, Cylinder) else c2
    k = lcp(u, v)
    return BoundaryProduct(k, k < min(len(u), len(v)))


@dataclass(frozen=True)
class VisualDistance:
    value: float
    upper_bound: bool = False


def visual_distance(c1: Cylinder | Word, c2: Cylinder | Word, vp: VisualParams) -> VisualDistance:
    u = c1.prefix if isinstance(c1, Cylinder) else c1
    v = c2.prefix if isinstance(c2, Cylinder) else c2
    if u == v:
        return VisualDistance(math.exp(-vp.epsilon * len(u)), upper_bound=True)
    gp = boundary_gromov_product(u, v)
    if not gp.resolved:
        raise RefinementError(f"cylinders {u!r} and {v!r} are nested; refine to separate them")
    return VisualDistance(math.exp(-vp.epsilon * gp.value))


def preimage_mass(m: CylinderMeasure, g: Word, prefix: Word) -> Fraction:
    """m(g^-1 . C(prefix)), i.e. the g_* m mass of the cylinder C(prefix)."""
    h = inverse(reduce(g))
    if not prefix:
        return m.total
    c = cancellation(h, prefix)
    if c < len(prefix):
        return m.mass(mul(h, prefix))
    # prefix fully absorbed: h.C(w) is the complement of h''.C(y)
    rest = h[: len(h) - len(prefix)]
    y = inv_letter(prefix[-1])
    return m.total - m.mass(rest + y)


def pushforward(g: Word, m: CylinderMeasure) -> CylinderMeasure:
    g = reduce(g)
    k = m.depth + len(g)
    return CylinderMeasure(m.n, k, {w: preimage_mass(m, g, w) for w in cylinders(m.n, k)})


def ahlfors_check(
    n: int, vp: VisualParams, K: int, measure: CylinderMeasure | None = None
) -> tuple[Fraction, Fraction]:
    """Min/max of mu(B_r) / r^D over cylinder balls of depth 1..K.

    Balls of radius exp(-eps k) are depth-k cylinders and r^D = (2n-1)^-k
    exactly because eps * D is the entropy ln(2n-1).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    m = measure or ps_measure(n, 1)
    ratios = [m.mass(w) * (2 * n - 1) ** k for k in range(1, K + 1) for w in cylinders(n, k)]
    return min(ratios), max(ratios)


def collision_masses(m: CylinderMeasure, g: Word, up_to: int) -> list[Fraction]:
    """S_j = sum over depth-j cylinders C of (g_* m)(C)^2, j = 0..up_to."""
    out = [m.total ** 2]
    for j in range(1, up_to + 1):
        out.append(sum(preimage_mass(m, g, w) ** 2 for w in cylinders(m.n, j)))
    return out


def exact_double_integral(
    n: int, g: Word, epsilon: float, alpha: float = 1.0, measure: CylinderMeasure | None = None
) -> float:
    """Iint exp(-eps (g xi, g xi'))^(2 alpha) dmu dmu with a closed-form tail.

    P[(g xi, g xi') >= j] = S_j; beyond depth(mu) + |g| each cylinder splits
    uniformly so S_{j+1} = S_j / (2n-1) and the tail is geometric.
    """
    m = measure or ps_measure(n, 1)
    g = reduce(g)
    M = m.depth + len(g) + 1
    S = collision_masses(m, g, M)
    q = 2 * n - 1
    w = math.exp(-2 * alpha * epsilon)
    val = sum(float(S[j] - S[j + 1]) * w**j for j in range(M))
    val += float(S[M]) * (1 - 1 / q) * w**M / (1 - w / q)
    return val


def exact_single_integral(
    n: int, g: Word, h: Word, epsilon: float, measure: CylinderMeasure | None = None, tol: float = 1e-13
) -> float:
    """Int exp(-eps (g xi, h xi)) dmu(xi) by adaptive cylinder refinement.

    On a cylinder C(v) with |v| > max(|g|,|h|) the product equals
    lcp(gv, hv) unless one translate is a prefix of the other; only those
    cylinders are refined. The unresolved remainder is bounded by its mass.
    """
    m = measure or ps_measure(n, 1)
    g, h = reduce(g), reduce(h)
    if g == h:
        return 0.0
    start = max(len(g), len(h)) + 1
    total = 0.0
    frontier = cylinders(n, start)
    depth = start
    while frontier:
        nxt = []
        for v in frontier:
            a, b = mul(g, v), mul(h, v)
            k = lcp(a, b)
            if k < min(len(a), len(b)):
                total += float(m.mass(v)) * math.exp(-epsilon * k)
            else:
                nxt.append(v)
        pending = sum(float(m.mass(v)) for v in nxt)
        if pending < tol or depth > 200:
            return total + pending * math.exp(-epsilon * depth)
        frontier = [v + x for v in nxt for x in _gens(n).alphabet if x != inv_letter(v[-1])]
        depth += 1
    return total


def density_ratio_bounds(m: CylinderMeasure, g: Word) -> tuple[Fraction, Fraction]:
    """Min/max of d(g_* m)/dm over the refined partition."""
    pm = pushforward(g, m)
    ratios = [pm.mass(w) / m.mass(w) for w in pm.weights if m.mass(w)]
    return min(ratios), max(ratios)

