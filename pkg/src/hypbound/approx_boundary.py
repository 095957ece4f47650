"""Sphere proxies for the boundary of a finitely presented hyperbolic group.

The boundary measure is replaced by the uniform measure on the words of
length exactly R (the R-sphere). Everything here is a heuristic proxy except
on free groups, where cylinder masses of depth <= R are reproduced exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .free_boundary import preimage_mass, ps_measure
from .presentations import CayleyBall, GroupPresentation, RadiusInsufficient, cayley_ball, check_small_cancellation
from .words import Word, lcp, mul, reduce, words_of_length

BATCH = 10_000


def default_epsilon(p: GroupPresentation) -> float:
    if p.is_free:
        return math.log(2 * p.generators.rank - 1) / 4
    return 1 / (5 * check_small_cancellation(p).delta_bound)


@dataclass
class SphereBoundaryModel:
    presentation: GroupPresentation
    sphere_radius: int
    epsilon: float
    seed: int = 0
    ball: CayleyBall | None = None
    _pred: list[list[int]] | None = field(default=None, repr=False)

    @classmethod
    def build(cls, p: GroupPresentation, sphere_radius: int, ball_radius: int | None = None,
              epsilon: float | None = None, seed: int = 0) -> "SphereBoundaryModel":
        eps = default_epsilon(p) if epsilon is None else epsilon
        ball = None
        if not p.is_free:
            ball = cayley_ball(p, ball_radius if ball_radius is not None else sphere_radius)
        return cls(p, sphere_radius, eps, seed, ball)

    @property
    def is_free(self) -> bool:
        return self.presentation.is_free

    @property
    def reach(self) -> int:
        """Longest translating word the model can absorb."""
        if self.ball is None:
            return 10**9
        return self.ball.radius - self.sphere_radius

    def sphere(self) -> list[Word]:
        if self.ball is None:
            return list(words_of_length(self.presentation.generators, self.sphere_radius))
        return [w for w in self.ball.elements if len(w) == self.sphere_radius]

    def sample(self, rng: np.random.Generator, size: int) -> list[Word]:
        if self.ball is None:
            alpha = self.presentation.generators.alphabet
            n2 = len(alpha)
            first = rng.integers(0, n2, size)
            steps = rng.integers(1, n2, (size, max(self.sphere_radius - 1, 0)))
            out = []
            for f, st in zip(first, steps):
                cur = [int(f)]
                for s in st:
                    # skip the inverse of the previous letter (alphabet pairs x, X)
                    back = cur[-1] ^ 1
                    cur.append((back + int(s)) % n2)
                out.append("".join(alpha[c] for c in cur[: self.sphere_radius]))
            return out
        pts = self.sphere()
        return [pts[i] for i in rng.integers(0, len(pts), size)]

    def translate(self, g: Word, x: Word) -> Word:
        """Canonical form of g*x."""
        if len(reduce(g)) > self.reach:
            raise RadiusInsufficient(f"cannot translate sphere by {g!r}", self.sphere_radius + len(g))
        w = mul(reduce(g), x)
        if self.ball is None:
            return w
        return self.ball.elements[self.ball.index(w)]

    def _ancestors(self):
        if self._pred is None:
            b = self.ball
            lengths = b.lengths
            pred = [[] for _ in range(len(b))]
            for i in range(len(b)):
                for j in b.neighbors[i]:
                    if j >= 0 and lengths[j] == lengths[i] - 1:
                        pred[i].append(int(j))
            self._pred = pred

        pred = self._pred

        @lru_cache(maxsize=None)
        def levels(i: int) -> tuple[frozenset, ...]:
            """levels(i)[t] = elements at distance t from e on some geodesic e -> i."""
            if not pred[i]:
                return (frozenset([i]),)
            merged: list[set] = []
            for j in pred[i]:
                for t, s in enumerate(levels(j)):
                    if t == len(merged):
                        merged.append(set())
                    merged[t] |= s
            return tuple(frozenset(s) for s in merged) + (frozenset([i]),)

        return levels

    def gromov(self, x: Word, y: Word) -> float:
        """(x,y)_e; on non-free balls the deepest common geodesic ancestor level."""
        if self.ball is None:
            return lcp(x, y)
        if x == y:
            return len(x)
        if not hasattr(self, "_levels"):
            self._levels = self._ancestors()
        lx = self._levels(self.ball.index(x))
        ly = self._levels(self.ball.index(y))
        for t in range(min(len(lx), len(ly)) - 1, -1, -1):
            if lx[t] & ly[t]:
                return t
        return 0

    def distance(self, x: Word, y: Word, alpha: float = 1.0) -> float:
        return math.exp(-alpha * self.epsilon * self.gromov(x, y))


@dataclass
class MCEstimate:
    value: float
    stderr: float
    ratio: float
    samples: int
    seed: int
    mode: str = "monte-carlo"
    label: str = "heuristic proxy"

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _stream(model: SphereBoundaryModel, N: int, draw) -> tuple[float, float]:
    """Batched sampling with per-batch seeds (seed, batch index); returns mean, stderr."""
    count, mean, m2 = 0, 0.0, 0.0
    for b, start in enumerate(range(0, N, BATCH)):
        size = min(BATCH, N - start)
        rng = np.random.default_rng(np.random.SeedSequence([model.seed, b]))
        vals = np.asarray(draw(rng, size), dtype=float)
        bm, bv = float(vals.mean()), float(vals.var())
        delta = bm - mean
        tot = count + size
        mean += delta * size / tot
        m2 += bv * size + delta**2 * count * size / tot
        count = tot
    var = m2 / (count - 1) if count > 1 else 0.0
    return mean, math.sqrt(var / count)


def double_integral_estimate(model: SphereBoundaryModel, g: Word, N: int, alpha: float = 1.0) -> MCEstimate:
    """Mean of d_eps(g xi, g xi')^(2 alpha) over sampled proxy pairs."""
    g = reduce(g)

    def draw(rng, size):
        xs, ys = model.sample(rng, size), model.sample(rng, size)
        return [model.distance(model.translate(g, x), model.translate(g, y), alpha) ** 2 for x, y in zip(xs, ys)]

    mean, se = _stream(model, N, draw)
    ratio = math.sqrt(mean) / math.exp(-alpha * model.epsilon * len(g))
    return MCEstimate(mean, se, ratio, N, model.seed)


def single_integral_estimate(model: SphereBoundaryModel, g: Word, h: Word, N: int, alpha: float = 1.0) -> MCEstimate:
    """Mean of d_eps(g xi, h xi)^alpha; ratio against exp(-eps (g,h)_e)."""
    g, h = reduce(g), reduce(h)

    def draw(rng, size):
        if g == h:
            return np.zeros(size)
        xs = model.sample(rng, size)
        return [model.distance(model.translate(g, x), model.translate(h, x), alpha) for x in xs]

    mean, se = _stream(model, N, draw)
    gp = model.gromov(model.translate("", g), model.translate("", h))
    ratio = mean / math.exp(-alpha * model.epsilon * gp)
    return MCEstimate(mean, se, ratio, N, model.seed)


def convergence_scan(model: SphereBoundaryModel, ray: Sequence[Word], max_points: int = 20_000) -> list[float]:
    """Largest proxy mass of a ball of radius exp(-eps k/2) after pushing by g_k."""
    pts = model.sphere()
    if len(pts) > max_points:
        rng = np.random.default_rng(np.random.SeedSequence([model.seed, 0]))
        pts = [pts[i] for i in rng.choice(len(pts), max_points, replace=False)]
    out = []
    for k, g in enumerate(ray, start=1):
        t = math.ceil(k / 2)
        moved = [model.translate(g, x) for x in pts]
        out.append(_max_ball_mass(model, moved, t) / len(moved))
    return out


def _max_ball_mass(model: SphereBoundaryModel, pts: list[Word], t: int) -> int:
    if model.ball is None:
        counts: dict[str, int] = {}
        for y in pts:
            key = y[:t] if len(y) >= t else "#" + y
            counts[key] = counts.get(key, 0) + 1
        return max(counts.values())
    if not hasattr(model, "_levels"):
        model._levels = model._ancestors()
    members: dict[int, set[int]] = {}
    anc = []
    for a, y in enumerate(pts):
        lv = model._levels(model.ball.index(y))
        zs = lv[t] if t < len(lv) else frozenset()
        anc.append(zs)
        for z in zs:
            members.setdefault(z, set()).add(a)
    best = 1
    for a, zs in enumerate(anc):
        if zs:
            best = max(best, len(set().union(*(members[z] for z in zs))))
    return best


def exact_concentration(n: int, g: Word, t: int) -> float:
    """max over depth-t cylinders C of (g_* mu)(C) for the uniform measure on the F_n boundary."""
    from .free_boundary import cylinders

    mu = ps_measure(n)
    return float(max(preimage_mass(mu, g, w) for w in cylinders(n, t)))


def bounded_verdict(ratios: Sequence[float], factor: float = 10.0) -> bool:
    """True when all ratios lie within one order of magnitude of each other."""
    r = [x for x in ratios if x > 0]
    return bool(r) and max(r) / min(r) <= factor
