"""Finite presentations, Cayley balls, hyperbolicity and small cancellation."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .words import (
    GeneratorSet,
    ParseError,
    Word,
    ball_words,
    inverse,
    is_cyclically_reduced,
    lcp,
    mul,
    reduce,
    rotations,
)


ALL_PAIRS_CAP = 6_000


class ElementaryGroupError(ValueError):
    """The group would be elementary (finite or virtually cyclic)."""


class RadiusInsufficient(ValueError):
    def __init__(self, message: str, required: int):
        super().__init__(f"{message} (radius insufficient: need radius >= {required})")
        self.required = required


@dataclass(frozen=True)
class GroupPresentation:
    generators: GeneratorSet
    relators: tuple[Word, ...] = ()

    def __post_init__(self):
        if self.generators.rank < 2:
            raise ElementaryGroupError(
                f"rank {self.generators.rank} presentation is elementary; need >= 2 generators"
            )
        for r in self.relators:
            self.generators.check(r)
            if not r:
                raise ParseError("empty relator")
            if not is_cyclically_reduced(r):
                raise ParseError(f"relator {r!r} is not freely and cyclically reduced")

    @classmethod
    def free(cls, n: int) -> "GroupPresentation":
        return cls(GeneratorSet.free(n))

    @property
    def is_free(self) -> bool:
        return not self.relators

    @property
    def max_relator_len(self) -> int:
        return max((len(r) for r in self.relators), default=0)

    def symmetrized(self) -> list[Word]:
        """All cyclic rotations of relators and their inverses, deduplicated."""
        out: list[Word] = []
        seen = set()
        for r in self.relators:
            for w in rotations(r) + rotations(inverse(r)):
                if w not in seen:
                    seen.add(w)
                    out.append(w)
        return out


def parse_presentation(text: str) -> GroupPresentation:
    gens = None
    rels: list[str] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, rest = line.partition(":")
        if not sep:
            raise ParseError(f"line {lineno}: expected 'key: value', got {line!r}")
        key = key.strip().lower()
        if key == "generators":
            if gens is not None:
                raise ParseError(f"line {lineno}: generators declared twice")
            gens = GeneratorSet(tuple(rest.split()))
        elif key == "relator":
            if gens is None:
                raise ParseError(f"line {lineno}: relator before generators line")
            raw = "".join(rest.split())
            gens.check(raw)
            rels.append(raw)
        else:
            raise ParseError(f"line {lineno}: unknown key {key!r}")
    if gens is None:
        raise ParseError("missing 'generators:' line")
    return GroupPresentation(gens, tuple(rels))


def load_presentation(path: str | Path) -> GroupPresentation:
    return parse_presentation(Path(path).read_text(encoding="utf-8"))


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        p = self.parent
        root = i
        while p[root] != root:
            root = p[root]
        while p[i] != root:
            p[i], i = root, p[i]
        return root

    def union(self, i: int, j: int) -> bool:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        # smaller index (shortlex-earlier word) stays the root
        if rj < ri:
            ri, rj = rj, ri
        self.parent[rj] = ri
        return True


@dataclass
class CayleyBall:
    """Group elements of length <= radius with right-multiplication adjacency.

    ``elements`` are shortlex-minimal canonical words; ``neighbors[i][j]`` is the
    index of ``elements[i] * alphabet[j]`` or -1 when it leaves the ball.
    """

    presentation: GroupPresentation
    radius: int
    elements: list[Word]
    neighbors: np.ndarray
    _free_index: dict[Word, int] = field(repr=False)
    _dist: np.ndarray | None = field(default=None, repr=False)

    @property
    def certified_radius(self) -> int:
        return self.radius - self.presentation.max_relator_len

    @property
    def lengths(self) -> np.ndarray:
        return np.array([len(w) for w in self.elements], dtype=np.int64)

    @property
    def sphere_sizes(self) -> list[int]:
        sizes = [0] * (self.radius + 1)
        for w in self.elements:
            sizes[len(w)] += 1
        return sizes

    def __len__(self) -> int:
        return len(self.elements)

    def index(self, w: Word) -> int:
        """Index of the group element represented by a (possibly unreduced) word."""
        r = reduce(w, self.presentation.generators)
        try:
            return self._free_index[r]
        except KeyError:
            raise RadiusInsufficient(f"word {w!r} not in ball of radius {self.radius}", len(r)) from None

    def __contains__(self, w: Word) -> bool:
        return reduce(w, self.presentation.generators) in self._free_index

    def adjacency_matrix(self) -> csr_matrix:
        rows, cols = np.nonzero(self.neighbors >= 0)
        tgt = self.neighbors[rows, cols]
        n = len(self.elements)
        return csr_matrix((np.ones(len(rows)), (rows, tgt)), shape=(n, n))

    def distances(self, cap: int = ALL_PAIRS_CAP) -> np.ndarray:
        """All-pairs graph distances inside the ball (BFS; -1 if disconnected)."""
        if self._dist is None:
            if len(self) > cap:
                raise MemoryError(f"all-pairs distances for {len(self)} elements exceed cap {cap}")
            d = shortest_path(self.adjacency_matrix(), method="D", unweighted=True, directed=False)
            d[np.isinf(d)] = -1
            self._dist = d.astype(np.int64)
        return self._dist

    def distances_from(self, i: int) -> np.ndarray:
        """Single-source graph distances from element index i (-1 if unreachable)."""
        if self._dist is not None:
            return self._dist[i]
        d = shortest_path(self.adjacency_matrix(), method="D", unweighted=True, directed=False, indices=i)
        d[np.isinf(d)] = -1
        return d.astype(np.int64)

    def ball_distance(self, x: Word, y: Word) -> int:
        i, j = self.index(x), self.index(y)
        if self.presentation.is_free:
            return len(mul(inverse(self.elements[i]), self.elements[j]))
        return int(self.distances_from(i)[j])


def cayley_ball(p: GroupPresentation, radius: int) -> CayleyBall:
    """Build the ball by relator-rewriting closure on the free ball.

    For relator-free presentations this is the free ball itself. Otherwise free
    words ``w`` and ``w*rho`` (rho a rotation of a relator or its inverse) are
    identified whenever both lie in the free ball, and the identification is
    closed under right multiplication by generators. Every identification is a
    true group equality; completeness is only claimed up to
    ``certified_radius``.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    gens = p.generators
    alpha = gens.alphabet
    words = ball_words(gens, radius)
    idx = {w: i for i, w in enumerate(words)}
    nbr_free = np.full((len(words), len(alpha)), -1, dtype=np.int64)
    for i, w in enumerate(words):
        for j, x in enumerate(alpha):
            u = mul(w, x)
            if len(u) <= radius:
                nbr_free[i, j] = idx[u]

    if p.is_free:
        return CayleyBall(p, radius, words, nbr_free, idx)

    uf = _UnionFind(len(words))
    sym = p.symmetrized()
    for i, w in enumerate(words):
        for rho in sym:
            u = mul(w, rho)
            if len(u) <= radius:
                uf.union(i, idx[u])

    # congruence closure: members of one class must have equal x-neighbours
    changed = True
    while changed:
        changed = False
        target: dict[tuple[int, int], int] = {}
        for i in range(len(words)):
            ri = uf.find(i)
            for j in range(len(alpha)):
                t = nbr_free[i, j]
                if t < 0:
                    continue
                key = (ri, j)
                prev = target.get(key)
                if prev is None:
                    target[key] = uf.find(t)
                elif uf.union(prev, t):
                    changed = True
                    target[key] = uf.find(prev)

    roots = sorted({uf.find(i) for i in range(len(words))})
    # root is the smallest index in its class, i.e. the shortlex-minimal word
    cls_of = {r: k for k, r in enumerate(roots)}
    elements = [words[r] for r in roots]
    free_index = {w: cls_of[uf.find(i)] for i, w in enumerate(words)}
    nbr = np.full((len(elements), len(alpha)), -1, dtype=np.int64)
    for i in range(len(words)):
        c = cls_of[uf.find(i)]
        for j in range(len(alpha)):
            t = nbr_free[i, j]
            if t >= 0:
                nbr[c, j] = cls_of[uf.find(t)]
    return CayleyBall(p, radius, elements, nbr, free_index)


def _certified_distance(ball: CayleyBall, u: Word, v: Word) -> int:
    i, j = ball.index(u), ball.index(v)
    lu, lv = len(ball.elements[i]), len(ball.elements[j])
    d = int(ball.distances_from(i)[j])
    if d < 0:
        raise RadiusInsufficient(f"no path between {u!r} and {v!r} inside the ball", ball.radius + 1)
    # a geodesic from u to v stays within radius (|u|+|v|+d)/2 of the identity
    need = math.ceil((lu + lv + d) / 2)
    if need > ball.certified_radius:
        raise RadiusInsufficient(
            f"distance {u!r}->{v!r} not certified", need + ball.presentation.max_relator_len
        )
    return d


def gromov_product(
    x: Word,
    y: Word,
    o: Word = "",
    presentation: GroupPresentation | None = None,
    ball: CayleyBall | None = None,
) -> Fraction:
    """(x,y)_o = (d(o,x) + d(o,y) - d(x,y)) / 2.

    Free groups use word lengths of reduced quotients directly; other
    presentations need a ball and only certified distances are used.
    """
    p = presentation or (ball.presentation if ball is not None else None)
    if p is None or p.is_free:
        gens = p.generators if p is not None else None
        x, y, o = (reduce(w, gens) for w in (x, y, o))

        def dist(u, v):
            return len(mul(inverse(u), v))
    else:
        if ball is None:
            raise ValueError("non-free presentation needs a CayleyBall")

        def dist(u, v):
            return _certified_distance(ball, u, v)

    return Fraction(dist(o, x) + dist(o, y) - dist(x, y), 2)


def _twice_products(ball: CayleyBall, o_idx: int) -> np.ndarray:
    n = len(ball)
    if ball.presentation.is_free:
        # tree metric straight from canonical words
        o = ball.elements[o_idx]
        shifted = [mul(inverse(o), w) for w in ball.elements]
        d_o = np.array([len(w) for w in shifted], dtype=np.int64)
        lcps = np.empty((n, n), dtype=np.int64)
        for i, u in enumerate(shifted):
            lcps[i] = [lcp(u, v) for v in shifted]
        return 2 * lcps
    d = ball.distances()
    if (d < 0).any():
        raise RadiusInsufficient("ball graph is disconnected", ball.radius + 1)
    d_o = d[o_idx]
    return d_o[:, None] + d_o[None, :] - d


def check_hyperbolicity(ball: CayleyBall, o: Word = "", threads: int = 1) -> Fraction:
    """Smallest delta with (x,y)_o >= min((x,z)_o, (y,z)_o) - delta on the ball."""
    if len(ball) == 0:
        raise ValueError("empty ball")
    if o not in ball:
        raise ValueError(f"basepoint {o!r} is outside the ball")
    g2 = _twice_products(ball, ball.index(o)).astype(np.int32)
    n = len(ball)

    def chunk(zs: range) -> int:
        best = 0
        for z in zs:
            col = g2[:, z]
            best = max(best, int((np.minimum(col[:, None], col[None, :]) - g2).max()))
        return best

    threads = max(1, threads)
    step = math.ceil(n / threads)
    parts = [range(s, min(n, s + step)) for s in range(0, n, step)]
    if threads == 1:
        best = max(chunk(r) for r in parts)
    else:
        with ThreadPoolExecutor(threads) as ex:
            best = max(ex.map(chunk, parts))
    return Fraction(best, 2)


@dataclass(frozen=True)
class SmallCancellationReport:
    pieces: list[tuple[Word, int]]
    max_piece_len: int
    min_relator_len: int
    passes_C16: bool
    delta_bound: int
    kappa: float
    euler_char: int
    free_group_warning: bool = False

    def to_dict(self) -> dict:
        return {
            "pieces": [{"piece": w, "length": k} for w, k in self.pieces],
            "max_piece_len": self.max_piece_len,
            "min_relator_len": self.min_relator_len,
            "passes_C16": self.passes_C16,
            "delta_bound": self.delta_bound,
            "kappa": self.kappa,
            "euler_char": self.euler_char,
            "free_group_warning": self.free_group_warning,
        }


def check_small_cancellation(p: GroupPresentation) -> SmallCancellationReport:
    n_gen, n_rel = p.generators.rank, len(p.relators)
    euler = 1 - n_gen + n_rel
    if not p.relators:
        warnings.warn("no relators: free group, C'(1/6) holds vacuously", stacklevel=2)
        return SmallCancellationReport([], 0, 0, True, 0, 0.0, euler, True)
    sym = p.symmetrized()
    found: dict[Word, int] = {}
    for i, u in enumerate(sym):
        for v in sym[i + 1:]:
            k = lcp(u, v)
            if k:
                found.setdefault(u[:k], k)
    pieces = sorted(found.items(), key=lambda t: (-t[1], t[0]))
    max_piece = max((k for _, k in pieces), default=0)
    min_len = min(len(r) for r in p.relators)
    max_len = p.max_relator_len
    return SmallCancellationReport(
        pieces=pieces,
        max_piece_len=max_piece,
        min_relator_len=min_len,
        passes_C16=6 * max_piece < min_len,
        delta_bound=3 * max_len,
        kappa=15 * math.log(2 * n_gen - 1) * max_len,
        euler_char=euler,
    )


def growth_counts(ball: CayleyBall) -> list[int]:
    """Cumulative ball sizes m_0..m_R."""
    out, total = [], 0
    for s in ball.sphere_sizes:
        total += s
        out.append(total)
    return out


def free_growth_counts(n: int, radius: int) -> list[int]:
    """Closed form m_k = 1 + n((2n-1)^k - 1)/(n-1) for the free group F_n."""
    return [1 + (n * ((2 * n - 1) ** k - 1)) // (n - 1) for k in range(radius + 1)]


@dataclass(frozen=True)
class EntropyFit:
    rate: float
    intercept: float
    residual: float
    radii: tuple[int, ...]


def entropy_estimate(counts: Sequence[int]) -> EntropyFit:
    """Least-squares slope of ln m_k over the upper half of the radii."""
    if len(counts) < 3:
        raise ValueError("need at least 3 growth counts")
    R = len(counts) - 1
    ks = list(range(R // 2, R + 1))
    if len(ks) < 2:
        ks = list(range(R + 1))
    x = np.array(ks, dtype=float)
    y = np.log(np.array([counts[k] for k in ks], dtype=float))
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return EntropyFit(float(coef[0]), float(coef[1]), resid, tuple(ks))
