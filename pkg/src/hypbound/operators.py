"""Truncated regular representations and K-cycle operators on F_n.

The Hilbert space is l^2(ball) (x) span{1_C / sqrt(mu(C)) : C a depth-k cylinder}.
Basis order: outer index = group word (shortlex over the ball), inner index =
cylinder prefix (shortlex). Operators are stored as dense blocks keyed by
(row group index, column group index); ``to_dense`` materialises the full
matrix up to a dimension cap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .free_boundary import ComplexQ, CylinderMeasure, RefinementError, StepFunction, cylinders, ps_measure
from .words import GeneratorSet, Word, ball_words, inverse, mul, reduce

DEFAULT_DIM_CAP = 6000
TOL_KER = 1e-6
TOL_GAP = 1e-3


@dataclass(frozen=True)
class TruncationSpec:
    n: int
    radius: int
    depth: int
    measure: CylinderMeasure | None = None

    def __post_init__(self):
        if self.depth < 1 or self.radius < 0:
            raise ValueError("need depth >= 1 and radius >= 0")

    @cached_property
    def words(self) -> list[Word]:
        return ball_words(GeneratorSet.free(self.n), self.radius)

    @cached_property
    def word_index(self) -> dict[Word, int]:
        return {w: i for i, w in enumerate(self.words)}

    @cached_property
    def cells(self) -> list[Word]:
        return cylinders(self.n, self.depth)

    @cached_property
    def mu(self) -> CylinderMeasure:
        return self.measure or ps_measure(self.n)

    @cached_property
    def constants_vector(self) -> np.ndarray:
        """Unit vector of the constant function 1 in the cylinder basis."""
        return np.sqrt(np.array([float(self.mu.mass(c)) for c in self.cells])) / math.sqrt(float(self.mu.total))

    @property
    def block_dim(self) -> int:
        return len(self.cells)

    @property
    def dim(self) -> int:
        return len(self.words) * self.block_dim

    def interior(self, reach: int) -> list[int]:
        """Group indices whose translates by words of length <= reach stay in the ball."""
        return [i for i, w in enumerate(self.words) if len(w) + reach <= self.radius]


class DenseOperator:
    """Block-stored dense operator on the truncated space."""

    def __init__(self, t: TruncationSpec, blocks: dict | None = None, boundary: Iterable[int] = ()):
        self.t = t
        self.blocks: dict[tuple[int, int], np.ndarray] = blocks or {}
        self.boundary = set(boundary)

    @property
    def dim(self) -> int:
        return self.t.dim

    def basis(self) -> list[tuple[Word, Word]]:
        return [(g, c) for g in self.t.words for c in self.t.cells]

    def _add_block(self, key, block):
        if key in self.blocks:
            self.blocks[key] = self.blocks[key] + block
        else:
            self.blocks[key] = block

    def __add__(self, other: "DenseOperator") -> "DenseOperator":
        out = DenseOperator(self.t, dict(self.blocks), self.boundary | other.boundary)
        for k, b in other.blocks.items():
            out._add_block(k, b)
        return out

    def __neg__(self) -> "DenseOperator":
        return DenseOperator(self.t, {k: -b for k, b in self.blocks.items()}, self.boundary)

    def __sub__(self, other: "DenseOperator") -> "DenseOperator":
        return self + (-other)

    def scale(self, c: complex) -> "DenseOperator":
        return DenseOperator(self.t, {k: c * b for k, b in self.blocks.items()}, self.boundary)

    def __matmul__(self, other: "DenseOperator") -> "DenseOperator":
        by_row: dict[int, list[tuple[int, np.ndarray]]] = {}
        for (i, j), b in other.blocks.items():
            by_row.setdefault(i, []).append((j, b))
        out = DenseOperator(self.t, {}, self.boundary | other.boundary)
        for (i, k), a in self.blocks.items():
            for j, b in by_row.get(k, ()):
                out._add_block((i, j), a @ b)
        return out

    def adjoint(self) -> "DenseOperator":
        return DenseOperator(self.t, {(j, i): b.conj().T for (i, j), b in self.blocks.items()}, self.boundary)

    def restrict(self, rows: Iterable[int] | None = None, cols: Iterable[int] | None = None) -> "DenseOperator":
        rs = None if rows is None else set(rows)
        cs = None if cols is None else set(cols)
        return DenseOperator(
            self.t,
            {
                (i, j): b
                for (i, j), b in self.blocks.items()
                if (rs is None or i in rs) and (cs is None or j in cs)
            },
            self.boundary,
        )

    def block(self, i: int, j: int) -> np.ndarray:
        d = self.t.block_dim
        return self.blocks.get((i, j), np.zeros((d, d), dtype=complex))

    def to_dense(self, cap: int = DEFAULT_DIM_CAP) -> np.ndarray:
        if self.dim > cap:
            raise MemoryError(f"dimension {self.dim} exceeds dense cap {cap}")
        d = self.t.block_dim
        M = np.zeros((self.dim, self.dim), dtype=complex)
        for (i, j), b in self.blocks.items():
            M[i * d:(i + 1) * d, j * d:(j + 1) * d] = b
        return M

    def max_abs_diff(self, other: "DenseOperator") -> float:
        keys = set(self.blocks) | set(other.blocks)
        return max((float(np.abs(self.block(*k) - other.block(*k)).max()) for k in keys), default=0.0)

    def singular_values(self) -> np.ndarray:
        """All singular values, descending, via SVD of each connected block component."""
        comps = _components(self.blocks)
        d = self.t.block_dim
        vals = []
        for rows, cols in comps:
            ri = {r: a for a, r in enumerate(rows)}
            ci = {c: a for a, c in enumerate(cols)}
            M = np.zeros((len(rows) * d, len(cols) * d), dtype=complex)
            for (i, j), b in self.blocks.items():
                if i in ri and j in ci:
                    M[ri[i] * d:(ri[i] + 1) * d, ci[j] * d:(ci[j] + 1) * d] = b
            vals.append(np.linalg.svd(M, compute_uv=False))
        if not vals:
            return np.zeros(0)
        return np.sort(np.concatenate(vals))[::-1]


def _components(blocks: dict) -> list[tuple[list[int], list[int]]]:
    """Connected components of the bipartite row/column block graph."""
    parent: dict = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in blocks:
        a, b = find(("r", i)), find(("c", j))
        if a != b:
            parent[a] = b
    groups: dict = {}
    for i, j in blocks:
        root = find(("r", i))
        rows, cols = groups.setdefault(root, (set(), set()))
        rows.add(i)
        cols.add(j)
    return [(sorted(r), sorted(c)) for r, c in groups.values()]


@dataclass
class CrossedProductElement:
    """Finite sum of terms phi_g * g; ``phi=None`` stands for the constant 1."""

    terms: list[tuple[StepFunction | None, Word]] = field(default_factory=list)

    def __post_init__(self):
        merged: dict[Word, StepFunction | None] = {}
        for phi, g in self.terms:
            g = reduce(g)
            if g in merged:
                prev = merged[g]
                a = prev if prev is not None else _one_like(phi)
                b = phi if phi is not None else _one_like(prev)
                if a is None:
                    raise ValueError("cannot merge two constant terms without a rank; pass a StepFunction")
                merged[g] = a + b
            else:
                merged[g] = phi
        self.terms = [(phi, g) for g, phi in merged.items()]

    @classmethod
    def group(cls, g: Word) -> "CrossedProductElement":
        return cls([(None, g)])

    @classmethod
    def function(cls, phi: StepFunction) -> "CrossedProductElement":
        return cls([(phi, "")])

    @classmethod
    def identity(cls) -> "CrossedProductElement":
        return cls([(None, "")])

    @property
    def max_word_len(self) -> int:
        return max((len(g) for _, g in self.terms), default=0)

    @property
    def max_depth(self) -> int:
        return max((phi.depth for phi, _ in self.terms if phi is not None), default=0)

    def adjoint(self) -> "CrossedProductElement":
        out = []
        for phi, g in self.terms:
            gi = inverse(g)
            out.append((None if phi is None else phi.map(ComplexQ.conj).translate(gi), gi))
        return CrossedProductElement(out)

    def __mul__(self, other: "CrossedProductElement") -> "CrossedProductElement":
        out = []
        for phi, g in self.terms:
            for psi, h in other.terms:
                moved = None if psi is None else psi.translate(g)
                if phi is None:
                    f = moved
                elif moved is None:
                    f = phi
                else:
                    f = phi * moved
                out.append((f, mul(g, h)))
        return CrossedProductElement(out)


def _one_like(phi: StepFunction | None) -> StepFunction | None:
    return None if phi is None else StepFunction.constant(phi.n, 1, 1)


def _pullback_diag(phi: StepFunction | None, x: Word, t: TruncationSpec) -> np.ndarray:
    """Diagonal of multiplication by xi -> phi(x xi) in the cylinder basis."""
    if phi is None:
        return np.ones(t.block_dim, dtype=complex)
    if t.depth < phi.depth + len(x):
        raise RefinementError(f"depth {t.depth} < {phi.depth} + |{x}|; refine the truncation")
    return np.array([complex(phi(mul(x, c))) for c in t.cells])


def build_lambda(a: CrossedProductElement, t: TruncationSpec) -> DenseOperator:
    """lambda_mu(phi g): delta_h (x) psi -> delta_{gh} (x) ((gh)^-1 . phi) psi."""
    op = DenseOperator(t)
    for phi, g in a.terms:
        for j, h in enumerate(t.words):
            x = mul(g, h)
            i = t.word_index.get(x)
            if i is None:
                op.boundary.add(j)
                continue
            op._add_block((i, j), np.diag(_pullback_diag(phi, x, t)))
    return op


def build_lambda_op(a: CrossedProductElement, t: TruncationSpec) -> DenseOperator:
    """Right regular representation: delta_h (x) psi -> delta_{h g^-1} (x) (x.phi) psi, x = h g^-1."""
    op = DenseOperator(t)
    for phi, g in a.terms:
        gi = inverse(g)
        for j, h in enumerate(t.words):
            x = mul(h, gi)
            i = t.word_index.get(x)
            if i is None:
                op.boundary.add(j)
                continue
            op._add_block((i, j), np.diag(_pullback_diag(phi, inverse(x), t)))
    return op


def symmetry_J(t: TruncationSpec) -> DenseOperator:
    eye = np.eye(t.block_dim, dtype=complex)
    return DenseOperator(t, {(t.word_index[inverse(w)], i): eye for i, w in enumerate(t.words)})


def identity_op(t: TruncationSpec) -> DenseOperator:
    eye = np.eye(t.block_dim, dtype=complex)
    return DenseOperator(t, {(i, i): eye for i in range(len(t.words))})


def projection_P(t: TruncationSpec) -> DenseOperator:
    v = t.constants_vector
    blk = np.outer(v, v).astype(complex)
    return DenseOperator(t, {(i, i): blk for i in range(len(t.words))})


@dataclass
class SingularValueReport:
    values: np.ndarray
    fitted_exponent: float | None = None
    stable_prefix: int | None = None
    tol: float = 1e-12

    def schatten_partial(self, p: float) -> np.ndarray:
        return np.cumsum(self.values**p)

    def schatten_sum(self, p: float, prefix: int | None = None) -> float:
        v = self.values if prefix is None else self.values[:prefix]
        return float(np.sum(v**p))

    @property
    def nonzero(self) -> np.ndarray:
        return self.values[self.values > self.tol]

    def to_rows(self, p: float) -> list[tuple[int, float, float]]:
        part = self.schatten_partial(p)
        return [(i + 1, float(s), float(part[i])) for i, s in enumerate(self.values)]


def sv_report(values: np.ndarray, previous: SingularValueReport | None = None,
              tol_stab: float = 1e-8, tol: float = 1e-12) -> SingularValueReport:
    values = np.sort(np.asarray(values, dtype=float))[::-1]
    nz = values[values > tol]
    exponent = None
    if len(nz) >= 3:
        x = np.log(np.arange(1, len(nz) + 1))
        exponent = float(np.polyfit(x, np.log(nz), 1)[0])
    stable = None
    if previous is not None:
        m = min(len(values), len(previous.values))
        diff = np.abs(values[:m] - previous.values[:m]) >= tol_stab
        stable = int(np.argmax(diff)) if diff.any() else m
    return SingularValueReport(values, exponent, stable, tol)


def basic_commutator(phi: StepFunction, t: TruncationSpec) -> tuple[DenseOperator, SingularValueReport]:
    """[lambda(phi), P] and the singular values of (1-P) lambda(phi) P on the interior."""
    interior = t.interior(0)
    if not interior:
        raise ValueError("truncation has no interior rows")
    L = build_lambda(CrossedProductElement.function(phi), t)
    P = projection_P(t)
    comm = L @ P - P @ L
    Pi = (identity_op(t) - P) @ L @ P
    return comm, sv_report(Pi.restrict(rows=interior, cols=interior).singular_values())


def twisted_commutator(
    a: CrossedProductElement,
    b: CrossedProductElement,
    t: TruncationSpec,
    previous: SingularValueReport | None = None,
) -> tuple[DenseOperator, SingularValueReport]:
    """[lambda(a), P lambda_op(b) P], singular values over interior columns."""
    P = projection_P(t)
    comm_op = build_lambda(a, t) @ (P @ build_lambda_op(b, t) @ P)
    comm_op = comm_op - (P @ build_lambda_op(b, t) @ P) @ build_lambda(a, t)
    reach = a.max_word_len + b.max_word_len
    interior = t.interior(reach)
    return comm_op, sv_report(comm_op.restrict(cols=interior).singular_values(), previous)


def compress(op: DenseOperator) -> dict[tuple[int, int], complex]:
    """Matrix of P op P on l^2(ball), in the basis delta_g (x) constants."""
    v = op.t.constants_vector
    return {k: complex(v @ b @ v) for k, b in op.blocks.items() if abs(v @ b @ v) > 0}


def compress_exact(a: CrossedProductElement, t: TruncationSpec, op: bool = False) -> dict[tuple[Word, Word], ComplexQ]:
    """Exact P lambda(a) P (or P lambda_op(a) P) on l^2(ball) by cylinder sums."""
    mu = t.mu
    out: dict[tuple[Word, Word], ComplexQ] = {}
    for phi, g in a.terms:
        for h in t.words:
            x = mul(h, inverse(g)) if op else mul(g, h)
            if x not in t.word_index:
                continue
            pull = inverse(x) if op else x
            if phi is None:
                val = ComplexQ(Fraction(1))
            else:
                if t.depth < phi.depth + len(pull):
                    raise RefinementError("truncation depth too small for exact compression")
                val = ComplexQ()
                for c in t.cells:
                    val = val + phi(mul(pull, c)) * mu.mass(c)
                val = val * (1 / mu.total)
            out[(x, h)] = out.get((x, h), ComplexQ()) + val
    return out


def twisted_diagonal(phi: StepFunction, g: Word, t: TruncationSpec) -> dict[Word, complex]:
    """Diagonal of s_op(g^-1) [s(phi), s_op(g)] on interior h, from the matrices."""
    P = projection_P(t)
    s_phi = P @ build_lambda(CrossedProductElement.function(phi), t) @ P
    s_g = P @ build_lambda_op(CrossedProductElement.group(g), t) @ P
    s_gi = P @ build_lambda_op(CrossedProductElement.group(inverse(g)), t) @ P
    Y = s_gi @ (s_phi @ s_g - s_g @ s_phi)
    v = t.constants_vector
    out = {}
    for i in t.interior(len(g)):
        out[t.words[i]] = complex(v @ Y.block(i, i) @ v)
    return out


def twisted_diagonal_exact(phi: StepFunction, g: Word, t: TruncationSpec) -> dict[Word, ComplexQ]:
    """Same diagonal from exact compressions: entries E phi(h g^-1) - E phi(h)."""
    s_phi = compress_exact(CrossedProductElement.function(phi), t)
    out = {}
    for i in t.interior(len(g)):
        h = t.words[i]
        x = mul(h, inverse(g))
        out[h] = s_phi[(x, x)] - s_phi[(h, h)]
    return out


@dataclass
class MultiplierCertificate:
    report: SingularValueReport
    sup_power: Fraction | float
    sup: float
    bound: float
    certified: bool
    exact: bool
    chain_C1: float
    chain_C2: float


def multiplier_decay(n: int, vp, counts: Sequence[int], bound: float = 3.0,
                     materialize: bool = True) -> MultiplierCertificate:
    """Certificate for s_n(T) n^(1/D) <= bound, T = multiplication by exp(-eps|g|).

    s_n = exp(-eps k) on the k-th shell, so the sup over a shell is attained
    at n = m_k. Raising to the power D = e/eps gives m_k / (2n-1)^k, which is
    rational; with eps/e = a/b rational the comparison is exact.
    """
    q = 2 * n - 1
    D = vp.hausdorff_dim
    powers = [Fraction(m, q**k) for k, m in enumerate(counts)]
    sup_power = max(powers)
    if vp.ratio is not None:
        r = Fraction(vp.ratio)
        B = Fraction(bound).limit_denominator(10**12)
        certified = sup_power ** r.numerator <= B ** r.denominator
        exact = True
    else:
        certified = float(sup_power) ** (1 / D) <= bound
        exact = False
    sup = float(sup_power) ** (1 / D)
    c1 = float(max(powers)) ** (1 / D)
    growth = max(Fraction(counts[k + 1] + 1, counts[k]) for k in range(len(counts) - 1)) if len(counts) > 1 else 1
    c2 = c1 * float(growth) ** (1 / D)
    values = np.zeros(0)
    if materialize:
        sizes = [counts[0]] + [counts[k] - counts[k - 1] for k in range(1, len(counts))]
        values = np.concatenate([np.full(s, math.exp(-vp.epsilon * k)) for k, s in enumerate(sizes)])
    return MultiplierCertificate(sv_report(values), sup_power, sup, bound, certified, exact, c1, c2)


@dataclass
class AxiomReport:
    norms: dict[str, float]
    schatten: dict[str, float]
    p: float


def fredholm_axiom_check(a: CrossedProductElement, Q: DenseOperator, t: TruncationSpec, p: float,
                         reach: int | None = None) -> AxiomReport:
    """Interior norms and Schatten-p sums of Q* - Q, Q^2 - Q and [lambda(a), Q]."""
    L = build_lambda(a, t)
    interior = t.interior(a.max_word_len if reach is None else reach)
    parts = {
        "adjoint": Q.adjoint() - Q,
        "idempotent": Q @ Q - Q,
        "commutator": L @ Q - Q @ L,
    }
    norms, sums = {}, {}
    for name, op in parts.items():
        sv = op.restrict(cols=interior).singular_values()
        norms[name] = float(sv[0]) if len(sv) else 0.0
        sums[name] = float(np.sum(sv**p))
    return AxiomReport(norms, sums, p)


def index_estimate(
    a: CrossedProductElement,
    n: int,
    radii: Sequence[int],
    depth_extra: int = 0,
    tol_ker: float = TOL_KER,
    tol_gap: float = TOL_GAP,
) -> int | str:
    """dim ker - dim coker of the compression P lambda(a) P on l^2(ball), if stable.

    Returns "unstable" when any singular value falls in [tol_ker, tol_gap) or
    the last two truncations disagree.
    """
    if len(radii) < 2:
        raise ValueError("need at least 2 truncation levels")
    results = []
    for R in radii:
        t = TruncationSpec(n, R, max(1, a.max_depth + R + a.max_word_len + depth_extra))
        comp = compress_exact(a, t)
        m = len(t.words)
        A = np.zeros((m, m), dtype=complex)
        for (x, h), v in comp.items():
            A[t.word_index[x], t.word_index[h]] = complex(v)
        s = np.linalg.svd(A, compute_uv=False)
        s_adj = np.linalg.svd(A.conj().T, compute_uv=False)
        if np.any((s >= tol_ker) & (s < tol_gap)):
            return "unstable"
        results.append(int(np.sum(s < tol_ker)) - int(np.sum(s_adj < tol_ker)))
    return results[-1] if results[-1] == results[-2] else "unstable"

