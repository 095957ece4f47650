import math
from fractions import Fraction

import numpy as np
import pytest

from hypbound.deviation import deviation, expectation
from hypbound.free_boundary import RefinementError, StepFunction, VisualParams
from hypbound.operators import (
    CrossedProductElement,
    DenseOperator,
    TruncationSpec,
    basic_commutator,
    build_lambda,
    build_lambda_op,
    compress,
    compress_exact,
    fredholm_axiom_check,
    identity_op,
    index_estimate,
    multiplier_decay,
    projection_P,
    sv_report,
    symmetry_J,
    twisted_commutator,
    twisted_diagonal,
    twisted_diagonal_exact,
)
from hypbound.presentations import free_growth_counts
from hypbound.words import inverse, mul

PHI = StepFunction.indicator(2, "a")
PSI = StepFunction(2, 2, {"ab": 1, "bA": {"re": 0, "im": 1}, "BB": -2})
ZERO = 0.0


def off_by(a: DenseOperator, b: DenseOperator) -> float:
    return a.max_abs_diff(b)


@pytest.fixture(scope="module")
def t25():
    return TruncationSpec(2, 2, 5)


def test_truncation_shape():
    t = TruncationSpec(2, 2, 3)
    assert len(t.words) == 17 and t.block_dim == 36 and t.dim == 17 * 36
    assert np.linalg.norm(t.constants_vector) == pytest.approx(1.0)
    assert [t.words[i] for i in t.interior(1)] == [w for w in t.words if len(w) <= 1]


def test_basic_commutator_singular_values_are_deviations():
    t = TruncationSpec(2, 2, 3)
    _, rep = basic_commutator(PHI, t)
    sig = sorted((deviation(PHI, w)[1] for w in t.words), reverse=True)
    assert np.allclose(rep.values[: len(sig)], sig, atol=1e-10)
    assert np.all(rep.values[len(sig):] < 1e-10)


def test_commutator_is_offdiagonal_part():
    t = TruncationSpec(2, 1, 2)
    comm, _ = basic_commutator(PHI, t)
    P, L = projection_P(t), build_lambda(CrossedProductElement.function(PHI), t)
    one = identity_op(t)
    expect = (one - P) @ L @ P - P @ L @ (one - P)
    assert off_by(comm, expect) < 1e-14


def test_projection(t25):
    P = projection_P(t25)
    assert off_by(P @ P, P) < 1e-14
    assert off_by(P.adjoint(), P) < 1e-15


def test_J_conjugates_lambda_to_lambda_op(t25):
    J = symmetry_J(t25)
    assert off_by(J @ J, identity_op(t25)) == ZERO
    for a in (CrossedProductElement.function(PSI), CrossedProductElement.group("ab")):
        assert off_by(J @ build_lambda(a, t25) @ J, build_lambda_op(a, t25)) < 1e-15


def test_left_and_right_actions_commute(t25):
    f = build_lambda(CrossedProductElement.function(PHI), t25)
    g = build_lambda_op(CrossedProductElement.function(PSI), t25)
    assert off_by(f @ g, g @ f) == ZERO
    a = build_lambda(CrossedProductElement.group("a"), t25)
    b = build_lambda_op(CrossedProductElement.group("b"), t25)
    inner = t25.interior(2)
    assert off_by((a @ b - b @ a).restrict(cols=inner), DenseOperator(t25)) == ZERO


def test_lambda_is_star_homomorphism(t25):
    x = CrossedProductElement([(PHI, "a")])
    y = CrossedProductElement([(PSI, "b")])
    inner = t25.interior(2)
    lhs = build_lambda(x * y, t25).restrict(cols=inner)
    rhs = (build_lambda(x, t25) @ build_lambda(y, t25)).restrict(cols=inner)
    assert off_by(lhs, rhs) < 1e-14
    inner1 = t25.interior(1)
    adj = build_lambda(x.adjoint(), t25).restrict(rows=inner1, cols=inner1)
    assert off_by(adj, build_lambda(x, t25).adjoint().restrict(rows=inner1, cols=inner1)) < 1e-14


def test_group_unitaries(t25):
    a = build_lambda(CrossedProductElement.group("a"), t25)
    ai = build_lambda(CrossedProductElement.group("A"), t25)
    inner = t25.interior(1)
    assert off_by((ai @ a).restrict(cols=inner), identity_op(t25).restrict(cols=inner)) == ZERO


def test_compressions_agree():
    t = TruncationSpec(2, 2, 4)
    a = CrossedProductElement([(PSI, "a"), (PHI, "")])
    num = compress(build_lambda(a, t))
    ex = compress_exact(a, t)
    for (x, h), v in ex.items():
        assert num.get((t.word_index[x], t.word_index[h]), 0) == pytest.approx(complex(v), abs=1e-13)
    # compression of a function on the diagonal is the group expectation
    diag = compress_exact(CrossedProductElement.function(PHI), t)
    for h in t.words:
        assert diag[(h, h)] == expectation(PHI, h)


def test_twisted_diagonal_identity():
    t = TruncationSpec(2, 3, 4)
    g = "a"
    num = twisted_diagonal(PHI, g, t)
    ex = twisted_diagonal_exact(PHI, g, t)
    assert set(num) == set(ex)
    for h, v in ex.items():
        assert v == expectation(PHI, mul(h, inverse(g))) - expectation(PHI, h)
        assert num[h] == pytest.approx(complex(v), abs=1e-12)


def test_twisted_commutator_reports():
    t = TruncationSpec(2, 2, 3)
    _, r2 = twisted_commutator(CrossedProductElement.function(PHI), CrossedProductElement.group("a"), t)
    assert r2.values[0] > 0.1
    assert len(r2.nonzero) > 0


def test_fredholm_axioms_small():
    t = TruncationSpec(2, 2, 3)
    P = projection_P(t)
    Q = P @ build_lambda_op(CrossedProductElement.function(PHI), t) @ P
    rep = fredholm_axiom_check(CrossedProductElement.group("a"), Q, t, 2.5)
    assert rep.norms["adjoint"] < 1e-14
    assert set(rep.schatten) == {"adjoint", "idempotent", "commutator"}


def test_multiplier_certificate_exact():
    vp = VisualParams.for_free_group(2, ratio=Fraction(1))
    cert = multiplier_decay(2, vp, free_growth_counts(2, 10))
    assert cert.exact and cert.certified
    assert cert.sup_power == max(Fraction(m, 3**k) for k, m in enumerate(free_growth_counts(2, 10)))
    assert cert.sup <= 3
    # materialised values: s_n n^(1/D) stays under the bound
    s = cert.report.values
    n = np.arange(1, len(s) + 1)
    assert np.max(s * n ** (1 / vp.hausdorff_dim)) <= cert.sup + 1e-12
    tight = multiplier_decay(2, vp, free_growth_counts(2, 10), bound=1.5)
    assert not tight.certified


def test_multiplier_half_epsilon():
    vp = VisualParams.for_free_group(2, ratio=Fraction(1, 2))
    cert = multiplier_decay(2, vp, free_growth_counts(2, 8), materialize=False)
    # D = 2: sup^2 = max m_k / 3^k = 2
    assert cert.sup == pytest.approx(math.sqrt(float(cert.sup_power)))
    assert cert.certified


def test_sv_report_fit_and_stability():
    vals = np.arange(1, 200) ** -0.5
    rep = sv_report(vals)
    assert rep.fitted_exponent == pytest.approx(-0.5, abs=1e-9)
    rep2 = sv_report(np.concatenate([vals[:50], vals[50:] * 0.9]), previous=rep)
    assert rep2.stable_prefix == 50
    assert rep.schatten_sum(2) == pytest.approx(np.sum(vals**2))
    assert rep.to_rows(2)[0] == (1, 1.0, 1.0)


def test_index_estimates():
    assert index_estimate(CrossedProductElement.group("a"), 2, [2, 3]) == 0
    assert index_estimate(CrossedProductElement.identity(), 2, [2, 3]) == 0
    with pytest.raises(ValueError):
        index_estimate(CrossedProductElement.identity(), 2, [3])


def test_guards():
    t = TruncationSpec(2, 3, 2)
    with pytest.raises(RefinementError):
        build_lambda(CrossedProductElement.function(PHI), t)
    with pytest.raises(MemoryError):
        identity_op(TruncationSpec(2, 3, 5)).to_dense(cap=100)
    with pytest.raises(ValueError):
        TruncationSpec(2, 2, 0)


def test_twisted_singular_values_stable_on_fixed_columns():
    # enlarging the ball leaves the columns |h| <= 1 untouched; drift in Schatten
    # sums across truncations comes from the growing interior only
    a, b = CrossedProductElement.function(PHI), CrossedProductElement.group("a")
    vals = []
    for R in (3, 4):
        t = TruncationSpec(2, R, R + 1)
        comm, _ = twisted_commutator(a, b, t)
        cols = [t.word_index[w] for w in t.words if len(w) <= 1]
        s = comm.restrict(cols=cols).singular_values()
        vals.append(s[s > 1e-10])
    assert len(vals[0]) == len(vals[1])
    assert np.allclose(vals[0], vals[1], atol=1e-12)
