import pytest
from hypothesis import given

from hypbound.words import (
    GeneratorSet,
    ParseError,
    ball_words,
    cancellation,
    inverse,
    is_cyclically_reduced,
    is_reduced,
    lcp,
    mul,
    reduce,
    rotations,
    sphere_size,
    words_of_length,
)
from strategies import raw_words, reduced_words

F2 = GeneratorSet.free(2)


def test_reduce_examples():
    assert reduce("aA") == ""
    assert reduce("abBA") == ""
    assert reduce("abBc", GeneratorSet.free(3)) == "ac"
    assert reduce("a b A") == "abA"


def test_unknown_symbol_is_named():
    with pytest.raises(ParseError, match="z"):
        reduce("abz", F2)


@given(raw_words())
def test_reduce_idempotent(w):
    r = reduce(w)
    assert reduce(r) == r
    assert is_reduced(r)


@given(raw_words(), raw_words())
def test_reduce_is_homomorphism(u, v):
    assert reduce(reduce(u) + reduce(v)) == reduce(u + v)
    assert mul(reduce(u), reduce(v)) == reduce(u + v)


@given(reduced_words(), reduced_words(), reduced_words())
def test_mul_associative(a, b, c):
    assert mul(mul(a, b), c) == mul(a, mul(b, c))


@given(reduced_words())
def test_inverse(w):
    assert inverse(inverse(w)) == w
    assert mul(w, inverse(w)) == ""
    assert len(inverse(w)) == len(w)


@given(reduced_words(), reduced_words())
def test_cancellation_length(u, v):
    c = cancellation(u, v)
    assert len(mul(u, v)) == len(u) + len(v) - 2 * c


@given(reduced_words(), reduced_words())
def test_lcp_bounds(u, v):
    k = lcp(u, v)
    assert u[:k] == v[:k]
    assert k <= min(len(u), len(v))


def test_sphere_and_ball_counts():
    for n in (2, 3):
        g = GeneratorSet.free(n)
        for k in range(5):
            words = list(words_of_length(g, k))
            assert len(words) == len(set(words)) == sphere_size(n, k)
            assert all(is_reduced(w) for w in words)
    assert len(ball_words(F2, 3)) == 53


def test_rotations_and_cyclic_reduction():
    assert rotations("abc") == ["abc", "bca", "cab"]
    assert is_cyclically_reduced("abAB")
    assert not is_cyclically_reduced("abA")


def test_generator_set_validation():
    with pytest.raises(ParseError):
        GeneratorSet(("a", "a"))
    with pytest.raises(ParseError):
        GeneratorSet(("A",))
