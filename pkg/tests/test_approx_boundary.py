import math
from collections import Counter
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypbound.approx_boundary import (
    SphereBoundaryModel,
    bounded_verdict,
    convergence_scan,
    default_epsilon,
    double_integral_estimate,
    exact_concentration,
    single_integral_estimate,
)
from hypbound.free_boundary import exact_double_integral, exact_single_integral
from hypbound.presentations import GroupPresentation, RadiusInsufficient, load_presentation
from hypbound.words import GeneratorSet, is_reduced, lcp, words_of_length

DATA = Path(__file__).resolve().parents[1] / "data"
F2 = GroupPresentation.free(2)
LN3 = math.log(3)


@pytest.fixture(scope="module")
def tree():
    return SphereBoundaryModel.build(F2, 12, epsilon=LN3, seed=2024)


@pytest.fixture(scope="module")
def surface():
    p = load_presentation(DATA / "genus2.grp")
    return SphereBoundaryModel.build(p, 3, ball_radius=5, epsilon=0.05, seed=11)


def test_default_epsilon(surface):
    assert default_epsilon(surface.presentation) == pytest.approx(1 / 120)
    assert default_epsilon(F2) == pytest.approx(LN3 / 4)


def test_free_sampler_is_uniform_on_sphere(tree):
    rng = np.random.default_rng(0)
    pts = tree.sample(rng, 4000)
    assert all(len(w) == 12 and is_reduced(w) for w in pts)
    first = Counter(w[0] for w in pts)
    second = Counter(w[:2] for w in pts)
    assert all(abs(c / 4000 - 0.25) < 0.03 for c in first.values())
    assert len(second) == 12


def test_surface_sphere(surface):
    pts = surface.sphere()
    assert len(pts) == 392 and len(set(pts)) == 392


def test_identity_ratio(tree):
    est = double_integral_estimate(tree, "", 5000)
    assert est.ratio == pytest.approx(math.sqrt(est.value))
    assert est.label == "heuristic proxy" and est.seed == 2024


def test_equal_translates_give_zero(tree, surface):
    assert single_integral_estimate(tree, "ab", "ab", 1000).value == 0
    assert single_integral_estimate(surface, "a", "a", 1000).value == 0


@pytest.mark.parametrize("g", ["", "a", "aB"])
def test_double_calibration(tree, g):
    est = double_integral_estimate(tree, g, 20_000)
    assert abs(est.value - exact_double_integral(2, g, LN3)) <= 3 * est.stderr


@pytest.mark.parametrize("g, h", [("a", "b"), ("ab", "aB")])
def test_single_calibration(tree, g, h):
    est = single_integral_estimate(tree, g, h, 20_000)
    assert abs(est.value - exact_single_integral(2, g, h, LN3)) <= 3 * est.stderr


def test_seed_determinism():
    m1 = SphereBoundaryModel.build(F2, 8, epsilon=0.5, seed=5)
    m2 = SphereBoundaryModel.build(F2, 8, epsilon=0.5, seed=5)
    m3 = SphereBoundaryModel.build(F2, 8, epsilon=0.5, seed=6)
    a, b, c = (double_integral_estimate(m, "ab", 15_000) for m in (m1, m2, m3))
    assert a == b
    assert a.value != c.value


def test_tree_concentration_matches_exact():
    m = SphereBoundaryModel.build(F2, 8, epsilon=LN3)
    ray = ["a" * k for k in range(1, 7)]
    scan = convergence_scan(m, ray)
    assert scan == [exact_concentration(2, g, math.ceil(k / 2)) for k, g in enumerate(ray, 1)]
    assert all(x <= y for x, y in zip(scan, scan[1:]))
    assert 1 - scan[-1] < 3.0 ** -2


def test_constant_ray():
    m = SphereBoundaryModel.build(F2, 6, epsilon=LN3)
    scan = convergence_scan(m, ["", "", "", ""])
    # radii shrink with k while the measure stays put
    assert scan[0] == scan[1] and scan[2] == scan[3]


def test_surface_concentration_nondecreasing(surface):
    scan = convergence_scan(surface, ["a", "aa"])
    assert scan[0] <= scan[1]


@given(st.sampled_from(list(words_of_length(GeneratorSet.free(4), 3))),
       st.sampled_from(list(words_of_length(GeneratorSet.free(4), 2))))
def test_surface_gromov_short_words(x, y):
    # below half the relator length geodesics are unique, so the product is the common prefix
    m = _small_surface()
    assert m.gromov(x, y) == lcp(x, y)
    assert m.gromov(x, x) == 3


@lru_cache(maxsize=1)
def _small_surface():
    return SphereBoundaryModel.build(load_presentation(DATA / "genus2.grp"), 3, ball_radius=4, epsilon=0.05)


def test_surface_radius_error(surface):
    with pytest.raises(RadiusInsufficient):
        double_integral_estimate(surface, "abc", 10)


def test_surface_ratios_bounded(surface):
    ratios = [double_integral_estimate(surface, g, 4000).ratio for g in ("a", "ab")]
    assert bounded_verdict(ratios)
    singles = [single_integral_estimate(surface, g, h, 4000).ratio for g, h in (("a", "b"), ("ab", "cd"), ("a", "Ab"))]
    assert bounded_verdict(singles)


@pytest.mark.parametrize("eps", [0.2, 0.5])
def test_snowflake_verdicts_agree(eps):
    m = SphereBoundaryModel.build(F2, 10, epsilon=eps, seed=3)
    verdicts = []
    for alpha in (0.5, 1.0):
        ratios = [double_integral_estimate(m, "a" * k, 4000, alpha).ratio for k in range(1, 5)]
        verdicts.append(bounded_verdict(ratios))
    assert verdicts[0] == verdicts[1]


def test_bounded_verdict():
    assert bounded_verdict([1, 2, 9.9])
    assert not bounded_verdict([1, 11])
    assert not bounded_verdict([])
