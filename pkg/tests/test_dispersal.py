from collections import Counter
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from dispersal_lab.dispersal import (
    DispersalVariant,
    Variant,
    conditional_pmf,
    conditional_pmf_exact,
    occupied_boxes,
    offspring_factorial2,
    offspring_law,
    offspring_mean,
    sample_composition,
    uniform_success_pmf,
)
from dispersal_lab.errors import DomainError
from dispersal_lab.laws import PoissonBinomialLaw, point_mass
from dispersal_lab.rng import UniformStream


def weak_compositions(n, k):
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in weak_compositions(n - first, k - 1):
            yield (first,) + rest


def enumerate_offspring(variant, n):
    """Exhaustive oracle: P(Y = y | N = n) by listing every outcome."""
    d = variant.d
    m = variant.habitable_boxes
    counts = Counter()
    if variant.kind is Variant.INDEPENDENT:
        outcomes = list(product(range(d), repeat=n))
        for o in outcomes:
            counts[len(set(o))] += 1
        total = len(outcomes)
    else:
        boxes = variant.box_count
        comps = list(weak_compositions(n, boxes))
        for c in comps:
            habitable = c[:d] if variant.kind is Variant.MOVE_FORWARD_OR_DIE else c
            counts[sum(1 for x in habitable if x > 0)] += 1
        total = len(comps)
    return [Fraction(counts[y], total) for y in range(m + 1)]


@pytest.mark.parametrize("kind", list(Variant))
def test_conditional_matches_enumeration(kind):
    for d in range(1, 5):
        v = DispersalVariant(kind, d)
        mat = conditional_pmf(v, 6)
        for n in range(7):
            exact = conditional_pmf_exact(v, n)
            assert exact == enumerate_offspring(v, n)
            assert np.allclose(mat[n], [float(x) for x in exact], rtol=1e-13, atol=0)


def test_uniform_success_pmf():
    assert uniform_success_pmf(3, 4, 2) == pytest.approx(float(enumerate_offspring(DispersalVariant("self-avoiding", 4), 3)[2]))
    with pytest.raises(DomainError):
        uniform_success_pmf(0, 3, 1)
    with pytest.raises(DomainError):
        uniform_success_pmf(3, 3, 4)


@pytest.mark.parametrize("kind", list(Variant))
@pytest.mark.parametrize("lam,p,d", [(1.0, 0.5, 3), (5.0, 0.6, 10), (0.5, 0.3, 2)])
def test_offspring_moments_match_pmf(kind, lam, p, d):
    law = PoissonBinomialLaw(lam, p)
    v = DispersalVariant(kind, d)
    off = offspring_law(v, law)
    y = np.arange(len(off.pmf))
    assert off.pmf.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.sum(y * off.pmf) == pytest.approx(offspring_mean(v, law), rel=1e-11)
    assert np.sum(y * (y - 1) * off.pmf) == pytest.approx(offspring_factorial2(v, law), rel=1e-9, abs=1e-14)
    assert off.pgf(1.0) == pytest.approx(1.0)
    assert off.pgf_derivative(1.0) == pytest.approx(off.mean, rel=1e-11)


def test_tail_probs():
    off = offspring_law(DispersalVariant("self-avoiding", 3), PoissonBinomialLaw(1.0, 0.5))
    s = 0.37
    assert np.polynomial.polynomial.polyval(s, off.tail_probs()) == pytest.approx((1 - off.pgf(s)) / (1 - s))


def test_point_mass_zero_gives_no_offspring():
    for kind in Variant:
        off = offspring_law(DispersalVariant(kind, 4), point_mass(0))
        assert off.pmf[0] == 1.0 and off.mean == 0.0


def test_single_survivor_schemes_coincide():
    law = point_mass(1)
    u = offspring_law(DispersalVariant("self-avoiding", 5), law)
    i = offspring_law(DispersalVariant("independent", 5), law)
    assert np.allclose(u.pmf, i.pmf)


@given(n=st.integers(0, 40), k=st.integers(1, 12), seed=st.integers(0, 2**32))
@settings(max_examples=200, deadline=None)
def test_composition_shape(n, k, seed):
    rng = UniformStream(seed)
    c = sample_composition(n, k, rng)
    assert len(c) == k and sum(c) == n and min(c) >= 0
    rng = UniformStream(seed)
    occ = occupied_boxes(n, k, rng)
    assert occ == [i for i, x in enumerate(c) if x > 0]


@pytest.mark.parametrize("n,k", [(3, 3), (2, 4), (5, 2)])
def test_composition_uniform(n, k):
    comps = list(weak_compositions(n, k))
    rng = UniformStream(99)
    draws = 30 * 2000 if len(comps) > 10 else 20_000
    counts = Counter(tuple(sample_composition(n, k, rng)) for _ in range(draws))
    assert set(counts) <= set(comps)
    _, pval = stats.chisquare([counts[c] for c in comps])
    assert pval > 1e-4


def test_composition_domain():
    with pytest.raises(DomainError):
        sample_composition(-1, 2, UniformStream(0))
    with pytest.raises(DomainError):
        DispersalVariant("self-avoiding", 0)
