import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from dispersal_lab.errors import DomainError
from dispersal_lab.laws import (
    PoissonBinomialLaw,
    TabulatedLaw,
    factorial_ratio_moment_lerch,
    law_from_json,
    law_to_json,
    point_mass,
    ratio_moment_lerch,
    sample_n_mechanistic,
)
from dispersal_lab.rng import UniformStream

lams = st.floats(0.05, 20.0)
ps = st.floats(0.0, 0.95)


def brute_pmf(lam, p, n, terms=4000):
    # P(N = n) = sum_k P(size k) C(k,n) p^n (1-p)^(k-n), size ~ Geometric(1/(lam+1)) on {1,2,...}
    q = lam / (lam + 1)
    k = np.arange(max(n, 1), terms)
    size_pmf = (1 - q) * q ** (k - 1)
    return float(np.sum(size_pmf * stats.binom.pmf(n, k, p)))


@pytest.mark.parametrize("lam,p", [(1.0, 0.5), (5.0, 0.6), (9.0, 0.099), (0.3, 0.9)])
def test_pmf_matches_mixture(lam, p):
    law = PoissonBinomialLaw(lam, p)
    for n in range(8):
        assert law.pmf(n) == pytest.approx(brute_pmf(lam, p, n), rel=1e-9, abs=1e-15)


@given(lam=lams, p=ps)
@settings(max_examples=60, deadline=None)
def test_mass_and_mean(lam, p):
    law = PoissonBinomialLaw(lam, p)
    n = law.cutoff()
    assert math.fsum(law.pmf_array(n)) == pytest.approx(1.0, abs=1e-12)
    assert law.mean() == pytest.approx((lam + 1) * p, rel=1e-12, abs=1e-15)
    assert law.tail_mass(n) < 1e-14


@given(lam=lams, p=ps, s=st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_pgf_closed_form(lam, p, s):
    law = PoissonBinomialLaw(lam, p)
    closed = (1 - p * (1 - s)) / (1 + lam * p * (1 - s))
    assert law.pgf(s) == pytest.approx(closed, rel=1e-12)
    assert law.as_tabulated().pgf(s) == pytest.approx(closed, rel=1e-12)


@given(lam=st.floats(0.1, 15.0), p=st.floats(0.01, 0.9), d=st.integers(1, 60))
@settings(max_examples=80, deadline=None)
def test_ratio_moment_routes_agree(lam, p, d):
    law = PoissonBinomialLaw(lam, p)
    for shift in (0, -1):
        if d + shift < 1:
            continue
        assert law.ratio_moment(d, shift) == pytest.approx(ratio_moment_lerch(law, d, shift), rel=1e-9, abs=1e-15)


@given(lam=st.floats(0.1, 15.0), p=st.floats(0.01, 0.9), d=st.integers(2, 40))
@settings(max_examples=60, deadline=None)
def test_factorial_moment_routes_agree(lam, p, d):
    law = PoissonBinomialLaw(lam, p)
    for form in ("U", "L"):
        series = law.factorial_ratio_moment(d, form)
        assert series == pytest.approx(factorial_ratio_moment_lerch(law, d, form), rel=1e-8, abs=1e-13)


def test_ratio_moment_brute():
    law = PoissonBinomialLaw(2.0, 0.4)
    n = np.arange(law.cutoff() + 1)
    pmf = law.pmf_array(law.cutoff())
    assert law.ratio_moment(5) == pytest.approx(np.sum(pmf * n / (n + 5)), rel=1e-13)


def test_point_mass_and_validation():
    law = point_mass(0)
    assert law.pmf(0) == 1.0 and law.mean() == 0.0 and law.pgf(0.3) == 1.0
    assert point_mass(3).pmf(3) == 1.0
    with pytest.raises(DomainError):
        TabulatedLaw((0.5, 0.4))
    with pytest.raises(DomainError):
        PoissonBinomialLaw(-1.0, 0.5)
    with pytest.raises(DomainError):
        PoissonBinomialLaw(1.0, 1.5)


def test_json_roundtrip():
    for law in (PoissonBinomialLaw(3.0, 0.2), point_mass(2), PoissonBinomialLaw(1.0, 0.5).as_tabulated()):
        again = law_from_json(law_to_json(law))
        for n in range(10):
            assert again.pmf(n) == pytest.approx(law.pmf(n), rel=1e-14)


def test_sampler_matches_pmf():
    law = PoissonBinomialLaw(3.0, 0.5)
    rng = UniformStream(12345)
    draws = np.array([law.sample(rng) for _ in range(50_000)])
    top = 12
    observed = np.bincount(np.minimum(draws, top), minlength=top + 1)
    expected = law.pmf_array(top - 1).tolist()
    expected.append(1.0 - sum(expected))
    _, pval = stats.chisquare(observed, np.array(expected) * len(draws))
    assert pval > 1e-4


def test_closed_sampler_matches_mechanism():
    gen = np.random.Generator(np.random.Philox(7))
    lam, p = 2.0, 0.6
    mech = sample_n_mechanistic(lam, p, gen, 40_000)
    closed = PoissonBinomialLaw(lam, p).sample(gen, 40_000)
    # two-sample test on the counts
    top = 10
    a = np.bincount(np.minimum(mech, top), minlength=top + 1)
    b = np.bincount(np.minimum(closed, top), minlength=top + 1)
    _, pval, _, _ = stats.chi2_contingency(np.vstack([a, b]))
    assert pval > 1e-4
    assert mech.mean() == pytest.approx((lam + 1) * p, rel=0.03)
