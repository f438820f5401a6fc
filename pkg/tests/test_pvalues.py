import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from hctables.errors import DegenerateInputError, ParameterError, ShapeError
from hctables.pvalues import (
    CountTablePair,
    estimate_allocation_prob,
    exact_binom_pvalue,
    normal_two_sample_pvalue,
    pvalue_vector,
    randomized_pvalue,
)
from hctables.specfun import make_rng


def enum_pvalues(x, y, pprime):
    """Exact and randomized P-value pieces by enumeration in rationals."""
    n = x + y
    p = Fraction(pprime)
    pmf = [math.comb(n, j) * p**j * (1 - p) ** (n - j) for j in range(n + 1)]
    d = abs(x - n * p)
    exceed = sum(f for j, f in enumerate(pmf) if abs(j - n * p) > d)
    tie = sum(f for j, f in enumerate(pmf) if abs(j - n * p) == d)
    return exceed + tie, exceed, tie


@pytest.mark.parametrize("pprime", [0.5, 0.25])
def test_exact_matches_enumeration(pprime):
    for n in range(0, 26):
        for x in range(n + 1):
            ref = float(enum_pvalues(x, n - x, pprime)[0]) if n else 1.0
            assert abs(exact_binom_pvalue(x, n - x, pprime) - ref) <= 1e-12


@pytest.mark.parametrize(
    "x,y,pprime,expected",
    [(0, 3, 0.5, 0.25), (1, 5, 0.5, 0.21875), (2, 2, 0.5, 1.0), (0, 0, 0.5, 1.0), (0, 3, 0.25, 0.578125)],
)
def test_exact_examples(x, y, pprime, expected):
    assert exact_binom_pvalue(x, y, pprime) == pytest.approx(expected, rel=1e-12)


def test_exact_matches_scipy_for_half():
    # for p' = 1/2 the exceedance and likelihood orderings coincide
    for x, y in [(3, 17), (40, 60), (0, 50), (250, 180)]:
        ref = stats.binomtest(x, x + y, 0.5).pvalue
        assert exact_binom_pvalue(x, y) == pytest.approx(ref, rel=1e-10)


def test_exact_symmetric_in_swap():
    for x, y in [(0, 7), (4, 9), (13, 2)]:
        assert exact_binom_pvalue(x, y) == pytest.approx(exact_binom_pvalue(y, x), rel=1e-14)


def test_exact_tiny_but_positive():
    p = exact_binom_pvalue(0, 5000)
    assert 0.0 < p < 1e-300


@pytest.mark.parametrize("u", [0.0, 0.3, 0.999])
@pytest.mark.parametrize("pprime", [0.5, 0.25])
def test_randomized_matches_enumeration(u, pprime):
    for n in range(1, 16):
        for x in range(n + 1):
            _, exceed, tie = enum_pvalues(x, n - x, pprime)
            ref = float(exceed) + u * float(tie)
            assert randomized_pvalue(x, n - x, pprime, u) == pytest.approx(ref, abs=1e-12)


def test_randomized_examples():
    assert randomized_pvalue(2, 2, 0.5, 0.0) == pytest.approx(0.625)
    assert randomized_pvalue(2, 2, 0.5, 1.0) == pytest.approx(1.0)
    assert randomized_pvalue(0, 0, 0.5, 0.4) == pytest.approx(0.4)


@settings(max_examples=200, deadline=None)
@given(x=st.integers(0, 60), y=st.integers(0, 60), u=st.floats(0, 1), pprime=st.sampled_from([0.5, 0.25, 0.7]))
def test_randomized_dominated_by_exact(x, y, u, pprime):
    assert randomized_pvalue(x, y, pprime, u) <= exact_binom_pvalue(x, y, pprime) + 1e-15


def test_randomized_uniform_given_n():
    # exact uniformity: Pr(pi <= t) = t, integrated over u, for every t
    n, pprime = 9, 0.5
    pmf = stats.binom.pmf(np.arange(n + 1), n, pprime)
    for t in (0.05, 0.2, 0.5, 0.9):
        prob = 0.0
        for x in range(n + 1):
            a = randomized_pvalue(x, n - x, pprime, 0.0)
            b = randomized_pvalue(x, n - x, pprime, 1.0)
            prob += pmf[x] * (np.clip((t - a) / (b - a), 0, 1) if b > a else float(t >= a))
        assert prob == pytest.approx(t, abs=1e-12)


@pytest.mark.parametrize("bad", [(-1, 2), (1.5, 2)])
def test_scalar_rejects_bad_counts(bad):
    with pytest.raises(ParameterError):
        exact_binom_pvalue(*bad)


@pytest.mark.parametrize("pprime", [0.0, 1.0, -0.2])
def test_rejects_bad_pprime(pprime):
    with pytest.raises(ParameterError):
        exact_binom_pvalue(1, 2, pprime)


def test_randomized_rejects_bad_u():
    with pytest.raises(ParameterError):
        randomized_pvalue(1, 2, 0.5, 1.5)


# --- vectors ----------------------------------------------------------------


def test_vector_example():
    t = CountTablePair(np.array([0, 2, 1]), np.array([3, 2, 5]))
    pv = pvalue_vector(t, "exact", 0.5)
    np.testing.assert_allclose(pv.values, [0.25, 1.0, 0.21875], rtol=1e-12)
    assert pv.kind == "exact" and pv.pprime == 0.5


@pytest.mark.parametrize("pprime", [0.5, 0.3])
def test_vector_agrees_with_scalar(pprime):
    rng = np.random.default_rng(5)
    x = rng.poisson(4.0, 400)
    y = rng.poisson(6.0, 400)
    x[:3] = [0, 1500, 0]
    y[:3] = [0, 1400, 2000]  # rows beyond the cached table
    pv = pvalue_vector(CountTablePair(x, y), "exact", pprime).values
    ref = [exact_binom_pvalue(a, b, pprime) for a, b in zip(x, y)]
    np.testing.assert_allclose(pv, ref, rtol=1e-10, atol=1e-300)


def test_randomized_vector_agrees_with_scalar():
    rng = np.random.default_rng(6)
    x = rng.poisson(3.0, 300)
    y = rng.poisson(3.0, 300)
    t = CountTablePair(x, y)
    pv = pvalue_vector(t, "randomized", 0.5, make_rng(11)).values
    u = make_rng(11).random(300)
    ref = [randomized_pvalue(a, b, 0.5, uu) for a, b, uu in zip(x, y, u)]
    np.testing.assert_allclose(pv, ref, rtol=1e-10)


def test_auto_pprime():
    t = CountTablePair(np.array([1, 2, 3]), np.array([2, 4, 6]))
    assert estimate_allocation_prob(t) == pytest.approx(1 / 3)
    assert pvalue_vector(t, "exact", "auto").pprime == pytest.approx(1 / 3)
    with pytest.raises(DegenerateInputError):
        estimate_allocation_prob(CountTablePair(np.zeros(3, int), np.zeros(3, int)))


def test_normal_pvalues():
    assert normal_two_sample_pvalue(0.0, 0.0) == 1.0
    got = normal_two_sample_pvalue(np.array([0.0, 1.0]), np.array([2.0, -3.0]))
    np.testing.assert_allclose(got, 2 * stats.norm.sf(np.array([2.0, 4.0]) / math.sqrt(2)), rtol=1e-12)
    t = CountTablePair(np.array([-0.5, 1.0]), np.array([0.5, 1.0]))
    assert pvalue_vector(t, "normal").kind == "normal"


def test_vector_errors():
    t = CountTablePair(np.array([1, 2]), np.array([1, 2]))
    with pytest.raises(ParameterError):
        pvalue_vector(t, "randomized", 0.5)
    with pytest.raises(ParameterError):
        pvalue_vector(t, "bogus")
    with pytest.raises(ShapeError):
        pvalue_vector(CountTablePair(np.array([], int), np.array([], int)))
    with pytest.raises(ShapeError):
        CountTablePair(np.array([1, 2]), np.array([1]))
    with pytest.raises(ParameterError):
        CountTablePair(np.array([1, -2]), np.array([1, 1]))
    with pytest.raises(ParameterError):
        pvalue_vector(CountTablePair(np.array([1.5]), np.array([1.0])), "exact")
