import itertools
import math

import numpy as np
import pytest
from scipy.stats import binom

from ssur.component_model import iid_model, inid_model
from ssur.conditional_bernoulli import count_pmf, r_function, sample_conditional

from conftest import brute_probs


def test_r_function_examples():
    assert r_function(iid_model(2, 0.5)).value(1) == pytest.approx(2.0)
    assert r_function(inid_model([0.1, 0.2, 0.3])).value(0) == 1.0
    expected = (1 / 9) * (1 / 4) + (1 / 9) * (3 / 7) + (1 / 4) * (3 / 7)
    assert r_function(inid_model([0.1, 0.2, 0.3])).value(2) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(0.18254, abs=1e-5)


def test_r_function_beyond_size_is_zero():
    t = r_function(inid_model([0.1, 0.2, 0.3]))
    assert t.value(4) == 0.0 and t.log(4) == -np.inf


def test_r_function_rejects_degenerate():
    with pytest.raises(ValueError):
        r_function(inid_model([0.5, 1.0]))


def test_r_function_matches_elementary_symmetric_sum(rng):
    p = rng.uniform(0.01, 0.9, size=9)
    odds = p / (1 - p)
    table = r_function(inid_model(p))
    for i in range(10):
        direct = math.fsum(math.prod(odds[list(c)]) for c in itertools.combinations(range(9), i))
        assert table.value(i) == pytest.approx(direct, rel=1e-12)


def test_r_function_large_subset_stays_finite():
    # odds of 0.99 components overflow a linear-space product
    t = r_function(iid_model(300, 0.99))
    assert np.all(np.isfinite(t.log_values[:301]))
    assert t.log(300) == pytest.approx(300 * math.log(99), rel=1e-12)


def test_count_pmf_examples():
    np.testing.assert_allclose(count_pmf(iid_model(3, 0.5)), [0.125, 0.375, 0.375, 0.125], atol=1e-15)
    np.testing.assert_allclose(count_pmf(inid_model([0.1, 0.2])), [0.72, 0.26, 0.02], atol=1e-15)
    lam0 = count_pmf(iid_model(46, 0.01))[0]
    assert lam0 == pytest.approx(0.99**46, rel=1e-12)
    # 0.99^46 = 0.62984..., the rounded reference value is 0.6298
    assert lam0 == pytest.approx(0.6298, abs=1e-4)


def test_count_pmf_binomial_for_iid():
    pmf = count_pmf(iid_model(40, 0.07))
    np.testing.assert_allclose(pmf, binom.pmf(np.arange(41), 40, 0.07), rtol=1e-10, atol=1e-300)


@pytest.mark.parametrize("seed", range(5))
def test_count_pmf_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 16))
    p = rng.uniform(0, 1, size=n)
    if seed % 2:
        p[0], p[-1] = 0.0, 1.0
    model = inid_model(p)
    X, w = brute_probs(model)
    counts = X.sum(axis=1)
    exact = np.array([math.fsum(w[counts == i]) for i in range(n + 1)])
    pmf = count_pmf(model)
    assert abs(pmf.sum() - 1) < 1e-12
    np.testing.assert_allclose(pmf, exact, atol=1e-12)


def test_count_pmf_subset():
    model = inid_model([0.1, 0.5, 0.2, 0.9])
    np.testing.assert_allclose(count_pmf(model, [0, 2]), [0.72, 0.26, 0.02], atol=1e-15)


def test_sample_trivial_counts(rng):
    model = inid_model([0.1, 0.2, 0.3, 0.4])
    assert not sample_conditional(model, None, 0, rng).any()
    assert sample_conditional(model, None, 4, rng).all()


def test_sample_exact_count_always(rng):
    model = inid_model(rng.uniform(0.01, 0.99, size=12))
    for i in range(13):
        draws = sample_conditional(model, None, i, rng, size=500)
        assert np.all(draws.sum(axis=1) == i)


def test_sample_with_forced_components(rng):
    model = inid_model([1.0, 0.3, 0.0, 0.6, 1.0])
    draws = sample_conditional(model, None, 3, rng, size=2000)
    assert np.all(draws[:, [0, 4]]) and not draws[:, 2].any()
    assert np.all(draws.sum(axis=1) == 3)
    with pytest.raises(ValueError):
        sample_conditional(model, None, 1, rng)


def test_sample_singletons_frequencies(rng):
    p = np.array([0.1, 0.2, 0.3])
    odds = p / (1 - p)
    exact = odds / odds.sum()
    N = 10**6
    draws = sample_conditional(inid_model(p), None, 1, rng, size=N)
    freq = draws.mean(axis=0)
    se = np.sqrt(exact * (1 - exact) / N)
    assert np.all(np.abs(freq - exact) < 3 * se + 1e-12)


def test_sample_subset_shape(rng):
    model = inid_model([0.1, 0.2, 0.3, 0.4, 0.5])
    out = sample_conditional(model, [4, 1, 2], 2, rng, size=7)
    assert out.shape == (7, 3) and np.all(out.sum(axis=1) == 2)


def test_sample_reproducible():
    model = inid_model([0.1, 0.25, 0.4, 0.2])
    a = sample_conditional(model, None, 2, np.random.default_rng(3), size=50)
    b = sample_conditional(model, None, 2, np.random.default_rng(3), size=50)
    assert np.array_equal(a, b)
