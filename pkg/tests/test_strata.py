import math
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chisquare

from ssur.component_model import iid_model, inid_model
from ssur.conditional_bernoulli import count_pmf
from ssur.oracle import stratum_size
from ssur.strata import (
    Cluster, Refiner, Stratum, enumerate_stratum, initial_strata, iter_refinements, refine,
    refine_once, sample_stratum, split_members,
)


def test_cluster_bounds():
    with pytest.raises(ValueError):
        Cluster((0, 1), 3)
    assert Cluster((0, 1, 2), 1).splittable
    assert not Cluster((0, 1, 2), 3).splittable
    assert not Cluster((4,), 1).splittable


def test_initial_strata_examples():
    s = initial_strata(iid_model(3, 0.5), 2)
    np.testing.assert_allclose(s.sizes, [0.375, 0.125])
    assert s.total_mass == pytest.approx(0.5)
    assert initial_strata(iid_model(5, 0.3), 0).total_mass == pytest.approx(1.0)


def test_initial_strata_tail_mass_n46():
    s = initial_strata(iid_model(46, 0.01), 2)
    pmf = count_pmf(iid_model(46, 0.01))
    assert s.total_mass == pytest.approx(1 - pmf[0] - pmf[1], rel=1e-12)
    # closed form 1 - q^46 - 46 p q^45 = 0.0775
    q = 0.99
    assert s.total_mass == pytest.approx(1 - q**46 - 46 * 0.01 * q**45, rel=1e-10)
    assert len(s) == 45


def test_initial_strata_empty_above_n():
    s = initial_strata(iid_model(3, 0.5), 4)
    assert len(s) == 0 and s.total_mass == 0.0


def test_initial_strata_drops_impossible_counts():
    s = initial_strata(inid_model([0.0, 0.0, 0.5]), 0)
    assert [st.failed_count for st in s] == [0, 1]


def test_split_members_orders_by_probability():
    probs = np.array([0.1, 0.5, 0.3, 0.5, 0.2])
    first, second = split_members((0, 1, 2, 3, 4), probs)
    assert first == (1, 2, 3) and second == (0, 4)


def test_refine_four_member_cluster_configurations():
    # cluster {1,2,13,23} (0-based 0,1,12,22) with two failures
    model = iid_model(46, 0.01)
    members = (0, 1, 12, 22)
    others = tuple(j for j in range(46) if j not in members)
    parent = Stratum((Cluster(members, 2), Cluster(others, 0)), 0.0, (0,))
    refiner = Refiner(initial_strata(model, 46))
    kids = refiner.children(parent)
    configs = [tuple(c.failed for c in k.clusters[:2]) for k in kids]
    assert configs == [(2, 0), (1, 1), (0, 2)]
    assert [k.clusters[0].members for k in kids] == [(0, 1)] * 3


def test_refine_size_two_cluster_symmetric():
    s = refine_once(initial_strata(iid_model(2, 0.3), 1))
    sizes = {tuple(c.failed for c in st.clusters): st.size for st in s if st.failed_count == 1}
    assert sizes[(1, 0)] == pytest.approx(sizes[(0, 1)])
    assert sizes[(1, 0)] == pytest.approx(count_pmf(iid_model(2, 0.3))[1] / 2)


def test_refine_n4_child_sizes():
    s = initial_strata(iid_model(4, 0.5), 2)
    one = refine_once(s)
    kids = [st for st in one if len(st.clusters) == 2]
    np.testing.assert_allclose([k.size for k in kids], np.array([1, 4, 1]) / 16)


def test_refine_zero_steps_identity():
    s = initial_strata(iid_model(6, 0.2), 1)
    assert refine(s, 0).strata == s.strata


def test_full_refinement_n4():
    s = refine(initial_strata(iid_model(4, 0.5), 2), 1000)
    assert s.fully_refined
    assert len(s) == 6 + 4 + 1
    assert all(st.n_states == 1 for st in s)


def test_refine_once_flags_exhaustion():
    s = refine(initial_strata(iid_model(3, 0.5), 0), 100)
    again = refine_once(s)
    assert again.fully_refined and again.strata == s.strata


def test_refine_5000_steps_mass_preserved():
    s0 = initial_strata(iid_model(46, 0.01), 2)
    s = refine(s0, 5000)
    assert s.steps == 5000
    assert math.fsum(s.sizes) == pytest.approx(s0.total_mass, rel=1e-10)


def test_refine_picks_most_probable_stratum():
    s0 = initial_strata(iid_model(10, 0.1), 1)
    s1 = refine_once(s0)
    # the i = 1 stratum is the most probable one and must be the one split
    assert all(len(st.clusters) == 2 for st in s1 if st.failed_count == 1)
    assert all(len(st.clusters) == 1 for st in s1 if st.failed_count > 1)


def test_iter_refinements_matches_refine():
    s0 = initial_strata(inid_model(np.linspace(0.05, 0.5, 8)), 2)
    last = list(iter_refinements(s0, 17))[-1]
    direct = refine(s0, 17)
    assert [st.clusters for st in last] == [st.clusters for st in direct]


@pytest.mark.parametrize("seed", range(6))
def test_disjoint_cover_small(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 10))
    i_star = int(rng.integers(0, n))
    model = inid_model(rng.uniform(0.05, 0.9, size=n))
    s = refine(initial_strata(model, i_star), int(rng.integers(0, 40)))
    seen = Counter()
    for st in s:
        for x in enumerate_stratum(st, n):
            seen[x.tobytes()] += 1
    expected = {x.tobytes() for x in _all_states(n) if x.sum() >= i_star}
    assert set(seen) == expected and max(seen.values()) == 1
    for st in s:
        assert st.size == pytest.approx(stratum_size(model, st), rel=1e-10)


def _all_states(n):
    k = np.arange(2**n)[:, None]
    return ((k >> np.arange(n)) & 1).astype(bool)


def test_sample_stratum_trivial(rng):
    model = iid_model(5, 0.3)
    zero = Stratum((Cluster((0, 1, 2, 3, 4), 0),), 0.0)
    full = Stratum((Cluster((0, 1), 2), Cluster((2, 3, 4), 3)), 0.0)
    assert not sample_stratum(zero, model, rng).any()
    assert sample_stratum(full, model, rng).all()


def test_sample_stratum_mixed_child_uniform(rng):
    model = iid_model(4, 0.2)
    st = Stratum((Cluster((0, 1), 1), Cluster((2, 3), 1)), 0.0)
    draws = sample_stratum(st, model, rng, size=10**5)
    assert np.all(draws[:, :2].sum(axis=1) == 1) and np.all(draws[:, 2:].sum(axis=1) == 1)
    codes = draws[:, 0] * 2 + draws[:, 2]
    counts = np.bincount(codes.astype(int), minlength=4)
    assert chisquare(counts).pvalue > 1e-3
