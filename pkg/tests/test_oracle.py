import math

import numpy as np
import pytest

from ssur.component_model import iid_model, inid_model
from ssur.conditional_bernoulli import count_pmf
from ssur.fixtures import bridge_network, grid_network, random_network
from ssur.istar import connectivity_istar
from ssur.oracle import (
    OracleCache, OracleRefusal, conditional_by_count, exact_istar, solve_exact, stratum_conditional,
)
from ssur.performance import Connectivity, KOutOfN, PredicatePerformance
from ssur.strata import Cluster, Stratum, initial_strata, refine

from conftest import small_instance


def test_series_two():
    sol = solve_exact(iid_model(2, 0.5), PredicatePerformance(2, lambda x: x.any(), "series"))
    assert sol.p_f == 0.75 and sol.cond_by_count[1] == 1.0 and sol.i_star == 1


def test_two_of_four():
    sol = solve_exact(iid_model(4, 0.3), KOutOfN(4, 2))
    assert sol.p_f == pytest.approx(0.3483, abs=1e-12)


def test_never_fail():
    sol = solve_exact(iid_model(5, 0.3), PredicatePerformance(5, lambda x: False, "never"))
    assert sol.p_f == 0.0 and all(c == 0 for c in sol.cond_by_count) and sol.i_star == 6


def test_refuses_large():
    with pytest.raises(OracleRefusal):
        solve_exact(iid_model(23, 0.1), KOutOfN(23, 2))
    with pytest.raises(OracleRefusal):
        conditional_by_count(iid_model(60, 0.1), KOutOfN(60, 2), 30)


@pytest.mark.parametrize("seed", range(6))
def test_total_probability_identities(seed):
    model, perf = small_instance(seed)
    sol = solve_exact(model, perf)
    assert sol.p_f == pytest.approx(math.fsum(l * c for l, c in zip(sol.lambdas, sol.cond_by_count)), abs=1e-12)
    assert sol.p_f == pytest.approx(sol.p_f_star * sol.tail_mass, abs=1e-12)
    np.testing.assert_allclose(sol.lambdas, count_pmf(model), atol=1e-12)


def test_signature_counts_integer():
    net = grid_network(3, 3)
    model = iid_model(net.n_components, 0.2)
    sol = solve_exact(model, Connectivity(net))
    for i, (c, lam) in enumerate(zip(sol.cond_by_count, sol.lambdas)):
        assert c * math.comb(model.n, i) == pytest.approx(sol.fail_counts[i], abs=1e-8)


def test_coherent_monotone_conditionals():
    net = random_network(6, 11, seed=4)
    sol = solve_exact(iid_model(11, 0.3), Connectivity(net))
    c = sol.cond_by_count
    assert all(b >= a - 1e-12 for a, b in zip(c, c[1:]))


def test_stratum_conditional_examples():
    model = inid_model([0.1, 0.2, 0.3, 0.4])
    single = Stratum((Cluster((0,), 1), Cluster((1,), 0), Cluster((2, 3), 2)), 0.0)
    assert stratum_conditional(model, KOutOfN(4, 3), single) == 1.0
    assert stratum_conditional(model, KOutOfN(4, 4), single) == 0.0
    child = Stratum((Cluster((0, 1), 2), Cluster((2, 3), 0)), 0.0)
    assert stratum_conditional(model, PredicatePerformance(4, lambda x: True, "always"), child) == 1.0


def test_stratum_conditional_dual_order():
    rng = np.random.default_rng(8)
    model = inid_model(rng.uniform(0.05, 0.7, size=8))
    perf = PredicatePerformance(8, lambda x: bool(x[:3].sum() >= 2 or (x[5] and x[7])), "toy")
    for st in refine(initial_strata(model, 2), 15):
        a = stratum_conditional(model, perf, st)
        b = stratum_conditional(model, perf, st, reverse=True)
        assert a == pytest.approx(b, abs=1e-14)


def test_stratum_conditional_refusal():
    model = iid_model(40, 0.1)
    big = Stratum((Cluster(tuple(range(40)), 20),), 0.0)
    with pytest.raises(OracleRefusal):
        stratum_conditional(model, KOutOfN(40, 2), big)


def test_exact_istar_examples():
    assert exact_istar(7, Connectivity(bridge_network())) == 1
    assert exact_istar(9, KOutOfN(9, 4)) == 4
    net = random_network(6, 9, seed=1)
    assert exact_istar(9, Connectivity(net)) == connectivity_istar(Connectivity(net))


def test_oracle_cache(tmp_path):
    cache = OracleCache(tmp_path)
    model, perf = iid_model(6, 0.2), KOutOfN(6, 2)
    first = cache.solve(model, perf)
    assert cache.path(model, perf).exists()
    again = cache.solve(model, perf)
    assert again == first
    assert cache.key(model, perf) != cache.key(iid_model(6, 0.25), perf)
