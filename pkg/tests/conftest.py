import numpy as np
import pytest

from ssur.component_model import iid_model, inid_model
from ssur.fixtures import random_network
from ssur.performance import Connectivity, KOutOfN


def small_instance(seed):
    """Random oracle-solvable instance: (model, perf) with 5 <= n <= 12.

    Alternates IID / INID probabilities and connectivity / k-of-n metrics.
    """
    rng = np.random.default_rng(seed)
    if seed % 2 == 0:
        n_vertices = int(rng.integers(4, 7))
        n_edges = int(rng.integers(n_vertices + 1, 13))
        net = random_network(n_vertices, n_edges, seed=seed)
        perf = Connectivity(net)
        n = net.n_components
    else:
        n = int(rng.integers(5, 13))
        perf = KOutOfN(n, int(rng.integers(1, n)))
    if seed % 4 < 2:
        model = iid_model(n, float(rng.uniform(0.05, 0.5)))
    else:
        model = inid_model(rng.uniform(0.02, 0.6, size=n))
    return model, perf


def enumerate_states(n):
    """All 2^n states as a boolean matrix (row k is the binary expansion of k)."""
    k = np.arange(2**n)[:, None]
    return ((k >> np.arange(n)) & 1).astype(bool)


def brute_probs(model):
    X = enumerate_states(model.n)
    p = np.asarray(model.probs)
    return X, np.prod(np.where(X, p, 1 - p), axis=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE_RESULTS = {}


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        ACCEPTANCE_RESULTS[crit] = (report.outcome, dict(report.user_properties).get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE_RESULTS):
        outcome, detail = ACCEPTANCE_RESULTS[crit]
        tag = {"passed": "PASS", "skipped": "SKIP"}.get(outcome, "FAIL")
        terminalreporter.write_line(f"criterion {crit:>2}: {tag}  {detail}")
