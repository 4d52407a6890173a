"""Brute-force ground truth for small instances.

Everything here enumerates states explicitly and multiplies component
probabilities directly, sharing no code with the R-function machinery, so it
can serve as an independent reference in tests.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

MAX_FULL_N = 22
MAX_STATES = 10**7
_CHUNK = 1 << 15


class OracleRefusal(ValueError):
    """Raised instead of silently truncating an enumeration that is too large."""


@dataclass
class OracleSolution:
    n: int
    p_f: float
    lambdas: list
    cond_by_count: list
    fail_counts: list
    i_star: int

    @property
    def tail_mass(self):
        return math.fsum(self.lambdas[self.i_star :])

    @property
    def p_f_star(self):
        """Failure probability conditional on at least ``i_star`` failures."""
        tail = self.tail_mass
        return self.p_f / tail if tail > 0 else 0.0

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


def _combination_chunks(n, i):
    """Boolean matrices holding every size-``i`` subset of ``range(n)``."""
    combos = itertools.combinations(range(n), i)
    while True:
        block = list(itertools.islice(combos, _CHUNK))
        if not block:
            return
        X = np.zeros((len(block), n), dtype=bool)
        if i:
            idx = np.array(block, dtype=np.intp)
            X[np.arange(len(block))[:, None], idx] = True
        yield X


def _state_probs(probs, X):
    # plain products; zero probabilities give exact zeros
    return np.prod(np.where(X, probs, 1.0 - probs), axis=1)


def _fails(perf, X):
    batch = getattr(perf, "failed_batch", None)
    if batch is not None:
        return np.asarray(batch(X), dtype=bool)
    return np.fromiter((bool(perf(x)) for x in X), dtype=bool, count=X.shape[0])


def conditional_by_count(model, perf, i, limit=MAX_STATES):
    """Exact (lambda_i, Pr(fail and I = i), number of failing i-states)."""
    n = model.n
    if not 0 <= i <= n:
        raise ValueError(f"count {i} outside [0, {n}]")
    if math.comb(n, i) > limit:
        raise OracleRefusal(f"C({n}, {i}) = {math.comb(n, i)} states exceeds the limit {limit}")
    probs = np.asarray(model.probs, dtype=float)
    mass, fail_mass, count = [], [], 0
    for X in _combination_chunks(n, i):
        w = _state_probs(probs, X)
        f = _fails(perf, X)
        mass.extend(w.tolist())
        fail_mass.extend(w[f].tolist())
        count += int(f.sum())
    return math.fsum(mass), math.fsum(fail_mass), count


def solve_exact(model, perf, counts=None, limit=MAX_STATES):
    """Exact failure probability and signature-like quantities.

    Full enumeration for ``n <= 22``.  Larger models can be handled count by
    count through ``counts``, the failure counts to enumerate; the rest are
    then treated as never failing, which the caller must justify.
    """
    n = model.n
    if counts is None:
        if n > MAX_FULL_N:
            raise OracleRefusal(f"full enumeration refused for n = {n} > {MAX_FULL_N}")
        counts = range(n + 1)
    counts = set(counts)
    lambdas, fail_by_count, fail_counts = [], [], []
    probs = np.asarray(model.probs, dtype=float)
    for i in range(n + 1):
        if i in counts:
            lam, fmass, c = conditional_by_count(model, perf, i, limit)
        else:
            lam, fmass, c = _binomial_free_mass(probs, i), 0.0, 0
        lambdas.append(lam)
        fail_by_count.append(fmass)
        fail_counts.append(c)
    cond = [f / lam if lam > 0 else 0.0 for f, lam in zip(fail_by_count, lambdas)]
    i_star = next((i for i, c in enumerate(fail_counts) if c > 0), n + 1)
    return OracleSolution(n, math.fsum(fail_by_count), lambdas, cond, fail_counts, i_star)


def _binomial_free_mass(probs, i):
    # Pr(I = i) by the textbook O(n^2) convolution, independent of the R-function
    pmf = np.zeros(len(probs) + 1)
    pmf[0] = 1.0
    for p in probs:
        pmf[1:] = pmf[1:] * (1 - p) + pmf[:-1] * p
        pmf[0] *= 1 - p
    return float(pmf[i])


def exact_istar(n, perf, limit=MAX_STATES):
    """Smallest number of failures that can fail the system (n + 1 if none)."""
    for i in range(n + 1):
        if math.comb(n, i) > limit:
            raise OracleRefusal(f"C({n}, {i}) states exceeds the limit {limit}")
        for X in _combination_chunks(n, i):
            if _fails(perf, X).any():
                return i
    return n + 1


def _stratum_states(stratum, n, reverse):
    per_cluster = []
    for c in stratum.clusters:
        choices = list(itertools.combinations(c.members, c.failed))
        per_cluster.append(choices[::-1] if reverse else choices)
    for combo in itertools.product(*per_cluster):
        x = np.zeros(n, dtype=bool)
        for failed in combo:
            x[list(failed)] = True
        yield x


def stratum_conditional(model, perf, stratum, reverse=False, limit=MAX_STATES):
    """Exact failure probability conditional on ``stratum``.

    ``reverse`` walks the member states in the opposite order; the result must
    agree up to rounding and is used as a self-check.
    """
    if stratum.n_states > limit:
        raise OracleRefusal(f"stratum has {stratum.n_states} states, limit is {limit}")
    probs = np.asarray(model.probs, dtype=float)
    X = np.array(list(_stratum_states(stratum, model.n, reverse)), dtype=bool)
    w = _state_probs(probs, X)
    total = math.fsum(w.tolist())
    if total == 0.0:
        return 0.0
    return math.fsum(w[_fails(perf, X)].tolist()) / total


def stratum_size(model, stratum):
    """Exact stratum probability by enumerating its members."""
    probs = np.asarray(model.probs, dtype=float)
    X = np.array(list(_stratum_states(stratum, model.n, False)), dtype=bool)
    return math.fsum(_state_probs(probs, X).tolist())


def strata_conditionals(model, perf, strata):
    return np.array([stratum_conditional(model, perf, s) for s in strata])


class OracleCache:
    """On-disk JSON cache of oracle solutions.

    Keyed by the network, model and performance-function digests so a change
    in any of them forces a recomputation.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(model, perf, net=None):
        parts = [model.digest(), perf.digest(), net.digest() if net is not None else "-"]
        return hashlib.sha256("|".join(parts).encode()).hexdigest()[:32]

    def path(self, model, perf, net=None):
        return self.directory / f"oracle-{self.key(model, perf, net)}.json"

    def solve(self, model, perf, net=None, **kwargs):
        path = self.path(model, perf, net)
        if path.exists():
            return OracleSolution.from_dict(json.loads(path.read_text(encoding="utf-8")))
        sol = solve_exact(model, perf, **kwargs)
        path.write_text(json.dumps(sol.to_dict(), indent=2), encoding="utf-8")
        return sol
