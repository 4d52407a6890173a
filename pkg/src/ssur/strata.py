"""Strata built from component clusters and per-cluster failure counts.

A stratum is a partition of the components into clusters together with the
number of failed components inside each cluster.  Because components are
independent, the stratum probability is the product of the per-cluster
count probabilities and sampling proceeds cluster by cluster.

Refinement always splits one cluster of the most probable stratum into two
halves and spreads its failure count over every feasible pair ``(k1, k2)``.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ._validation import check_count, check_generator
from .conditional_bernoulli import _cb_for


@dataclass(frozen=True)
class Cluster:
    members: tuple
    failed: int

    def __post_init__(self):
        if not 0 <= self.failed <= len(self.members):
            raise ValueError(f"failed count {self.failed} outside [0, {len(self.members)}]")

    @property
    def size(self):
        return len(self.members)

    @property
    def splittable(self):
        return self.size >= 2 and 0 < self.failed < self.size

    def to_dict(self):
        return {"members": list(self.members), "failed": self.failed}


@dataclass(frozen=True)
class Stratum:
    clusters: tuple
    log_size: float
    path: tuple = ()

    @property
    def failed_count(self):
        return sum(c.failed for c in self.clusters)

    @property
    def size(self):
        return math.exp(self.log_size)

    @property
    def n_states(self):
        return math.prod(math.comb(c.size, c.failed) for c in self.clusters)

    def to_dict(self):
        return {
            "failed_count": self.failed_count,
            "log_size": self.log_size,
            "size": self.size,
            "clusters": [c.to_dict() for c in self.clusters],
        }


@dataclass(frozen=True, eq=False)
class StrataSet:
    """Disjoint strata covering every state with at least ``i_star`` failures."""

    strata: tuple
    model: object = field(repr=False)
    i_star: int
    log_total_mass: float
    fully_refined: bool = False
    steps: int = 0

    def __len__(self):
        return len(self.strata)

    def __iter__(self):
        return iter(self.strata)

    def __getitem__(self, item):
        return self.strata[item]

    @property
    def total_mass(self):
        return math.exp(self.log_total_mass)

    @property
    def log_sizes(self):
        return np.array([s.log_size for s in self.strata])

    @property
    def sizes(self):
        return np.exp(self.log_sizes)

    @property
    def weights(self):
        """Stratum sizes normalised by the retained mass, lambda / Lambda."""
        if not self.strata:
            return np.zeros(0)
        return np.exp(self.log_sizes - self.log_total_mass)

    def to_dict(self):
        return {
            "i_star": self.i_star,
            "n_components": self.model.n,
            "refinement_steps": self.steps,
            "fully_refined": self.fully_refined,
            "log_total_mass": self.log_total_mass,
            "total_mass": self.total_mass,
            "strata": [dict(ordinal=j, **s.to_dict()) for j, s in enumerate(self.strata)],
        }


class _FactorCache:
    def __init__(self, cb):
        self.cb = cb
        self._cache = {}

    def __call__(self, cluster):
        key = (cluster.members, cluster.failed)
        val = self._cache.get(key)
        if val is None:
            val = self.cb.log_count_probability(cluster.members, cluster.failed)
            self._cache[key] = val
        return val

    def stratum(self, clusters):
        return float(sum(self(c) for c in clusters))


def initial_strata(model, i_star):
    """One single-cluster stratum per failure count ``i_star .. n``."""
    i_star = check_count(i_star, "i_star")
    n = model.n
    everyone = tuple(range(n))
    factor = _FactorCache(_cb_for(model))
    strata = []
    for i in range(i_star, n + 1):
        cluster = Cluster(everyone, i)
        log_size = factor(cluster)
        if log_size == -np.inf:
            continue
        strata.append(Stratum((cluster,), log_size, (len(strata),)))
    log_total = float(logsumexp([s.log_size for s in strata])) if strata else -np.inf
    return StrataSet(tuple(strata), model, i_star, log_total, fully_refined=not strata)


def split_members(members, probs):
    """Sort by failure probability (descending, then index) and halve."""
    order = sorted(members, key=lambda j: (-probs[j], j))
    half = (len(order) + 1) // 2
    return tuple(sorted(order[:half])), tuple(sorted(order[half:]))


class Refiner:
    """Incremental one-split-per-step refinement of a strata set."""

    def __init__(self, strata_set):
        self.model = strata_set.model
        self.i_star = strata_set.i_star
        self.log_total_mass = strata_set.log_total_mass
        self.steps = strata_set.steps
        self._factor = _FactorCache(_cb_for(self.model))
        self._probs = self.model.probs
        self._live = {s.path: s for s in strata_set.strata}
        self._heap = []
        for s in strata_set.strata:
            self._push(s)

    def _push(self, stratum):
        if any(c.splittable for c in stratum.clusters):
            heapq.heappush(self._heap, (-stratum.log_size, stratum.path))

    @property
    def exhausted(self):
        return not self._heap

    def _pick_cluster(self, stratum):
        best, best_key = None, None
        for pos, c in enumerate(stratum.clusters):
            if not c.splittable:
                continue
            key = (-self._factor(c), c.members[0])
            if best_key is None or key < best_key:
                best, best_key = pos, key
        return best

    def children(self, stratum):
        pos = self._pick_cluster(stratum)
        target = stratum.clusters[pos]
        first, second = split_members(target.members, self._probs)
        k = target.failed
        out = []
        for k1 in range(min(k, len(first)), max(0, k - len(second)) - 1, -1):
            clusters = (
                stratum.clusters[:pos]
                + (Cluster(first, k1), Cluster(second, k - k1))
                + stratum.clusters[pos + 1 :]
            )
            log_size = self._factor.stratum(clusters)
            if log_size == -np.inf:
                continue
            out.append(Stratum(clusters, log_size, stratum.path + (len(out),)))
        return out

    def step(self):
        """Split the most probable refinable stratum; False when none is left."""
        if not self._heap:
            return False
        _, path = heapq.heappop(self._heap)
        parent = self._live.pop(path)
        for child in self.children(parent):
            self._live[child.path] = child
            self._push(child)
        self.steps += 1
        return True

    def strata_set(self):
        strata = tuple(self._live[p] for p in sorted(self._live))
        return StrataSet(
            strata, self.model, self.i_star, self.log_total_mass,
            fully_refined=self.exhausted, steps=self.steps,
        )


def refine_once(strata_set):
    """Apply one refinement step; the result is flagged when nothing was left to split."""
    return refine(strata_set, 1)


def refine(strata_set, steps):
    steps = check_count(steps, "steps")
    refiner = Refiner(strata_set)
    for _ in range(steps):
        if not refiner.step():
            break
    return refiner.strata_set()


def iter_refinements(strata_set, steps):
    """Yield the strata set after each of up to ``steps`` refinement steps."""
    refiner = Refiner(strata_set)
    for _ in range(steps):
        if not refiner.step():
            return
        yield refiner.strata_set()


def sample_stratum(stratum, model, rng=None, size=None, cb=None):
    """Draw states from ``stratum`` (one vector, or a (size, n) matrix)."""
    rng = check_generator(rng)
    cb = cb if cb is not None else _cb_for(model)
    m = 1 if size is None else int(size)
    out = np.zeros((m, model.n), dtype=bool)
    for cluster in stratum.clusters:
        if cluster.failed == 0:
            continue
        cols = list(cluster.members)
        if cluster.failed == cluster.size:
            out[:, cols] = True
        else:
            out[:, cols] = cb.sample(cluster.members, cluster.failed, rng, m)
    return out[0] if size is None else out


def enumerate_stratum(stratum, n):
    """Yield every member state of ``stratum`` as a boolean vector."""
    per_cluster = [itertools.combinations(c.members, c.failed) for c in stratum.clusters]
    for combo in itertools.product(*per_cluster):
        x = np.zeros(n, dtype=bool)
        for failed in combo:
            x[list(failed)] = True
        yield x
