"""Sample allocation over strata: proportional, (approximately) optimal and uniform.

Fractional allocations are turned into integer sample sizes by randomising
each size to a neighbouring integer such that the reciprocal sample size is
unbiased, E[1 / N_bar] = 1 / N, which keeps the stratified estimator unbiased.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._validation import check_generator
from .conditional_bernoulli import _cb_for

STRATEGIES = ("proportional", "optimal", "approx-optimal", "uniform")


@dataclass(frozen=True, eq=False)
class AllocationPlan:
    fractional: np.ndarray
    budget: float
    strategy: str
    integral: np.ndarray | None = None
    degenerate: bool = False

    def __len__(self):
        return self.fractional.shape[0]

    @property
    def total(self):
        """Number of samples actually drawn (requires an integral plan)."""
        if self.integral is None:
            raise ValueError("plan has not been randomised yet")
        return int(self.integral.sum())

    def expected_total(self):
        return float(sum(expected_randomized(n) for n in self.fractional))

    def to_rows(self):
        integral = self.integral if self.integral is not None else [None] * len(self)
        return [
            {"ordinal": j, "fractional": float(f), "integral": None if i is None else int(i)}
            for j, (f, i) in enumerate(zip(self.fractional, integral))
        ]


@dataclass
class CutEvidence:
    """Minimal failure states (as sets of failed components), pairwise non-dominating."""

    n: int
    states: list = field(default_factory=list)

    @classmethod
    def from_states(cls, n, states):
        ev = cls(n)
        for s in states:
            ev.add(s)
        return ev

    def add(self, state):
        """Insert a failure state unless it dominates an archived one.

        ``state`` is a boolean vector or an iterable of failed indices.
        Archived states dominated by the new one are dropped.  Returns True
        when the archive changed.
        """
        failed = _as_failed_set(state, self.n)
        for s in self.states:
            if s <= failed:
                return False
        self.states = [s for s in self.states if not failed <= s]
        self.states.append(failed)
        assert self.is_antichain_with(failed)
        return True

    def is_antichain_with(self, failed):
        return all(s == failed or not (s <= failed or failed <= s) for s in self.states)

    def merge(self, other):
        for s in other.states:
            self.add(s)
        return self

    def matrix(self):
        out = np.zeros((len(self.states), self.n), dtype=bool)
        for row, s in enumerate(self.states):
            out[row, list(s)] = True
        return out

    def sorted_states(self):
        return sorted((tuple(sorted(s)) for s in self.states), key=lambda t: (len(t), t))

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def to_dict(self):
        return {"n": self.n, "states": [list(s) for s in self.sorted_states()]}


def _as_failed_set(state, n):
    arr = np.asarray(state)
    if arr.dtype == bool:
        if arr.shape != (n,):
            raise ValueError(f"state must have length {n}")
        return frozenset(int(j) for j in np.flatnonzero(arr))
    failed = frozenset(int(j) for j in state)
    if failed and (min(failed) < 0 or max(failed) >= n):
        raise IndexError("failed component index out of range")
    return failed


def _weights(strata):
    w = strata.weights
    if w.size == 0:
        raise ValueError("no strata to allocate samples to")
    return w


def proportional(strata, N):
    """Sample sizes proportional to stratum probability."""
    if N <= 0:
        raise ValueError("budget must be positive")
    w = _weights(strata)
    return AllocationPlan(N * w / w.sum(), float(N), "proportional")


def uniform(strata, N):
    if N <= 0:
        raise ValueError("budget must be positive")
    m = len(_weights(strata))
    return AllocationPlan(np.full(m, N / m), float(N), "uniform")


def optimal(strata, cond_probs, N, strategy="optimal"):
    """Sizes proportional to lambda * sqrt(p (1 - p)) (Neyman allocation).

    Strata with zero local standard deviation receive 0; when every stratum
    has zero standard deviation the plan is flagged degenerate and all
    fractional sizes are 0, so randomisation gives one sample per stratum.
    """
    if N <= 0:
        raise ValueError("budget must be positive")
    w = _weights(strata)
    p = np.asarray(cond_probs, dtype=float)
    if p.shape != w.shape:
        raise ValueError("cond_probs must have one entry per stratum")
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("conditional probabilities must lie in [0, 1]")
    score = w * np.sqrt(p * (1.0 - p))
    total = score.sum()
    if total <= 0.0:
        return AllocationPlan(np.zeros_like(w), float(N), strategy, degenerate=True)
    return AllocationPlan(N * score / total, float(N), strategy)


def approximate_cond_probs(strata, evidence, model=None):
    """Coherence-based approximation of each stratum's failure probability.

    A state that contains an evidence state is assumed to fail.  For every
    stratum the containment probabilities of the evidence states are summed
    and capped at one.  Containment factorises over clusters: within a
    cluster holding ``k`` failures, all of ``c`` fail with probability
    prod_{j in c} w_j * R(k - |c|, C \\ c) / R(k, C).
    """
    model = model if model is not None else strata.model
    out = np.zeros(len(strata))
    if evidence is None or len(evidence) == 0:
        return out
    cb = _cb_for(model)
    E = evidence.matrix().astype(np.int64)
    ev_sizes = E.sum(axis=1)
    ev_sets = [np.flatnonzero(row) for row in E]
    cache = {}
    for j, stratum in enumerate(strata):
        clusters = stratum.clusters
        labels = np.empty(model.n, dtype=np.intp)
        for pos, c in enumerate(clusters):
            labels[list(c.members)] = pos
        ks = np.array([c.failed for c in clusters])
        candidates = np.flatnonzero(ev_sizes <= stratum.failed_count)
        if candidates.size == 0:
            continue
        onehot = np.zeros((model.n, len(clusters)), dtype=np.int64)
        onehot[np.arange(model.n), labels] = 1
        counts = E[candidates] @ onehot
        feasible = candidates[np.all(counts <= ks, axis=1)]
        total = 0.0
        for e in feasible:
            log_p = 0.0
            by_cluster = {}
            for comp in ev_sets[e]:
                by_cluster.setdefault(labels[comp], []).append(int(comp))
            for pos, req in by_cluster.items():
                c = clusters[pos]
                key = (c.members, c.failed, tuple(req))
                val = cache.get(key)
                if val is None:
                    val = cb.log_containment(c.members, c.failed, req)
                    cache[key] = val
                log_p += val
                if log_p == -np.inf:
                    break
            total += math.exp(log_p)
            if total >= 1.0:
                break
        out[j] = min(1.0, total)
    return out


def randomization_distribution(N):
    """Support and probabilities of the randomised size of a fractional ``N``.

    Works with floats or :class:`fractions.Fraction` (exact arithmetic).
    """
    if N < 0:
        raise ValueError("sample size must be non-negative")
    if N < 1:
        return ((1, 1),)
    lo = math.floor(N)
    if lo == N:
        return ((int(lo), 1),)
    hi = lo + 1
    p_lo = lo * hi / N - lo
    return ((int(lo), p_lo), (int(hi), 1 - p_lo))


def expected_randomized(N):
    return sum(k * q for k, q in randomization_distribution(N))


def expected_inverse(N):
    """E[1 / N_bar] under the randomisation (exact for Fraction input)."""
    exact = isinstance(N, Fraction)
    return sum(Fraction(1, k) * q if exact else q / k for k, q in randomization_distribution(N))


def randomize_size(N, rng):
    dist = randomization_distribution(N)
    if len(dist) == 1:
        return dist[0][0]
    (lo, p_lo), (hi, _) = dist
    return lo if rng.random() < p_lo else hi


def randomize(plan, rng=None):
    """Randomise every fractional size to a neighbouring integer (at least 1)."""
    rng = check_generator(rng)
    f = plan.fractional
    if np.any(f < 0):
        raise ValueError("fractional sizes must be non-negative")
    lo = np.floor(f)
    hi = lo + 1.0
    is_int = lo == f
    with np.errstate(divide="ignore", invalid="ignore"):
        p_lo = np.where(is_int | (f < 1), 1.0, lo * hi / f - lo)
    u = rng.random(f.shape[0])
    sizes = np.where(u < p_lo, lo, hi)
    sizes = np.where(is_int, f, sizes)
    sizes = np.where(f < 1, 1.0, sizes).astype(np.int64)
    return AllocationPlan(plan.fractional, plan.budget, plan.strategy, sizes, plan.degenerate)


def alpha(plan_sizes, optimal_sizes):
    """Relative variance increase of an allocation over the optimal one.

    alpha = sum_i (N_i / sum N) ((N_i - N_i_opt) / N_i)^2, which equals
    V_plan / V_opt - 1 when both allocations spend the same budget.
    """
    n = _sizes(plan_sizes)
    n_opt = _sizes(optimal_sizes)
    if n.shape != n_opt.shape:
        raise ValueError("allocations must cover the same strata")
    if np.any(n <= 0):
        raise ValueError("allocation entries must be positive")
    if not math.isclose(n.sum(), n_opt.sum(), rel_tol=1e-9):
        raise ValueError("allocations must have equal totals")
    rel = (n - n_opt) / n
    return float(np.sum(n / n.sum() * rel**2))


def alpha_bound(plan_sizes, optimal_sizes):
    n = _sizes(plan_sizes)
    n_opt = _sizes(optimal_sizes)
    return float(np.max(np.abs(n - n_opt) / n) ** 2)


def _sizes(plan):
    if isinstance(plan, AllocationPlan):
        plan = plan.integral if plan.integral is not None else plan.fractional
    return np.asarray(plan, dtype=float)


def allocation_variance(strata, cond_probs, sizes):
    """Stratified-estimator variance sum lambda^2 p(1-p) / N for given sizes."""
    lam = strata.sizes
    p = np.asarray(cond_probs, dtype=float)
    n = _sizes(sizes)
    return float(np.sum(lam**2 * p * (1 - p) / n))
