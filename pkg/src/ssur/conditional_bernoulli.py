"""Conditional Bernoulli model: R-function, count PMF and ID-checking sampling.

For independent components with failure probabilities ``p_j`` and odds
``w_j = p_j / (1 - p_j)``, the R-function of a subset ``A`` is the elementary
symmetric polynomial of the odds,

    R(i, A) = sum over size-i subsets B of A of prod_{j in B} w_j,

with R(0, A) = 1.  The probability of exactly ``i`` failures in ``A`` is
``prod_{j in A}(1 - p_j) * R(i, A)``.  All tables are held in log space.

Components with ``p = 0`` or ``p = 1`` have degenerate odds.  The public
functions strip them first: forced-failed components reduce the count that
remains to be distributed, forced-safe ones are simply never failed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._validation import check_generator

NEG_INF = -np.inf


@dataclass(frozen=True)
class RTable:
    """``log R(i, subset)`` for ``i = 0 .. len(subset)``."""

    subset: tuple
    log_values: np.ndarray

    def __call__(self, i):
        return self.value(i)

    def log(self, i):
        if i < 0 or i >= self.log_values.shape[0]:
            return NEG_INF
        return float(self.log_values[i])

    def value(self, i):
        return math.exp(self.log(i))

    @property
    def values(self):
        return np.exp(self.log_values)


def _log_r_forward(log_odds):
    """Gail-style one-pass recursion R_k(i) = R_{k-1}(i) + w_k R_{k-1}(i-1)."""
    m = log_odds.shape[0]
    table = np.full(m + 1, NEG_INF)
    table[0] = 0.0
    for k, w in enumerate(log_odds, start=1):
        table[1 : k + 1] = np.logaddexp(table[1 : k + 1], w + table[0:k])
    return table


def _log_r_suffix(log_odds):
    """``S[k, j] = log R(j, {k, ..., m-1})`` for every suffix of the subset."""
    m = log_odds.shape[0]
    S = np.full((m + 1, m + 1), NEG_INF)
    S[m, 0] = 0.0
    for k in range(m - 1, -1, -1):
        S[k, 0] = 0.0
        S[k, 1:] = np.logaddexp(S[k + 1, 1:], log_odds[k] + S[k + 1, :-1])
    return S


class ConditionalBernoulli:
    """Cached R-tables and conditional samplers for one component model.

    Tables are keyed by the tuple of (non-degenerate) member indices, so the
    many strata that share a cluster reuse the same work.  Instances are not
    thread safe for insertion; give each worker its own instance.
    """

    def __init__(self, model):
        self.model = model
        self._free_mask = (model.probs > 0.0) & (model.probs < 1.0)
        self._forced_fail = model.probs == 1.0
        self._log_odds = np.where(self._free_mask, model.log_p - model.log_q, 0.0)
        self._forward = {}
        self._suffix = {}

    # -- subset bookkeeping -------------------------------------------------

    def split_subset(self, subset):
        """Return (free members, number of forced-failed, number of forced-safe)."""
        idx = np.asarray(subset, dtype=np.intp)
        free = tuple(int(j) for j in idx[self._free_mask[idx]])
        n_fail = int(np.count_nonzero(self._forced_fail[idx]))
        return free, n_fail, len(idx) - len(free) - n_fail

    def log_r(self, free):
        """Forward log R-table of a tuple of non-degenerate components."""
        table = self._forward.get(free)
        if table is None:
            table = _log_r_forward(self._log_odds[list(free)])
            self._forward[free] = table
        return table

    def suffix_table(self, free):
        table = self._suffix.get(free)
        if table is None:
            table = _log_r_suffix(self._log_odds[list(free)])
            self._suffix[free] = table
        return table

    # -- probabilities ------------------------------------------------------

    def log_count_probability(self, subset, k):
        """log Pr(exactly ``k`` of ``subset`` fail)."""
        free, n_fail, _ = self.split_subset(subset)
        k_free = k - n_fail
        if k_free < 0 or k_free > len(free):
            return NEG_INF
        if not free:
            return 0.0
        log_q = float(np.sum(self.model.log_q[list(free)]))
        return log_q + float(self.log_r(free)[k_free])

    def count_pmf(self, subset):
        m = len(subset)
        free, n_fail, _ = self.split_subset(subset)
        pmf = np.zeros(m + 1)
        if not free:
            pmf[n_fail] = 1.0
            return pmf
        log_q = float(np.sum(self.model.log_q[list(free)]))
        pmf[n_fail : n_fail + len(free) + 1] = np.exp(log_q + self.log_r(free))
        return pmf

    def log_containment(self, subset, k, required):
        """log Pr(all of ``required`` fail | exactly ``k`` of ``subset`` fail).

        ``required`` must be a subset of ``subset``.  Evaluates
        prod_{j in c} w_j * R(k - |c|, A \\ c) / R(k, A) on the free part.
        """
        free, n_fail, _ = self.split_subset(subset)
        k_free = k - n_fail
        if k_free < 0 or k_free > len(free):
            return NEG_INF
        req = np.asarray(sorted(required), dtype=np.intp)
        if req.size and np.any(self.model.probs[req] == 0.0):
            return NEG_INF
        req_free = [j for j in req if self._free_mask[j]]
        c = len(req_free)
        if c > k_free:
            return NEG_INF
        if c == 0:
            return 0.0
        req_set = set(req_free)
        rest = tuple(j for j in free if j not in req_set)
        num = float(np.sum(self._log_odds[req_free])) + float(self.log_r(rest)[k_free - c])
        return num - float(self.log_r(free)[k_free])

    # -- sampling -----------------------------------------------------------

    def sample(self, subset, k, rng, size):
        """Draw ``size`` states of ``subset`` with exactly ``k`` failures.

        Returns a boolean array of shape (size, len(subset)) ordered like
        ``subset``.  Non-degenerate members are visited in the order given
        and failed with probability ``1 - R(i-r, rest) / R(i-r, rest+k)``.
        """
        subset = tuple(subset)
        m = len(subset)
        if k < 0 or k > m:
            raise ValueError(f"failed count {k} outside [0, {m}]")
        out = np.zeros((size, m), dtype=bool)
        idx = np.asarray(subset, dtype=np.intp)
        out[:, self._forced_fail[idx]] = True
        free_pos = np.flatnonzero(self._free_mask[idx])
        n_fail = int(np.count_nonzero(self._forced_fail[idx]))
        k_free = k - n_fail
        if k_free < 0 or k_free > free_pos.size:
            raise ValueError(f"no state of the subset has exactly {k} failures")
        if k_free == 0 or size == 0:
            return out
        if k_free == free_pos.size:
            out[:, free_pos] = True
            return out
        free = tuple(int(j) for j in idx[free_pos])
        S = self.suffix_table(free)
        rows = np.arange(size)
        r = np.zeros(size, dtype=np.intp)
        for pos, col in enumerate(free_pos):
            need = k_free - r
            pi = np.exp(S[pos + 1, need] - S[pos, need])
            fail = rng.random(size) >= pi
            out[rows, col] = fail
            r += fail
        if not np.all(r == k_free):
            raise AssertionError("conditional sampler produced a wrong failure count")
        return out


@lru_cache(maxsize=16)
def _cb_for(model):
    return ConditionalBernoulli(model)


def _check_subset(model, subset):
    if subset is None:
        return tuple(range(model.n))
    subset = tuple(int(j) for j in subset)
    if not subset:
        raise ValueError("subset must be non-empty")
    if len(set(subset)) != len(subset):
        raise ValueError("subset indices must be distinct")
    if min(subset) < 0 or max(subset) >= model.n:
        raise IndexError("subset index out of range")
    return subset


def r_function(model, subset=None):
    """R-table of ``subset``; every member must have 0 < p < 1."""
    subset = _check_subset(model, subset)
    probs = model.probs[list(subset)]
    if np.any(probs <= 0.0) or np.any(probs >= 1.0):
        raise ValueError("R-function needs failure probabilities strictly inside (0, 1)")
    return RTable(subset, _log_r_forward(model.log_odds(list(subset))))


def count_pmf(model, subset=None):
    """Poisson-binomial PMF of the number of failures in ``subset``."""
    subset = _check_subset(model, subset)
    return _cb_for(model).count_pmf(subset)


def sample_conditional(model, subset, i, rng=None, size=None):
    """Sample states of ``subset`` conditional on exactly ``i`` failures.

    Returns one boolean vector, or a (size, len(subset)) matrix if ``size``
    is given.
    """
    subset = _check_subset(model, subset)
    rng = check_generator(rng)
    draws = _cb_for(model).sample(subset, int(i), rng, 1 if size is None else int(size))
    return draws[0] if size is None else draws
