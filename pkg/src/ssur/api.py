"""Estimator-style front end for the whole SSuR workflow.

:class:`SSuREstimator` follows the scikit-learn parameter conventions
(``get_params`` / ``set_params``, trailing-underscore fitted attributes),
but ``fit`` takes a component model and a performance function rather than
data matrices, and ``estimate`` replaces ``predict``.
"""

from __future__ import annotations

import dataclasses
import numbers

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_scalar

from ._validation import check_generator
from .allocation import STRATEGIES, CutEvidence, approximate_cond_probs, optimal, proportional, uniform
from .estimators import ssur, ssur_replications
from .istar import GAConfig, connectivity_istar, enumerate_to_bound, ga_min_failures
from .performance import CachedPerformance, Connectivity, extract_minimal_cuts
from .strata import initial_strata, refine

ISTAR_MODES = ("auto", "maxflow", "ga", "enumerate")
EVIDENCE_SOURCES = ("auto", "ga", "cuts", "merge", "none")


def _unwrap(perf):
    return perf.perf if isinstance(perf, CachedPerformance) else perf


class SSuREstimator(BaseEstimator):
    """SSuR estimator: strata by failure count, refined one split at a time.

    Parameters
    ----------
    i_star : int or {"auto", "maxflow", "ga", "enumerate"}
        A known minimum cut cardinality, or how to find it.  ``"auto"`` uses
        max-flow for connectivity metrics and the GA otherwise.
    refinement_steps : int
        Number of one-split refinement steps applied to the initial strata.
    budget : float
        Initial sample size N spread over the strata.
    strategy : str
        One of ``proportional``, ``optimal``, ``approx-optimal``, ``uniform``.
        ``optimal`` needs ``cond_probs``.
    cond_probs : callable or None
        ``cond_probs(strata) -> array`` giving per-stratum failure
        probabilities, e.g. from the exact oracle.
    evidence : str or CutEvidence
        Source of minimal failure states for the approximate allocation.
    """

    def __init__(self, i_star="auto", refinement_steps=0, budget=10_000, strategy="approx-optimal",
                 cond_probs=None, evidence="auto", evidence_limit=50, enumerate_bound=3,
                 ga_config=None, random_state=None):
        self.i_star = i_star
        self.refinement_steps = refinement_steps
        self.budget = budget
        self.strategy = strategy
        self.cond_probs = cond_probs
        self.evidence = evidence
        self.evidence_limit = evidence_limit
        self.enumerate_bound = enumerate_bound
        self.ga_config = ga_config
        self.random_state = random_state

    # -- fitting -----------------------------------------------------------

    def _validate(self):
        check_scalar(self.refinement_steps, "refinement_steps", numbers.Integral, min_val=0)
        check_scalar(self.budget, "budget", numbers.Real, min_val=1)
        check_scalar(self.evidence_limit, "evidence_limit", numbers.Integral, min_val=0)
        check_scalar(self.enumerate_bound, "enumerate_bound", numbers.Integral, min_val=0)
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.strategy == "optimal" and self.cond_probs is None:
            raise ValueError("strategy 'optimal' needs cond_probs")
        if isinstance(self.i_star, numbers.Integral) and not isinstance(self.i_star, bool):
            check_scalar(self.i_star, "i_star", numbers.Integral, min_val=0)
        elif self.i_star not in ISTAR_MODES:
            raise ValueError(f"i_star must be an integer or one of {ISTAR_MODES}")
        if not isinstance(self.evidence, CutEvidence) and self.evidence not in EVIDENCE_SOURCES:
            raise ValueError(f"evidence must be a CutEvidence or one of {EVIDENCE_SOURCES}")

    def _find_istar(self, perf, n):
        mode = self.i_star
        base = _unwrap(perf)
        info = {"mode": mode, "certified": True, "label": "unbiased"}
        if isinstance(mode, numbers.Integral):
            info["mode"] = "given"
            return int(mode), 0, None, info
        if mode == "auto":
            mode = "maxflow" if isinstance(base, Connectivity) else "ga"
            info["mode"] = mode
        if mode == "maxflow":
            if not isinstance(base, Connectivity):
                raise ValueError("max-flow i* search needs a connectivity metric")
            return connectivity_istar(base), 0, None, info
        if mode == "enumerate":
            res = enumerate_to_bound(perf, n, self.enumerate_bound)
            if not res.exact:
                info["label"] = "unbiased-with-bound"
            info["exact"] = res.exact
            return res.i_star, res.evaluations, res.evidence, info
        config = self.ga_config if self.ga_config is not None else GAConfig()
        if isinstance(config, dict):
            config = GAConfig.from_dict(config)
        if config.seed is None and self.random_state is not None:
            # keep the whole fit reproducible from random_state alone
            seed = self.random_state
            if isinstance(seed, np.random.Generator):
                seed = int(seed.integers(2**63))
            config = dataclasses.replace(config, seed=seed)
        res = ga_min_failures(perf, n, config)
        info.update(certified=False, found=res.found, generations=res.generations)
        # when nothing fails the GA reports n + 1 and the strata set is empty
        return res.best_value, res.evaluations, res.failure_archive, info

    def _collect_evidence(self, perf, n, search_evidence):
        src = self.evidence
        if isinstance(src, CutEvidence):
            return src
        base = _unwrap(perf)
        ev = CutEvidence(n)
        use_search = src in ("auto", "ga", "merge")
        use_cuts = src in ("cuts", "merge") or (src == "auto" and search_evidence is None)
        if use_search and search_evidence is not None:
            ev.merge(search_evidence)
        if use_cuts and isinstance(base, Connectivity) and self.evidence_limit > 0:
            ev.merge(extract_minimal_cuts(base.net, self.evidence_limit, base.kind, perf=base))
        return ev

    def fit(self, model, perf):
        self._validate()
        n = model.n
        if perf.n != n:
            raise ValueError(f"performance function has {perf.n} components, model has {n}")
        i_star, cost, search_ev, info = self._find_istar(perf, n)
        self.i_star_ = i_star
        self.preprocessing_cost_ = int(cost)
        self.istar_info_ = info
        strata = initial_strata(model, min(i_star, n + 1))
        self.strata_ = refine(strata, self.refinement_steps) if len(strata) else strata
        self.evidence_ = self._collect_evidence(perf, n, search_ev)
        self.plan_, self.cond_probs_ = self._plan(model, self.strata_)
        self.model_ = model
        self.perf_ = perf
        return self

    def _plan(self, model, strata):
        if len(strata) == 0:
            return None, np.zeros(0)
        N = float(self.budget)
        if self.strategy == "proportional":
            return proportional(strata, N), None
        if self.strategy == "uniform":
            return uniform(strata, N), None
        if self.strategy == "optimal":
            probs = np.asarray(self.cond_probs(strata), dtype=float)
            return optimal(strata, probs, N), probs
        probs = approximate_cond_probs(strata, self.evidence_, model)
        plan = optimal(strata, probs, N, strategy="approx-optimal")
        if plan.degenerate:
            # no usable evidence: every approximation is 0 or 1
            plan = proportional(strata, N)
            plan = type(plan)(plan.fractional, plan.budget, "approx-optimal/proportional-fallback")
        return plan, probs

    # -- estimation --------------------------------------------------------

    def _check_fitted(self):
        if not hasattr(self, "strata_"):
            raise RuntimeError("call fit() before estimating")

    def estimate(self, rng=None):
        """One SSuR estimate; ``rng`` defaults to ``random_state``."""
        self._check_fitted()
        rng = check_generator(self.random_state if rng is None else rng)
        if len(self.strata_) == 0:
            from .estimators import EstimateReport

            return EstimateReport("ssur", 0.0, 0.0, self.preprocessing_cost_, self.preprocessing_cost_,
                                  metadata={"i_star": self.i_star_, "n_strata": 0})
        report = ssur(self.model_, self.perf_, self.strata_, self.plan_, rng, self.preprocessing_cost_)
        report.metadata["istar"] = dict(self.istar_info_)
        report.metadata["label"] = self.istar_info_["label"]
        return report

    def replicate(self, replications, rng=None):
        """Vectorised independent replications: (p_hat array, cost array)."""
        self._check_fitted()
        rng = check_generator(self.random_state if rng is None else rng)
        p_hat, cost = ssur_replications(self.model_, self.perf_, self.strata_, self.plan_, replications, rng)
        return p_hat, cost + self.preprocessing_cost_
