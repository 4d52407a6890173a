"""Failure-probability estimators and their variance diagnostics.

All estimators return an :class:`EstimateReport`.  Stratified sampling (SS),
conditional stratified sampling (cSS) and SSuR share :func:`ssur`; they only
differ in the strata they are handed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_count, check_generator
from .allocation import randomize
from .conditional_bernoulli import _cb_for
from .strata import sample_stratum

REPORT_SCHEMA_VERSION = 1


@dataclass
class EstimateReport:
    method: str
    p_hat: float
    var_hat: float
    cost: int
    preprocessing_cost: int = 0
    per_stratum: list = field(default_factory=list)
    seed: object = None
    metadata: dict = field(default_factory=dict)

    @property
    def std_err(self):
        return math.sqrt(max(self.var_hat, 0.0))

    @property
    def sample_cost(self):
        return self.cost - self.preprocessing_cost

    def to_dict(self):
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "method": self.method,
            "p_hat": self.p_hat,
            "var_hat": self.var_hat,
            "std_err": self.std_err,
            "cost": self.cost,
            "preprocessing_cost": self.preprocessing_cost,
            "seed": self.seed,
            "metadata": self.metadata,
            "per_stratum": self.per_stratum,
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True, default=_json_default)

    def to_text(self, max_strata=20):
        """Aligned plain-text summary for terminals."""
        lines = [
            f"{'method':<20}{self.method}",
            f"{'p_hat':<20}{self.p_hat:.6e}",
            f"{'std_err':<20}{self.std_err:.6e}",
            f"{'cost':<20}{self.cost}  (pre-processing {self.preprocessing_cost})",
            f"{'seed':<20}{self.seed}",
        ]
        if self.per_stratum:
            lines.append("")
            lines.append(f"{'ordinal':>8} {'lambda':>14} {'N':>8} {'hits':>8}")
            for row in self.per_stratum[:max_strata]:
                lines.append(
                    f"{row['ordinal']:>8} {row['lambda']:>14.6e} {row['n']:>8} {row['hits']:>8}"
                )
            if len(self.per_stratum) > max_strata:
                lines.append(f"{'...':>8} ({len(self.per_stratum) - max_strata} more strata)")
        return "\n".join(lines)


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _bernoulli_var(hits, n):
    """Unbiased variance of a sample mean of ``n`` indicators (0 when n == 1)."""
    if n <= 1:
        return 0.0
    p = hits / n
    return p * (1.0 - p) / (n - 1)


def crude_mcs(model, perf, N, rng=None):
    N = check_count(N, "N", minimum=1)
    rng = check_generator(rng)
    X = rng.random((N, model.n)) < model.probs
    hits = int(np.count_nonzero(perf.failed_batch(X)))
    return EstimateReport("mcs", hits / N, _bernoulli_var(hits, N), N,
                          metadata={"hits": hits, "n_samples": N})


def conditional_mcs(model, perf, i_star, N, rng=None):
    """Monte Carlo restricted to states with at least ``i_star`` failures.

    The failure count is drawn from the truncated count distribution and the
    state from the conditional Bernoulli model given that count.
    """
    i_star = check_count(i_star, "i_star")
    N = check_count(N, "N", minimum=1)
    rng = check_generator(rng)
    cb = _cb_for(model)
    everyone = tuple(range(model.n))
    pmf = cb.count_pmf(everyone)
    tail = pmf[i_star:]
    mass = math.fsum(tail)
    if mass <= 0.0:
        return EstimateReport("cmcs", 0.0, 0.0, 0, metadata={"tail_mass": 0.0})
    per_count = rng.multinomial(N, tail / tail.sum())
    hits = 0
    for offset, m in enumerate(per_count):
        if m == 0:
            continue
        X = cb.sample(everyone, i_star + offset, rng, int(m))
        hits += int(np.count_nonzero(perf.failed_batch(X)))
    var = mass**2 * _bernoulli_var(hits, N)
    return EstimateReport("cmcs", mass * hits / N, var, N,
                          metadata={"tail_mass": mass, "i_star": i_star, "hits": hits, "n_samples": N})


def ssur(model, perf, strata, plan, rng=None, preprocessing_cost=0):
    """Stratified estimate over ``strata`` with sample sizes from ``plan``.

    A plan that has not been randomised yet is randomised here with ``rng``.
    The variance estimate sums lambda^2 p_hat (1 - p_hat) / (N - 1) per
    stratum; strata with a single sample contribute 0 and are counted in
    ``metadata['single_sample_strata']``.
    """
    rng = check_generator(rng)
    if len(plan) != len(strata):
        raise ValueError(f"plan has {len(plan)} entries but there are {len(strata)} strata")
    if plan.integral is None:
        plan = randomize(plan, rng)
    sizes = plan.integral
    if np.any(sizes < 1):
        raise ValueError("every stratum needs at least one sample")
    cb = _cb_for(model)
    lam = strata.sizes
    rows, est_terms, var_terms = [], [], []
    for j, stratum in enumerate(strata):
        n_j = int(sizes[j])
        X = sample_stratum(stratum, model, rng, size=n_j, cb=cb)
        hits = int(np.count_nonzero(perf.failed_batch(X)))
        est_terms.append(lam[j] * hits / n_j)
        var_terms.append(lam[j] ** 2 * _bernoulli_var(hits, n_j))
        rows.append({"ordinal": j, "lambda": float(lam[j]), "n": n_j, "hits": hits})
    p_hat = min(1.0, math.fsum(est_terms))
    n_samples = int(sizes.sum())
    meta = {
        "strategy": plan.strategy,
        "n_strata": len(strata),
        "i_star": strata.i_star,
        "refinement_steps": strata.steps,
        "tail_mass": strata.total_mass,
        "single_sample_strata": int(np.count_nonzero(sizes == 1)),
        "n_samples": n_samples,
        "degenerate_plan": plan.degenerate,
    }
    return EstimateReport("ssur", p_hat, math.fsum(var_terms), n_samples + int(preprocessing_cost),
                          int(preprocessing_cost), rows, metadata=meta)


def ssur_replications(model, perf, strata, plan, replications, rng=None):
    """Estimates from ``replications`` independent SSuR runs, vectorised.

    Each replication randomises the plan afresh.  Draws for a stratum are
    pooled across replications and then split, which yields the same joint
    distribution as running :func:`ssur` repeatedly but touches each stratum
    once.  Returns (p_hat array, sample-cost array).
    """
    replications = check_count(replications, "replications", minimum=1)
    rng = check_generator(rng)
    cb = _cb_for(model)
    sizes = np.stack([randomize(plan, rng).integral for _ in range(replications)])
    lam = strata.sizes
    p_hat = np.zeros(replications)
    for j, stratum in enumerate(strata):
        col = sizes[:, j]
        X = sample_stratum(stratum, model, rng, size=int(col.sum()), cb=cb)
        fails = perf.failed_batch(X).astype(np.int64)
        edges = np.concatenate([[0], np.cumsum(col)])
        hits = np.add.reduceat(fails, edges[:-1]) if fails.size else np.zeros(replications)
        p_hat += lam[j] * hits / col
    return p_hat, sizes.sum(axis=1)


# ---------------------------------------------------------------------------
# variance ratios and efficiency
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VarianceRatios:
    """Stratified variance relative to conditional MCS at the same sample count."""

    r_prop: float
    r_opt: float
    r_uni: float
    p_star: float
    exact: bool = True


def variance_ratios(strata, cond_probs, p_star=None, exact=True):
    w = strata.weights
    p = np.asarray(cond_probs, dtype=float)
    if p.shape != w.shape:
        raise ValueError("cond_probs must have one entry per stratum")
    if p_star is None:
        p_star = float(np.sum(w * p))
    denom = p_star * (1.0 - p_star)
    # sums of weights equal to 1 only up to rounding, so p* = 1 shows up as 1 - 1e-16
    if denom <= 1e-12:
        raise ValueError(f"variance ratios are undefined for p* = {p_star}")
    sd = np.sqrt(np.clip(p * (1.0 - p), 0.0, None))
    r_prop = float(np.sum(w * sd**2) / denom)
    r_opt = float(np.sum(w * sd) ** 2 / denom)
    r_uni = float(len(w) * np.sum(w**2 * sd**2) / denom)
    return VarianceRatios(r_prop, r_opt, r_uni, float(p_star), exact)


def split_change(lam1, lam2, p1, p2):
    """Change in the proportional and optimal variance terms when a stratum splits.

    A parent of mass ``lam1 + lam2`` with failure probability equal to the
    mass-weighted mean of ``p1`` and ``p2`` is replaced by two children.
    Returns ``(d_prop, d_opt)`` where

    * ``d_prop`` is the change of sum lambda p (1 - p), and equals
      ``-(lam1 lam2 / lam) (p1 - p2)^2``;
    * ``d_opt`` is the change of sum lambda sqrt(p (1 - p)).

    Both are non-positive and vanish only when ``p1 == p2``.
    """
    lam = lam1 + lam2
    p = (lam1 * p1 + lam2 * p2) / lam
    d_prop = lam1 * p1 * (1 - p1) + lam2 * p2 * (1 - p2) - lam * p * (1 - p)
    d_opt = lam1 * math.sqrt(p1 * (1 - p1)) + lam2 * math.sqrt(p2 * (1 - p2)) - lam * math.sqrt(p * (1 - p))
    return d_prop, d_opt


def split_change_prop_closed(lam1, lam2, p1, p2):
    return -(lam1 * lam2 / (lam1 + lam2)) * (p1 - p2) ** 2


def efficiency_from_ratio(r_opt, alpha=0.0):
    """Relative efficiency over conditional MCS, 1 / (r_opt (1 + alpha))."""
    if r_opt <= 0:
        return math.inf
    return 1.0 / (r_opt * (1.0 + alpha))


def relative_efficiency(estimates, baseline_variance):
    """Baseline variance over the variance of an estimator.

    ``estimates`` is either a variance, an :class:`EstimateReport` (its
    ``var_hat`` is used) or an array of replicated point estimates, whose
    sample variance is used.
    """
    if isinstance(estimates, EstimateReport):
        var = estimates.var_hat
    elif np.ndim(estimates) == 0:
        var = float(estimates)
    else:
        var = float(np.var(np.asarray(estimates, dtype=float), ddof=1))
    if var == 0.0:
        return math.inf
    return baseline_variance / var


def mcs_variance(p_f, n_samples):
    return p_f * (1.0 - p_f) / n_samples


def cmcs_variance(tail_mass, p_star, n_samples):
    return tail_mass**2 * p_star * (1.0 - p_star) / n_samples
