"""Configuration-driven runs: single estimates, budget sweeps and GA studies.

A run is described by a :class:`RunConfig` (loaded from JSON).  Every output
is derived from the master seed, so the same config reproduces byte-identical
files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .allocation import approximate_cond_probs, expected_randomized, optimal, proportional, uniform
from .api import ISTAR_MODES, SSuREstimator
from .component_model import iid_model, inid_model, poisson_rate_model
from .estimators import REPORT_SCHEMA_VERSION, _json_default, variance_ratios
from .fixtures import ieee39_network, water_network
from .istar import GAConfig, connectivity_istar, ga_min_failures
from .oracle import exact_istar, solve_exact, stratum_conditional
from .performance import CachedPerformance, Connectivity, DCCascade, load_network, make_performance
from .strata import Refiner

BUILTIN_NETWORKS = {"builtin:ieee39": ieee39_network, "builtin:water139": water_network}


class ConfigError(ValueError):
    """Invalid run configuration; the message starts with the offending field path."""


@dataclass
class RunConfig:
    network: str | None = None
    model: dict = field(default_factory=lambda: {"kind": "iid", "p": 0.01})
    metric: dict = field(default_factory=lambda: {"kind": "st-connectivity"})
    istar: dict = field(default_factory=lambda: {"mode": "auto"})
    refinement_steps: int = 0
    budget: int = 10_000
    strategy: str = "approx-optimal"
    replications: int = 1
    seed: int = 0
    evidence: dict = field(default_factory=lambda: {"source": "auto", "limit": 50})
    threads: int = 1
    out: str | None = None
    sweep: dict = field(default_factory=dict)
    ga_study: dict = field(default_factory=dict)
    base_dir: str | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        self.validate()

    def validate(self):
        def need(cond, path, msg):
            if not cond:
                raise ConfigError(f"{path}: {msg}")

        need(isinstance(self.refinement_steps, int) and self.refinement_steps >= 0,
             "refinement_steps", "must be an integer >= 0")
        need(isinstance(self.budget, (int, float)) and self.budget >= 1, "budget", "must be >= 1")
        need(isinstance(self.replications, int) and self.replications >= 1,
             "replications", "must be an integer >= 1")
        need(isinstance(self.threads, int) and self.threads >= 1, "threads", "must be an integer >= 1")
        need(isinstance(self.seed, int) and self.seed >= 0, "seed", "must be a non-negative integer")
        need(self.strategy in ("proportional", "optimal", "approx-optimal", "uniform"),
             "strategy", "unknown allocation strategy")
        need("kind" in self.model, "model.kind", "missing")
        need(self.model["kind"] in ("iid", "inid", "poisson"), "model.kind", "must be iid, inid or poisson")
        need("kind" in self.metric, "metric.kind", "missing")
        mode = self.istar.get("mode")
        need(mode in ISTAR_MODES + ("given",), "istar.mode", f"must be one of {ISTAR_MODES + ('given',)}")
        if mode == "given":
            need(isinstance(self.istar.get("value"), int) and self.istar["value"] >= 0,
                 "istar.value", "given mode needs a non-negative integer")
        need(self.evidence.get("source", "auto") in ("auto", "ga", "cuts", "merge", "none"),
             "evidence.source", "unknown evidence source")

    def to_dict(self):
        d = asdict(self)
        d.pop("base_dir")
        return d

    @classmethod
    def from_dict(cls, data, base_dir=None):
        known = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"{sorted(unknown)[0]}: unknown configuration field")
        return cls(**data, base_dir=base_dir)

    @classmethod
    def load(cls, path):
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")), base_dir=str(path.parent))

    # -- builders ------------------------------------------------------------

    def build_network(self):
        if self.network is None:
            return None
        if self.network in BUILTIN_NETWORKS:
            net = BUILTIN_NETWORKS[self.network]()
        else:
            path = Path(self.network)
            if not path.is_absolute() and self.base_dir is not None:
                path = Path(self.base_dir) / path
            net = load_network(path)
        if "targets" in self.metric:
            net.targets = list(self.metric["targets"])
        if "sources" in self.metric:
            net.sources = list(self.metric["sources"])
        return net

    def build_model(self, net):
        spec = self.model
        kind = spec["kind"]
        n = net.n_components if net is not None else spec.get("n", self.metric.get("n"))
        if kind == "iid":
            if n is None:
                raise ConfigError("model.n: needed when there is no network")
            return iid_model(int(n), spec["p"])
        if kind == "inid":
            return inid_model(spec["probs"])
        lengths = spec.get("lengths")
        if lengths is None:
            if net is None or net.length is None:
                raise ConfigError("model.lengths: poisson model needs lengths or a network with lengths")
            lengths = net.length
        return poisson_rate_model(lengths, spec["rate"])

    def build(self):
        """Return (network, model, performance function)."""
        net = self.build_network()
        model = self.build_model(net)
        perf = make_performance(self.metric, net, model.n)
        if isinstance(perf, DCCascade):
            perf = CachedPerformance(perf)
        if perf.n != model.n:
            raise ConfigError(f"model: has {model.n} components but the metric has {perf.n}")
        return net, model, perf

    def estimator(self, seed_offset=0):
        mode = self.istar.get("mode", "auto")
        i_star = self.istar["value"] if mode == "given" else mode
        ga = dict(self.istar.get("ga", {}))
        ga.setdefault("seed", self.seed + seed_offset)
        return SSuREstimator(
            i_star=i_star,
            refinement_steps=self.refinement_steps,
            budget=self.budget,
            strategy=self.strategy,
            evidence=self.evidence.get("source", "auto"),
            evidence_limit=self.evidence.get("limit", 50),
            enumerate_bound=self.istar.get("bound", 3),
            ga_config=GAConfig.from_dict(ga),
            random_state=self.seed,
        )


def load_config(path):
    return RunConfig.load(path)


def replication_seeds(seed, k):
    """Per-replication integer seeds derived from the master seed."""
    children = np.random.SeedSequence(seed).spawn(k)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def _write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n",
                          encoding="utf-8")


def _exact_probs_fn(model, perf):
    cache = {}

    def probs(strata):
        out = []
        for s in strata:
            val = cache.get(s.clusters)
            if val is None:
                val = stratum_conditional(model, perf, s)
                cache[s.clusters] = val
            out.append(val)
        return np.array(out)

    return probs


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------


def run_estimate(config, out=None):
    """Full workflow: i* search, strata, allocation, randomisation, estimate.

    Returns the JSON-ready result dict; when ``out`` (or ``config.out``) is
    set, writes ``report.json``, ``replications.csv`` and ``plan.csv`` there.
    """
    net, model, perf = config.build()
    est = config.estimator()
    if config.strategy == "optimal":
        est.set_params(cond_probs=_exact_probs_fn(model, perf))
    est.fit(model, perf)
    seeds = replication_seeds(config.seed, config.replications)

    def one(s):
        report = est.estimate(np.random.default_rng(s))
        report.seed = int(s)
        return report

    if config.threads > 1 and config.replications > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            reports = list(pool.map(one, seeds))
    else:
        reports = [one(s) for s in seeds]

    p = np.array([r.p_hat for r in reports])
    result = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "config": config.to_dict(),
        "network": None if net is None else net.name,
        "n_components": model.n,
        "i_star": est.i_star_,
        "istar": est.istar_info_,
        "label": est.istar_info_["label"],
        "preprocessing_cost": est.preprocessing_cost_,
        "n_strata": len(est.strata_),
        "tail_mass": est.strata_.total_mass if len(est.strata_) else 0.0,
        "evidence_states": len(est.evidence_),
        "summary": {
            "replications": len(reports),
            "p_hat_mean": float(p.mean()),
            "p_hat_std": float(p.std(ddof=1)) if len(p) > 1 else 0.0,
            "cost_mean": float(np.mean([r.cost for r in reports])),
        },
        "report": reports[0].to_dict(),
        "replications": [
            {"replication": k, "seed": s, "p_hat": r.p_hat, "var_hat": r.var_hat, "cost": r.cost}
            for k, (s, r) in enumerate(zip(seeds, reports))
        ],
    }
    out = out or config.out
    if out:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "report.json", result)
        _write_csv(out / "replications.csv", ["replication", "seed", "p_hat", "var_hat", "cost"],
                   [[k, s, repr(r.p_hat), repr(r.var_hat), r.cost] for k, (s, r) in enumerate(zip(seeds, reports))])
        if est.plan_ is not None:
            first = reports[0].per_stratum
            _write_csv(out / "plan.csv", ["ordinal", "lambda", "fractional", "integral", "hits"],
                       [[row["ordinal"], repr(row["lambda"]), repr(float(f)), row["n"], row["hits"]]
                        for row, f in zip(first, est.plan_.fractional)])
    return result


# ---------------------------------------------------------------------------
# budget sweep
# ---------------------------------------------------------------------------

SWEEP_HEADER = ["steps", "n_strata", "expected_cost", "within_cap", "r_prop", "r_opt", "r_uni", "exact"]


def _plan_for(strategy, strata, N, probs):
    if strategy == "proportional":
        return proportional(strata, N)
    if strategy == "uniform":
        return uniform(strata, N)
    plan = optimal(strata, probs, N)
    return proportional(strata, N) if plan.degenerate else plan


def run_budget_sweep(config, budget_cap=None, max_steps=None, stride=None, oracle=None, out=None):
    """Grow the refinement one step at a time until the expected cost overshoots the cap.

    The expected cost of a step count T is the i*-search cost plus the
    expected randomised sample sizes of the resulting plan.  The selected T
    is the last one whose cost stays within ``budget_cap`` (0 if even the
    initial strata overshoot).  With ``oracle`` the variance ratios use exact
    per-stratum probabilities, otherwise the evidence-based approximation.
    """
    sweep = config.sweep
    budget_cap = budget_cap if budget_cap is not None else sweep.get("budget_cap", config.budget)
    max_steps = max_steps if max_steps is not None else sweep.get("max_steps", 1000)
    stride = stride if stride is not None else sweep.get("stride", 1)
    oracle = oracle if oracle is not None else sweep.get("oracle", False)
    stop_at_cap = sweep.get("stop_at_cap", True)
    net, model, perf = config.build()
    est = config.estimator().set_params(refinement_steps=0, strategy="proportional")
    est.fit(model, perf)
    base_cost = est.preprocessing_cost_
    exact_fn = _exact_probs_fn(model, perf) if oracle else None
    refiner = Refiner(est.strata_)
    rows, selected = [], 0
    strategy = "approx-optimal" if config.strategy == "optimal" and not oracle else config.strategy
    T = 0
    while True:
        strata = refiner.strata_set()
        approx = approximate_cond_probs(strata, est.evidence_, model)
        probs = exact_fn(strata) if oracle else approx
        alloc_probs = probs if strategy == "optimal" else approx
        plan = _plan_for(strategy, strata, float(config.budget), alloc_probs)
        cost = base_cost + math.fsum(expected_randomized(float(f)) for f in plan.fractional)
        try:
            r = variance_ratios(strata, probs, exact=bool(oracle))
            ratios = [r.r_prop, r.r_opt, r.r_uni]
        except ValueError:
            ratios = [math.nan] * 3
        within = cost <= budget_cap
        rows.append([T, len(strata), cost, within, *ratios, bool(oracle)])
        if within:
            selected = T
        elif stop_at_cap:
            break
        if T >= max_steps or refiner.exhausted:
            break
        for _ in range(stride):
            if not refiner.step():
                break
        T = refiner.steps
    result = {"selected_steps": selected, "budget_cap": budget_cap, "rows": rows}
    out = out or config.out
    if out:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "sweep.csv", SWEEP_HEADER, [[repr(v) if isinstance(v, float) else v for v in row]
                                                   for row in rows])
        _write_json(out / "sweep.json", {"schema_version": REPORT_SCHEMA_VERSION,
                                         "config": config.to_dict(), **result})
    return result


# ---------------------------------------------------------------------------
# GA study
# ---------------------------------------------------------------------------

GA_STUDY_HEADER = ["cell", "n_pop", "n_trn", "p_mt", "f_xo", "runs", "truth", "accuracy", "mean_evaluations"]


def true_istar(perf, n, limit=10**7):
    base = perf.perf if isinstance(perf, CachedPerformance) else perf
    if isinstance(base, Connectivity):
        return connectivity_istar(base)
    return exact_istar(n, perf, limit)


def run_ga_study(config, grid=None, runs=None, truth=None, out=None, perf=None, n=None):
    """Accuracy of the GA i* search over a grid of GA settings.

    ``grid`` is a list of dicts of :class:`GAConfig` overrides.  ``truth``
    defaults to max-flow (connectivity) or exhaustive search.  A custom
    performance function can be passed as ``perf`` together with ``n``.
    """
    study = config.ga_study
    grid = grid if grid is not None else study.get("grid", [{}])
    runs = runs if runs is not None else study.get("runs", 10)
    if perf is None:
        _, model, perf = config.build()
        n = model.n
    if truth is None:
        truth = study.get("truth")
    if truth is None:
        truth = true_istar(perf, n)
    rows = []
    for cell, overrides in enumerate(grid):
        seeds = replication_seeds(config.seed + cell, runs)
        hits, evals = 0, []
        for s in seeds:
            cfg = GAConfig.from_dict({**overrides, "seed": s})
            res = ga_min_failures(perf, n, cfg)
            hits += res.best_value == truth
            evals.append(res.evaluations)
        rows.append([cell, cfg.n_pop, cfg.n_trn, cfg.p_mt, cfg.f_xo, runs, truth,
                     hits / runs, float(np.mean(evals))])
    out = out or config.out
    if out:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "ga_study.csv", GA_STUDY_HEADER, rows)
    return rows


# ---------------------------------------------------------------------------
# oracle and cuts
# ---------------------------------------------------------------------------


def run_oracle(config, out=None):
    net, model, perf = config.build()
    sol = solve_exact(model, perf)
    payload = {"schema_version": REPORT_SCHEMA_VERSION, "config": config.to_dict(), **sol.to_dict(),
               "p_f_star": sol.p_f_star, "tail_mass": sol.tail_mass}
    out = out or config.out
    if out:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "oracle.json", payload)
    return payload


def run_cuts(config, out=None):
    from .performance import extract_minimal_cuts

    net, model, perf = config.build()
    base = perf.perf if isinstance(perf, CachedPerformance) else perf
    if not isinstance(base, Connectivity):
        raise ConfigError("metric.kind: cut extraction needs a connectivity metric")
    ev = extract_minimal_cuts(net, config.evidence.get("limit", 50), base.kind, seed=config.seed, perf=base)
    payload = {"schema_version": REPORT_SCHEMA_VERSION, "i_star": connectivity_istar(base), **ev.to_dict()}
    out = out or config.out
    if out:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "cuts.json", payload)
    return payload
