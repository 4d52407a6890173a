"""Minimum number of simultaneous component failures that can fail the system.

Connectivity metrics get exact answers from max-flow / min-cut (unit edge
capacities, parallel edges add up).  Black-box metrics use a binary genetic
algorithm minimising ``sum(x) + (n + 1) * [x is safe]``, or exhaustive
enumeration of all states up to a cardinality bound.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import asdict, dataclass, field

import networkx as nx
import numpy as np
from networkx.algorithms.flow import edmonds_karp

from .allocation import CutEvidence
from .performance import network_to_graph

# ---------------------------------------------------------------------------
# graph cuts
# ---------------------------------------------------------------------------


def min_cut_st(net, s, t):
    """Minimum number of edges whose removal separates ``s`` from ``t``."""
    if s == t:
        raise ValueError("source and target must differ")
    G = network_to_graph(net)
    return int(nx.maximum_flow_value(G, net.index[s], net.index[t], flow_func=edmonds_karp))


def min_cut_sources_target(net, sources, t):
    """Edges needed to separate ``t`` from every vertex in ``sources``.

    The sources are tied to an artificial super-source with unbreakable links.
    """
    if t in sources:
        raise ValueError("target is one of the sources")
    G = network_to_graph(net)
    sup = "_super_source"
    for s in sources:
        G.add_edge(sup, net.index[s], capacity=math.inf)
    return int(nx.maximum_flow_value(G, sup, net.index[t], flow_func=edmonds_karp))


def min_cut_multi_terminal(net, terminals):
    """Smallest s-t cut over all pairs of terminals (K choose 2 max-flows)."""
    terminals = list(terminals)
    if len(terminals) < 2:
        raise ValueError("need at least two terminals")
    return min(min_cut_st(net, a, b) for a, b in itertools.combinations(terminals, 2))


def global_min_cut(net):
    """Stoer-Wagner minimum cut of the whole graph (all-terminal connectivity)."""
    if net.n_vertices < 2:
        raise ValueError("graph needs at least two vertices")
    G = network_to_graph(net)
    if not nx.is_connected(G):
        return 0
    value, _ = nx.stoer_wagner(G, weight="capacity")
    return int(value)


def connectivity_istar(perf):
    """Exact i* of a :class:`Connectivity` performance function."""
    net = perf.net
    if perf.kind in ("st-connectivity", "multi-source-connectivity"):
        return min(min_cut_sources_target(net, net.sources, t) for t in net.targets)
    if perf.kind == "k-terminal":
        return min_cut_multi_terminal(net, net.targets)
    return global_min_cut(net)


# ---------------------------------------------------------------------------
# enumeration up to a bound
# ---------------------------------------------------------------------------


@dataclass
class EnumerationResult:
    """Outcome of checking every state with at most ``bound`` failures.

    ``i_star`` is exact when ``exact`` is True; otherwise no failure exists
    up to ``bound`` and ``i_star`` is the certified lower bound ``bound + 1``.
    """

    i_star: int
    exact: bool
    bound: int
    evaluations: int
    evidence: CutEvidence


def enumerate_to_bound(perf, n, bound=3, collect=True):
    evidence = CutEvidence(n)
    evaluations = 0
    x = np.zeros(n, dtype=bool)
    for i in range(0, min(bound, n) + 1):
        found = False
        for combo in itertools.combinations(range(n), i):
            x[:] = False
            x[list(combo)] = True
            evaluations += 1
            if perf(x):
                found = True
                if not collect:
                    return EnumerationResult(i, True, bound, evaluations, evidence)
                evidence.add(combo)
        if found:
            return EnumerationResult(i, True, bound, evaluations, evidence)
    return EnumerationResult(min(bound, n) + 1, False, bound, evaluations, evidence)


# ---------------------------------------------------------------------------
# genetic algorithm
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GAConfig:
    n_pop: int = 500
    n_trn: int = 2
    p_mt: float = 0.01
    f_xo: float = 0.8
    max_generations: int = 50
    patience: int = 10
    seed: int | None = None
    init_p: float = 0.5
    seed_states: tuple = ()

    def __post_init__(self):
        if self.n_pop < 2:
            raise ValueError("n_pop must be at least 2")
        if self.n_trn < 1:
            raise ValueError("n_trn must be at least 1")
        if not 0 <= self.p_mt <= 1:
            raise ValueError("p_mt must lie in [0, 1]")
        if not 0 <= self.f_xo <= 1:
            raise ValueError("f_xo must lie in [0, 1]")
        if self.max_generations < 0 or self.patience < 1:
            raise ValueError("max_generations must be >= 0 and patience >= 1")

    def to_dict(self):
        d = asdict(self)
        d["seed_states"] = [list(s) for s in self.seed_states]
        return d

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["seed_states"] = tuple(tuple(s) for s in data.get("seed_states", ()))
        return cls(**data)


@dataclass
class GAResult:
    best_value: int
    best_state: np.ndarray
    evaluations: int
    failure_archive: CutEvidence
    generations: int
    history: list = field(default_factory=list)

    @property
    def found(self):
        return self.best_value <= self.best_state.shape[0]

    def write_history(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["generation", "best_value", "unique_evaluations"])
            writer.writerows(self.history)


class _Evaluator:
    def __init__(self, perf, n, archive):
        self.perf = perf
        self.n = n
        self.archive = archive
        self.cache = {}

    def __call__(self, pop):
        keys = np.packbits(pop, axis=1)
        fails = np.empty(pop.shape[0], dtype=bool)
        for row in range(pop.shape[0]):
            key = keys[row].tobytes()
            hit = self.cache.get(key)
            if hit is None:
                hit = bool(self.perf(pop[row]))
                self.cache[key] = hit
                if hit:
                    self.archive.add(pop[row])
            fails[row] = hit
        return pop.sum(axis=1) + (self.n + 1) * (~fails)


def _tournament(rng, fitness, count, size):
    if count == 0:
        return np.zeros(0, dtype=np.intp)
    entrants = rng.integers(0, fitness.shape[0], size=(count, size))
    return entrants[np.arange(count), np.argmin(fitness[entrants], axis=1)]


def ga_min_failures(perf, n, config=None):
    """Estimate i* with a binary GA (tournament selection, uniform crossover/mutation).

    Each generation keeps the incumbent best chromosome; of the remaining
    ``n_pop - 1`` offspring a fraction ``f_xo`` comes from uniform crossover
    of two tournament winners and the rest from uniform bit-flip mutation of
    one winner.  Identical chromosomes are evaluated once.  Stops after
    ``max_generations`` or ``patience`` generations without improvement.
    """
    config = config or GAConfig()
    rng = np.random.default_rng(config.seed)
    archive = CutEvidence(n)
    evaluate = _Evaluator(perf, n, archive)

    pop = rng.random((config.n_pop, n)) < config.init_p
    for k, state in enumerate(config.seed_states[: config.n_pop]):
        pop[k] = False
        pop[k, list(state)] = True
    fitness = evaluate(pop)
    best = int(np.argmin(fitness))
    best_value, best_state = int(fitness[best]), pop[best].copy()
    history = [(0, min(best_value, n + 1), len(evaluate.cache))]

    n_children = config.n_pop - 1
    n_xo = int(round(config.f_xo * n_children))
    n_mut = n_children - n_xo
    stagnant = 0
    generation = 0
    while generation < config.max_generations and stagnant < config.patience:
        generation += 1
        pa = pop[_tournament(rng, fitness, n_xo, config.n_trn)]
        pb = pop[_tournament(rng, fitness, n_xo, config.n_trn)]
        swap = rng.random((n_xo, n)) < 0.5
        crossed = np.where(swap, pb, pa)
        parents = pop[_tournament(rng, fitness, n_mut, config.n_trn)]
        mutated = parents ^ (rng.random((n_mut, n)) < config.p_mt)
        pop = np.vstack([best_state[None, :], crossed, mutated])
        fitness = evaluate(pop)
        cand = int(np.argmin(fitness))
        if fitness[cand] < best_value:
            best_value, best_state = int(fitness[cand]), pop[cand].copy()
            stagnant = 0
        else:
            stagnant += 1
        history.append((generation, min(best_value, n + 1), len(evaluate.cache)))

    if best_value <= n:
        if not perf(best_state):
            raise RuntimeError("GA incumbent failed re-verification")
    else:
        best_value = n + 1
    return GAResult(best_value, best_state, len(evaluate.cache), archive, generation, history)
