"""Network performance functions mapping a component state vector to failure.

Components are network edges (lines, pipes); ``x[e] = True`` means edge
``e`` has failed.  Three families are provided:

* connectivity: source/target, k-terminal and all-terminal connectivity;
* a DC power-flow cascade returning the fraction of demand left unserved;
* a k-out-of-n rule, handy for tests and for GA benchmarks.

The cascade follows the usual capacity-tolerance convention: every line
gets ``tolerance * |base-case flow|`` of capacity, overloaded lines trip
together, islands are rebalanced by proportional generator (or load)
scaling and the flow is re-solved until no line is overloaded.
"""

from __future__ import annotations

import hashlib
import json
import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ._validation import check_state, check_states
from .allocation import CutEvidence

SCHEMA_VERSION = 1
CONNECTIVITY_KINDS = ("st-connectivity", "multi-source-connectivity", "k-terminal", "all-terminal")


@dataclass
class NetworkSpec:
    """Undirected network whose edges are the random components.

    Edge ``e`` is component ``e``.  ``load`` and ``generation`` map vertex
    labels to MW and are only needed by the power-flow model.
    """

    vertices: list
    edges: list
    sources: list = field(default_factory=list)
    targets: list = field(default_factory=list)
    reactance: list | None = None
    capacity: list | None = None
    length: list | None = None
    load: dict = field(default_factory=dict)
    generation: dict = field(default_factory=dict)
    name: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.edges = [tuple(e) for e in self.edges]
        self.index = {v: i for i, v in enumerate(self.vertices)}
        if len(self.index) != len(self.vertices):
            raise ValueError("vertex labels must be unique")
        for e, (u, v) in enumerate(self.edges):
            if u not in self.index or v not in self.index:
                raise ValueError(f"edge {e} has an unknown endpoint: {(u, v)}")
        for label in list(self.sources) + list(self.targets):
            if label not in self.index:
                raise ValueError(f"unknown terminal vertex {label!r}")
        for attr in ("reactance", "capacity", "length"):
            values = getattr(self, attr)
            if values is not None and len(values) != len(self.edges):
                raise ValueError(f"{attr} must have one entry per edge")
        for attr in ("load", "generation"):
            for label in getattr(self, attr):
                if label not in self.index:
                    raise ValueError(f"{attr} given for unknown vertex {label!r}")

    @property
    def n_components(self):
        return len(self.edges)

    @property
    def n_vertices(self):
        return len(self.vertices)

    def endpoints(self):
        """(from, to) vertex index arrays."""
        u = np.array([self.index[a] for a, _ in self.edges], dtype=np.intp)
        v = np.array([self.index[b] for _, b in self.edges], dtype=np.intp)
        return u, v

    def to_dict(self):
        edges = []
        for e, (u, v) in enumerate(self.edges):
            row = {"component": e, "u": u, "v": v}
            for attr in ("reactance", "capacity", "length"):
                values = getattr(self, attr)
                if values is not None:
                    row[attr] = values[e]
            edges.append(row)
        out = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "vertices": list(self.vertices),
            "edges": edges,
            "sources": list(self.sources),
            "targets": list(self.targets),
        }
        if self.load:
            out["load"] = [[k, v] for k, v in self.load.items()]
        if self.generation:
            out["generation"] = [[k, v] for k, v in self.generation.items()]
        if self.metadata:
            out["metadata"] = self.metadata
        return out

    @classmethod
    def from_dict(cls, data):
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported network schema version {version}")
        rows = sorted(data["edges"], key=lambda r: r.get("component", 0))
        comps = [r.get("component") for r in data["edges"]]
        if all(c is not None for c in comps):
            if sorted(comps) != list(range(len(comps))):
                raise ValueError("edge component indices must be 0..m-1 without gaps")
        else:
            rows = data["edges"]

        def column(name):
            if any(name in r for r in rows):
                if not all(name in r for r in rows):
                    raise ValueError(f"edge attribute {name!r} must be given for every edge")
                return [float(r[name]) for r in rows]
            return None

        return cls(
            vertices=list(data["vertices"]),
            edges=[(r["u"], r["v"]) for r in rows],
            sources=list(data.get("sources", [])),
            targets=list(data.get("targets", [])),
            reactance=column("reactance"),
            capacity=column("capacity"),
            length=column("length"),
            load={k: float(v) for k, v in data.get("load", [])},
            generation={k: float(v) for k, v in data.get("generation", [])},
            name=data.get("name", ""),
            metadata=data.get("metadata", {}),
        )

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def load_network(path):
    with open(path, encoding="utf-8") as fh:
        return NetworkSpec.from_dict(json.load(fh))


def save_network(net, path):
    Path(path).write_text(json.dumps(net.to_dict(), indent=1) + "\n", encoding="utf-8")


def network_to_graph(net, alive=None):
    """Collapse parallel edges into an undirected weighted networkx graph."""
    G = nx.Graph()
    G.add_nodes_from(range(net.n_vertices))
    for e, (a, b) in enumerate(net.edges):
        if alive is not None and not alive[e]:
            continue
        u, v = net.index[a], net.index[b]
        if u == v:
            continue
        if G.has_edge(u, v):
            G[u][v]["capacity"] += 1
        else:
            G.add_edge(u, v, capacity=1)
    return G


# ---------------------------------------------------------------------------
# performance functions
# ---------------------------------------------------------------------------


class PerformanceFunction:
    """Deterministic map from a state vector to a failure indicator."""

    kind = "abstract"
    n = 0

    def __call__(self, x):
        raise NotImplementedError

    def failed_batch(self, X):
        X = check_states(X, self.n)
        return np.fromiter((self(x) for x in X), dtype=bool, count=X.shape[0])

    def config(self):
        return {"kind": self.kind, "n": self.n}

    def digest(self):
        blob = json.dumps(self.config(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


class KOutOfN(PerformanceFunction):
    """Fails when at least ``k`` components have failed."""

    kind = "k-of-n"

    def __init__(self, n, k):
        self.n = int(n)
        self.k = int(k)

    def __call__(self, x):
        return int(np.count_nonzero(x)) >= self.k

    def failed_batch(self, X):
        return np.asarray(X, dtype=bool).sum(axis=1) >= self.k

    def config(self):
        return {"kind": self.kind, "n": self.n, "k": self.k}


class PredicatePerformance(PerformanceFunction):
    """Wrap a plain callable ``f(x) -> bool``."""

    kind = "predicate"

    def __init__(self, n, func, name="predicate"):
        self.n = int(n)
        self.func = func
        self.name = name

    def __call__(self, x):
        return bool(self.func(np.asarray(x, dtype=bool)))

    def config(self):
        return {"kind": self.kind, "n": self.n, "name": self.name}


class Connectivity(PerformanceFunction):
    """Connectivity-based failure.

    * ``st-connectivity`` / ``multi-source-connectivity``: fails when some
      target cannot be reached from any source (the sources act as one
      artificial super-source joined by never-failing links);
    * ``k-terminal``: fails when the ``targets`` are not mutually connected;
    * ``all-terminal``: fails when the graph is disconnected.
    """

    def __init__(self, net, kind="st-connectivity"):
        if kind not in CONNECTIVITY_KINDS:
            raise ValueError(f"unknown connectivity kind {kind!r}")
        if kind in ("st-connectivity", "multi-source-connectivity"):
            if not net.sources or not net.targets:
                raise ValueError(f"{kind} needs at least one source and one target")
        if kind == "k-terminal" and len(net.targets) < 2:
            raise ValueError("k-terminal connectivity needs at least two terminals")
        self.net = net
        self.kind = kind
        self.n = net.n_components
        self._adj = [[] for _ in range(net.n_vertices)]
        u, v = net.endpoints()
        for e, (a, b) in enumerate(zip(u, v)):
            self._adj[a].append((b, e))
            self._adj[b].append((a, e))
        self._sources = [net.index[s] for s in net.sources]
        self._targets = [net.index[t] for t in net.targets]

    def _reach(self, starts, x):
        seen = set(starts)
        queue = deque(starts)
        adj = self._adj
        while queue:
            a = queue.popleft()
            for b, e in adj[a]:
                if b not in seen and not x[e]:
                    seen.add(b)
                    queue.append(b)
        return seen

    def __call__(self, x):
        if self.kind in ("st-connectivity", "multi-source-connectivity"):
            seen = self._reach(self._sources, x)
            return any(t not in seen for t in self._targets)
        if self.kind == "k-terminal":
            seen = self._reach(self._targets[:1], x)
            return any(t not in seen for t in self._targets)
        return len(self._reach([0], x)) < self.net.n_vertices

    def config(self):
        return {"kind": self.kind, "n": self.n, "network": self.net.digest()}


class DCCascade(PerformanceFunction):
    """Cascading-failure blackout size under DC power flow.

    ``loss(x)`` is the fraction of total demand not served once the cascade
    triggered by removing the failed lines has settled.  The system fails
    when the loss reaches ``threshold``.
    """

    kind = "dc-cascade"

    def __init__(self, net, threshold=0.4, tolerance=1.2):
        if net.reactance is None:
            raise ValueError("DC power flow needs per-line reactances")
        if not 0.0 <= threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if tolerance < 1.0:
            raise ValueError("tolerance below 1 makes the base case infeasible")
        self.net = net
        self.n = net.n_components
        self.threshold = float(threshold)
        self.tolerance = float(tolerance)
        self._nb = net.n_vertices
        self._from, self._to = net.endpoints()
        x = np.asarray(net.reactance, dtype=float)
        if np.any(x <= 0):
            raise ValueError("reactances must be positive")
        self._b = 1.0 / x
        self._gen = np.zeros(self._nb)
        self._load = np.zeros(self._nb)
        for label, mw in net.generation.items():
            self._gen[net.index[label]] = mw
        for label, mw in net.load.items():
            self._load[net.index[label]] = mw
        self._total_load = float(self._load.sum())
        if self._total_load <= 0:
            raise ValueError("network carries no load")
        alive = np.ones(self.n, dtype=bool)
        self.base_flows, served = self._dispatch(alive)
        if net.capacity is not None:
            self.capacity = np.asarray(net.capacity, dtype=float)
        else:
            self.capacity = self.tolerance * np.abs(self.base_flows)
        if served < self._total_load * (1 - 1e-12):
            raise ValueError("base case sheds load; generation must cover demand")

    def _dispatch(self, alive):
        """Solve island-wise DC flows; return (line flows, served MW)."""
        idx = np.flatnonzero(alive)
        f, t = self._from[idx], self._to[idx]
        graph = coo_matrix((np.ones(idx.size), (f, t)), shape=(self._nb, self._nb))
        n_isl, labels = connected_components(graph, directed=False)
        flows = np.zeros(self.n)
        served = 0.0
        line_island = labels[f]
        for isl in range(n_isl):
            buses = np.flatnonzero(labels == isl)
            gen = self._gen[buses].sum()
            load = self._load[buses].sum()
            if load <= 0 or gen <= 0:
                continue
            if gen >= load:
                inj = self._gen[buses] * (load / gen) - self._load[buses]
                served += load
            else:
                inj = self._gen[buses] - self._load[buses] * (gen / load)
                served += gen
            if buses.size == 1:
                continue
            lines = idx[line_island == isl]
            local = np.full(self._nb, -1, dtype=np.intp)
            local[buses] = np.arange(buses.size)
            lf, lt = local[self._from[lines]], local[self._to[lines]]
            b = self._b[lines]
            A = np.zeros((lines.size, buses.size))
            rows = np.arange(lines.size)
            A[rows, lf] = 1.0
            A[rows, lt] = -1.0
            B = (A.T * b) @ A
            slack = int(np.argmax(self._gen[buses]))
            keep = np.arange(buses.size) != slack
            theta = np.zeros(buses.size)
            try:
                theta[keep] = np.linalg.solve(B[np.ix_(keep, keep)], inj[keep])
            except np.linalg.LinAlgError:
                served -= min(gen, load)
                continue
            flows[lines] = b * (theta[lf] - theta[lt])
        return flows, served

    def loss(self, x):
        x = check_state(x, self.n)
        alive = ~x
        for _ in range(self.n + 1):
            flows, served = self._dispatch(alive)
            over = alive & (np.abs(flows) > self.capacity * (1 + 1e-9) + 1e-9)
            if not over.any():
                break
            alive = alive & ~over
        return float(min(1.0, max(0.0, 1.0 - served / self._total_load)))

    def __call__(self, x):
        return self.loss(x) >= self.threshold

    def config(self):
        return {
            "kind": self.kind, "n": self.n, "threshold": self.threshold,
            "tolerance": self.tolerance, "network": self.net.digest(),
        }


class CachedPerformance(PerformanceFunction):
    """Memoise a deterministic performance function by state.

    ``unique_evaluations`` counts calls that reached the wrapped function.
    """

    def __init__(self, perf):
        self.perf = perf
        self.n = perf.n
        self.kind = perf.kind
        self._memo = {}

    @property
    def unique_evaluations(self):
        return len(self._memo)

    def __call__(self, x):
        key = np.packbits(np.asarray(x, dtype=bool)).tobytes()
        hit = self._memo.get(key)
        if hit is None:
            hit = bool(self.perf(x))
            self._memo[key] = hit
        return hit

    def failed_batch(self, X):
        X = np.asarray(X, dtype=bool)
        if X.shape[0] == 0:
            return np.zeros(0, dtype=bool)
        keys = np.packbits(X, axis=1)
        out = np.empty(X.shape[0], dtype=bool)
        memo = self._memo
        for row in range(X.shape[0]):
            key = keys[row].tobytes()
            hit = memo.get(key)
            if hit is None:
                hit = bool(self.perf(X[row]))
                memo[key] = hit
            out[row] = hit
        return out

    def config(self):
        return self.perf.config()

    def __getstate__(self):
        return {"perf": self.perf, "n": self.n, "kind": self.kind, "_memo": {}}


def failure_indicator(perf, x):
    return bool(perf(x))


def connectivity_failure(net, x, kind="st-connectivity"):
    return Connectivity(net, kind)(x)


def dc_cascade_loss(net, x, tolerance=1.2):
    return DCCascade(net, threshold=1.0, tolerance=tolerance).loss(x)


def make_performance(metric, net=None, n=None):
    """Build a performance function from a metric description dict."""
    kind = metric["kind"]
    if kind == "k-of-n":
        size = n if net is None else net.n_components
        return KOutOfN(size, metric["k"])
    if net is None:
        raise ValueError(f"metric {kind!r} needs a network")
    if kind in CONNECTIVITY_KINDS:
        return Connectivity(net, kind)
    if kind == "dc-cascade":
        return DCCascade(
            net,
            threshold=metric.get("threshold", net.metadata.get("threshold", 0.4)),
            tolerance=metric.get("tolerance", net.metadata.get("tolerance", 1.2)),
        )
    raise ValueError(f"unknown metric kind {kind!r}")


# ---------------------------------------------------------------------------
# minimal cuts
# ---------------------------------------------------------------------------


def minimize_cut(perf, failed, order=None):
    """Shrink a failing set of components to an inclusion-minimal one.

    Assumes a coherent performance function.  Components are restored one
    at a time (in ``order``) whenever the state keeps failing without them.
    """
    x = np.zeros(perf.n, dtype=bool)
    x[list(failed)] = True
    if not perf(x):
        return None
    for e in (order if order is not None else sorted(failed)):
        x[e] = False
        if not perf(x):
            x[e] = True
    return frozenset(int(j) for j in np.flatnonzero(x))


def _incident(net, label):
    v = net.index[label]
    u_idx, v_idx = net.endpoints()
    return [e for e in range(net.n_components) if (u_idx[e] == v) != (v_idx[e] == v)]


def extract_minimal_cuts(net, limit=50, kind="st-connectivity", seed=0, perf=None):
    """Collect up to ``limit`` minimal cuts of a connectivity network.

    Candidates are the edges incident to each terminal, the edges incident
    to all sources together, and min cuts from repeated max-flow runs with
    randomly perturbed unit capacities.  Every candidate is verified to
    fail and shrunk to a minimal cut before it enters the evidence.
    """
    perf = perf if perf is not None else Connectivity(net, kind)
    evidence = CutEvidence(net.n_components)
    candidates = []
    for label in list(net.targets) + list(net.sources):
        candidates.append(_incident(net, label))
    if len(net.sources) > 1:
        candidates.append(sorted({e for s in net.sources for e in _incident(net, s)}))

    def take(candidate):
        if len(evidence) >= limit:
            return
        cut = minimize_cut(perf, candidate)
        if cut:
            evidence.add(cut)

    for cand in candidates:
        take(cand)

    rng = random.Random(seed)
    attempts = 0
    flow_pairs = _flow_pairs(net, perf.kind)
    while len(evidence) < limit and attempts < 4 * limit and flow_pairs:
        attempts += 1
        s, t = flow_pairs[attempts % len(flow_pairs)]
        G = nx.Graph()
        G.add_nodes_from(range(net.n_vertices + 1))
        u_idx, v_idx = net.endpoints()
        weights = {}
        for e in range(net.n_components):
            a, b = int(u_idx[e]), int(v_idx[e])
            if a == b:
                continue
            w = 1.0 + 0.5 * rng.random()
            weights.setdefault((min(a, b), max(a, b)), []).append((e, w))
        for (a, b), lst in weights.items():
            G.add_edge(a, b, capacity=sum(w for _, w in lst))
        _, (side, _) = nx.minimum_cut(G, s, t) if s != "super" else _super_cut(G, net, t)
        crossing = [
            e for (a, b), lst in weights.items() if (a in side) != (b in side) for e, _ in lst
        ]
        if crossing:
            take(crossing)
    return evidence


def _flow_pairs(net, kind):
    if kind in ("st-connectivity", "multi-source-connectivity"):
        return [("super", net.index[t]) for t in net.targets]
    if kind == "k-terminal":
        ts = [net.index[t] for t in net.targets]
        return [(a, b) for i, a in enumerate(ts) for b in ts[i + 1 :]]
    return [(0, v) for v in range(1, net.n_vertices)]


def _super_cut(G, net, t):
    sup = net.n_vertices
    for s in net.sources:
        G.add_edge(sup, net.index[s], capacity=float("inf"))
    return nx.minimum_cut(G, sup, t)
