"""Benchmark networks shipped with the package and small synthetic graphs."""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .performance import NetworkSpec

# New England 39-bus system: (from, to, reactance p.u.).  Transformers are
# kept as ordinary lines, giving the 46 line components.
IEEE39_BRANCHES = [
    (1, 2, 0.0411), (1, 39, 0.0250), (2, 3, 0.0151), (2, 25, 0.0086),
    (2, 30, 0.0181), (3, 4, 0.0213), (3, 18, 0.0133), (4, 5, 0.0128),
    (4, 14, 0.0129), (5, 6, 0.0026), (5, 8, 0.0112), (6, 7, 0.0092),
    (6, 11, 0.0082), (6, 31, 0.0250), (7, 8, 0.0046), (8, 9, 0.0363),
    (9, 39, 0.0250), (10, 11, 0.0043), (10, 13, 0.0043), (10, 32, 0.0200),
    (12, 11, 0.0435), (12, 13, 0.0435), (13, 14, 0.0101), (14, 15, 0.0217),
    (15, 16, 0.0094), (16, 17, 0.0089), (16, 19, 0.0195), (16, 21, 0.0135),
    (16, 24, 0.0059), (17, 18, 0.0082), (17, 27, 0.0173), (19, 20, 0.0138),
    (19, 33, 0.0142), (20, 34, 0.0180), (21, 22, 0.0140), (22, 23, 0.0096),
    (22, 35, 0.0143), (23, 24, 0.0350), (23, 36, 0.0272), (25, 26, 0.0323),
    (25, 37, 0.0232), (26, 27, 0.0147), (26, 28, 0.0474), (26, 29, 0.0625),
    (28, 29, 0.0151), (29, 38, 0.0156),
]
IEEE39_LOAD = {
    3: 322.0, 4: 500.0, 7: 233.8, 8: 522.0, 12: 7.5, 15: 320.0, 16: 329.0,
    18: 158.0, 20: 628.0, 21: 274.0, 23: 247.5, 24: 308.6, 25: 224.0,
    26: 139.0, 27: 281.0, 28: 206.0, 29: 283.5, 31: 9.2, 39: 1104.0,
}
# Bus 31 (slack) is set so that generation matches the lossless demand.
IEEE39_GENERATION = {
    30: 250.0, 31: 477.1, 32: 650.0, 33: 632.0, 34: 508.0, 35: 650.0,
    36: 560.0, 37: 540.0, 38: 830.0, 39: 1000.0,
}


def build_ieee39_network():
    return NetworkSpec(
        vertices=list(range(1, 40)),
        edges=[(a, b) for a, b, _ in IEEE39_BRANCHES],
        reactance=[x for _, _, x in IEEE39_BRANCHES],
        load=dict(IEEE39_LOAD),
        generation=dict(IEEE39_GENERATION),
        name="ieee39-style",
        metadata={"tolerance": 1.5, "threshold": 0.4},
    )


def build_water_network(seed=20240101):
    """Synthetic stand-in for a city water-supply network.

    118 nodes on a 4 km x 6 km area (4 plants, 114 demand nodes) joined by
    139 pipes: a Euclidean minimum spanning tree of a Delaunay triangulation
    plus the 22 shortest remaining Delaunay edges.  Demand node 47 is given
    three incident pipes and node 75 two, matching the roles they play in
    the examples.
    """
    import networkx as nx
    from scipy.spatial import Delaunay

    rng = np.random.default_rng(seed)
    pts = rng.uniform([0.0, 0.0], [6.0, 4.0], size=(118, 2))
    tri = Delaunay(pts)
    cand = set()
    for simplex in tri.simplices:
        for i in range(3):
            a, b = sorted((int(simplex[i]), int(simplex[(i + 1) % 3])))
            cand.add((a, b))
    G = nx.Graph()
    for a, b in cand:
        G.add_edge(a, b, weight=float(np.linalg.norm(pts[a] - pts[b])))
    tree = set(tuple(sorted(e)) for e in nx.minimum_spanning_edges(G, data=False))
    extra = sorted(cand - tree, key=lambda e: G.edges[e]["weight"])[:22]
    edges = sorted(tree | set(extra))
    H = nx.Graph(edges)
    deg = dict(H.degree())
    # plants at the four nodes closest to the area corners
    corners = np.array([[0, 0], [6, 0], [0, 4], [6, 4]], dtype=float)
    plants = []
    for c in corners:
        order = np.argsort(np.linalg.norm(pts - c, axis=1))
        plants.append(next(int(j) for j in order if int(j) not in plants))
    demand = [v for v in range(118) if v not in plants]

    def cut_size(v):
        S = nx.Graph()
        S.add_edges_from(H.edges, capacity=1)
        for p in plants:
            S.add_edge("S", p, capacity=float("inf"))
        return nx.maximum_flow_value(S, "S", v)

    deg3 = next(v for v in demand if deg[v] == 3 and cut_size(v) == 3)
    deg2 = next(v for v in demand if deg[v] == 2 and cut_size(v) == 2 and v != deg3)
    # relabel: plants P1..P4, demand nodes 1..114 with the chosen ones at 47 and 75
    rest = [v for v in demand if v not in (deg3, deg2)]
    labels = {}
    it = iter(rest)
    for k in range(1, 115):
        if k == 47:
            labels[deg3] = k
        elif k == 75:
            labels[deg2] = k
        else:
            labels[next(it)] = k
    for k, p in enumerate(plants, start=1):
        labels[p] = f"P{k}"
    vertices = [f"P{k}" for k in range(1, 5)] + list(range(1, 115))
    return NetworkSpec(
        vertices=vertices,
        edges=[(labels[a], labels[b]) for a, b in edges],
        length=[round(float(np.linalg.norm(pts[a] - pts[b])), 4) for a, b in edges],
        sources=[f"P{k}" for k in range(1, 5)],
        targets=[47],
        name="water-139-synthetic",
        metadata={"seed": seed},
    )


def _load(name):
    with resources.files("ssur.data").joinpath(name).open(encoding="utf-8") as fh:
        return NetworkSpec.from_dict(json.load(fh))


def ieee39_network():
    return _load("ieee39.json")


def water_network(target=47):
    net = _load("water139.json")
    net.targets = [target]
    return net


def bridge_network():
    """Two triangles joined by a single bridge edge; s and t on either side."""
    edges = [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)]
    return NetworkSpec(vertices=list(range(6)), edges=edges, sources=[0], targets=[5])


def grid_network(rows, cols, sources=None, targets=None):
    vertices = list(range(rows * cols))
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return NetworkSpec(
        vertices=vertices, edges=edges,
        sources=[0] if sources is None else sources,
        targets=[rows * cols - 1] if targets is None else targets,
    )


def random_network(n_vertices, n_edges, seed=0, n_sources=1, n_targets=1, allow_parallel=True):
    """Random connected multigraph: a random spanning tree plus extra edges."""
    rng = np.random.default_rng(seed)
    if n_edges < n_vertices - 1:
        raise ValueError("need at least n_vertices - 1 edges for connectivity")
    order = rng.permutation(n_vertices)
    edges = []
    for k in range(1, n_vertices):
        a = int(order[k])
        b = int(order[rng.integers(0, k)])
        edges.append((a, b))
    existing = {tuple(sorted(e)) for e in edges}
    while len(edges) < n_edges:
        a, b = (int(v) for v in rng.choice(n_vertices, size=2, replace=False))
        key = tuple(sorted((a, b)))
        if not allow_parallel and key in existing:
            continue
        existing.add(key)
        edges.append((a, b))
    terminals = [int(v) for v in rng.choice(n_vertices, size=n_sources + n_targets, replace=False)]
    return NetworkSpec(
        vertices=list(range(n_vertices)), edges=edges,
        sources=terminals[:n_sources], targets=terminals[n_sources:],
    )
