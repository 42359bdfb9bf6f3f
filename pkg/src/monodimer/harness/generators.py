"""Graph families used by experiments and the verification corpus."""

from __future__ import annotations

import itertools

import numpy as np

from ..graph import Graph, GraphError


class RetryExhausted(RuntimeError):
    pass


def path(n: int) -> Graph:
    if n < 1:
        raise GraphError("path needs n >= 1")
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle(n: int) -> Graph:
    if n < 3:
        raise GraphError("cycle needs n >= 3")
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def star(k: int) -> Graph:
    """K_{1,k} with centre 0."""
    if k < 1:
        raise GraphError("star needs k >= 1")
    return Graph.from_edges(k + 1, [(0, i) for i in range(1, k + 1)])


def complete(n: int) -> Graph:
    if n < 1:
        raise GraphError("complete graph needs n >= 1")
    return Graph.from_edges(n, itertools.combinations(range(n), 2))


def complete_bipartite(a: int, b: int) -> Graph:
    if a < 1 or b < 1:
        raise GraphError("both sides need at least one vertex")
    return Graph.from_edges(a + b, [(i, a + j) for i in range(a) for j in range(b)])


def grid(r: int, c: int) -> Graph:
    if r < 1 or c < 1:
        raise GraphError("grid needs positive dimensions")
    edges = []
    for i in range(r):
        for j in range(c):
            v = i * c + j
            if j + 1 < c:
                edges.append((v, v + 1))
            if i + 1 < r:
                edges.append((v, v + c))
    return Graph.from_edges(r * c, edges)


def petersen() -> Graph:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return Graph.from_edges(10, outer + spokes + inner)


def star_plus_edge(k: int = 3) -> Graph:
    """K_{1,k} with a pendant edge hung off leaf 1."""
    g = star(k)
    return Graph.from_edges(k + 2, list(g.edges) + [(1, k + 1)])


def erdos_renyi(n: int, p: float, seed=None) -> Graph:
    if not 0.0 <= p <= 1.0:
        raise GraphError("p must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    pairs = list(itertools.combinations(range(n), 2))
    keep = rng.random(len(pairs)) < p if pairs else np.array([], dtype=bool)
    return Graph.from_edges(n, [pr for pr, k in zip(pairs, keep) if k])


def random_regular(n: int, d: int, seed=None, max_tries: int = 10_000) -> Graph:
    """Pairing model, rejecting loops and multi-edges."""
    if n * d % 2:
        raise GraphError(f"n*d must be even (n={n}, d={d})")
    if d >= n:
        raise GraphError("need d < n")
    rng = np.random.default_rng(seed)
    points = np.repeat(np.arange(n), d)
    for _ in range(max_tries):
        perm = rng.permutation(points)
        pairs = perm.reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        norm = {(int(min(a, b)), int(max(a, b))) for a, b in pairs}
        if len(norm) == len(pairs):
            return Graph.from_edges(n, sorted(norm))
    raise RetryExhausted(f"no simple {d}-regular pairing after {max_tries} tries")


def subgraph_sample(g: Graph, k: int, seed=None) -> Graph:
    """Keep ``k`` edges of ``g`` chosen uniformly at random."""
    if not 0 <= k <= g.m:
        raise GraphError("edge count out of range")
    rng = np.random.default_rng(seed)
    keep = sorted(rng.choice(g.m, size=k, replace=False).tolist())
    return Graph.from_edges(g.n, [g.edges[i] for i in keep])


FAMILIES = {
    "path": path,
    "cycle": cycle,
    "star": star,
    "complete": complete,
    "complete_bipartite": complete_bipartite,
    "grid": grid,
    "erdos_renyi": erdos_renyi,
    "random_regular": random_regular,
    "petersen": petersen,
    "star_plus_edge": star_plus_edge,
}


def generate_graph(spec) -> Graph:
    """Build a graph from ``{"family": name, **params}`` or a string like ``grid:3,3``."""
    if isinstance(spec, str):
        name, _, rest = spec.partition(":")
        args = [_num(a) for a in rest.split(",") if a.strip()]
        kwargs = {}
    else:
        spec = dict(spec)
        name = spec.pop("family")
        args, kwargs = [], spec
    try:
        fn = FAMILIES[name.strip()]
    except KeyError:
        raise GraphError(f"unknown family {name!r}; known: {', '.join(sorted(FAMILIES))}") from None
    return fn(*args, **kwargs)


def _num(s: str):
    s = s.strip()
    try:
        return int(s)
    except ValueError:
        return float(s)
