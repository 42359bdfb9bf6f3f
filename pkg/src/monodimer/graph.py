"""Simple undirected graphs with edge bitmasks.

Edge sets (configurations in {0,1}^E, matchings, boundaries) are plain Python
ints: bit ``i`` is set iff edge ``i`` is a member.  This keeps symmetric
differences, unions and membership tests to single integer operations and
makes configurations hashable for free.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence


class GraphError(ValueError):
    """Invalid graph construction or edge-set argument."""


def bits(mask: int):
    """Yield the indices of the set bits of ``mask`` in increasing order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def popcount(mask: int) -> int:
    return bin(mask).count("1")


@dataclass(frozen=True)
class Graph:
    """A simple undirected graph on vertices ``0..n-1``.

    Edge ``i`` is ``edges[i]`` stored as ``(u, v)`` with ``u < v``.  The
    index order is whatever was passed in; :meth:`from_edges` with
    ``sort=True`` gives the canonical sorted-endpoint order.

    ``vertex_order`` lists vertices from smallest to largest under the total
    order used for tie-breaking in canonical paths.  It defaults to numeric
    order.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    vertex_order: tuple[int, ...] = ()
    incident: tuple[int, ...] = field(init=False, repr=False, compare=False)
    adjacent: tuple[int, ...] = field(init=False, repr=False, compare=False)
    rank: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise GraphError("graph needs at least one vertex")
        seen = set()
        norm = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise GraphError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge ({u}, {v}) out of range for n={self.n}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphError(f"parallel edge {key}")
            seen.add(key)
            norm.append(key)
        object.__setattr__(self, "edges", tuple(norm))

        order = tuple(self.vertex_order) or tuple(range(self.n))
        if sorted(order) != list(range(self.n)):
            raise GraphError("vertex_order must be a permutation of 0..n-1")
        object.__setattr__(self, "vertex_order", order)
        rank = [0] * self.n
        for r, v in enumerate(order):
            rank[v] = r
        object.__setattr__(self, "rank", tuple(rank))

        inc = [0] * self.n
        for i, (u, v) in enumerate(norm):
            inc[u] |= 1 << i
            inc[v] |= 1 << i
        object.__setattr__(self, "incident", tuple(inc))
        # edges sharing a vertex with edge i, excluding i itself
        adj = tuple((inc[u] | inc[v]) & ~(1 << i) for i, (u, v) in enumerate(norm))
        object.__setattr__(self, "adjacent", adj)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]], sort: bool = True,
                   vertex_order: Sequence[int] = ()) -> "Graph":
        pairs = [(min(u, v), max(u, v)) for u, v in edges]
        if sort:
            pairs = sorted(pairs)
        return cls(n, tuple(pairs), tuple(vertex_order))

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def full_mask(self) -> int:
        return (1 << self.m) - 1

    @property
    def max_degree(self) -> int:
        return max((popcount(x) for x in self.incident), default=0)

    def degree(self, v: int) -> int:
        return popcount(self.incident[v])

    def incident_edges(self, v: int) -> list[int]:
        return list(bits(self.incident[v]))

    def other_end(self, e: int, v: int) -> int:
        a, b = self.edges[e]
        if v == a:
            return b
        if v == b:
            return a
        raise GraphError(f"vertex {v} is not on edge {e}")

    def shared_vertex(self, e: int, f: int) -> int | None:
        common = set(self.edges[e]) & set(self.edges[f])
        return common.pop() if len(common) == 1 else None

    def edge_index(self, u: int, v: int) -> int:
        key = (min(u, v), max(u, v))
        try:
            return self.edges.index(key)
        except ValueError:
            raise GraphError(f"no edge {key}") from None

    def larger(self, u: int, v: int) -> int:
        """The larger of two vertices under ``vertex_order``."""
        return u if self.rank[u] > self.rank[v] else v

    def mask(self, edge_indices: Iterable[int]) -> int:
        out = 0
        for i in edge_indices:
            if not 0 <= i < self.m:
                raise GraphError(f"edge index {i} out of range (m={self.m})")
            out |= 1 << i
        return out

    def vertices_of(self, mask: int) -> set[int]:
        vs = set()
        for i in bits(mask):
            vs.update(self.edges[i])
        return vs

    def check_mask(self, s: int | Sequence[int]) -> int:
        """Coerce ``s`` to an edge mask of this graph.

        Accepts an int bitmask or a 0/1 bit-vector of length ``m``.
        """
        if isinstance(s, int):
            if s < 0 or s >> self.m:
                raise GraphError(f"edge set has bits beyond m={self.m}")
            return s
        vec = list(s)
        if len(vec) != self.m:
            raise GraphError(f"bit-vector length {len(vec)} != m={self.m}")
        out = 0
        for i, b in enumerate(vec):
            if b not in (0, 1, True, False):
                raise GraphError("bit-vector entries must be 0 or 1")
            if b:
                out |= 1 << i
        return out

    def to_bits(self, mask: int) -> list[int]:
        return [(mask >> i) & 1 for i in range(self.m)]

    def without_edges(self, removed: int) -> "Graph":
        """Subgraph on the same vertices with the edges in ``removed`` deleted."""
        keep = [self.edges[i] for i in range(self.m) if not (removed >> i) & 1]
        return Graph(self.n, tuple(keep), self.vertex_order)


def is_matching(g: Graph, s) -> bool:
    s = g.check_mask(s)
    return all(popcount(s & inc) <= 1 for inc in g.incident)


def inclusive_boundary(g: Graph, s) -> int:
    """All edges sharing a vertex with some edge of ``s``, ``s`` included."""
    s = g.check_mask(s)
    out = s
    for i in bits(s):
        out |= g.adjacent[i]
    return out


def boundary(g: Graph, s) -> int:
    s = g.check_mask(s)
    return inclusive_boundary(g, s) & ~s


def inclusive_boundary_of_vertex(g: Graph, v: int) -> int:
    return g.incident[v]


def connected_component(g: Graph, within: int, e: int) -> int:
    """Edges of ``within`` reachable from edge ``e`` through shared vertices."""
    comp = 1 << e
    frontier = comp
    while frontier:
        grow = 0
        for i in bits(frontier):
            grow |= g.adjacent[i]
        grow &= within & ~comp
        comp |= grow
        frontier = grow
    return comp


def _degrees(g: Graph, mask: int) -> dict[int, int]:
    deg: dict[int, int] = {}
    for i in bits(mask):
        for v in g.edges[i]:
            deg[v] = deg.get(v, 0) + 1
    return deg


def classify(g: Graph, mask: int) -> tuple[str, tuple[int, ...]]:
    """Classify a connected edge set as ``path``, ``even_cycle`` or ``other``.

    Returns the kind together with the path endpoints (empty for cycles).
    """
    deg = _degrees(g, mask)
    if any(d > 2 for d in deg.values()):
        return "other", ()
    ends = tuple(sorted(v for v, d in deg.items() if d == 1))
    if len(ends) == 2:
        return "path", ends
    if not ends:
        return ("even_cycle", ()) if popcount(mask) % 2 == 0 else ("other", ())
    return "other", ()


def walk(g: Graph, mask: int, start: int, first_edge: int | None = None) -> list[int]:
    """Order the edges of a path or cycle ``mask`` by walking from ``start``.

    For a path ``start`` must be an endpoint; for a cycle ``first_edge``
    fixes the direction.
    """
    remaining = mask
    order = []
    v = start
    e = first_edge
    while remaining:
        if e is None:
            cands = list(bits(g.incident[v] & remaining))
            if len(cands) != 1:
                raise GraphError("edge set is not a path from the given start")
            e = cands[0]
        elif not (remaining >> e) & 1 or v not in g.edges[e]:
            raise GraphError(f"edge {e} does not continue the walk at vertex {v}")
        order.append(e)
        remaining &= ~(1 << e)
        v = g.other_end(e, v)
        e = None
        if remaining and not g.incident[v] & remaining:
            raise GraphError("edge set is disconnected")
    return order


@dataclass(frozen=True)
class DiffComponent:
    """One connected component of the symmetric difference of two edge sets."""

    edges: int
    kind: str
    endpoint_vertices: tuple[int, ...]

    def __contains__(self, e: int) -> bool:
        return bool((self.edges >> e) & 1)

    def __len__(self) -> int:
        return popcount(self.edges)

    def ordered_edges(self, g: Graph, x: int | None = None) -> list[int]:
        """Edges numbered as in the canonical path construction.

        Paths are walked from their larger endpoint.  Cycles start at the
        largest vertex with its edge in ``x`` (which must then be given).
        """
        if self.kind == "path":
            a, b = self.endpoint_vertices
            return walk(g, self.edges, g.larger(a, b))
        if self.kind == "even_cycle":
            if x is None:
                raise GraphError("cycle numbering needs the source matching x")
            top = max(g.vertices_of(self.edges), key=lambda v: g.rank[v])
            first = g.incident[top] & self.edges & x
            if popcount(first) != 1:
                raise GraphError("largest cycle vertex is not covered by x on the cycle")
            return walk(g, self.edges, top, first.bit_length() - 1)
        raise GraphError("ordering is only defined for paths and even cycles")


def symmetric_difference_components(g: Graph, x, y) -> list[DiffComponent]:
    x, y = g.check_mask(x), g.check_mask(y)
    diff = x ^ y
    out = []
    while diff:
        e = (diff & -diff).bit_length() - 1
        comp = connected_component(g, diff, e)
        kind, ends = classify(g, comp)
        out.append(DiffComponent(comp, kind, ends))
        diff &= ~comp
    return out


def component_containing(components: Iterable[DiffComponent], e: int) -> DiffComponent | None:
    for c in components:
        if e in c:
            return c
    return None


def read_graph(text: str) -> Graph:
    """Parse the ``n m`` / ``u v`` text format; edge index is line order."""
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    if not rows:
        raise GraphError("empty graph file")
    try:
        n, m = int(rows[0][0]), int(rows[0][1])
        pairs = [(int(r[0]), int(r[1])) for r in rows[1:]]
    except (ValueError, IndexError) as exc:
        raise GraphError(f"malformed graph file: {exc}") from None
    if len(pairs) != m:
        raise GraphError(f"header says {m} edges, found {len(pairs)}")
    return Graph.from_edges(n, pairs, sort=False)


def write_graph(g: Graph) -> str:
    lines = [f"{g.n} {g.m}"] + [f"{u} {v}" for u, v in g.edges]
    return "\n".join(lines) + "\n"
