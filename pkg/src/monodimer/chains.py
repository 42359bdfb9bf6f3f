"""Jerrum-Sinclair and Glauber chains: single-step samplers and exact kernels."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .graph import bits, popcount
from .model import (DEFAULT_CAP, ExactDistribution, ModelError, MonomerDimerModel, Pinning,
                    enumerate_matchings, format_fraction)

JS, LAZY_JS, GLAUBER = "js", "lazy_js", "glauber"
KINDS = (JS, LAZY_JS, GLAUBER)
DOWN, UP, EXCHANGE, BLOCKED = "down", "up", "exchange", "blocked"


def parse_kind(name: str) -> str:
    k = name.strip().lower().replace("-", "_")
    if k not in KINDS:
        raise ValueError(f"unknown chain kind {name!r}; expected one of js, lazy-js, glauber")
    return k


@dataclass(frozen=True)
class ChainSpec:
    kind: str
    pinning: Pinning
    proposal_set: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", parse_kind(self.kind))
        prop = self.pinning.free if self.proposal_set is None else self.proposal_set
        if prop & ~self.pinning.free:
            raise ModelError("proposal set must lie inside the free edges")
        object.__setattr__(self, "proposal_set", prop)

    @classmethod
    def make(cls, kind: str, model_or_graph, pinning: Pinning | None = None) -> "ChainSpec":
        g = getattr(model_or_graph, "graph", model_or_graph)
        return cls(kind, pinning if pinning is not None else Pinning.empty(g))

    @property
    def proposals(self) -> list[int]:
        return list(bits(self.proposal_set))


def js_move(g, state: int, e: int) -> tuple[int, str]:
    """Candidate matching and move type for proposal edge ``e``."""
    bit = 1 << e
    if state & bit:
        return state & ~bit, DOWN
    u, v = g.edges[e]
    su = state & g.incident[u]
    sv = state & g.incident[v]
    if not su and not sv:
        return state | bit, UP
    if su and sv:
        return state, BLOCKED
    f = su or sv
    return (state | bit) & ~f, EXCHANGE


def js_propose(model: MonomerDimerModel, pinning: Pinning | None, state: int, e: int) -> int:
    return js_move(model.graph, state, e)[0]


def js_acceptance(model: MonomerDimerModel, pinning: Pinning | None, state: int, cand: int):
    """Metropolis filter min{1, lam^(|M|-|X|)}; zero if ``cand`` breaks the pinning."""
    if pinning is not None and not pinning.agrees(cand):
        return 0
    d = popcount(cand) - popcount(state)
    if d == 0:
        return 1
    r = model.lam ** d
    return r if r < 1 else 1


def js_step(model: MonomerDimerModel, pinning: Pinning | None, state: int,
            rng: np.random.Generator, proposals: list[int] | None = None) -> int:
    if proposals is None:
        free = pinning.free if pinning is not None else model.graph.full_mask
        proposals = list(bits(free))
    e = proposals[int(rng.integers(len(proposals)))]
    cand, _ = js_move(model.graph, state, e)
    if cand == state:
        return state
    a = js_acceptance(model, pinning, state, cand)
    if a >= 1 or rng.random() < float(a):
        return cand
    return state


def glauber_occupy_prob(model: MonomerDimerModel, state: int, e: int):
    """Conditional probability that ``e`` is occupied given the other edges."""
    if state & model.graph.adjacent[e]:
        return 0
    lam = model.lam
    return lam / (1 + lam)


def glauber_step(model: MonomerDimerModel, state: int, rng: np.random.Generator,
                 pinning: Pinning | None = None, proposals: list[int] | None = None) -> int:
    if proposals is None:
        free = pinning.free if pinning is not None else model.graph.full_mask
        proposals = list(bits(free))
    e = proposals[int(rng.integers(len(proposals)))]
    p = float(glauber_occupy_prob(model, state, e))
    bit = 1 << e
    if p > 0 and rng.random() < p:
        return state | bit
    return state & ~bit


def step(model, spec: ChainSpec, state: int, rng, proposals=None) -> int:
    proposals = proposals if proposals is not None else spec.proposals
    if spec.kind == GLAUBER:
        return glauber_step(model, state, rng, spec.pinning, proposals)
    if spec.kind == LAZY_JS and rng.random() < 0.5:
        return state
    return js_step(model, spec.pinning, state, rng, proposals)


@dataclass(frozen=True)
class TransitionKernel:
    """Exact row-stochastic kernel on the support of ``states``.

    ``rows[i]`` maps column index to a Fraction; omitted entries are zero.
    """

    states: ExactDistribution
    rows: tuple[dict, ...]
    spec: ChainSpec

    @property
    def kind(self) -> str:
        return self.spec.kind

    def __len__(self):
        return len(self.rows)

    def entry(self, x: int, y: int) -> Fraction:
        i = self.states.index.get(x)
        j = self.states.index.get(y)
        if i is None or j is None:
            return Fraction(0)
        return self.rows[i].get(j, Fraction(0))

    def dense(self) -> np.ndarray:
        n = len(self.rows)
        P = np.zeros((n, n))
        for i, row in enumerate(self.rows):
            for j, q in row.items():
                P[i, j] = float(q)
        return P

    def is_stochastic(self) -> bool:
        return all(sum(r.values(), Fraction(0)) == 1 and all(q >= 0 for q in r.values())
                   for r in self.rows)

    def is_reversible(self) -> bool:
        mu = self.states.probabilities
        for i, row in enumerate(self.rows):
            for j, q in row.items():
                if mu[i] * q != mu[j] * self.rows[j].get(i, Fraction(0)):
                    return False
        return True

    def is_irreducible(self) -> bool:
        from scipy.sparse import csr_matrix
        from scipy.sparse.csgraph import connected_components

        n = len(self.rows)
        if n == 1:
            return True
        r, c = [], []
        for i, row in enumerate(self.rows):
            for j, q in row.items():
                if q and i != j:
                    r.append(i)
                    c.append(j)
        adj = csr_matrix((np.ones(len(r)), (r, c)), shape=(n, n))
        k, _ = connected_components(adj, directed=True, connection="strong")
        return k == 1

    def off_diagonal(self):
        """Yield ``(i, j, Q(i, j))`` for nonzero off-diagonal entries."""
        for i, row in enumerate(self.rows):
            for j, q in row.items():
                if i != j and q:
                    yield i, j, q

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "lambda": format_fraction(self.states.model.lam),
            "pinning": {str(e): c for e, c in sorted(self.spec.pinning.fixed.items())},
            "states": [list(bits(x)) for x in self.states.support],
            "rows": [[format_fraction(r.get(j, Fraction(0))) for j in range(len(self.rows))]
                     for r in self.rows],
        }


def _js_row(model, dist, pinning, x, proposals):
    k = len(proposals)
    row: dict[int, Fraction] = {}
    stay = Fraction(1)
    for e in proposals:
        cand, _ = js_move(model.graph, x, e)
        if cand == x:
            continue
        a = js_acceptance(model, pinning, x, cand)
        if a:
            j = dist.index[cand]
            p = Fraction(a) / k
            row[j] = row.get(j, 0) + p
            stay -= p
    i = dist.index[x]
    if stay:
        row[i] = row.get(i, 0) + stay
    return row


def _glauber_row(model, dist, x, proposals):
    k = len(proposals)
    row: dict[int, Fraction] = {}
    i = dist.index[x]
    for e in proposals:
        p1 = Fraction(glauber_occupy_prob(model, x, e))
        bit = 1 << e
        for y, p in ((x | bit, p1), (x & ~bit, 1 - p1)):
            if p:
                j = dist.index[y]
                row[j] = row.get(j, 0) + p / k
    row.setdefault(i, Fraction(0))
    if not row[i]:
        del row[i]
    return row


def transition_kernel(model: MonomerDimerModel, pinning: Pinning | None = None,
                      spec: ChainSpec | str = JS, cap: int = DEFAULT_CAP,
                      dist: ExactDistribution | None = None) -> TransitionKernel:
    pinning = pinning if pinning is not None else Pinning.empty(model.graph)
    if isinstance(spec, str):
        spec = ChainSpec(spec, pinning)
    elif spec.pinning != pinning:
        raise ModelError("chain spec and pinning disagree")
    dist = dist or enumerate_matchings(model, pinning, cap)
    proposals = spec.proposals
    rows = []
    for x in dist.support:
        if not proposals:
            rows.append({dist.index[x]: Fraction(1)})
        elif spec.kind == GLAUBER:
            rows.append(_glauber_row(model, dist, x, proposals))
        else:
            rows.append(_js_row(model, dist, pinning, x, proposals))
    if spec.kind == LAZY_JS:
        half = Fraction(1, 2)
        lazy = []
        for i, r in enumerate(rows):
            nr = {j: q * half for j, q in r.items()}
            nr[i] = nr.get(i, 0) + half
            lazy.append(nr)
        rows = lazy
    return TransitionKernel(dist, tuple(rows), spec)


@dataclass
class Trajectory:
    final: int
    steps: int
    occupancy: np.ndarray

    def empirical_marginals(self) -> np.ndarray:
        return self.occupancy / max(self.steps, 1)


def simulate(model: MonomerDimerModel, spec: ChainSpec, start: int, steps: int,
             rng: np.random.Generator) -> Trajectory:
    """Run the chain, counting per-edge occupancy after every step."""
    if not spec.pinning.agrees(start):
        raise ModelError("start state disagrees with the pinning")
    m = model.graph.m
    counts = np.zeros(m, dtype=np.int64)
    proposals = spec.proposals
    x = start
    per_state: dict[int, int] = {}
    for _ in range(steps):
        x = step(model, spec, x, rng, proposals)
        per_state[x] = per_state.get(x, 0) + 1
    for s, c in per_state.items():
        for e in bits(s):
            counts[e] += c
    return Trajectory(x, steps, counts)


def approximate_conditional_sample(model: MonomerDimerModel, pinning: Pinning,
                                   rng: np.random.Generator, steps: int = 10_000) -> int:
    """Approximate draw from the pinned distribution by running the lazy pinned chain.

    This is not an exact sampler; use it only where enumeration is out of reach.
    """
    if not pinning.is_feasible():
        raise ModelError("infeasible pinning")
    spec = ChainSpec(LAZY_JS, pinning)
    x = pinning.ones
    proposals = spec.proposals
    if not proposals:
        return x
    for _ in range(steps):
        x = step(model, spec, x, rng, proposals)
    return x
