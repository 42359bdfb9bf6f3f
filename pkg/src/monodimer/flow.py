"""Local flipping coupling, canonical paths and transport-flow statistics."""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.stats import binom, norm

from .chains import DOWN, EXCHANGE, JS, UP, TransitionKernel, js_acceptance, js_move, transition_kernel
from .graph import (DiffComponent, Graph, GraphError, bits, classify, connected_component,
                    inclusive_boundary, popcount, symmetric_difference_components, walk)
from .model import (DEFAULT_CAP, ExactDistribution, MonomerDimerModel, Pinning,
                    enumerate_matchings, free_support_edges, marginal_floor)


class FlowError(ValueError):
    pass


# -- coupling -----------------------------------------------------------------

@dataclass(frozen=True)
class CouplingSample:
    x: int
    y: int
    b: DiffComponent
    e: int


class _Conditionals:
    """mu^{tau, e<-0} and mu^{tau, e<-1} plus the unconditioned law, cached per edge."""

    def __init__(self, model: MonomerDimerModel, pinning: Pinning | None, cap: int = DEFAULT_CAP):
        self.model = model
        self.pinning = pinning if pinning is not None else Pinning.empty(model.graph)
        self.cap = cap
        self._full = None
        self._cond: dict = {}

    @property
    def full(self) -> ExactDistribution:
        if self._full is None:
            self._full = enumerate_matchings(self.model, self.pinning, self.cap)
        return self._full

    def two_sided(self, e: int) -> bool:
        if not self.pinning.is_free(e):
            return False
        p0, p1 = self.full.marginal(e)
        return bool(p0) and bool(p1)

    def pair(self, e: int) -> tuple[ExactDistribution, ExactDistribution]:
        if e not in self._cond:
            if not self.two_sided(e):
                raise FlowError(f"edge {e} does not take both values under the pinning")
            self._cond[e] = tuple(enumerate_matchings(self.model, self.pinning.extend(e, c),
                                                      self.cap) for c in (0, 1))
        return self._cond[e]


def single_component(g: Graph, x: int, y: int) -> DiffComponent | None:
    """The symmetric difference as one path or even cycle, else None."""
    diff = x ^ y
    if not diff:
        return None
    low = (diff & -diff).bit_length() - 1
    if connected_component(g, diff, low) != diff:
        return None
    kind, ends = classify(g, diff)
    if kind == "other":
        return None
    return DiffComponent(diff, kind, ends)


def coupling_law(model: MonomerDimerModel, pinning: Pinning | None, e: int,
                 cond: _Conditionals | None = None) -> dict:
    """Exact law of the coupling from its closed form.

    P(x, y) = mu^{e<-0}_{dB}(x restricted to dB) * mu^{e<-1}(y), where dB is
    the inclusive boundary of B = x xor y, for pairs whose difference is a
    single path or even cycle through e.
    """
    cond = cond or _Conditionals(model, pinning)
    d0, d1 = cond.pair(e)
    g = model.graph
    law = {}
    for y, py in zip(d1.support, d1.probabilities):
        for x in d0.support:
            b = single_component(g, x, y)
            if b is None:
                continue
            db = inclusive_boundary(g, b.edges)
            law[(x, y)] = d0.restricted_prob(db, x) * py
    return law


def coupling_law_bruteforce(model: MonomerDimerModel, pinning: Pinning | None, e: int,
                            cond: _Conditionals | None = None) -> dict:
    """Law of the coupling by running the construction over every (Y, Z) pair."""
    cond = cond or _Conditionals(model, pinning)
    d0, d1 = cond.pair(e)
    g = model.graph
    # integer weights lam^k scaled to a common denominator keep this fast
    lam = model.lam
    p, q = lam.numerator, lam.denominator
    K = g.m

    def iw(x):
        k = popcount(x)
        return p**k * q ** (K - k)

    w0 = [iw(z) for z in d0.support]
    w1 = [iw(y) for y in d1.support]
    law: dict = {}
    for y, wy in zip(d1.support, w1):
        for z, wz in zip(d0.support, w0):
            b = connected_component(g, y ^ z, e)
            x = (z & b) | (y & ~b)
            law[(x, y)] = law.get((x, y), 0) + wy * wz
    total = sum(w0) * sum(w1)
    return {k: Fraction(v, total) for k, v in law.items()}


def coupling_probability(model: MonomerDimerModel, pinning: Pinning | None, e: int,
                         x: int, y: int, cond: _Conditionals | None = None) -> Fraction:
    cond = cond or _Conditionals(model, pinning)
    d0, d1 = cond.pair(e)
    if x not in d0.index or y not in d1.index:
        return Fraction(0)
    b = single_component(model.graph, x, y)
    if b is None or e not in b:
        return Fraction(0)
    db = inclusive_boundary(model.graph, b.edges)
    return d0.restricted_prob(db, x) * d1.prob(y)


def sample_local_flipping_coupling(model: MonomerDimerModel, pinning: Pinning | None, e: int,
                                   rng: np.random.Generator,
                                   cond: _Conditionals | None = None) -> CouplingSample:
    cond = cond or _Conditionals(model, pinning)
    d0, d1 = cond.pair(e)
    y = d1.sample(rng)
    z = d0.sample(rng)
    return _couple(model.graph, y, z, e)


def _couple(g: Graph, y: int, z: int, e: int) -> CouplingSample:
    b = connected_component(g, y ^ z, e)
    x = (z & b) | (y & ~b)
    kind, ends = classify(g, b)
    return CouplingSample(x, y, DiffComponent(b, kind, ends), e)


# -- canonical paths ----------------------------------------------------------

@dataclass(frozen=True)
class TransportPath:
    states: tuple[int, ...]
    moves: tuple[str, ...]

    @property
    def source(self) -> int:
        return self.states[0]

    @property
    def target(self) -> int:
        return self.states[-1]

    @property
    def length(self) -> int:
        return len(self.moves)

    def transitions(self):
        return zip(self.states[:-1], self.states[1:])

    def contains(self, a: int, b: int) -> bool:
        return any(s == a and t == b for s, t in self.transitions())


def canonical_path(model_or_graph, x: int, y: int, e: int | None = None) -> TransportPath:
    """Deterministic path of down/up/exchange moves from x to y.

    ``x xor y`` must be one alternating path or even cycle. The path is
    numbered from its larger endpoint; a cycle from its largest vertex, first
    along that vertex's edge in x.
    """
    g = getattr(model_or_graph, "graph", model_or_graph)
    b = single_component(g, x, y)
    if b is None:
        raise FlowError("x xor y is not a single path or even cycle")
    if e is not None:
        if e not in b or (x >> e) & 1 or not (y >> e) & 1:
            raise FlowError(f"need x_e = 0, y_e = 1 with e = {e} in the difference")
    try:
        order = b.ordered_edges(g, x)
    except GraphError as exc:
        raise FlowError(f"cycle numbering failed: {exc}") from None
    n = len(order)
    ops: list[tuple[str, int, int | None]] = []  # (move, added or removed, removed on exchange)
    if b.kind == "path":
        if (x >> order[0]) & 1:
            ops.append((DOWN, order[0], None))
            for i in range(1, (n - 1) // 2 + 1):
                ops.append((EXCHANGE, order[2 * i - 1], order[2 * i]))
            if n % 2 == 0:
                ops.append((UP, order[-1], None))
        else:
            for i in range(1, n // 2 + 1):
                ops.append((EXCHANGE, order[2 * i - 2], order[2 * i - 1]))
            if n % 2 == 1:
                ops.append((UP, order[-1], None))
    else:
        ops.append((DOWN, order[0], None))
        for i in range(1, n // 2):
            ops.append((EXCHANGE, order[2 * i - 1], order[2 * i]))
        ops.append((UP, order[-1], None))
    states = [x]
    moves = []
    cur = x
    for move, a, r in ops:
        if move == DOWN:
            cur &= ~(1 << a)
        elif move == UP:
            cur |= 1 << a
        else:
            cur = (cur | (1 << a)) & ~(1 << r)
        states.append(cur)
        moves.append(move)
    if cur != y:
        raise FlowError("canonical path did not reach its target")
    return TransportPath(tuple(states), tuple(moves))


@lru_cache(maxsize=1 << 18)
def _path_or_none(g: Graph, x: int, y: int) -> TransportPath | None:
    try:
        return canonical_path(g, x, y)
    except FlowError:
        return None


def path_is_legal(model: MonomerDimerModel, pinning: Pinning | None, path: TransportPath) -> bool:
    """Every step is the JS candidate for some free proposal edge and is accepted with
    positive probability; every disagreement edge flips exactly once."""
    g = model.graph
    pinning = pinning if pinning is not None else Pinning.empty(g)
    for (s, t), tag in zip(path.transitions(), path.moves):
        d = s ^ t
        ok = False
        for e in bits(d & pinning.free):
            cand, move = js_move(g, s, e)
            if cand == t and move == tag and js_acceptance(model, pinning, s, cand) > 0:
                ok = True
                break
        if not ok:
            return False
    flips: dict[int, int] = {}
    for s, t in path.transitions():
        for e in bits(s ^ t):
            flips[e] = flips.get(e, 0) + 1
    return set(flips) == set(bits(path.source ^ path.target)) and all(v == 1 for v in flips.values())


def sample_transport_flow(model: MonomerDimerModel, pinning: Pinning | None, e: int,
                          rng: np.random.Generator, cond: _Conditionals | None = None) -> TransportPath:
    s = sample_local_flipping_coupling(model, pinning, e, rng, cond)
    return canonical_path(model.graph, s.x, s.y, e)


# -- flow statistics ----------------------------------------------------------

@dataclass
class FlowStats:
    expected_sq_length: float | Fraction
    expected_sq_discrepancy: float | Fraction
    congestion_kappa: float | Fraction | None
    strong_kappa: float | Fraction | None
    mode: str
    per_edge: dict = field(default_factory=dict)
    table: list = field(default_factory=list, repr=False)
    samples: int | None = None
    stderr: float | None = None

    def to_json(self) -> dict:
        def num(v):
            return None if v is None else float(v)

        return {
            "mode": self.mode,
            "expected_sq_length": num(self.expected_sq_length),
            "expected_sq_discrepancy": num(self.expected_sq_discrepancy),
            "congestion_kappa": num(self.congestion_kappa),
            "strong_kappa": num(self.strong_kappa),
            "samples": self.samples,
            "stderr": self.stderr,
            "per_edge": {str(e): {k: float(v) for k, v in d.items()}
                         for e, d in sorted(self.per_edge.items())},
        }

    def congestion_csv(self, strong: bool = False) -> str:
        lines = ["alpha,beta,lhs,rhs,ratio"]
        for row in self.table:
            a, b, lhs, slhs, rhs = row
            val = slhs if strong else lhs
            lines.append(f"{_edges_str(a)},{_edges_str(b)},{float(val)!r},{float(rhs)!r},"
                         f"{float(val / rhs)!r}")
        return "\n".join(lines) + "\n"


def _edges_str(x: int) -> str:
    return " ".join(str(e) for e in bits(x)) or "-"


def flow_statistics(model: MonomerDimerModel, pinning: Pinning | None = None, e: int | None = None,
                    mode: str = "exact", samples: int = 10_000, rng=None,
                    kernel: TransitionKernel | None = None, cap: int = DEFAULT_CAP) -> FlowStats:
    """Congestion and length statistics of the transport flows.

    With ``e`` given only that edge's flow is used; otherwise all free edges
    with both values possible. Exact mode returns Fractions.
    """
    cond = _Conditionals(model, pinning, cap)
    pinning = cond.pinning
    edges = [e] if e is not None else [f for f in bits(pinning.free) if cond.two_sided(f)]
    if mode == "monte_carlo":
        return _flow_statistics_mc(model, cond, edges, samples, rng)
    if mode != "exact":
        raise ValueError(f"unknown mode {mode!r}")
    kernel = kernel or transition_kernel(model, pinning, JS, dist=cond.full)
    dist = kernel.states
    load: dict = {}
    strong: dict = {}
    per_edge = {}
    L = Fraction(0)
    D = Fraction(0)
    for f in edges:
        p0, p1 = dist.marginal(f)
        w = p0 * p1
        law = coupling_law(model, pinning, f, cond)
        el2 = Fraction(0)
        eb2 = Fraction(0)
        for (x, y), p in law.items():
            path = canonical_path(model.graph, x, y, f)
            ell = path.length
            el2 += p * ell * ell
            eb2 += p * popcount(x ^ y) ** 2
            for t in path.transitions():
                load[t] = load.get(t, 0) + w * p / ell
                strong[t] = strong.get(t, 0) + w * p * ell
        per_edge[f] = {"expected_sq_length": el2, "expected_sq_discrepancy": eb2}
        L = max(L, el2)
        D = max(D, eb2)
    mu = dist.probabilities
    table = []
    kappa = Fraction(0)
    skappa = Fraction(0)
    for i, j, q in kernel.off_diagonal():
        a, b = dist.support[i], dist.support[j]
        rhs = mu[i] * q
        lhs = load.get((a, b), Fraction(0))
        slhs = strong.get((a, b), Fraction(0))
        table.append((a, b, lhs, slhs, rhs))
        kappa = max(kappa, lhs / rhs)
        skappa = max(skappa, slhs / rhs)
    for t in load:
        if kernel.entry(*t) == 0:
            raise FlowError(f"flow uses a transition with zero kernel probability: {t}")
    return FlowStats(L, D, kappa, skappa, "exact", per_edge, table)


def _flow_statistics_mc(model, cond, edges, samples, rng) -> FlowStats:
    rng = rng if rng is not None else np.random.default_rng(0)
    per_edge = {}
    L = D = 0.0
    se = 0.0
    for f in edges:
        d0, d1 = cond.pair(f)
        ys = d1.sample_indices(rng, samples)
        zs = d0.sample_indices(rng, samples)
        pairs, counts = np.unique(np.stack([ys, zs], axis=1), axis=0, return_counts=True)
        l2 = np.zeros(len(pairs))
        b2 = np.zeros(len(pairs))
        for k, (iy, iz) in enumerate(pairs):
            s = _couple(model.graph, d1.support[iy], d0.support[iz], f)
            ell = canonical_path(model.graph, s.x, s.y, f).length
            l2[k] = ell * ell
            b2[k] = len(s.b) ** 2
        wts = counts / samples
        m_l2 = float(wts @ l2)
        var = float(wts @ (l2 - m_l2) ** 2)
        per_edge[f] = {"expected_sq_length": m_l2, "expected_sq_discrepancy": float(wts @ b2)}
        if m_l2 >= L:
            se = math.sqrt(var / samples)
        L = max(L, m_l2)
        D = max(D, float(wts @ b2))
    return FlowStats(L, D, None, None, "monte_carlo", per_edge, samples=samples, stderr=se)


# -- moments and tails ----------------------------------------------------------

def path_tail_rate(lam, max_degree: int) -> float:
    """Success probability 2/(1+sqrt(1+lam*D)) of the geometric variable bounding |P_u|/2."""
    return 2.0 / (1.0 + math.sqrt(1.0 + float(lam) * max_degree))


def one_sided_rate(lam, max_degree: int) -> float:
    """Success probability 1/(1+lam*D) in the one-sided discrepancy bound."""
    return 1.0 / (1.0 + float(lam) * max_degree)


def one_sided_moments(model: MonomerDimerModel, e: int, p: float, side: str = "fix_y",
                      mode: str = "exact", pinning: Pinning | None = None,
                      samples: int = 10_000, rng=None):
    """max over the fixed side of E[|X xor Y|^p | that side]."""
    if side not in ("fix_x", "fix_y"):
        raise ValueError("side must be fix_x or fix_y")
    cond = _Conditionals(model, pinning)
    d0, d1 = cond.pair(e)
    if mode == "exact":
        law = coupling_law(model, pinning, e, cond)
        acc: dict = {}
        for (x, y), q in law.items():
            key = x if side == "fix_x" else y
            acc[key] = acc.get(key, 0.0) + float(q) * popcount(x ^ y) ** p
        marg = d0 if side == "fix_x" else d1
        return max(v / float(marg.prob(k)) for k, v in acc.items())
    rng = rng if rng is not None else np.random.default_rng(0)
    sums: dict = {}
    cnt: dict = {}
    for _ in range(samples):
        s = sample_local_flipping_coupling(model, pinning, e, rng, cond)
        key = s.x if side == "fix_x" else s.y
        sums[key] = sums.get(key, 0.0) + len(s.b) ** p
        cnt[key] = cnt.get(key, 0) + 1
    return max(sums[k] / cnt[k] for k in sums)


@dataclass
class TailReport:
    status: str  # pass | fail | inconclusive
    q: float
    samples: int
    path_samples: int
    tests: int
    violations: list
    groups: list
    threshold: float


def _split_path(g: Graph, b: int, e: int, v: int) -> tuple[int, int]:
    rest = b & ~(1 << e)
    at_v = g.incident[v] & rest
    pv = connected_component(g, rest, at_v.bit_length() - 1) if at_v else 0
    return pv, rest & ~pv


def geometric_tail_check(model: MonomerDimerModel, e: int, samples: int, rng,
                         pinning: Pinning | None = None, sigmas: float = 4.0,
                         min_group: int = 20) -> TailReport:
    """Empirical P(|P_u| > 2k | P_v) against (1-q)^k on path-type samples.

    Each (orientation, P_v, k) cell is a one-sided binomial test; the level is
    the normal tail at ``sigmas`` split evenly over all cells.
    """
    g = model.graph
    cond = _Conditionals(model, pinning)
    d0, d1 = cond.pair(e)
    q = path_tail_rate(model.lam, g.max_degree)
    ys = d1.sample_indices(rng, samples)
    zs = d0.sample_indices(rng, samples)
    pairs, counts = np.unique(np.stack([ys, zs], axis=1), axis=0, return_counts=True)
    u0, v0 = g.edges[e]
    groups: dict = {}
    n_path = 0
    for (iy, iz), c in zip(pairs, counts):
        s = _couple(g, d1.support[iy], d0.support[iz], e)
        if s.b.kind != "path":
            continue
        n_path += int(c)
        for u, v in ((u0, v0), (v0, u0)):
            pv, pu = _split_path(g, s.b.edges, e, v)
            key = (v, pv)
            hist = groups.setdefault(key, {})
            hist[popcount(pu)] = hist.get(popcount(pu), 0) + int(c)
    cells = []
    for (v, pv), hist in sorted(groups.items()):
        n = sum(hist.values())
        if n < min_group:
            continue
        kmax = max(hist) // 2
        for k in range(1, kmax + 1):
            exceed = sum(c for length, c in hist.items() if length > 2 * k)
            cells.append((v, pv, n, k, exceed))
    level = float(norm.sf(sigmas))
    threshold = level / max(len(cells), 1)
    violations = []
    for v, pv, n, k, exceed in cells:
        bound = (1 - q) ** k
        pval = float(binom.sf(exceed - 1, n, bound)) if exceed else 1.0
        if pval < threshold:
            violations.append({"v": v, "P_v": list(bits(pv)), "n": n, "k": k,
                               "exceed": exceed, "bound": bound, "p_value": pval})
    group_rows = [{"v": v, "P_v": list(bits(pv)), "n": sum(h.values()),
                   "max_len": max(h)} for (v, pv), h in sorted(groups.items())]
    trivially_ok = all(max(h) <= 1 for h in groups.values())
    if violations:
        status = "fail"
    elif not cells and not trivially_ok:
        status = "inconclusive"
    else:
        status = "pass"
    return TailReport(status, q, samples, n_path, len(cells), violations, group_rows, threshold)


# -- cycle versus path identity ---------------------------------------------------

def cycle_path_identity(model: MonomerDimerModel, e: int, law: dict | None = None) -> list:
    """For each even cycle C through e in the support, compare P(B = C) with
    lam * P(B = P), where P drops the edge of C other than e at one end of e.
    Returns (cycle, path, P(B=C), P(B=P), holds) rows for both ends of e."""
    g = model.graph
    law = law if law is not None else coupling_law(model, None, e)
    by_b: dict = {}
    for (x, y), p in law.items():
        b = x ^ y
        by_b[b] = by_b.get(b, 0) + p
    rows = []
    for b, pc in sorted(by_b.items()):
        if classify(g, b)[0] != "even_cycle":
            continue
        for v in g.edges[e]:
            f = g.incident[v] & b & ~(1 << e)
            path = b & ~f
            pp = by_b.get(path, Fraction(0))
            rows.append((b, path, pc, pp, pc == model.lam * pp))
    return rows


# -- decoupling ---------------------------------------------------------------

PHI_KINDS = ("zero", "one", "size", "transition", "transition_over_length",
             "transition_times_length")


@dataclass(frozen=True)
class PhiSpec:
    kind: str
    alpha: int | None = None
    beta: int | None = None

    def __post_init__(self):
        if self.kind not in PHI_KINDS:
            raise ValueError(f"unknown test function {self.kind!r}")
        if self.kind.startswith("transition") and (self.alpha is None or self.beta is None):
            raise ValueError("transition test functions need alpha and beta")

    def __call__(self, g: Graph, x: int, y: int) -> Fraction:
        if self.kind == "zero":
            return Fraction(0)
        if self.kind == "one":
            return Fraction(1)
        if self.kind == "size":
            return Fraction(popcount(x ^ y))
        path = _path_or_none(g, x, y)
        if path is None or not path.contains(self.alpha, self.beta):
            return Fraction(0)
        if self.kind == "transition":
            return Fraction(1)
        if self.kind == "transition_over_length":
            return Fraction(1, path.length)
        return Fraction(path.length)


@dataclass
class DecouplingReport:
    identity_holds: bool
    identity_pairs: int
    inequality_holds: bool
    lhs: Fraction
    rhs: Fraction


def verify_decoupling(model: MonomerDimerModel, e_star: int, phi_spec: PhiSpec,
                      mode: str = "exact", laws: dict | None = None) -> DecouplingReport:
    """Check the shared-support identity between couplings at e and e_star, and

    sum_e mu_e(0)mu_e(1) E_e[phi(X,Y) 1[X_f != Y_f]]
        <= mu_f(0)mu_f(1) E_f[(phi(X,Y) + phi(Y,X)) |X xor Y|]   with f = e_star.
    """
    if mode != "exact":
        raise ValueError("decoupling is checked exactly only")
    g = model.graph
    cond = _Conditionals(model, None)
    dist = cond.full
    edges = [e for e in range(g.m) if cond.two_sided(e)]
    if laws is None:
        laws = {e: coupling_law(model, None, e, cond) for e in edges}
    f = e_star
    wf = _edge_weight(dist, f)
    law_f = laws[f]
    identity_ok = True
    n_pairs = 0
    lhs = Fraction(0)
    for e in edges:
        we = _edge_weight(dist, e)
        for (x, y), p in laws[e].items():
            if (x ^ y) >> f & 1:
                lhs += we * p * phi_spec(g, x, y)
            pf = law_f.get((x, y))
            if pf is not None:
                n_pairs += 1
                identity_ok &= we * p == wf * pf
    rhs = Fraction(0)
    for (x, y), p in law_f.items():
        rhs += p * (phi_spec(g, x, y) + phi_spec(g, y, x)) * popcount(x ^ y)
    rhs *= wf
    return DecouplingReport(bool(identity_ok), n_pairs, lhs <= rhs, lhs, rhs)


def _edge_weight(dist: ExactDistribution, e: int) -> Fraction:
    p0, p1 = dist.marginal(e)
    return p0 * p1


# -- merged graph and encoding ---------------------------------------------------

@dataclass(frozen=True)
class MergedGraph:
    graph: Graph
    h_star: int
    edge_map: tuple  # G edge -> merged edge index or None
    w: int
    g_edge: int
    h_edge: int

    def proj(self, x: int) -> int:
        if ((x >> self.g_edge) & 1) != ((x >> self.h_edge) & 1):
            raise FlowError("proj needs x_g = x_h")
        out = 0
        for e in bits(x):
            t = self.edge_map[e]
            if t is not None:
                out |= 1 << t
        return out


def build_merged_graph(g: Graph, w: int, g_edge: int, h_edge: int) -> MergedGraph:
    """Drop the edges at w other than g and h, then merge g and h into one edge."""
    if g_edge == h_edge or g.shared_vertex(g_edge, h_edge) != w:
        raise GraphError(f"edges {g_edge} and {h_edge} do not meet exactly at vertex {w}")
    a = g.other_end(g_edge, w)
    b = g.other_end(h_edge, w)
    star = (min(a, b), max(a, b))
    new_edges = []
    edge_map = [None] * g.m
    h_star = None
    for i, (u, v) in enumerate(g.edges):
        if i == g_edge:
            continue
        if i == h_edge:
            h_star = len(new_edges)
            new_edges.append(star)
            continue
        if w in (u, v):
            continue
        if (u, v) == star:
            raise GraphError("merging g and h would create a parallel edge")
        edge_map[i] = len(new_edges)
        new_edges.append((u, v))
    edge_map[g_edge] = h_star
    edge_map[h_edge] = h_star
    merged = Graph(g.n, tuple(new_edges), g.vertex_order)
    return MergedGraph(merged, h_star, tuple(edge_map), w, g_edge, h_edge)


@dataclass(frozen=True)
class EncodedPair:
    merged_graph: MergedGraph
    x_hat: int
    y_hat: int
    eta: Fraction
    z_hat: Fraction


def exchange_edges(g: Graph, alpha: int, beta: int) -> tuple[int, int, int]:
    """(added edge f, removed edge g, shared vertex w) of an exchange alpha -> beta."""
    d = alpha ^ beta
    if popcount(d) != 2:
        raise FlowError("not an exchange transition")
    added = beta & ~alpha
    removed = alpha & ~beta
    if popcount(added) != 1 or popcount(removed) != 1:
        raise FlowError("not an exchange transition")
    f = added.bit_length() - 1
    r = removed.bit_length() - 1
    w = g.shared_vertex(f, r)
    if w is None:
        raise FlowError("exchanged edges do not share a vertex")
    return f, r, w


def _split_for_encoding(g: Graph, b: DiffComponent, x: int, h: int, g_edge: int, w: int):
    """Partition B into (B^h, B^g, e) where e is the B^h edge at the top vertex for cycles."""
    if b.kind == "path":
        rest = b.edges
        bh = _arc(g, rest, h, w)
        return bh, rest & ~bh, None
    top = max(g.vertices_of(b.edges), key=lambda v: g.rank[v])
    if top == w:
        raise FlowError("cycle top vertex coincides with the exchange vertex")
    order = walk(g, b.edges, w, h)
    bh = 0
    for f in order:
        bh |= 1 << f
        if top in g.edges[f]:
            break
    e_top = f
    return bh, b.edges & ~bh, e_top


def _arc(g: Graph, edges: int, start_edge: int, stop_vertex: int) -> int:
    # edges reachable from start_edge without passing through stop_vertex
    comp = 1 << start_edge
    frontier = [start_edge]
    while frontier:
        nxt = []
        for f in frontier:
            for v in g.edges[f]:
                if v == stop_vertex:
                    continue
                for t in bits(g.incident[v] & edges & ~comp):
                    comp |= 1 << t
                    nxt.append(t)
        frontier = nxt
    return comp


class _EncodingContext:
    def __init__(self, model: MonomerDimerModel, alpha: int, beta: int):
        g = model.graph
        self.model = model
        self.alpha, self.beta = alpha, beta
        self.h, self.g_edge, self.w = exchange_edges(g, alpha, beta)
        self.merged = build_merged_graph(g, self.w, self.g_edge, self.h)
        self.mhat = MonomerDimerModel(self.merged.graph, model.lam)
        self.cond = _Conditionals(model, None)
        self.cond_hat = _Conditionals(self.mhat, None)
        self.Z = self.cond.full.Z
        self.z_hat = self.cond_hat.full.Z
        self.eta = (self.z_hat / self.Z) ** 2 * model.lam_bar ** 2


def encode(model: MonomerDimerModel, h_edge: int, transition: tuple[int, int], pair: tuple[int, int],
           ctx: _EncodingContext | None = None) -> EncodedPair:
    alpha, beta = transition
    x, y = pair
    g = model.graph
    ctx = ctx or _EncodingContext(model, alpha, beta)
    if ctx.h != h_edge:
        raise FlowError("h must be the edge added by the exchange")
    if (x >> h_edge) & 1 or not (y >> h_edge) & 1:
        raise FlowError("need x_h = 0 and y_h = 1")
    b = single_component(g, x, y)
    if b is None or h_edge not in b:
        raise FlowError("(x, y) is outside the coupling support at h")
    if not canonical_path(g, x, y, h_edge).contains(alpha, beta):
        raise FlowError("the transition is not on the canonical path of (x, y)")
    bh, bg, e_top = _split_for_encoding(g, b, x, h_edge, ctx.g_edge, ctx.w)
    xa = x ^ bg
    if e_top is not None:
        xa ^= 1 << e_top
    x_hat = ctx.merged.proj(xa)
    y_hat = ctx.merged.proj(x ^ bh)
    return EncodedPair(ctx.merged, x_hat, y_hat, ctx.eta, ctx.z_hat)


@dataclass
class EncodingReport:
    alpha: int
    beta: int
    preimages: int
    injective: bool
    y_hat_ok: bool
    path_ok: bool
    measure_ok: bool
    in_support: bool
    worst_ratio: Fraction

    @property
    def holds(self) -> bool:
        return self.injective and self.y_hat_ok and self.path_ok and self.measure_ok and self.in_support


def verify_encoding(model: MonomerDimerModel, alpha: int, beta: int,
                    laws: dict | None = None) -> EncodingReport:
    g = model.graph
    ctx = _EncodingContext(model, alpha, beta)
    h = ctx.h
    law = laws[h] if laws is not None and h in laws else coupling_law(model, None, h, ctx.cond)
    wh = _edge_weight(ctx.cond.full, h)
    hs = ctx.merged.h_star
    if not ctx.cond_hat.two_sided(hs):
        raise FlowError("merged edge is forced in the merged graph")
    what = _edge_weight(ctx.cond_hat.full, hs)
    target_y = ctx.merged.proj(alpha | beta)
    images = set()
    n = 0
    injective = y_ok = path_ok = measure_ok = support_ok = True
    worst = Fraction(0)
    for (x, y), p in law.items():
        if not canonical_path(g, x, y, h).contains(alpha, beta):
            continue
        n += 1
        enc = encode(model, h, (alpha, beta), (x, y), ctx)
        key = (enc.x_hat, enc.y_hat)
        injective &= key not in images
        images.add(key)
        y_ok &= enc.y_hat == target_y
        bh = single_component(ctx.merged.graph, enc.x_hat, enc.y_hat)
        path_ok &= bh is not None and bh.kind == "path" and hs in bh
        p_hat = coupling_probability(ctx.mhat, None, hs, enc.x_hat, enc.y_hat, ctx.cond_hat)
        support_ok &= p_hat > 0
        left = wh * p
        right = ctx.eta * what * p_hat
        measure_ok &= left <= right
        if right:
            worst = max(worst, left / right)
    return EncodingReport(alpha, beta, n, bool(injective), bool(y_ok), bool(path_ok),
                          bool(measure_ok), bool(support_ok), worst)


def exchange_transitions(kernel: TransitionKernel) -> list[tuple[int, int]]:
    out = []
    g = kernel.states.model.graph
    for i, j, _ in kernel.off_diagonal():
        a, b = kernel.states.support[i], kernel.states.support[j]
        if popcount(a ^ b) == 2 and popcount(a) == popcount(b):
            try:
                exchange_edges(g, a, b)
            except FlowError:
                continue
            out.append((a, b))
    return out


# -- flow theorems ----------------------------------------------------------------

@dataclass
class FlowTheoremReport:
    kappa: Fraction
    strong_kappa: Fraction
    L: Fraction
    phi: Fraction
    alpha_pi: float
    pi_bound: float
    alpha_lsi: float
    lsi_bound: float
    pi_holds: bool
    lsi_holds: bool

    @property
    def holds(self) -> bool:
        return self.pi_holds and self.lsi_holds


def verify_flow_theorems(model: MonomerDimerModel, restarts: int = 12, seed=0,
                         pi_tol: float = 1e-9, lsi_tol: float = 1e-6,
                         stats: FlowStats | None = None) -> FlowTheoremReport:
    from .spectral import local_log_sobolev_constant, local_poincare_constant, two_point_factor

    kernel = transition_kernel(model, None, JS)
    stats = stats or flow_statistics(model, None, kernel=kernel)
    dist = kernel.states
    phi = marginal_floor(dist)
    kappa, skappa, L = stats.congestion_kappa, stats.strong_kappa, stats.expected_sq_length
    q = 2  # binary spins
    pi_bound = 1.0 / (2 * q * q * float(kappa) * float(L))
    lsi_bound = two_point_factor(float(phi)) / (2 * q * q * float(skappa))
    a_pi = local_poincare_constant(model, None, kernel)
    a_lsi = local_log_sobolev_constant(model, None, kernel, restarts=restarts, seed=seed)
    return FlowTheoremReport(kappa, skappa, L, phi, a_pi, pi_bound, a_lsi, lsi_bound,
                             bool(a_pi >= pi_bound - pi_tol), bool(a_lsi >= lsi_bound - lsi_tol))


__all__ = [
    "CouplingSample", "DecouplingReport", "EncodedPair", "EncodingReport", "FlowError",
    "FlowStats", "FlowTheoremReport", "MergedGraph", "PHI_KINDS", "PhiSpec", "TailReport",
    "TransportPath", "build_merged_graph", "canonical_path", "coupling_law",
    "coupling_law_bruteforce", "coupling_probability", "cycle_path_identity", "encode",
    "exchange_edges", "exchange_transitions", "flow_statistics", "free_support_edges",
    "geometric_tail_check", "one_sided_moments", "one_sided_rate", "path_is_legal",
    "path_tail_rate", "sample_local_flipping_coupling", "sample_transport_flow",
    "single_component", "symmetric_difference_components", "verify_decoupling",
    "verify_encoding", "verify_flow_theorems",
]
