"""Exact monomer-dimer distributions by enumeration."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from .graph import Graph, GraphError, bits, is_matching, popcount

DEFAULT_CAP = 200_000


class ModelError(ValueError):
    pass


class OversizeError(RuntimeError):
    """Enumeration would exceed the state cap."""

    def __init__(self, attempted: int, cap: int):
        super().__init__(f"enumeration exceeded cap: reached {attempted} states (cap {cap})")
        self.attempted = attempted
        self.cap = cap


class FeasibilityError(ValueError):
    pass


def as_rational(lam) -> Fraction | None:
    """Exact rational for ints, Fractions and strings like ``"3/2"``; None for floats."""
    if isinstance(lam, bool):
        raise ModelError("lambda must be a number")
    if isinstance(lam, (int, Fraction)):
        return Fraction(lam)
    if isinstance(lam, str):
        try:
            return Fraction(lam.strip())
        except ValueError:
            raise ModelError(f"cannot parse lambda {lam!r}") from None
    return None


def format_fraction(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class MonomerDimerModel:
    """Graph plus edge weight. ``lam`` is kept exact when given as a rational."""

    graph: Graph
    lam: Fraction | float

    def __post_init__(self):
        q = as_rational(self.lam)
        if q is None:
            val = float(self.lam)
            if not np.isfinite(val) or val <= 0:
                raise ModelError(f"lambda must be positive, got {self.lam}")
            object.__setattr__(self, "lam", val)
        else:
            if q <= 0:
                raise ModelError(f"lambda must be positive, got {q}")
            object.__setattr__(self, "lam", q)

    @property
    def exact(self) -> bool:
        return isinstance(self.lam, Fraction)

    @property
    def lam_bar(self):
        return max(self.lam, Fraction(1) if self.exact else 1.0)

    @property
    def lam_float(self) -> float:
        return float(self.lam)

    def require_exact(self):
        if not self.exact:
            raise ModelError("exact computations need a rational lambda (e.g. '1/2')")

    def weight(self, x: int):
        return self.lam ** popcount(x)


@dataclass(frozen=True)
class Pinning:
    """Fixed values on a subset of edges. Bit ``e`` of ``ones`` gives the spin."""

    graph: Graph
    fixed_mask: int = 0
    ones: int = 0

    def __post_init__(self):
        if self.ones & ~self.fixed_mask:
            raise ModelError("pinned-to-1 edges must be inside the fixed set")
        if self.fixed_mask >> self.graph.m:
            raise ModelError("pinning refers to edges beyond m")

    @classmethod
    def empty(cls, g: Graph) -> "Pinning":
        return cls(g)

    @classmethod
    def from_dict(cls, g: Graph, fixed: Mapping[int, int]) -> "Pinning":
        fm = ones = 0
        for e, c in fixed.items():
            if c not in (0, 1):
                raise ModelError(f"spin must be 0 or 1, got {c}")
            if not 0 <= e < g.m:
                raise ModelError(f"edge {e} out of range")
            fm |= 1 << e
            if c:
                ones |= 1 << e
        return cls(g, fm, ones)

    @property
    def free(self) -> int:
        """The free set as a mask."""
        return self.graph.full_mask & ~self.fixed_mask

    @property
    def fixed(self) -> dict[int, int]:
        return {e: (self.ones >> e) & 1 for e in bits(self.fixed_mask)}

    def is_free(self, e: int) -> bool:
        return not (self.fixed_mask >> e) & 1

    def agrees(self, x: int) -> bool:
        return (x & self.fixed_mask) == self.ones

    def is_feasible(self) -> bool:
        # with every free edge set to 0 the only constraint left is that the
        # pinned-occupied edges form a matching
        return is_matching(self.graph, self.ones)

    def extend(self, e: int, c: int) -> "Pinning":
        if not self.is_free(e):
            raise ModelError(f"edge {e} is already pinned")
        return Pinning(self.graph, self.fixed_mask | (1 << e), self.ones | (c << e))

    def key(self) -> tuple[int, int]:
        return (self.fixed_mask, self.ones)

    def describe(self) -> str:
        if not self.fixed_mask:
            return "-"
        return ";".join(f"{e}={c}" for e, c in sorted(self.fixed.items()))


def pin(pinning: Pinning, e: int, c: int) -> Pinning:
    out = pinning.extend(e, c)
    if not out.is_feasible():
        raise FeasibilityError(f"pinning edge {e} to {c} leaves no matching")
    return out


def _matchings(g: Graph, pinning: Pinning, cap: int) -> list[int]:
    out = []
    m = g.m
    blocked_by = g.adjacent
    fixed, ones = pinning.fixed_mask, pinning.ones

    def rec(i: int, x: int, blocked: int):
        if i == m:
            out.append(x)
            if len(out) > cap:
                raise OversizeError(len(out), cap)
            return
        bit = 1 << i
        if fixed & bit:
            if ones & bit:
                if not blocked & bit:
                    rec(i + 1, x | bit, blocked | blocked_by[i])
            else:
                rec(i + 1, x, blocked)
            return
        rec(i + 1, x, blocked)
        if not blocked & bit:
            rec(i + 1, x | bit, blocked | blocked_by[i])

    rec(0, 0, 0)
    return out


@dataclass(frozen=True)
class ExactDistribution:
    """Support, exact weights and probabilities of ``mu`` under a pinning.

    The support is sorted by mask value, which fixes the state order used by
    kernels and exports.
    """

    model: MonomerDimerModel
    pinning: Pinning
    support: tuple[int, ...]
    weights: tuple[Fraction, ...]
    Z: Fraction
    probabilities: tuple[Fraction, ...]
    index: dict = field(repr=False, compare=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __len__(self):
        return len(self.support)

    @property
    def probs(self) -> np.ndarray:
        p = self._cache.get("probs")
        if p is None:
            p = np.array([float(q) for q in self.probabilities])
            self._cache["probs"] = p
        return p

    @property
    def mu_min(self) -> Fraction:
        return min(self.probabilities)

    def prob(self, x: int) -> Fraction:
        i = self.index.get(x)
        return self.probabilities[i] if i is not None else Fraction(0)

    def marginal(self, e: int) -> tuple[Fraction, Fraction]:
        key = ("marginal", e)
        out = self._cache.get(key)
        if out is None:
            one = sum((p for x, p in zip(self.support, self.probabilities) if (x >> e) & 1),
                      Fraction(0))
            out = self._cache[key] = (1 - one, one)
        return out

    def occupancy(self, e: int) -> np.ndarray:
        return np.array([(x >> e) & 1 for x in self.support], dtype=np.int8)

    def restricted(self, s: int) -> dict[int, Fraction]:
        """Law of the restriction ``X_S`` as a map ``x & s -> probability``."""
        key = ("restricted", s)
        law = self._cache.get(key)
        if law is None:
            law = {}
            for x, p in zip(self.support, self.probabilities):
                k = x & s
                law[k] = law.get(k, Fraction(0)) + p
            self._cache[key] = law
        return law

    def restricted_prob(self, s: int, x: int) -> Fraction:
        return self.restricted(s).get(x & s, Fraction(0))

    def cumulative(self) -> np.ndarray:
        c = self._cache.get("cdf")
        if c is None:
            c = np.cumsum(self.probs)
            c[-1] = 1.0
            self._cache["cdf"] = c
        return c

    def sample_indices(self, rng: np.random.Generator, size=None):
        """Inverse-CDF draws of support positions."""
        u = rng.random(size)
        return np.searchsorted(self.cumulative(), u, side="right")

    def sample(self, rng: np.random.Generator) -> int:
        i = int(self.sample_indices(rng))
        return self.support[min(i, len(self.support) - 1)]

    def to_json(self) -> dict:
        g = self.model.graph
        return {
            "lambda": format_fraction(self.model.lam),
            "Z": format_fraction(self.Z),
            "pinning": {str(e): c for e, c in sorted(self.pinning.fixed.items())},
            "states": [
                {"edges": list(bits(x)), "prob": format_fraction(p)}
                for x, p in zip(self.support, self.probabilities)
            ],
            "m": g.m,
        }


def enumerate_matchings(model: MonomerDimerModel, pinning: Pinning | None = None,
                        cap: int = DEFAULT_CAP) -> ExactDistribution:
    """Enumerate the support of ``mu`` under ``pinning`` with exact probabilities."""
    model.require_exact()
    g = model.graph
    pinning = pinning if pinning is not None else Pinning.empty(g)
    if pinning.graph != g:
        raise ModelError("pinning belongs to a different graph")
    if not pinning.is_feasible():
        raise FeasibilityError("pinning admits no matching")
    support = sorted(_matchings(g, pinning, cap))
    lam = model.lam
    weights = tuple(lam ** popcount(x) for x in support)
    Z = sum(weights, Fraction(0))
    probs = tuple(w / Z for w in weights)
    index = {x: i for i, x in enumerate(support)}
    return ExactDistribution(model, pinning, tuple(support), weights, Z, probs, index)


def marginal(model: MonomerDimerModel, pinning: Pinning | None, e: int,
             dist: ExactDistribution | None = None) -> tuple[Fraction, Fraction]:
    pinning = pinning if pinning is not None else Pinning.empty(model.graph)
    if not 0 <= e < model.graph.m:
        raise ModelError(f"edge {e} out of range")
    if not pinning.is_free(e):
        raise ModelError(f"edge {e} is pinned")
    dist = dist or enumerate_matchings(model, pinning)
    return dist.marginal(e)


def free_support_edges(model: MonomerDimerModel, pinning: Pinning | None = None,
                       dist: ExactDistribution | None = None) -> int:
    """Free edges whose value is not forced under the pinning."""
    pinning = pinning if pinning is not None else Pinning.empty(model.graph)
    dist = dist or enumerate_matchings(model, pinning)
    seen_one = 0
    seen_zero = 0
    for x in dist.support:
        seen_one |= x
        seen_zero |= ~x
    return pinning.free & seen_one & seen_zero


@dataclass(frozen=True)
class MarginalBound:
    phi: Fraction
    bound: Fraction
    holds: bool
    zero_bound: Fraction
    one_bound: Fraction


def marginal_lower_bound_check(model: MonomerDimerModel,
                               dist: ExactDistribution | None = None) -> MarginalBound:
    """Compare edge marginals against ``1/(1+lam)`` and ``lam/(lam+(1+lam*D)^2)``."""
    dist = dist or enumerate_matchings(model)
    lam = model.lam
    d = model.graph.max_degree
    zero_bound = 1 / (1 + lam)
    one_bound = lam / (lam + (1 + lam * d) ** 2)
    holds = True
    phi = None
    for e in range(model.graph.m):
        p0, p1 = dist.marginal(e)
        holds &= p0 >= zero_bound and p1 >= one_bound
        for p in (p0, p1):
            if p and (phi is None or p < phi):
                phi = p
    if phi is None:
        phi = Fraction(1)
    return MarginalBound(phi, min(zero_bound, one_bound), bool(holds), zero_bound, one_bound)


def marginal_floor(dist: ExactDistribution, edges: int | None = None) -> Fraction:
    """Smallest nonzero edge marginal over ``edges`` (default: all free edges)."""
    edges = dist.pinning.free if edges is None else edges
    phi = Fraction(1)
    for e in bits(edges):
        for p in dist.marginal(e):
            if p and p < phi:
                phi = p
    return phi


def feasible_pinnings(dist: ExactDistribution, free: int) -> list[Pinning]:
    """All feasible pinnings of the complement of ``free``, sorted by pinned values."""
    g = dist.model.graph
    fixed = g.full_mask & ~free
    seen = sorted({x & fixed for x in dist.support})
    return [Pinning(g, fixed, ones) for ones in seen]


def partition_function_recursive(g: Graph, lam) -> Fraction:
    """Z by the edge recurrence Z(G) = Z(G-e) + lam * Z(G-u-v). Independent of enumeration."""
    lam = as_rational(lam)
    if lam is None:
        raise ModelError("recursive partition function needs a rational lambda")

    def rec(edges: frozenset) -> Fraction:
        if not edges:
            return Fraction(1)
        u, v = min(edges)
        rest = edges - {(u, v)}
        without_uv = frozenset(f for f in rest if u not in f and v not in f)
        return rec(rest) + lam * rec(without_uv)

    return rec(frozenset(g.edges))


__all__ = [
    "DEFAULT_CAP", "ExactDistribution", "FeasibilityError", "GraphError", "MarginalBound",
    "ModelError", "MonomerDimerModel", "OversizeError", "Pinning", "as_rational",
    "enumerate_matchings", "feasible_pinnings", "format_fraction",
    "free_support_edges", "marginal", "marginal_floor", "marginal_lower_bound_check",
    "partition_function_recursive", "pin",
]
