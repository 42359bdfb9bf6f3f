from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from conftest import lambdas, small_graphs
from monodimer import flow
from monodimer.chains import DOWN, EXCHANGE, UP, transition_kernel
from monodimer.flow import (FlowError, PhiSpec, build_merged_graph, canonical_path,
                            coupling_law, coupling_law_bruteforce, coupling_probability,
                            cycle_path_identity, exchange_edges, exchange_transitions,
                            flow_statistics, geometric_tail_check, one_sided_moments,
                            one_sided_rate, path_is_legal, path_tail_rate,
                            sample_local_flipping_coupling, verify_decoupling, verify_encoding,
                            verify_flow_theorems)
from monodimer.graph import GraphError, popcount
from monodimer.harness.generators import complete, cycle, path, star, star_plus_edge
from monodimer.model import MonomerDimerModel, Pinning, enumerate_matchings

F = Fraction


def _two_sided(model):
    dist = enumerate_matchings(model)
    return [e for e in range(model.graph.m) if all(dist.marginal(e))]


@given(small_graphs(max_m=6), lambdas)
def test_coupling_law_matches_bruteforce_and_marginals(g, lam):
    model = MonomerDimerModel(g, lam)
    for e in _two_sided(model):
        law = coupling_law(model, None, e)
        assert law == coupling_law_bruteforce(model, None, e)
        d0 = enumerate_matchings(model, Pinning.empty(g).extend(e, 0))
        d1 = enumerate_matchings(model, Pinning.empty(g).extend(e, 1))
        mx, my = {}, {}
        for (x, y), p in law.items():
            mx[x] = mx.get(x, 0) + p
            my[y] = my.get(y, 0) + p
        assert mx == dict(zip(d0.support, d0.probabilities))
        assert my == dict(zip(d1.support, d1.probabilities))


@given(small_graphs(max_m=7), lambdas)
def test_canonical_paths_are_legal(g, lam):
    model = MonomerDimerModel(g, lam)
    for e in _two_sided(model):
        for x, y in coupling_law(model, None, e):
            p = canonical_path(model, x, y, e)
            assert p.source == x and p.target == y
            assert p.length <= popcount(x ^ y) <= 2 * p.length
            assert path_is_legal(model, None, p)


def test_p3_path_is_down_then_up():
    g = path(3)
    p = canonical_path(g, 0b10, 0b01, 0)
    assert p.moves == (DOWN, UP)
    assert p.states == (0b10, 0, 0b01)
    # the other direction starts from the larger endpoint, edge 1, which x lacks
    q = canonical_path(g, 0b01, 0b10, 1)
    assert q.moves == (EXCHANGE,)


def test_c4_cycle_path():
    g = cycle(4)
    x = g.mask([g.edge_index(0, 1), g.edge_index(2, 3)])
    y = g.full_mask & ~x
    p = canonical_path(g, x, y)
    assert p.moves == (DOWN, EXCHANGE, UP)
    # first move removes the x-edge at the top vertex 3
    assert p.states[1] == x & ~(1 << g.edge_index(2, 3))
    with pytest.raises(FlowError):
        canonical_path(g, x, x)
    with pytest.raises(FlowError):
        canonical_path(g, x, y, e=g.edge_index(0, 1))


def test_k2_and_p3_flow_statistics():
    s = flow_statistics(MonomerDimerModel(path(2), 1))
    assert (s.congestion_kappa, s.strong_kappa, s.expected_sq_length) == (F(1, 2), F(1, 2), 1)
    s = flow_statistics(MonomerDimerModel(path(3), 1))
    assert (s.congestion_kappa, s.strong_kappa, s.expected_sq_length) == (1, 2, F(5, 2))
    assert s.congestion_csv().splitlines()[0] == "alpha,beta,lhs,rhs,ratio"


@pytest.mark.parametrize("k", [2, 3, 6, 12])
@pytest.mark.parametrize("lam", ["1/2", "1", "2"])
def test_star_squared_length_formula(k, lam):
    # the worst edge is the one at leaf 1: every other leaf is larger, so its flow is
    # down-then-up (length 2) whenever the other side holds an edge, else one up move
    lam_q = Fraction(lam)
    expected = (1 + 4 * (k - 1) * lam_q) / (1 + (k - 1) * lam_q)
    s = flow_statistics(MonomerDimerModel(star(k), lam))
    assert s.expected_sq_length == expected


def test_monte_carlo_flow_statistics_agree():
    model = MonomerDimerModel(cycle(6), 1)
    exact = flow_statistics(model, e=0)
    mc = flow_statistics(model, e=0, mode="monte_carlo", samples=20000,
                         rng=np.random.default_rng(5))
    assert abs(mc.expected_sq_length - float(exact.expected_sq_length)) < 4 * mc.stderr


def test_coupling_sampler_matches_law():
    model = MonomerDimerModel(path(5), 1)
    law = coupling_law(model, None, 1)
    rng = np.random.default_rng(2)
    n = 20000
    counts = {}
    for _ in range(n):
        s = sample_local_flipping_coupling(model, None, 1, rng)
        counts[(s.x, s.y)] = counts.get((s.x, s.y), 0) + 1
    assert set(counts) <= set(law)
    for key, p in law.items():
        p = float(p)
        assert abs(counts.get(key, 0) - n * p) <= 4 * np.sqrt(n * p * (1 - p))


def test_coupling_probability_lookup():
    model = MonomerDimerModel(cycle(4), 2)
    law = coupling_law(model, None, 0)
    for (x, y), p in law.items():
        assert coupling_probability(model, None, 0, x, y) == p
    assert coupling_probability(model, None, 0, 0, 0) == 0


@given(small_graphs(max_m=6), lambdas)
def test_cycle_path_identity(g, lam):
    model = MonomerDimerModel(g, lam)
    for e in _two_sided(model):
        assert all(row[4] for row in cycle_path_identity(model, e))


def test_cycle_path_identity_on_c6():
    model = MonomerDimerModel(cycle(6), "1/2")
    rows = cycle_path_identity(model, 0)
    assert rows and all(r[4] for r in rows)


@pytest.mark.parametrize("kind", ["zero", "one", "size"])
@given(g=small_graphs(max_m=6), lam=lambdas)
def test_decoupling_basic_functions(kind, g, lam):
    model = MonomerDimerModel(g, lam)
    for f in _two_sided(model):
        r = verify_decoupling(model, f, PhiSpec(kind))
        assert r.identity_holds and r.inequality_holds


def test_decoupling_transition_functions():
    model = MonomerDimerModel(path(4), 2)
    k = transition_kernel(model)
    for i, j, _ in k.off_diagonal():
        a, b = k.states.support[i], k.states.support[j]
        for kind in ("transition", "transition_over_length", "transition_times_length"):
            for f in _two_sided(model):
                assert verify_decoupling(model, f, PhiSpec(kind, a, b)).inequality_holds
    with pytest.raises(ValueError):
        PhiSpec("transition")


def test_merged_graph():
    g = path(4)  # edges 0=(0,1), 1=(1,2), 2=(2,3)
    mg = build_merged_graph(g, 1, 0, 1)
    assert mg.graph.n == 4
    assert mg.graph.edges[mg.h_star] == (0, 2)
    assert mg.proj(0b011) == (1 << mg.h_star)
    with pytest.raises(FlowError):
        mg.proj(0b001)
    with pytest.raises(GraphError):
        build_merged_graph(complete(3), 0, 0, 1)
    with pytest.raises(GraphError):
        build_merged_graph(g, 0, 0, 2)


def test_exchange_edges():
    g = path(3)
    assert exchange_edges(g, 0b01, 0b10) == (1, 0, 1)
    with pytest.raises(FlowError):
        exchange_edges(g, 0, 0b01)


@pytest.mark.parametrize("g", [path(4), cycle(4), cycle(6), star_plus_edge(3)],
                         ids=["P4", "C4", "C6", "K13+edge"])
@pytest.mark.parametrize("lam", ["1/2", "1", "2"])
def test_encoding(g, lam):
    model = MonomerDimerModel(g, lam)
    trans = exchange_transitions(transition_kernel(model))
    assert trans
    for a, b in trans:
        r = verify_encoding(model, a, b)
        assert r.holds, r
        assert r.worst_ratio <= 1


def test_flow_theorems_small():
    for g in (path(2), path(3), cycle(4), star(3)):
        for lam in ("1/2", "2"):
            assert verify_flow_theorems(MonomerDimerModel(g, lam), restarts=4).holds


def test_rates():
    assert path_tail_rate(1, 3) == pytest.approx(2 / 3)
    assert one_sided_rate(2, 2) == pytest.approx(1 / 5)


def test_one_sided_moments_exact_vs_sampled():
    model = MonomerDimerModel(path(6), 1)
    ex = one_sided_moments(model, 2, 2, side="fix_y")
    mc = one_sided_moments(model, 2, 2, side="fix_y", mode="monte_carlo", samples=20000,
                           rng=np.random.default_rng(1))
    assert abs(mc - ex) < 0.35
    assert one_sided_moments(model, 2, 1, side="fix_x") >= 1
    with pytest.raises(ValueError):
        one_sided_moments(model, 2, 1, side="both")


def test_geometric_tail_passes_on_long_path():
    r = geometric_tail_check(MonomerDimerModel(path(14), 2), 6, 20000, np.random.default_rng(0))
    assert r.status == "pass"
    assert r.tests > 0


def test_geometric_tail_detects_wrong_rate(monkeypatch):
    # with an absurdly fast claimed decay every long path is a violation
    monkeypatch.setattr(flow, "path_tail_rate", lambda lam, d: 0.99)
    r = geometric_tail_check(MonomerDimerModel(path(14), 2), 6, 20000, np.random.default_rng(0))
    assert r.status == "fail"
    assert r.violations
