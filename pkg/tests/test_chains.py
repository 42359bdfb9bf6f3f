from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from conftest import lambdas, small_graphs
from monodimer.chains import (BLOCKED, DOWN, EXCHANGE, GLAUBER, JS, LAZY_JS, UP, ChainSpec,
                              js_acceptance, js_move, parse_kind, simulate, step,
                              transition_kernel)
from monodimer.harness.generators import cycle, path, star
from monodimer.model import ModelError, MonomerDimerModel, Pinning, enumerate_matchings

F = Fraction


def test_move_types_on_p4():
    g = path(4)  # edges 0=(0,1), 1=(1,2), 2=(2,3)
    assert js_move(g, 0b001, 0) == (0, DOWN)
    assert js_move(g, 0, 1) == (0b010, UP)
    assert js_move(g, 0b001, 1) == (0b010, EXCHANGE)
    assert js_move(g, 0b101, 1) == (0b101, BLOCKED)


def test_k2_kernels():
    g = path(2)
    k = transition_kernel(MonomerDimerModel(g, F(1, 2)), spec=JS)
    assert k.rows == ({0: F(1, 2), 1: F(1, 2)}, {0: F(1)})
    k = transition_kernel(MonomerDimerModel(g, 1), spec=LAZY_JS)
    assert k.rows == ({0: F(1, 2), 1: F(1, 2)}, {0: F(1, 2), 1: F(1, 2)})
    k = transition_kernel(MonomerDimerModel(g, 2), spec=GLAUBER)
    assert k.entry(0, 1) == F(2, 3) and k.entry(1, 0) == F(1, 3)


def test_p3_js_kernel_by_hand():
    k = transition_kernel(MonomerDimerModel(path(3), 1))
    P = k.dense()
    # states: empty, {0}, {1}; every move has probability 1/2
    assert np.allclose(P, [[0, .5, .5], [.5, 0, .5], [.5, .5, 0]])
    k = transition_kernel(MonomerDimerModel(path(3), 2))
    # from {0}: down accepted w.p. 1/2, exchange to {1} always
    assert k.entry(0b01, 0) == F(1, 4)
    assert k.entry(0b01, 0b10) == F(1, 2)
    assert k.entry(0b01, 0b01) == F(1, 4)


@given(small_graphs(), lambdas, st.sampled_from([JS, LAZY_JS, GLAUBER]))
def test_exact_detailed_balance(g, lam, kind):
    k = transition_kernel(MonomerDimerModel(g, lam), spec=kind)
    assert k.is_stochastic()
    assert k.is_reversible()
    assert k.is_irreducible()


@given(small_graphs(max_m=6), lambdas, st.data())
def test_pinned_kernels_respect_pinning(g, lam, data):
    model = MonomerDimerModel(g, lam)
    full = enumerate_matchings(model)
    x = data.draw(st.sampled_from(full.support))
    fixed = data.draw(st.integers(0, g.full_mask))
    p = Pinning(g, fixed, x & fixed)
    for kind in (JS, LAZY_JS, GLAUBER):
        k = transition_kernel(model, p, kind)
        assert k.is_stochastic() and k.is_reversible()
        for i, j, _ in k.off_diagonal():
            assert p.agrees(k.states.support[j])
        if kind == LAZY_JS:
            assert all(row[i] >= F(1, 2) for i, row in enumerate(k.rows))


def test_empty_proposal_set_is_identity():
    g = path(3)
    p = Pinning.from_dict(g, {0: 1, 1: 0})
    k = transition_kernel(MonomerDimerModel(g, 1), p)
    assert k.rows == ({0: F(1)},)


def test_acceptance_filter():
    model = MonomerDimerModel(path(3), F(1, 3))
    assert js_acceptance(model, None, 0, 0b01) == F(1, 3)
    assert js_acceptance(model, None, 0b01, 0) == 1
    p = Pinning.from_dict(model.graph, {0: 1})
    assert js_acceptance(model, p, 0b01, 0) == 0


def _transition_counts(model, spec, x, n, seed):
    rng = np.random.default_rng(seed)
    counts = {}
    props = spec.proposals
    for _ in range(n):
        y = step(model, spec, x, rng, props)
        counts[y] = counts.get(y, 0) + 1
    return counts


@pytest.mark.parametrize("kind", [JS, LAZY_JS, GLAUBER])
def test_sampler_matches_kernel(kind):
    model = MonomerDimerModel(cycle(5), F(3, 2))
    spec = ChainSpec.make(kind, model)
    k = transition_kernel(model, spec=spec)
    n = 20000
    for i, x in enumerate(k.states.support[:6]):
        counts = _transition_counts(model, spec, x, n, seed=i)
        for j, y in enumerate(k.states.support):
            p = float(k.rows[i].get(j, 0))
            c = counts.get(y, 0)
            if p in (0.0, 1.0):
                assert c == p * n
                continue
            assert abs(c - n * p) <= 4 * np.sqrt(n * p * (1 - p))


def test_float_lambda_sampler_runs():
    model = MonomerDimerModel(star(4), 0.7)
    spec = ChainSpec.make(JS, model)
    tr = simulate(model, spec, 0, 2000, np.random.default_rng(0))
    assert tr.steps == 2000
    # a star has at most one occupied edge
    assert tr.empirical_marginals().sum() <= 1.0 + 1e-12


def test_long_run_marginals():
    model = MonomerDimerModel(path(5), 1)
    dist = enumerate_matchings(model)
    exact = np.array([float(dist.marginal(e)[1]) for e in range(model.graph.m)])
    spec = ChainSpec.make(LAZY_JS, model)
    tr = simulate(model, spec, 0, 200_000, np.random.default_rng(11))
    # loose: autocorrelated samples, the chain mixes in a handful of steps
    assert np.max(np.abs(tr.empirical_marginals() - exact)) < 0.02


def test_spec_validation():
    g = path(3)
    with pytest.raises(ValueError):
        parse_kind("metropolis")
    assert parse_kind("lazy-js") == LAZY_JS
    with pytest.raises(ModelError):
        ChainSpec(JS, Pinning.from_dict(g, {0: 0}), proposal_set=0b11)
    with pytest.raises(ModelError):
        simulate(MonomerDimerModel(g, 1), ChainSpec(JS, Pinning.from_dict(g, {0: 1})), 0, 10,
                 np.random.default_rng(0))


def test_kernel_json():
    data = transition_kernel(MonomerDimerModel(path(2), 1)).to_json()
    assert data["states"] == [[], [0]]
    assert data["rows"] == [["0/1", "1/1"], ["1/1", "0/1"]]
