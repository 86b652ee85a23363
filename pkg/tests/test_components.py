import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import closure, component_sets, largest_sizes
from sinrperc.components import (IN_ONLY, OUT_ONLY, STRONG, TYPES, UNRELATED, component_labels, component_report,
                                 giant_stats, in_component, out_component)
from sinrperc.graph import SinrGraph, build_directed
from sinrperc.model import ConstantPower, ModelError, ShiftedPowerLaw, SinrParams
from sinrperc.sampling import Region, sample_configuration

CHAIN = SinrGraph.from_edges(3, [(0, 1), (1, 2)])


def random_graph(n, p, seed):
    rng = np.random.default_rng(seed)
    adj = rng.random((n, n)) < p
    np.fill_diagonal(adj, False)
    return SinrGraph.from_edges(n, np.argwhere(adj)), adj


@st.composite
def graphs(draw, max_n=40):
    n = draw(st.integers(1, max_n))
    p = draw(st.sampled_from([0.0, 0.02, 0.05, 0.1, 0.3]))
    return random_graph(n, p, draw(st.integers(0, 2**32 - 1)))


def test_isolated_node():
    g = SinrGraph.from_edges(4, [])
    assert out_component(g, 2).tolist() == [2]
    assert in_component(g, 2).tolist() == [2]


def test_chain_out_in():
    assert out_component(CHAIN, 0).tolist() == [0, 1, 2]
    assert in_component(CHAIN, 2).tolist() == [0, 1, 2]


def test_chain_report_middle():
    rep = component_report(CHAIN, 1)
    assert rep.in_set.tolist() == [0, 1]
    assert rep.out_set.tolist() == [1, 2]
    assert rep.weak_set.tolist() == [0, 1, 2]
    assert rep.strong_set.tolist() == [1]


def test_chain_labels():
    assert component_labels(CHAIN, 1).tolist() == [IN_ONLY, STRONG, OUT_ONLY]
    g = SinrGraph.from_edges(3, [])
    assert component_labels(g, 0).tolist() == [STRONG, UNRELATED, UNRELATED]


@pytest.mark.parametrize("u", [-1, 3, 1.0, "a"])
def test_bad_root(u):
    with pytest.raises(ModelError):
        out_component(CHAIN, u)


def test_constant_power_sets_coincide():
    params = SinrParams(0.25, 0.1)
    model = ShiftedPowerLaw.from_noise(params)
    conf = sample_configuration(2.0, Region.square_for(300, 2.0), ConstantPower(1.0), 300, 4)
    g = build_directed(conf, params, model)
    for u in range(0, 300, 37):
        rep = component_report(g, u)
        assert rep.in_set.tolist() == rep.out_set.tolist() == rep.weak_set.tolist() == rep.strong_set.tolist()


def test_empty_and_complete():
    n = 12
    empty = giant_stats(SinrGraph.from_edges(n, []))
    assert all(empty.largest[t] == 1 for t in TYPES)
    full = [(i, j) for i in range(n) for j in range(n) if i != j]
    complete = giant_stats(SinrGraph.from_edges(n, full))
    assert all(complete.largest[t] == n for t in TYPES)


def test_zero_nodes():
    assert giant_stats(SinrGraph.from_edges(0, [])).largest["strong"] == 0


@settings(max_examples=60, deadline=None)
@given(graphs())
def test_sets_match_closure(graph):
    g, adj = graph
    reach = closure(adj)
    for u in range(g.n):
        ref = component_sets(reach, u)
        rep = component_report(g, u)
        for kind in TYPES:
            assert set(getattr(rep, f"{kind}_set").tolist()) == ref[kind]


@settings(max_examples=60, deadline=None)
@given(graphs())
def test_set_identities(graph):
    g, _ = graph
    for u in range(g.n):
        rep = component_report(g, u)
        assert set(rep.weak_set) == set(rep.in_set) | set(rep.out_set)
        assert set(rep.strong_set) == set(rep.in_set) & set(rep.out_set)
        assert u in rep.strong_set


@settings(max_examples=60, deadline=None)
@given(graphs())
def test_giant_matches_brute_force(graph):
    g, adj = graph
    stats = giant_stats(g)
    assert stats.largest == largest_sizes(closure(adj))
    # reported roots actually achieve the maxima
    for kind in TYPES:
        assert component_report(g, stats.root[kind]).sizes()[kind] == stats.largest[kind]


def test_giant_two_hundred_nodes():
    g, adj = random_graph(200, 0.006, 17)
    assert giant_stats(g).largest == largest_sizes(closure(adj))


def test_sampled_fallback_is_lower_bound():
    g, adj = random_graph(120, 0.01, 3)
    exact = giant_stats(g)
    approx = giant_stats(g, exact_limit=1, sample_roots=120)
    assert not approx.exact
    assert approx.largest == exact.largest  # every root sampled
    partial = giant_stats(g, exact_limit=1, sample_roots=10, seed=1)
    assert all(partial.largest[t] <= exact.largest[t] for t in TYPES)
    assert partial.largest["strong"] == exact.largest["strong"]
