import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_radius_edges, naive_shot_noise, naive_sinr_edges
from sinrperc.components import giant_stats
from sinrperc.graph import MAX_RULE, MIN_RULE, SinrGraph, build_directed, derive_undirected, shot_noise_totals
from sinrperc.model import (BinaryRadius, ConstantPower, ModelError, ShiftedPowerLaw, SinrParams, UniformPower,
                            radius_of)
from sinrperc.sampling import HARD_BOX, TORUS, Configuration, Region, sample_configuration

PARAMS = SinrParams(0.25, 0.1)
MODEL = ShiftedPowerLaw.from_noise(PARAMS)
LAW = UniformPower(1.0, 2.0)


def _config(n, density, seed, law=LAW, boundary=HARD_BOX):
    return sample_configuration(density, Region.square_for(n, density, boundary), law, n, seed)


def test_shot_noise_single_node():
    assert shot_noise_totals(_config(1, 1.0, 0), MODEL).tolist() == [0.0]


def test_shot_noise_pair():
    conf = Configuration([[0, 0], [0.7, 0]], [1.0, 1.0], Region(2.0, 2.0), 0.5, 0)
    np.testing.assert_allclose(shot_noise_totals(conf, MODEL), [MODEL(0.7)] * 2, rtol=1e-15)


@pytest.mark.parametrize("boundary", [HARD_BOX, TORUS])
def test_shot_noise_matches_double_loop(boundary):
    conf = _config(50, 2.0, 4, boundary=boundary)
    box = (conf.region.width, conf.region.height) if boundary == TORUS else None
    ref = naive_shot_noise(conf.positions.tolist(), conf.powers.tolist(), lambda d: float(MODEL(d)), box)
    np.testing.assert_allclose(shot_noise_totals(conf, MODEL), ref, rtol=1e-9)


def test_asymmetric_pair_radius_rule():
    conf = Configuration([[0, 0], [0.5, 0]], None, Region(2.0, 2.0), 0.5, 0, radii=[1.0, 0.3])
    g = build_directed(conf, PARAMS)
    assert g.edge_set() == {(0, 1)}
    assert derive_undirected(g, MIN_RULE).edge_set() == set()
    assert derive_undirected(g, MAX_RULE).edge_set() == {(0, 1)}


def test_no_self_loops():
    g = SinrGraph.from_edges(3, [(0, 0), (0, 1), (2, 2)])
    assert g.edge_set() == {(0, 1)}


@pytest.mark.parametrize("gamma", [0.0, 0.05, 0.2])
def test_edges_match_naive_sinr(gamma):
    conf = _config(100, 4.0, 21)
    g = build_directed(conf, PARAMS.with_gamma(gamma), MODEL)
    ref = naive_sinr_edges(conf.positions.tolist(), conf.powers.tolist(), lambda d: float(MODEL(d)),
                           PARAMS.beta, PARAMS.n0, gamma)
    assert g.edge_set() == ref


def test_edges_match_naive_on_torus():
    conf = _config(60, 2.0, 5, boundary=TORUS)
    box = (conf.region.width, conf.region.height)
    g = build_directed(conf, PARAMS.with_gamma(0.01), MODEL)
    ref = naive_sinr_edges(conf.positions.tolist(), conf.powers.tolist(), lambda d: float(MODEL(d)),
                           PARAMS.beta, PARAMS.n0, 0.01, box)
    assert g.edge_set() == ref


def test_radius_law_matches_naive():
    conf = _config(150, 0.6, 9, law=BinaryRadius(1.0, 2.0))
    g = build_directed(conf, PARAMS)
    assert g.edge_set() == naive_radius_edges(conf.positions.tolist(), conf.radii.tolist())


def test_gamma_zero_is_radius_rule():
    conf = _config(300, 3.0, 2)
    g = build_directed(conf, PARAMS, MODEL)
    radii = radius_of(conf.powers, PARAMS, MODEL)
    assert g.edge_set() == naive_radius_edges(conf.positions.tolist(), radii.tolist())


def test_constant_power_symmetric():
    conf = _config(300, 3.0, 2, law=ConstantPower(1.5))
    g = build_directed(conf, PARAMS, MODEL)
    lo = derive_undirected(g, MIN_RULE).edge_set()
    hi = derive_undirected(g, MAX_RULE).edge_set()
    assert lo == hi == {(min(i, j), max(i, j)) for i, j in g.edge_set()}


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 80), st.sampled_from([0.0, 0.05, 0.2]))
def test_coupling_inclusions(seed, n, gamma):
    conf = _config(n, 2.0, seed, law=UniformPower(0.8, 2.5))
    g = build_directed(conf, PARAMS.with_gamma(gamma), MODEL)
    directed = {(min(i, j), max(i, j)) for i, j in g.edge_set()}
    both = {(i, j) for i, j in g.edge_set() if (j, i) in g.edge_set() and i < j}
    assert derive_undirected(g, MIN_RULE).edge_set() == both
    assert derive_undirected(g, MAX_RULE).edge_set() == directed
    assert both <= directed


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.3), st.floats(0.0, 0.3))
def test_monotone_in_gamma(seed, g1, g2):
    g1, g2 = sorted((g1, g2))
    conf = _config(80, 3.0, seed)
    e1 = build_directed(conf, PARAMS.with_gamma(g1), MODEL).edge_set()
    e2 = build_directed(conf, PARAMS.with_gamma(g2), MODEL).edge_set()
    assert e2 <= e1


def test_in_degree_bound():
    # a receiver decodes at most 1 + 1/(beta gamma) transmitters
    gamma = 0.01
    conf = _config(400, 4.0, 8)
    g = build_directed(conf, PARAMS.with_gamma(gamma), MODEL)
    in_deg = np.asarray(g.adjacency.sum(axis=0)).ravel()
    assert in_deg.max() <= 1 + 1 / (PARAMS.beta * gamma)


def test_interference_needs_model():
    with pytest.raises(ModelError):
        build_directed(_config(5, 1.0, 0), PARAMS.with_gamma(0.1))


def test_edge_csv(tmp_path):
    g = build_directed(_config(40, 2.0, 1), PARAMS, MODEL)
    g.to_csv(tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0].startswith("# ") and lines[1] == "i,j"
    assert len(lines) == 2 + g.n_edges


def test_interference_headroom():
    # Infinite-plane mean shot noise at density 4 with E[P] = 1.5:
    # S = lambda E[P] int 2 pi r (r + c)^-3 dr = lambda E[P] pi / c.
    s = 4.0 * 1.5 * math.pi / MODEL.shift
    assert s == pytest.approx(6.944, abs=1e-3)
    # at gamma = 0.1 even the best link (p_max at distance 0) misses the threshold
    assert 2.0 * MODEL.at_zero() < PARAMS.beta * (PARAMS.n0 + 0.1 * s)
    # largest gamma an interior link can tolerate with mean interference
    gamma_max = (2.0 * MODEL.at_zero() / PARAMS.beta - PARAMS.n0) / s
    assert gamma_max == pytest.approx(0.0432, abs=1e-4)


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="gamma=0.1 exceeds the interference headroom (~0.043) at density 4; "
                                      "see test_interference_headroom")
def test_interference_snapshot_supercritical():
    region = Region(40.0, 40.0)
    params = PARAMS.with_gamma(0.1)
    big = 0
    for seed in range(20):
        conf = sample_configuration(4.0, region, LAW, 6400, seed)
        big += giant_stats(build_directed(conf, params, MODEL)).fraction("strong") > 0.5
    assert big > 10
