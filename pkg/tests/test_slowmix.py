import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings, strategies as st

from swtree.model import component_counts, decode_bits
from swtree.slowmix import (HostGraph, bad_set_conductance, bulk_labels, connected_groups,
                            cut_probability, embed_boundary, escape_indicators, gap_transfer_check,
                            minimal_height, projection_codes, s_star_mask, subdivide,
                            tail_monte_carlo, transferred_p)
from swtree.tree import ExactInfeasibleError


# host graphs -----------------------------------------------------------------

def test_parse_round_trip():
    text = "# a triangle\n3 3\n0 1\n1 2  # middle\n2 0\n"
    G = HostGraph.parse(text)
    assert (G.n, G.m) == (3, 3)
    assert HostGraph.parse(G.to_text()) == G
    assert list(G.degrees) == [2, 2, 2]


@pytest.mark.parametrize("text", ["", "3\n0 1\n", "3 2\n0 1\n", "2 1\n0 0\n", "2 2\n0 1\n1 0\n",
                                  "2 1\n0 5\n"])
def test_parse_rejects_malformed(text):
    with pytest.raises(ValueError):
        HostGraph.parse(text)


def test_subdivide_layout():
    G = HostGraph.path(2)
    Gh = subdivide(G)
    assert Gh.n == 5 and Gh.middles == (3, 4)
    assert Gh.edges == ((0, 3), (3, 1), (1, 4), (4, 2))
    assert Gh.pairs == [(0, 1), (2, 3)]
    with pytest.raises(ValueError):
        subdivide(Gh)
    with pytest.raises(ValueError):
        G.pairs


def test_projection_codes():
    proj = projection_codes(2)
    assert proj[0b0011] == 0b01 and proj[0b1100] == 0b10
    assert proj[0b0101] == 0 and proj[0b1111] == 0b11


# embedding -------------------------------------------------------------------

def test_embed_single_edge_minimal_tree():
    G = HostGraph.from_edges(2, [(0, 1)])
    emb = embed_boundary(G, 1, 1)
    (g,) = emb.gadgets
    # T_1 is a root with two leaf slots; the gadget is the whole tree
    assert (g.c, g.a, g.b) == (0, 1, 2)
    assert emb.vertex_classes == {0: (1,), 1: (2,)}
    assert emb.bulk_edges == []
    assert emb.decode() == G


@pytest.mark.parametrize("G,ell", [(HostGraph.path(3), 1), (HostGraph.path(4), 2),
                                   (HostGraph.matching(2), 2),
                                   (HostGraph.from_edges(3, [(0, 1), (1, 2), (2, 0)]), 1)])
def test_embed_round_trip(G, ell):
    h = minimal_height(G.m, ell)
    emb = embed_boundary(G, h, ell)
    assert emb.decode() == G
    assert len(emb.W) == 3 * G.m
    leaves = set(emb.tree.boundary_slots)
    for g in emb.gadgets:
        assert g.a in leaves and g.b in leaves and emb.tree.parent(g.a) == g.c
        assert emb.tree.depth(g.c) - emb.tree.depth(g.root) == ell - 1


def test_embed_rejects_too_many_edges():
    with pytest.raises(ExactInfeasibleError):
        embed_boundary(HostGraph.path(5), 3, 2)
    with pytest.raises(ValueError):
        embed_boundary(HostGraph.path(1), 2, 0)


def test_minimal_height():
    assert minimal_height(1, 1) == 1
    assert minimal_height(2, 1) == 2
    assert minimal_height(8, 2) == 5
    assert minimal_height(16, 3) == 7
    assert minimal_height(5, 2) == 5


def test_gadget_partition_follows_shared_vertices():
    emb = embed_boundary(HostGraph.from_edges(5, [(0, 1), (1, 2), (3, 4)]), 3, 1)
    assert emb.gadget_partition() == [[0, 1], [2]]


# gap transfer ----------------------------------------------------------------

def test_transferred_p_examples():
    assert transferred_p(0.5, 2) == pytest.approx(0.2, abs=1e-15)
    assert transferred_p(0.5, 1) == pytest.approx(0.25, abs=1e-15)
    assert cut_probability(0.5, 2) == pytest.approx(1 / 3, abs=1e-15)


def test_gap_transfer_single_edge():
    # both chains resample their only block from stationarity: gap 1 on each side
    rep = gap_transfer_check(HostGraph.from_edges(2, [(0, 1)]), 0.5, 2.0)
    assert rep.gap_edge == pytest.approx(1.0, abs=1e-12)
    assert rep.gap_error <= 1e-10 and rep.projection_error <= 1e-12
    assert rep.pair_rule_error <= 1e-12 and rep.ok


@pytest.mark.parametrize("G,p_hat,q", [(HostGraph.path(2), 0.5, 2.0), (HostGraph.path(3), 0.7, 3.0),
                                       (HostGraph.from_edges(3, [(0, 1), (1, 2), (2, 0)]), 0.4, 2.0)])
def test_gap_transfer_small_graphs(G, p_hat, q):
    rep = gap_transfer_check(G, p_hat, q)
    assert rep.ok, rep.to_json()
    assert rep.pair_rule_error <= 1e-12


def test_gap_transfer_rejects_bad_p():
    with pytest.raises(ValueError):
        gap_transfer_check(HostGraph.path(1), 1.0, 2.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(1.0, 4.0))
def test_gap_transfer_property_path2(p_hat, q):
    rep = gap_transfer_check(HostGraph.path(2), p_hat, q)
    assert rep.gap_error <= 1e-10 and rep.projection_error <= 1e-12


# bulk connectivity -----------------------------------------------------------

def test_bulk_labels_match_component_oracle():
    emb = embed_boundary(HostGraph.path(2), 3, 1)
    rng = np.random.default_rng(0)
    bits = rng.random((200, emb.instance.m)) < 0.5
    lab = bulk_labels(emb.tree, bits)
    codes = (bits.astype(np.int64) << np.arange(emb.instance.m)).sum(axis=1)
    comps = component_counts(emb.instance, decode_bits(codes, emb.instance.m))["c_xi"]
    n_labels = np.array([len(np.unique(row)) for row in lab])
    assert np.array_equal(n_labels, comps)


def test_escape_and_group_counts():
    emb = embed_boundary(HostGraph.matching(2), 3, 2)
    all_open = np.ones((1, emb.instance.m), dtype=bool)
    none_open = np.zeros_like(all_open)
    assert escape_indicators(emb, all_open).all()
    assert not escape_indicators(emb, none_open).any()
    assert connected_groups(emb, all_open)[0] == 2
    assert connected_groups(emb, none_open)[0] == 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.1, 0.9))
def test_groups_never_exceed_escapes(seed, p):
    emb = embed_boundary(HostGraph.matching(4), 4, 2)
    bits = np.random.default_rng(seed).random((50, emb.instance.m)) < p
    bits[:, emb.gadget_edges] = False
    groups = connected_groups(emb, bits)
    esc = escape_indicators(emb, bits).sum(axis=1)
    assert (groups <= esc).all()


# bad set ---------------------------------------------------------------------

def test_s_star_majority_mask():
    mask = s_star_mask("majority", 1)
    assert mask.tolist() == [False, False, False, True]
    with pytest.raises(ValueError):
        s_star_mask("nonsense", 1)


def test_bad_set_conductance_small_case():
    rep = bad_set_conductance(HostGraph.from_edges(2, [(0, 1)]), 3, 1, 0.5, 2.0, 1)
    assert 0 < rep.pi_A < 1
    assert rep.cheeger_ok
    assert rep.conditional_identity_error <= 1e-12
    assert rep.claim_i["holds"] and rep.claim_ii["holds"]
    assert sum(rep.S_count_tail.values()) == pytest.approx(1.0, abs=1e-12)
    assert rep.r == 1.0


# tail ------------------------------------------------------------------------

def test_tail_binomial_oracle_and_reproducibility():
    emb = embed_boundary(HostGraph.matching(8), minimal_height(8, 2), 2)
    a = tail_monte_carlo(emb, 0.5, 6, samples=20000, seed=3)
    b = tail_monte_carlo(emb, 0.5, 6, samples=20000, seed=3)
    assert a.frequency == b.frequency
    assert a.binomial_tail == pytest.approx(scipy.stats.binom.sf(6, 8, 0.5), abs=1e-15)
    assert a.binomial_tail == pytest.approx(9 / 256, abs=1e-15)
    assert a.inside and a.independence_ok and a.groups_below_oracle
    assert a.mean_escapes == pytest.approx(0.5, abs=0.02)


def test_tail_ell_one_always_escapes():
    emb = embed_boundary(HostGraph.path(2), 2, 1)
    rep = tail_monte_carlo(emb, 0.3, 1, samples=500, seed=0)
    assert rep.r == 1.0 and rep.frequency == 1.0 and math.isclose(rep.binomial_tail, 1.0)
