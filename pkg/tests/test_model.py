import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import LN2, brute_potts
from swtree.model import (PottsParams, RCBoundary, RCInstance, SpinBoundary, component_counts,
                          components, decode_base_q, decode_bits, edwards_sokal_measure,
                          encode_base_q, free_rc_edge_probability, percolation_measure,
                          potts_measure, rc_measure)
from swtree.tree import ExactInfeasibleError, build_tree


def brute_rc(num_vertices, edges, classes, p, q):
    """Oracle: RC weights by depth-first component counting."""
    m = len(edges)
    out = []
    for code in range(2 ** m):
        adj = {v: set() for v in range(num_vertices)}
        for e, (u, v) in enumerate(edges):
            if code >> e & 1:
                adj[u].add(v)
                adj[v].add(u)
        for cls in classes:
            for v in cls[1:]:
                adj[cls[0]].add(v)
                adj[v].add(cls[0])
        seen, c = set(), 0
        for s in range(num_vertices):
            if s in seen:
                continue
            c += 1
            stack = [s]
            while stack:
                x = stack.pop()
                if x not in seen:
                    seen.add(x)
                    stack.extend(adj[x] - seen)
        k = bin(code).count("1")
        out.append(p ** k * (1 - p) ** (m - k) * q ** c)
    w = np.array(out)
    return w / w.sum(), w.sum()


# parameters ---------------------------------------------------------------

def test_params_p_and_pmin():
    pr = PottsParams(2, LN2)
    assert pr.p == pytest.approx(0.5, abs=1e-15)
    assert PottsParams.from_p(3, 0.25).p == pytest.approx(0.25, abs=1e-15)
    for d in (2, 3):
        assert 0 < pr.p_min_bound(d) <= pr.p_min(d) <= 1 / 2


def test_params_reject_p_one():
    with pytest.raises(ValueError):
        PottsParams(2, float("inf"))
    with pytest.raises(ValueError):
        PottsParams(2, 1e4)
    with pytest.raises(ValueError):
        PottsParams(2, -0.1)


def test_encoding_roundtrip_little_endian():
    codes = np.arange(27)
    cfg = decode_base_q(codes, 3, 3)
    assert cfg[5].tolist() == [2, 1, 0]
    assert np.array_equal(encode_base_q(cfg, 3), codes)
    assert decode_bits(np.array([6]), 3)[0].tolist() == [False, True, True]


def test_boundary_json_roundtrip():
    t = build_tree(2, 1)
    for tau in (SpinBoundary.mono(t, 1), SpinBoundary.from_list(t, [0, 1, 1, 0]),
                SpinBoundary.random(t, 3, 4)):
        back = SpinBoundary.from_json(t, tau.to_json(), q=3)
        assert back.spins == tau.spins
    with pytest.raises(ValueError):
        SpinBoundary.from_list(t, [0, 1])
    xi = RCBoundary.from_json({"kind": "partition", "classes": [[3, 4], [5, 6]]}, [3, 4, 5, 6])
    assert xi.classes == ((3, 4), (5, 6))
    with pytest.raises(ValueError):
        RCBoundary.from_json({"kind": "partition", "classes": [[3, 4]]}, [3, 4, 5, 6])
    with pytest.raises(ValueError):
        RCBoundary.partition([[3, 4], [4, 5]])


# Potts --------------------------------------------------------------------

def test_potts_beta_zero_uniform():
    t = build_tree(2, 1)
    tab = potts_measure(t, None, None, PottsParams(3, 0.0), SpinBoundary.mono(t, 0))
    assert np.allclose(tab.probs, 1 / 27, atol=1e-15)


def test_potts_single_leaf_conditional():
    # leaf 1 of the d=2, h=1 tree: parent 0 and both boundary slots carry spin 1
    t = build_tree(2, 1)
    eta = np.array([1, 0, 0])
    tab = potts_measure(t, [1], eta, PottsParams(2, LN2), SpinBoundary.mono(t, 1))
    spin = decode_base_q(tab.codes, 3, 2)[:, 1]
    assert tab.probs[spin == 1].sum() == pytest.approx(8 / 9, abs=1e-14)
    assert tab.probs[spin == 0].sum() == pytest.approx(1 / 9, abs=1e-14)


def test_potts_empty_region_point_mass():
    t = build_tree(2, 1)
    eta = np.array([1, 0, 1])
    tab = potts_measure(t, [], eta, PottsParams(2, 1.0), SpinBoundary.mono(t, 0))
    assert tab.codes.tolist() == [encode_base_q(eta[None, :], 2)[0]]
    assert tab.probs.tolist() == [1.0]


def test_potts_cap():
    t = build_tree(2, 3)
    with pytest.raises(ExactInfeasibleError, match="infeasible"):
        potts_measure(t, None, None, PottsParams(2, 1.0), SpinBoundary.mono(t), cap=2 ** 10)


@pytest.mark.parametrize("q,beta,kind", [(2, LN2, "mono"), (3, 1.0, "random"), (2, 2.0, "free")])
def test_potts_matches_bruteforce(q, beta, kind):
    t = build_tree(2, 2) if q == 2 else build_tree(2, 1)
    tau = {"mono": SpinBoundary.mono(t, 1), "random": SpinBoundary.random(t, q, 3),
           "free": SpinBoundary.free()}[kind]
    pr = PottsParams(q, beta)
    tab = potts_measure(t, None, None, pr, tau)
    assert np.abs(tab.as_dense(q ** t.n) - brute_potts(t, tau, pr)).max() <= 1e-12


def test_potts_large_beta_no_underflow():
    t = build_tree(2, 2)
    tab = potts_measure(t, None, None, PottsParams(2, 35.0), SpinBoundary.mono(t, 1))
    assert tab.prob_of(2 ** 7 - 1) == pytest.approx(1.0)
    assert np.isfinite(tab.log_z)


@pytest.mark.parametrize("q", [2, 3])
def test_partition_function_spin_relabeling(q):
    t = build_tree(2, 1)
    zs = [potts_measure(t, None, None, PottsParams(q, 0.7), SpinBoundary.mono(t, k)).Z for k in range(q)]
    assert max(zs) - min(zs) <= 1e-12 * max(zs)


# random cluster ------------------------------------------------------------

def test_rc_wired_single_vertex():
    t = build_tree(2, 0)
    inst = RCInstance.from_tree(t)
    tab = rc_measure(inst, RCBoundary.wired(t.boundary_slots), 0.5, 2)
    assert tab.prob_of(3) == pytest.approx(1 / 5, abs=1e-15)
    assert tab.prob_of(0) == pytest.approx(2 / 5, abs=1e-15)
    # weights in the normalization p^|A| (1-p)^|E\A| q^c
    assert tab.Z == pytest.approx(5 / 2, rel=1e-14)


@pytest.mark.parametrize("h,p,q", [(0, 0.5, 2), (1, 0.5, 2), (1, 0.3, 3), (2, 0.7, 2)])
def test_rc_free_is_percolation(h, p, q):
    t = build_tree(2, h)
    inst = RCInstance.from_tree(t)
    tab = rc_measure(inst, RCBoundary.free(t.boundary_slots), p, q)
    r = free_rc_edge_probability(p, q)
    tv = 0.5 * np.abs(tab.as_dense(2 ** inst.m) - percolation_measure(inst.m, r)).sum()
    assert tv <= 1e-12


def test_free_edge_probability_value():
    assert free_rc_edge_probability(0.5, 2) == pytest.approx(1 / 3, abs=1e-16)


def test_rc_q1_is_bernoulli():
    t = build_tree(2, 1)
    inst = RCInstance.from_tree(t)
    tab = rc_measure(inst, RCBoundary.wired(t.boundary_slots), 0.3, 1)
    assert np.abs(tab.as_dense(2 ** inst.m) - percolation_measure(inst.m, 0.3)).max() <= 1e-14


@pytest.mark.parametrize("wiring", ["free", "wired", "pairs"])
def test_rc_matches_bruteforce(wiring):
    t = build_tree(2, 1)
    inst = RCInstance.from_tree(t)
    bd = list(t.boundary_slots)
    xi = {"free": RCBoundary.free(bd), "wired": RCBoundary.wired(bd),
          "pairs": RCBoundary.partition([bd[:2], bd[2:]])}[wiring]
    tab = rc_measure(inst, xi, 0.4, 3)
    want, Z = brute_rc(inst.num_vertices, inst.edges, [list(c) for c in xi.classes], 0.4, 3)
    assert np.abs(tab.probs - want).max() <= 1e-13
    assert tab.Z == pytest.approx(Z, rel=1e-12)


# Edwards-Sokal -------------------------------------------------------------

def test_es_zero_weight_off_support():
    t = build_tree(2, 0)
    tau = SpinBoundary.mono(t, 0)
    es = edwards_sokal_measure(t, tau, PottsParams(2, LN2))
    m = t.n_edges
    for code in es.codes:
        sigma, A = divmod(int(code), 2 ** m)
        # root spin 1 disagrees with the boundary: no edge may be open
        if sigma == 1:
            assert A == 0


def test_es_beta_zero():
    t = build_tree(2, 1)
    es = edwards_sokal_measure(t, SpinBoundary.mono(t, 0), PottsParams(2, 0.0))
    A = es.codes % 2 ** t.n_edges
    assert es.probs[A != 0].sum() == 0.0
    assert np.allclose(es.probs[A == 0], 1 / 8)


@pytest.mark.parametrize("h,q,beta", [(0, 2, LN2), (1, 2, LN2), (1, 3, 0.8)])
def test_es_marginals(h, q, beta):
    t = build_tree(2, h)
    tau = SpinBoundary.mono(t, 0)
    pr = PottsParams(q, beta)
    es = edwards_sokal_measure(t, tau, pr)
    m = t.n_edges
    spin_marg = np.bincount(es.codes // 2 ** m, weights=es.probs, minlength=q ** t.n)
    assert np.abs(spin_marg - potts_measure(t, None, None, pr, tau).probs).max() <= 1e-12
    edge_marg = np.bincount(es.codes % 2 ** m, weights=es.probs, minlength=2 ** m)
    rc = rc_measure(RCInstance.from_tree(t), RCBoundary.wired(t.boundary_slots), pr.p, q)
    assert np.abs(edge_marg - rc.probs).max() <= 1e-12


# components ----------------------------------------------------------------

def test_components_examples():
    t = build_tree(2, 0)
    inst = RCInstance.from_tree(t)
    rep = components(inst, 0)
    assert rep.c == 1 and rep.c_xi == 3
    assert components(inst, 0, RCBoundary.wired(t.boundary_slots)).c_xi == 2
    t1 = build_tree(2, 1)
    inst1 = RCInstance.from_tree(t1)
    assert components(inst1, 2 ** inst1.m - 1).c_xi == 1
    assert components(RCInstance.from_edges(3, [(0, 1), (1, 2)]), 0).c == 3


def test_components_block_and_colors():
    t = build_tree(2, 1)
    inst = RCInstance.from_tree(t)
    bits = np.zeros(inst.m, bool)
    bits[0] = True          # edge 0-1
    sigma = np.array([0, 0, 1, 0, 0, 0, 0])
    rep = components(inst, bits, block=[0, 1], sigma_full=sigma)
    assert rep.c == 2 and rep.c_block == 1
    assert rep.mono.sum() + rep.bi.sum() == inst.m
    assert not (rep.mono & rep.bi).any()
    assert rep.bi.tolist() == [False, True, False, False, True, True]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 6 - 1), st.sampled_from(["free", "wired", "pairs"]))
def test_vectorized_counts_match_union_find(code, kind):
    t = build_tree(2, 1)
    inst = RCInstance.from_tree(t)
    bd = list(t.boundary_slots)
    xi = {"free": RCBoundary.free(bd), "wired": RCBoundary.wired(bd),
          "pairs": RCBoundary.partition([[3, 6], [4, 5]])}[kind]
    rep = components(inst, code, xi, block=[0, 1])
    vec = component_counts(inst, decode_bits(np.array([code]), inst.m), xi, block=[0, 1])
    assert (rep.c_xi, rep.c, rep.c_block) == (vec["c_xi"][0], vec["c"][0], vec["c_block"][0])
    assert rep.c <= rep.c_xi + len(xi.classes)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(2, 4))
def test_free_rc_percolation_property(p, q):
    t = build_tree(2, 1)
    inst = RCInstance.from_tree(t)
    tab = rc_measure(inst, None, p, q)
    r = free_rc_edge_probability(p, q)
    assert np.abs(tab.as_dense(2 ** inst.m) - percolation_measure(inst.m, r)).max() <= 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 3), st.floats(0.0, 3.0), st.integers(0, 50))
def test_potts_probabilities_normalized(q, beta, seed):
    t = build_tree(2, 1)
    tau = SpinBoundary.random(t, q, seed)
    tab = potts_measure(t, None, None, PottsParams(q, beta), tau)
    assert abs(tab.probs.sum() - 1) <= 1e-12 and (tab.probs >= 0).all()
    assert math.isfinite(tab.log_z)
