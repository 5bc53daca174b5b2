import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import LN2, brute_potts
from swtree.dynamics import BlockSpec
from swtree.exact import (HeatBathOperator, TensorMeasure, TransitionMatrix, comparison_check,
                          conditional_functionals, conductance, dirichlet_form,
                          dirichlet_form_pairs, edge_orbit_representatives, gibbs_space,
                          glauber_matrix, heat_bath_matrix, min_conductance_set,
                          spectral_gap, spin_orbit_representatives, sw_matrix,
                          sw_matrix_enumerated, transition_matrix, tv_mixing_time,
                          ullrich_check, ullrich_factors, worst_start_mixing)
from swtree.model import PottsParams, RCBoundary, SpinBoundary
from swtree.tree import ExactInfeasibleError, build_tree


def two_state(a, b):
    P = np.array([[1 - a, a], [b, 1 - b]])
    pi = np.array([b, a]) / (a + b)
    return TransitionMatrix(P, pi, "two-state")


# transition matrices -------------------------------------------------------

def test_sw_beta_zero_rows_uniform():
    t = build_tree(2, 1)
    P = sw_matrix(t, SpinBoundary.mono(t, 0), PottsParams(3, 0.0)).dense()
    assert np.abs(P - 1 / 27).max() <= 1e-15


def test_glauber_one_free_vertex():
    t = build_tree(2, 0)
    tm = glauber_matrix(t, SpinBoundary.free(), PottsParams(2, 0.4))
    assert np.allclose(tm.dense(), 0.5)


@pytest.mark.parametrize("q,beta", [(2, LN2), (3, 1.0)])
def test_sw_stationary_is_potts(q, beta):
    t = build_tree(2, 1)
    tau = SpinBoundary.mono(t, 0)
    pr = PottsParams(q, beta)
    tm = sw_matrix(t, tau, pr)
    mu = brute_potts(t, tau, pr)
    assert np.abs(mu @ tm.dense() - mu).max() <= 1e-12
    w, V = np.linalg.eig(tm.dense().T)
    v = np.real(V[:, np.argmin(np.abs(w - 1))])
    assert np.abs(v / v.sum() - mu).max() <= 1e-12


@pytest.mark.parametrize("h,q,kind", [(1, 2, "mono"), (1, 3, "random"), (2, 2, "random"),
                                      (1, 2, "free")])
def test_sw_lattice_construction_matches_enumeration(h, q, kind):
    t = build_tree(2, h)
    tau = {"mono": SpinBoundary.mono(t, 1), "random": SpinBoundary.random(t, q, 5),
           "free": SpinBoundary.free()}[kind]
    pr = PottsParams(q, 0.8)
    assert np.abs(sw_matrix(t, tau, pr).dense() - sw_matrix_enumerated(t, tau, pr)).max() <= 1e-13
    blocks = BlockSpec.tiled(t, 1)
    assert np.abs(sw_matrix(t, tau, pr, blocks).dense()
                  - sw_matrix_enumerated(t, tau, pr, blocks)).max() <= 1e-13


def test_chain_invariants_d2_h2():
    t = build_tree(2, 2)
    pr = PottsParams(2, LN2)
    for chain in ("sw", "glauber", "block-sw", "block-hb"):
        tm = transition_matrix(chain, t, pr, ell=1)
        chk = tm.check()
        assert chk["row_sum_error"] <= 1e-12
        assert chk["stationarity_error"] <= 1e-12
        assert chk["detailed_balance_error"] <= 1e-10


@pytest.mark.parametrize("chain", ["sw", "block-sw", "block-hb"])
def test_psd_chains(chain):
    t = build_tree(2, 2)
    tm = transition_matrix(chain, t, PottsParams(2, 1.5), tau=SpinBoundary.random(t, 2, 2), ell=1)
    assert spectral_gap(tm).lambda_min >= -1e-10


def test_matrix_cap():
    t = build_tree(2, 4)
    with pytest.raises(ExactInfeasibleError):
        sw_matrix(t, SpinBoundary.mono(t, 0), PottsParams(2, 1.0))
    with pytest.raises(ValueError):
        transition_matrix("block-hb", build_tree(2, 1), PottsParams(2, 1.0))
    with pytest.raises(ValueError):
        transition_matrix("metropolis", build_tree(2, 1), PottsParams(2, 1.0))


# Ullrich factors -----------------------------------------------------------

@pytest.mark.parametrize("h,q", [(0, 2), (0, 3), (1, 2), (1, 3)])
def test_ullrich_identities(h, q):
    t = build_tree(2, h)
    blocks = BlockSpec.tiled(t, 1) if h else BlockSpec.whole(t)
    res = ullrich_check(t, SpinBoundary.mono(t, 0), PottsParams(q, LN2), blocks)
    for key in ("sw_vs_TRTstar", "swd_vs_TQTstar", "Q_idempotent", "R_eq_QRQ", "adjoint_T"):
        assert res[key] <= 1e-12, key


def test_ullrich_factor_shapes():
    t = build_tree(2, 0)
    uf = ullrich_factors(t, SpinBoundary.mono(t, 0), PottsParams(2, LN2))
    # root spin 0: both boundary edges may be open (4 subsets, each w.p. 1/4); root spin 1: none
    assert uf.T.shape == (2, 5) and uf.Tstar.shape == (5, 2)
    assert np.allclose(uf.T[0], [0.25, 0.25, 0.25, 0.25, 0.0])
    assert np.allclose(uf.T[1], [0, 0, 0, 0, 1])
    assert np.allclose(uf.Tstar.sum(axis=1), 1)


# spectra and Dirichlet forms -----------------------------------------------

def test_two_state_gaps():
    assert spectral_gap(two_state(0.5, 0.5)).gap == pytest.approx(1.0, abs=1e-15)
    assert spectral_gap(two_state(0.25, 0.25)).gap == pytest.approx(0.5, abs=1e-15)
    r = spectral_gap(two_state(0.9, 0.9))
    assert r.lambda_min == pytest.approx(-0.8) and r.gap == pytest.approx(0.2)


def test_product_chain_gap():
    base = two_state(0.2, 0.35)
    g = spectral_gap(base).gap
    prod = TransitionMatrix(np.kron(base.dense(), base.dense()), np.kron(base.pi, base.pi))
    assert spectral_gap(prod).gap == pytest.approx(g, abs=1e-12)


def test_non_reversible_rejected():
    P = 0.5 * np.eye(3) + 0.5 * np.roll(np.eye(3), 1, axis=1)
    P[0] = [0.5, 0.4, 0.1]
    P[0] /= P[0].sum()
    w, V = np.linalg.eig(P.T)
    pi = np.real(V[:, np.argmin(np.abs(w - 1))])
    with pytest.raises(ValueError, match="not reversible"):
        spectral_gap(TransitionMatrix(P, pi / pi.sum()))


def test_lanczos_path_on_product_measure():
    # single-site heat bath on a product measure over 13 binary sites: gap = 1/13
    rng = np.random.default_rng(0)
    marg = rng.uniform(0.2, 0.8, 13)
    pi = np.ones(1)
    for a in marg:
        pi = np.kron(np.array([1 - a, a]), pi)
    meas = TensorMeasure(pi, 2, 13)
    op = HeatBathOperator(meas, [[i] for i in range(13)])
    tm = TransitionMatrix(op, meas.pi, "product-hb", psd=True)
    rep = spectral_gap(tm)
    assert rep.method == "lanczos"
    assert rep.gap == pytest.approx(1 / 13, abs=1e-9)


def test_dirichlet_examples():
    tm = two_state(0.5, 0.5)
    assert dirichlet_form(tm, np.ones(2)) == pytest.approx(0.0, abs=1e-16)
    assert dirichlet_form(tm, np.array([0.0, 1.0])) == pytest.approx(0.25, abs=1e-16)


def test_dirichlet_forms_agree_and_variational_principle():
    t = build_tree(2, 1)
    tm = sw_matrix(t, SpinBoundary.mono(t, 0), PottsParams(2, LN2))
    rng = np.random.default_rng(3)
    F = rng.standard_normal((1000, tm.n))
    e1 = dirichlet_form(tm, F)
    e2 = dirichlet_form_pairs(tm.dense(), tm.pi, F)
    assert np.abs(e1 - e2).max() <= 1e-12
    var = ((F - (F @ tm.pi)[:, None]) ** 2) @ tm.pi
    rep = spectral_gap(tm)
    one_minus_l2 = 1 - rep.lambda2
    assert (e1 / var >= one_minus_l2 - 1e-12).all()
    assert rep.variational_gap == pytest.approx(one_minus_l2, abs=1e-10)


# conditional functionals ---------------------------------------------------

def test_conditional_functionals_examples():
    t = build_tree(2, 1)
    sp = gibbs_space(t, SpinBoundary.mono(t, 0), PottsParams(2, LN2))
    rng = np.random.default_rng(1)
    f = rng.standard_normal(sp.size)
    full = conditional_functionals(sp, f, range(3))
    assert np.allclose(full["Var"], sp.var(f), atol=1e-14)
    # f depends on vertex 0 only: its variance over {1, 2} given vertex 0 vanishes
    g = np.array([(c % 2) * 3.0 for c in range(sp.size)])
    assert np.abs(conditional_functionals(sp, g, [1, 2])["Var"]).max() <= 1e-14
    with pytest.raises(ValueError):
        sp.cond_ent(-np.ones(sp.size), [0])


def test_total_variance_and_entropy_laws():
    t = build_tree(2, 1)
    sp = gibbs_space(t, SpinBoundary.mono(t, 0), PottsParams(2, LN2))
    rng = np.random.default_rng(2)
    F = rng.standard_normal((100, sp.size))
    G = rng.exponential(size=(100, sp.size))
    for A in ([0], [1, 2], [0, 2]):
        lhs = sp.var(F)
        rhs = sp.expect(sp.cond_var(F, A)) + sp.var(sp.cond_expect(F, A))
        assert np.abs(lhs - rhs).max() <= 1e-12
        lhs = sp.ent(G)
        rhs = sp.expect(sp.cond_ent(G, A)) + sp.ent(sp.cond_expect(G, A))
        assert np.abs(lhs - rhs).max() <= 1e-12


def test_conditional_expectation_against_direct_sum():
    t = build_tree(2, 1)
    sp = gibbs_space(t, SpinBoundary.mono(t, 0), PottsParams(3, 0.6))
    f = np.arange(sp.size, dtype=float) ** 1.5
    got = sp.cond_expect(f, [1])
    for code in range(sp.size):
        digits = [(code // 3 ** v) % 3 for v in range(3)]
        fiber = [digits[0] + 3 * s + 9 * digits[2] for s in range(3)]
        w = sp.pi[fiber]
        assert got[code] == pytest.approx((w @ f[fiber]) / w.sum(), rel=1e-13)


# mixing times and conductance ----------------------------------------------

def test_mixing_time_examples():
    pi = np.array([0.2, 0.3, 0.5])
    assert tv_mixing_time(TransitionMatrix(np.tile(pi, (3, 1)), pi)).t_mix == 1
    rep = tv_mixing_time(TransitionMatrix(np.eye(3), pi), t_max=50)
    assert rep.divergent
    t = build_tree(2, 1)
    sw0 = sw_matrix(t, SpinBoundary.mono(t, 0), PottsParams(2, 0.0))
    assert tv_mixing_time(sw0).t_mix == 1


def test_mixing_time_bracket():
    t = build_tree(2, 2)
    rep = worst_start_mixing("sw", t, PottsParams(2, LN2))
    assert rep.t_mix == 3 and rep.bracket_ok


def test_orbit_representatives_give_worst_start():
    t = build_tree(2, 2)
    tau = SpinBoundary.from_list(t, [0, 1, 1, 1, 0, 0, 1, 0])
    pr = PottsParams(2, 1.2)
    tm = sw_matrix(t, tau, pr)
    reps = spin_orbit_representatives(t, tau, 2)
    assert reps["orbit_sizes"].sum() == 128
    full = tv_mixing_time(tm)
    red = tv_mixing_time(tm, reps["representatives"])
    assert full.t_mix == red.t_mix
    assert np.allclose(full.tv, red.tv, atol=1e-15)


def test_edge_orbits_wired():
    t = build_tree(2, 1)
    xi = RCBoundary.wired(t.boundary_slots)
    tm = transition_matrix("rc-edge", t, PottsParams(2, LN2), xi=xi)
    reps = edge_orbit_representatives(t, xi)
    assert reps["orbit_sizes"].sum() == 64
    assert np.allclose(tv_mixing_time(tm).tv, tv_mixing_time(tm, reps["representatives"]).tv, atol=1e-15)


def test_conductance_examples():
    tm = two_state(0.3, 0.3)
    assert conductance(tm, np.array([1])) == pytest.approx(0.3, abs=1e-15)
    assert conductance(tm, np.array([0, 1])) == 0.0
    with pytest.raises(ValueError):
        conductance(TransitionMatrix(np.eye(2), np.array([1.0, 0.0])), np.array([1]))


def test_cheeger_on_small_chains():
    t = build_tree(2, 1)
    for beta in (0.3, LN2, 2.0):
        tm = sw_matrix(t, SpinBoundary.mono(t, 0), PottsParams(2, beta))
        best = min_conductance_set(tm)
        gap = 1 - spectral_gap(tm).lambda2
        assert gap <= 2 * best["phi"] + 1e-12
        assert best["phi"] ** 2 / 2 <= gap + 1e-12


def test_comparison_check_small():
    t = build_tree(2, 1)
    rep = comparison_check(t, SpinBoundary.mono(t, 0), PottsParams(2, LN2), BlockSpec.tiled(t, 1),
                           n_functions=200)
    assert rep.min_slack_sw_swd >= -1e-12 and rep.min_slack_swd_bd >= -1e-12
    assert rep.gap_inequality_ok and rep.piece_lower_bound_ok
    assert rep.piece_equality_error <= 1e-10


# properties ----------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_two_state_gap_formula(a, b):
    rep = spectral_gap(two_state(a, b))
    assert rep.gap == pytest.approx(1 - abs(1 - a - b), abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 3), st.floats(0.0, 2.5), st.integers(0, 100))
def test_sw_matrix_stationary_property(q, beta, seed):
    t = build_tree(2, 1)
    tau = SpinBoundary.random(t, q, seed)
    tm = sw_matrix(t, tau, PottsParams(q, beta))
    chk = tm.check()
    assert chk["row_sum_error"] <= 1e-12 and chk["stationarity_error"] <= 1e-12
    assert chk["detailed_balance_error"] <= 1e-10
    assert spectral_gap(tm).lambda_min >= -1e-10


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.05, 1.0), min_size=4, max_size=4), st.integers(1, 15))
def test_conductance_matches_brute_force(weights, mask):
    rng = np.random.default_rng(len(weights))
    W = rng.uniform(0.1, 1.0, (4, 4))
    W = W + W.T
    pi = np.asarray(weights) / sum(weights)
    # Metropolis chain reversible for pi
    P = np.zeros((4, 4))
    for x, y in itertools.permutations(range(4), 2):
        P[x, y] = 0.25 * min(1, pi[y] / pi[x])
    P[np.arange(4), np.arange(4)] = 1 - P.sum(axis=1)
    S = np.array([(mask >> i) & 1 for i in range(4)], bool)
    tm = TransitionMatrix(P, pi)
    want = sum(pi[x] * P[x, y] for x in range(4) for y in range(4) if S[x] and not S[y]) / pi[S].sum()
    assert conductance(tm, S) == pytest.approx(want, abs=1e-14)
