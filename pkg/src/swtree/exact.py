"""Exact transition kernels, spectra, functionals, mixing times and conductance.

Spin kernels live on the enumerated space Ω^τ of internal configurations
(base-q codes); random-cluster kernels live on edge bitsets.  Both spaces are
products of small alphabets, so measures are handled as numpy tensors where
the axis of site ``j`` is ``n_sites - 1 - j`` (little-endian codes in C order).

The SW kernel is assembled from the identity

    SW(σ, σ') = D(σ) · g(M(σ) ∩ M(σ')),    D(σ) = Π_{e ∈ M(σ)} (1 - p_e),

where g is the subset-sum transform of h(A) = Π_{e∈A} p_e/(1-p_e) · q^{-c(A)}
and c(A) counts the components that avoid the boundary.  Leaf-to-boundary
edges of the same leaf and boundary spin are merged into one effective edge
(only whether a leaf reaches the boundary matters), which keeps the table at
2^K entries with K = (n-1) + #(leaf, boundary-spin) pairs.  A direct
enumeration over edge subsets and recolourings is kept as an oracle.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .dynamics import BlockSpec
from .model import (PottsParams, RCBoundary, RCInstance, SpinBoundary, all_spin_configs,
                    check_cap, component_counts, decode_bits, encode_bits,
                    log_bernoulli_weight, monochromatic_mask, potts_measure, rc_measure)
from .tree import ExactInfeasibleError, TreeTopology

MATRIX_CAP = 2 ** 16          # largest state space handled by the exact engine
DENSE_CAP = 4096              # largest state space stored as a dense matrix
ROW_TOL = 1e-12
BALANCE_TOL = 1e-10


# ---------------------------------------------------------------------------
# product-space measures and conditional functionals
# ---------------------------------------------------------------------------

class TensorMeasure:
    """Strictly positive measure on a product space {0..b-1}^n_sites."""

    def __init__(self, pi: np.ndarray, base: int, n_sites: int, labels: dict | None = None):
        pi = np.asarray(pi, dtype=np.float64)
        if pi.size != base ** n_sites:
            raise ValueError("measure size does not match base**n_sites")
        if (pi <= 0).any():
            raise ValueError("TensorMeasure needs a strictly positive measure")
        self.pi = pi / pi.sum()
        self.base = base
        self.n_sites = n_sites
        self.shape = (base,) * n_sites
        self.tensor = self.pi.reshape(self.shape)
        self.labels = labels or {}

    @property
    def size(self) -> int:
        return self.pi.size

    def axes(self, sites: Iterable[int]) -> tuple[int, ...]:
        return tuple(sorted(self.n_sites - 1 - int(s) for s in sites))

    def _lift(self, f: np.ndarray):
        f = np.asarray(f, dtype=np.float64)
        lead = f.shape[:-1]
        return f.reshape(lead + self.shape), lead

    def expect(self, f: np.ndarray) -> np.ndarray:
        return np.asarray(f) @ self.pi

    def var(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=np.float64)
        m = self.expect(f)
        return (f - m[..., None]) ** 2 @ self.pi

    def ent(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=np.float64)
        if (f < 0).any():
            raise ValueError("entropy needs a nonnegative function")
        m = self.expect(f)
        return _ent_terms(f, np.broadcast_to(m[..., None], f.shape)) @ self.pi

    def cond_expect(self, f: np.ndarray, sites: Iterable[int]) -> np.ndarray:
        """E_A(f): average over the sites in A given everything else."""
        sites = list(sites)
        if not sites:
            return np.asarray(f, dtype=np.float64).copy()
        ft, lead = self._lift(f)
        ax = tuple(len(lead) + a for a in self.axes(sites))
        num = (ft * self.tensor).sum(axis=ax, keepdims=True)
        den = self.tensor.sum(axis=self.axes(sites), keepdims=True)
        out = np.broadcast_to(num / den, ft.shape)
        return out.reshape(lead + (self.size,))

    def cond_var(self, f: np.ndarray, sites: Iterable[int]) -> np.ndarray:
        sites = list(sites)
        f = np.asarray(f, dtype=np.float64)
        m = self.cond_expect(f, sites)
        return self.cond_expect((f - m) ** 2, sites)

    def cond_ent(self, f: np.ndarray, sites: Iterable[int]) -> np.ndarray:
        f = np.asarray(f, dtype=np.float64)
        if (f < 0).any():
            raise ValueError("entropy needs a nonnegative function")
        sites = list(sites)
        m = self.cond_expect(f, sites)
        return self.cond_expect(_ent_terms(f, m), sites)


def _ent_terms(f: np.ndarray, m: np.ndarray) -> np.ndarray:
    """f log(f/m) - f + m: nonnegative pointwise, and its mean is Ent(f) when m = E f."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(f > 0, f * np.log(np.where(f > 0, f, 1.0) / np.where(m > 0, m, 1.0)), 0.0)
    return np.maximum(t - f + m, 0.0)


def _xlogx(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def conditional_functionals(measure: TensorMeasure, f: np.ndarray, subset: Iterable[int]) -> dict:
    """E_A(f), Var_A(f) and (for nonnegative f) Ent_A(f) as functions on the space."""
    subset = list(subset)
    out = {"E": measure.cond_expect(f, subset), "Var": measure.cond_var(f, subset)}
    if (np.asarray(f) >= 0).all():
        out["Ent"] = measure.cond_ent(f, subset)
    return out


def gibbs_space(tree: TreeTopology, tau: SpinBoundary, params: PottsParams,
                cap: int = 2 ** 24) -> TensorMeasure:
    """The Potts measure on Ω^τ as a TensorMeasure over the internal vertices."""
    table = potts_measure(tree, None, None, params, tau, cap=cap)
    pi = np.empty(params.q ** tree.n)
    pi[table.codes] = table.probs
    return TensorMeasure(pi, params.q, tree.n, {"kind": "potts"})


def rc_space(instance: RCInstance, xi: RCBoundary | None, p: float, q: float) -> TensorMeasure:
    table = rc_measure(instance, xi, p, q)
    pi = np.empty(2 ** instance.m)
    pi[table.codes] = table.probs
    return TensorMeasure(pi, 2, instance.m, {"kind": "rc"})


# ---------------------------------------------------------------------------
# transition matrices
# ---------------------------------------------------------------------------

class HeatBathOperator:
    """P = Σ_k w_k E_{D_k}: weighted heat-bath updates of site blocks."""

    def __init__(self, measure: TensorMeasure, blocks: Sequence[Sequence[int]],
                 weights: Sequence[float] | None = None):
        self.measure = measure
        self.blocks = [list(b) for b in blocks]
        w = np.full(len(self.blocks), 1.0 / len(self.blocks)) if weights is None else np.asarray(weights, float)
        if abs(w.sum() - 1) > 1e-12 or (w < 0).any():
            raise ValueError("block weights must be a probability vector")
        self.weights = w

    @property
    def n(self) -> int:
        return self.measure.size

    def apply(self, f: np.ndarray) -> np.ndarray:
        out = np.zeros(np.shape(f), dtype=np.float64)
        for w, b in zip(self.weights, self.blocks):
            out += w * self.measure.cond_expect(f, b)
        return out

    def apply_left(self, D: np.ndarray) -> np.ndarray:
        pi = self.measure.pi
        return pi * self.apply(np.asarray(D) / pi)

    def dense(self) -> np.ndarray:
        return self.apply(np.eye(self.n)).T


class RowBlockKernel:
    """Kernel whose rows are generated on demand by ``rows(start, stop)``."""

    def __init__(self, n: int, rows: Callable[[int, int], np.ndarray], block: int = 1024):
        self.n = n
        self.rows = rows
        self.block = block

    def apply_left(self, D: np.ndarray) -> np.ndarray:
        D = np.atleast_2d(D)
        out = np.zeros((D.shape[0], self.n))
        for s in range(0, self.n, self.block):
            e = min(s + self.block, self.n)
            out += D[:, s:e] @ self.rows(s, e)
        return out

    def apply(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=np.float64)
        out = np.empty(f.shape[:-1] + (self.n,))
        for s in range(0, self.n, self.block):
            e = min(s + self.block, self.n)
            out[..., s:e] = np.einsum("ij,...j->...i", self.rows(s, e), f)
        return out

    def dense(self) -> np.ndarray:
        check_cap(self.n, DENSE_CAP, "dense kernel")
        return self.rows(0, self.n)


class TransitionMatrix:
    """Row-stochastic kernel on an enumerated space, with its stationary measure.

    ``P`` is a dense array, a scipy sparse matrix, or an operator exposing
    ``apply``/``apply_left`` (HeatBathOperator, RowBlockKernel).
    """

    def __init__(self, P, pi: np.ndarray, name: str = "", reversible: bool = True,
                 psd: bool = False, encoding: dict | None = None):
        self.P = P
        self.pi = np.asarray(pi, dtype=np.float64)
        self.name = name
        self.reversible = reversible
        self.psd = psd
        self.encoding = encoding or {}

    @property
    def n(self) -> int:
        return self.pi.size

    @property
    def is_dense(self) -> bool:
        return isinstance(self.P, np.ndarray)

    def dense(self) -> np.ndarray:
        if isinstance(self.P, np.ndarray):
            return self.P
        check_cap(self.n, DENSE_CAP, f"dense form of {self.name}")
        if scipy.sparse.issparse(self.P):
            return self.P.toarray()
        return self.P.dense()

    def apply_left(self, D: np.ndarray) -> np.ndarray:
        if isinstance(self.P, np.ndarray) or scipy.sparse.issparse(self.P):
            D = np.atleast_2d(D)
            return np.asarray((self.P.T @ D.T).T)
        return self.P.apply_left(D)

    def apply(self, f: np.ndarray) -> np.ndarray:
        if isinstance(self.P, np.ndarray):
            return np.asarray(f) @ self.P.T
        if scipy.sparse.issparse(self.P):
            f = np.asarray(f)
            return np.asarray((self.P @ f.T).T)
        return self.P.apply(f)

    def check(self) -> dict:
        """Row sums, stationarity and detailed balance residuals."""
        ones = np.ones(self.n)
        row_err = float(np.abs(self.apply(ones) - 1).max())
        stat_err = float(np.abs(self.apply_left(self.pi)[0] - self.pi).max())
        out = {"row_sum_error": row_err, "stationarity_error": stat_err}
        if self.n <= DENSE_CAP:
            P = self.dense()
            flux = self.pi[:, None] * P
            out["detailed_balance_error"] = float(np.abs(flux - flux.T).max())
            out["min_entry"] = float(P.min())
        elif scipy.sparse.issparse(self.P):
            flux = scipy.sparse.diags(self.pi) @ self.P
            out["detailed_balance_error"] = float(abs(flux - flux.T).max())
            out["min_entry"] = float(min(self.P.min(), 0.0))
        return out


def _sw_effective_edges(tree: TreeTopology, tau: SpinBoundary, p: float):
    """Internal edges plus merged (leaf, boundary-spin) edges with their probabilities."""
    n = tree.n
    probs = [p] * (n - 1)
    supers = []   # (leaf, spin)
    if not tau.is_free:
        tau_arr = tau.array()
        for leaf in tree.leaves:
            kids = tau_arr[np.array(tree.children(leaf)) - n]
            for s in sorted(set(kids.tolist())):
                k = int((kids == s).sum())
                supers.append((leaf, s))
                probs.append(1.0 - (1.0 - p) ** k)
    return np.array(probs), supers


def _free_component_counts(tree: TreeTopology, supers, K: int, block_mask: np.ndarray | None,
                           chunk: int = 1 << 20) -> np.ndarray:
    """c(A) for every effective-edge subset A in [0, 2^K): components that avoid
    the boundary (and, with a block, stay inside it)."""
    n, d, h = tree.n, tree.d, tree.h
    out = np.empty(2 ** K, dtype=np.int16)
    super_bits: dict = {}
    for j, (leaf, _) in enumerate(supers):
        super_bits.setdefault(leaf, []).append(n - 1 + j)
    for start in range(0, 2 ** K, chunk):
        A = np.arange(start, min(start + chunk, 2 ** K), dtype=np.int64)

        def bit(e):
            return ((A >> e) & 1).astype(bool)

        bad = [np.zeros(A.size, dtype=bool) for _ in range(n)]
        for v in range(n):
            if block_mask is not None and not block_mask[v]:
                bad[v] = np.ones(A.size, dtype=bool)
            for e in super_bits.get(v, []):
                bad[v] |= bit(e)
        for v in range(n - 1, -1, -1):
            for c in tree.children(v):
                if c < n:
                    bad[v] |= bit(c - 1) & bad[c]
        count = (~bad[0]).astype(np.int16)
        for v in range(1, n):
            count += (~bit(v - 1) & ~bad[v]).astype(np.int16)
        out[start:start + A.size] = count
    return out


def _subset_sum(g: np.ndarray, K: int) -> np.ndarray:
    """Zeta transform: g(S) <- Σ_{A ⊆ S} g(A), in place."""
    for i in range(K):
        v = g.reshape(-1, 2, 2 ** i)
        v[:, 1, :] += v[:, 0, :]
    return g


@dataclass
class SWTables:
    """Ingredients of the SW kernel identity for one (tree, τ, params, block)."""

    masks: np.ndarray     # effective monochromatic mask per configuration
    logD: np.ndarray      # log Π_{e∈M(σ)} (1-p_e)
    g: np.ndarray         # subset sums of h
    K: int

    def rows(self, start: int, stop: int, same_outside: np.ndarray | None = None) -> np.ndarray:
        m = self.masks
        blk = np.exp(self.logD[start:stop])[:, None] * self.g[m[start:stop, None] & m[None, :]]
        if same_outside is not None:
            blk *= same_outside[start:stop, None] == same_outside[None, :]
        return blk


def sw_tables(tree: TreeTopology, tau: SpinBoundary, params: PottsParams,
              block: Iterable[int] | None = None, configs: np.ndarray | None = None) -> SWTables:
    q, p = params.q, params.p
    tau.validate(tree, q)
    probs, supers = _sw_effective_edges(tree, tau, p)
    K = probs.size
    check_cap(2 ** K, 2 ** 24, "SW subset table")
    block_mask = None
    if block is not None:
        block_mask = np.zeros(tree.n, dtype=bool)
        block_mask[list(block)] = True
    c = _free_component_counts(tree, supers, K, block_mask)
    with np.errstate(divide="ignore"):
        logw = np.log(probs) - np.log1p(-probs)
    A = np.arange(2 ** K, dtype=np.int64)
    logh = -c.astype(np.float64) * math.log(q)
    for e in range(K):
        has = ((A >> e) & 1).astype(bool)
        if probs[e] == 0:
            logh[has] = -np.inf
        else:
            logh[has] += logw[e]
    g = _subset_sum(np.exp(logh), K)
    sig = all_spin_configs(tree.n, q) if configs is None else configs
    masks = np.zeros(sig.shape[0], dtype=np.int64)
    par = tree.parent_array[1:tree.n]
    mono_int = sig[:, par] == sig[:, 1:]
    for e in range(tree.n - 1):
        masks |= mono_int[:, e].astype(np.int64) << e
    logD = mono_int.sum(axis=1) * math.log1p(-p)
    for j, (leaf, s) in enumerate(supers):
        on = sig[:, leaf] == s
        masks |= on.astype(np.int64) << (tree.n - 1 + j)
        logD = logD + np.where(on, math.log1p(-probs[tree.n - 1 + j]), 0.0)
    return SWTables(masks, logD, g, K)


def _outside_codes(tree: TreeTopology, q: int, block: Iterable[int]) -> np.ndarray:
    """Code of each configuration with the digits of ``block`` zeroed."""
    codes = np.arange(q ** tree.n, dtype=np.int64)
    out = codes.copy()
    for v in block:
        out -= ((codes // q ** v) % q) * q ** v
    return out


def sw_matrix(tree: TreeTopology, tau: SpinBoundary, params: PottsParams,
              blocks: BlockSpec | None = None, cap: int = MATRIX_CAP) -> TransitionMatrix:
    """Exact SW kernel (or block-SW kernel SW_D when ``blocks`` is given)."""
    N = params.q ** tree.n
    check_cap(N, cap, "SW state space")
    space = gibbs_space(tree, tau, params)
    if blocks is None:
        tab = sw_tables(tree, tau, params)
        if N <= DENSE_CAP:
            P = tab.rows(0, N)
        else:
            P = RowBlockKernel(N, tab.rows, block=max(1, min(1024, 2 ** 25 // N)))
        return TransitionMatrix(P, space.pi, "sw", psd=True, encoding=_spin_encoding(tree, params, tau))
    check_cap(N, DENSE_CAP, "block SW state space")
    P = np.zeros((N, N))
    for b in blocks.blocks:
        tab = sw_tables(tree, tau, params, block=b)
        P += tab.rows(0, N, same_outside=_outside_codes(tree, params.q, b))
    P /= blocks.m
    return TransitionMatrix(P, space.pi, "block-sw", psd=True, encoding=_spin_encoding(tree, params, tau))


def sw_block_component(tree: TreeTopology, tau: SpinBoundary, params: PottsParams,
                       block: Iterable[int]) -> np.ndarray:
    """Dense SW_k: the block-SW move that always uses block D_k."""
    N = params.q ** tree.n
    check_cap(N, DENSE_CAP, "block SW state space")
    tab = sw_tables(tree, tau, params, block=block)
    return tab.rows(0, N, same_outside=_outside_codes(tree, params.q, block))


def sw_matrix_enumerated(tree: TreeTopology, tau: SpinBoundary, params: PottsParams,
                         blocks: BlockSpec | None = None, cap: int = 4096) -> np.ndarray:
    """Oracle: enumerate every percolation outcome and every recolouring.

    For each σ, each A ⊆ M(σ) (over all edges of E(T ∪ ∂T)) and each block,
    the components avoiding ∂T (and staying inside the block) are recoloured
    in all q^c ways.  Tiny instances only.
    """
    q, p = params.q, params.p
    N = q ** tree.n
    check_cap(N, cap, "enumerated SW state space")
    inst = RCInstance.from_tree(tree)
    sig = all_spin_configs(tree.n, q)
    mono = monochromatic_mask(tree, sig, tau)
    blist = [frozenset(tree.vertices)] if blocks is None else list(blocks.blocks)
    P = np.zeros((N, N))
    pow_q = q ** np.arange(tree.n)
    for x in range(N):
        M = np.nonzero(mono[x])[0]
        subsets = decode_bits(np.arange(2 ** M.size), M.size)
        full = np.zeros((subsets.shape[0], inst.m), dtype=bool)
        full[:, M] = subsets
        k = subsets.sum(axis=1)
        prob = p ** k * (1 - p) ** (M.size - k)
        for b in blist:
            cc = component_counts(inst, full, None, block=b)
            labels = cc["labels"]
            for a in range(full.shape[0]):
                lab = labels[a]
                frozen_labels = set(lab[tree.n:].tolist()) | {lab[v] for v in range(tree.n) if v not in b}
                free = sorted({int(lab[v]) for v in range(tree.n)} - frozen_labels)
                for colors in itertools.product(range(q), repeat=len(free)):
                    new = sig[x].astype(np.int64).copy()
                    cmap = dict(zip(free, colors))
                    for v in range(tree.n):
                        if lab[v] in cmap:
                            new[v] = cmap[lab[v]]
                    P[x, int(new @ pow_q)] += prob[a] * q ** (-len(free)) / len(blist)
    return P


def heat_bath_matrix(tree: TreeTopology, tau: SpinBoundary, params: PottsParams,
                     blocks: BlockSpec, cap: int = MATRIX_CAP) -> TransitionMatrix:
    """Heat-bath block dynamics: pick D_k uniformly, resample it from μ_{D_k}^σ."""
    N = params.q ** tree.n
    check_cap(N, cap, "heat-bath state space")
    space = gibbs_space(tree, tau, params)
    op = HeatBathOperator(space, [sorted(b) for b in blocks.blocks])
    P = op.dense() if N <= DENSE_CAP else op
    return TransitionMatrix(P, space.pi, "block-hb", psd=True, encoding=_spin_encoding(tree, params, tau))


def glauber_matrix(tree: TreeTopology, tau: SpinBoundary, params: PottsParams) -> TransitionMatrix:
    tm = heat_bath_matrix(tree, tau, params, BlockSpec.singletons(tree))
    tm.name = "glauber"
    return tm


def _spin_encoding(tree, params, tau) -> dict:
    return {"space": "spins", "order": "base-q little-endian over breadth-first vertices",
            "d": tree.d, "h": tree.h, "q": params.q, "beta": params.beta, "boundary": tau.to_json()}


# random-cluster kernels ------------------------------------------------------

def _rc_encoding(instance, xi, p, q) -> dict:
    return {"space": "edges", "order": "bitset over edge order", "m": instance.m,
            "p": p, "q": q, "boundary": None if xi is None else xi.to_json()}


def rc_edge_hb_matrix(instance: RCInstance, xi: RCBoundary | None, p: float, q: float,
                      cap: int = MATRIX_CAP) -> TransitionMatrix:
    """Edge heat-bath kernel assembled from the cut-edge inclusion rule."""
    m = instance.m
    N = 2 ** m
    check_cap(N, cap, "random-cluster state space")
    pi = rc_space(instance, xi, p, q).pi
    codes = np.arange(N, dtype=np.int64)
    c = component_counts(instance, decode_bits(codes, m), xi)["c_xi"]
    p_cut = p / (q * (1 - p) + p)
    rows, cols, vals = [], [], []
    stay = np.zeros(N)
    for e in range(m):
        without = codes & ~np.int64(1 << e)
        with_ = codes | np.int64(1 << e)
        cut = c[without] != c[with_]
        inc = np.where(cut, p_cut, p) / m
        exc = (1.0 / m) - inc
        has = ((codes >> e) & 1).astype(bool)
        # move to A ∪ {e}
        rows.append(codes[~has]); cols.append(with_[~has]); vals.append(inc[~has])
        rows.append(codes[has]); cols.append(without[has]); vals.append(exc[has])
        stay += np.where(has, inc, exc)
    rows.append(codes); cols.append(codes); vals.append(stay)
    P = scipy.sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                shape=(N, N))
    if N <= DENSE_CAP:
        P = P.toarray()
    return TransitionMatrix(P, pi, "rc-edge", psd=True, encoding=_rc_encoding(instance, xi, p, q))


def rc_edge_hb_operator(instance: RCInstance, xi: RCBoundary | None, p: float, q: float) -> TransitionMatrix:
    """Same chain as rc_edge_hb_matrix, built from conditional tables."""
    space = rc_space(instance, xi, p, q)
    op = HeatBathOperator(space, [[e] for e in range(instance.m)])
    P = op.dense() if space.size <= DENSE_CAP else op
    return TransitionMatrix(P, space.pi, "rc-edge", psd=True, encoding=_rc_encoding(instance, xi, p, q))


def _merged_spin_configs(instance: RCInstance, xi: RCBoundary | None, q: int) -> np.ndarray:
    """All spin assignments to V that are constant on each wiring class."""
    V = instance.num_vertices
    rep = np.arange(V)
    if xi is not None:
        for cls in xi.classes:
            rep[list(cls)] = cls[0]
    nodes = sorted(set(rep.tolist()))
    check_cap(q ** len(nodes), 2 ** 20, "merged spin assignments")
    idx = {v: i for i, v in enumerate(nodes)}
    cfg = all_spin_configs(len(nodes), q)
    return cfg[:, [idx[rep[v]] for v in range(V)]]


def rc_sw_matrix(instance: RCInstance, xi: RCBoundary, p: float, q: int,
                 cap: int = DENSE_CAP) -> TransitionMatrix:
    """RC-SW kernel: P(A,B) = q^{-c(A)} (p/(1-p))^{|B|} Σ_{σ: A∪B ⊆ M(σ)} (1-p)^{|M(σ)|}."""
    if not xi.is_wired:
        raise ValueError("the RC-SW chain is defined for the wired boundary")
    m = instance.m
    N = 2 ** m
    check_cap(N, cap, "RC-SW state space")
    pi = rc_space(instance, xi, p, q).pi
    codes = np.arange(N, dtype=np.int64)
    c = component_counts(instance, decode_bits(codes, m), xi)["c_xi"]
    spins = _merged_spin_configs(instance, xi, q)
    ea = instance.edge_array
    mono = spins[:, ea[:, 0]] == spins[:, ea[:, 1]]
    psi = np.zeros(N)
    np.add.at(psi, encode_bits(mono), (1 - p) ** mono.sum(axis=1))
    # superset sums: phi(S) = Σ_{M ⊇ S} psi(M)
    phi = psi.copy()
    for i in range(m):
        v = phi.reshape(-1, 2, 2 ** i)
        v[:, 0, :] += v[:, 1, :]
    k = decode_bits(codes, m).sum(axis=1)
    w = (p / (1 - p)) ** k
    P = (float(q) ** -c.astype(np.float64))[:, None] * w[None, :] * phi[codes[:, None] | codes[None, :]]
    return TransitionMatrix(P, pi, "rc-sw", psd=True, encoding=_rc_encoding(instance, xi, p, q))


def single_bond_matrix(instance: RCInstance, xi: RCBoundary | None, p: float, q: int,
                       cap: int = DENSE_CAP) -> TransitionMatrix:
    """Single-bond chain: a random edge is refreshed w.p. p if its endpoints share a spin."""
    m = instance.m
    N = 2 ** m
    check_cap(N, cap, "single-bond state space")
    pi = rc_space(instance, xi, p, q).pi
    codes = np.arange(N, dtype=np.int64)
    c = component_counts(instance, decode_bits(codes, m), xi)["c_xi"]
    P = np.zeros((N, N))
    for e in range(m):
        bit = np.int64(1 << e)
        has = ((codes >> e) & 1).astype(bool)
        without = codes & ~bit
        connected = has | (c[without] == c[codes | bit])   # endpoints share a component of A
        mono = np.where(connected, 1.0, 1.0 / q)
        on, off = mono * p, mono * (1 - p)
        P[codes, codes | bit] += on / m
        P[codes, without] += off / m
        P[codes, codes] += (1 - mono) / m
    return TransitionMatrix(P, pi, "single-bond", psd=False, encoding=_rc_encoding(instance, xi, p, q))


# ---------------------------------------------------------------------------
# Ullrich factorization
# ---------------------------------------------------------------------------

@dataclass
class UllrichFactors:
    T: np.ndarray
    Tstar: np.ndarray
    R: np.ndarray
    Q: list
    mu: np.ndarray
    nu: np.ndarray
    joint_codes: np.ndarray      # (σ code, A bits) per joint state
    checks: dict = field(default_factory=dict)


def ullrich_factors(tree: TreeTopology, tau: SpinBoundary, params: PottsParams,
                    blocks: BlockSpec | None = None, cap: int = 8192) -> UllrichFactors:
    """T, T*, R and Q_k over the Edwards-Sokal joint space, from their definitions."""
    q, p = params.q, params.p
    N = q ** tree.n
    inst = RCInstance.from_tree(tree)
    m = inst.m if not tau.is_free else tree.n_internal_edges
    sig = all_spin_configs(tree.n, q)
    mono = monochromatic_mask(tree, sig, tau)[:, :m]
    mono_codes = encode_bits(mono)
    pairs = []
    for x in range(N):
        Ms = int(mono_codes[x])
        sub = Ms
        while True:                       # all submasks of M(σ)
            pairs.append((x, sub))
            if sub == 0:
                break
            sub = (sub - 1) & Ms
    pairs = np.array(sorted(pairs), dtype=np.int64)
    J = pairs.shape[0]
    check_cap(J, cap, "Edwards-Sokal joint space")
    xs, As = pairs[:, 0], pairs[:, 1]
    bits = decode_bits(As, m)
    k = bits.sum(axis=1)
    sub_inst = RCInstance(inst.num_vertices, inst.edges[:m], inst.boundary)
    blist = [frozenset(tree.vertices)] if blocks is None else list(blocks.blocks)
    T = np.zeros((N, J))
    Mcount = mono.sum(axis=1)
    T[xs, np.arange(J)] = p ** k * (1 - p) ** (Mcount[xs] - k)
    Tstar = np.zeros((J, N))
    Tstar[np.arange(J), xs] = 1.0
    ok = (As[:, None] & ~mono_codes[xs][None, :]) == 0        # A_i ⊆ M(σ_j)
    ok &= As[:, None] == As[None, :]
    c_all = component_counts(sub_inst, bits, None)["c"]
    R = ok * (float(q) ** -c_all.astype(np.float64))[:, None]
    Qs = []
    for b in blist:
        cb = component_counts(sub_inst, bits, None, block=b)["c_block"]
        outside = _outside_codes(tree, q, b)
        same = outside[xs][:, None] == outside[xs][None, :]
        Qs.append(ok * same * (float(q) ** -cb.astype(np.float64))[:, None])
    mu = gibbs_space(tree, tau, params).pi
    nu = mu[xs] * T[xs, np.arange(J)]
    return UllrichFactors(T, Tstar, R, Qs, mu, nu, pairs)


def ullrich_check(tree: TreeTopology, tau: SpinBoundary, params: PottsParams,
                  blocks: BlockSpec | None = None) -> dict:
    """Entrywise residuals of SW = T R T*, SW_D = (1/m) Σ T Q_k T* and the operator identities."""
    uf = ullrich_factors(tree, tau, params, blocks)
    sw = sw_matrix(tree, tau, params).dense()
    out = {"sw_vs_TRTstar": float(np.abs(sw - uf.T @ uf.R @ uf.Tstar).max())}
    sw_enum = sw_matrix_enumerated(tree, tau, params)
    out["sw_vs_enumeration"] = float(np.abs(sw - sw_enum).max())
    lhs = uf.mu[:, None] * uf.T
    out["adjoint_T"] = float(np.abs(lhs - (uf.nu[:, None] * uf.Tstar).T).max())
    out["Q_idempotent"] = max(float(np.abs(Q @ Q - Q).max()) for Q in uf.Q)
    out["R_eq_QRQ"] = max(float(np.abs(Q @ uf.R @ Q - uf.R).max()) for Q in uf.Q)
    if blocks is not None:
        swd = sw_matrix(tree, tau, params, blocks).dense()
        fact = sum(uf.T @ Q @ uf.Tstar for Q in uf.Q) / len(uf.Q)
        out["swd_vs_TQTstar"] = float(np.abs(swd - fact).max())
        out["swd_vs_enumeration"] = float(np.abs(swd - sw_matrix_enumerated(tree, tau, params, blocks)).max())
    out["joint_states"] = int(uf.joint_codes.shape[0])
    return out


# ---------------------------------------------------------------------------
# spectra, Dirichlet forms, mixing, conductance
# ---------------------------------------------------------------------------

@dataclass
class GapReport:
    gap: float                 # absolute spectral gap 1 - λ*
    lambda2: float
    lambda_min: float
    lambda_star: float
    eigvec2: np.ndarray | None = None
    variational_gap: float | None = None
    method: str = "dense"

    @property
    def spectral_gap(self) -> float:
        return 1.0 - self.lambda2

    def to_json(self) -> dict:
        return {"gap": self.gap, "lambda2": self.lambda2, "lambda_min": self.lambda_min,
                "lambda_star": self.lambda_star, "variational_gap": self.variational_gap,
                "method": self.method}


def _symmetrized(P: np.ndarray, pi: np.ndarray) -> np.ndarray:
    s = np.sqrt(pi)
    S = s[:, None] * P / s[None, :]
    return 0.5 * (S + S.T)


def spectral_gap(tm: TransitionMatrix, check_balance: bool = True) -> GapReport:
    """Absolute spectral gap through the symmetrized similarity transform."""
    pi = tm.pi
    if tm.n <= DENSE_CAP:
        P = tm.dense()
        if check_balance:
            flux = pi[:, None] * P
            err = float(np.abs(flux - flux.T).max())
            if err > BALANCE_TOL:
                raise ValueError(f"chain {tm.name!r} is not reversible (detailed balance error {err:.3e})")
        w, V = scipy.linalg.eigh(_symmetrized(P, pi))
        lam2, lmin = float(w[-2]) if tm.n > 1 else 0.0, float(w[0])
        vec = V[:, -2] / np.sqrt(pi) if tm.n > 1 else None
        method = "dense"
    else:
        s = np.sqrt(pi)
        op = scipy.sparse.linalg.LinearOperator(
            (tm.n, tm.n), matvec=lambda x: s * tm.apply(np.ravel(x) / s), dtype=np.float64)
        top, vecs = scipy.sparse.linalg.eigsh(op, k=2, which="LA", tol=1e-13)
        order = np.argsort(top)
        lam2 = float(top[order[0]])
        vec = vecs[:, order[0]] / s
        bottom = scipy.sparse.linalg.eigsh(op, k=1, which="SA", tol=1e-13, return_eigenvectors=False)
        lmin = float(bottom[0])
        method = "lanczos"
    lstar = max(abs(lam2), abs(lmin)) if tm.n > 1 else 0.0
    rep = GapReport(1.0 - lstar, lam2, lmin, lstar, vec, method=method)
    if vec is not None:
        v = vec - vec @ pi
        var = float(v ** 2 @ pi)
        if var > 0:
            rep.variational_gap = float(dirichlet_form(tm, v) / var)
    return rep


def dirichlet_form(tm: TransitionMatrix, f: np.ndarray) -> np.ndarray:
    """E(f,f) = <f, (I-P) f>_π for one function or a batch (leading axes)."""
    f = np.asarray(f, dtype=np.float64)
    return ((f - tm.apply(f)) * f) @ tm.pi


def dirichlet_form_pairs(P: np.ndarray, pi: np.ndarray, f: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Half-sum-of-squares form ½ Σ π(x)P(x,y)(f(x)-f(y))², batched over leading axes."""
    f = np.asarray(f, dtype=np.float64)
    flux = pi[:, None] * P
    if f.ndim == 1:
        diff = f[:, None] - f[None, :]
        return 0.5 * float((flux * diff ** 2).sum())
    flat = f.reshape(-1, f.shape[-1])
    out = np.empty(flat.shape[0])
    for s in range(0, flat.shape[0], chunk):
        blk = flat[s:s + chunk]
        diff = blk[:, :, None] - blk[:, None, :]
        out[s:s + chunk] = 0.5 * np.einsum("xy,kxy->k", flux, diff ** 2)
    return out.reshape(f.shape[:-1])


@dataclass
class MixingReport:
    t_mix: int | None          # None when the chain did not mix within t_max
    tv: list
    starts: int
    gap: float | None = None
    lower: float | None = None
    upper: float | None = None
    bracket_ok: bool | None = None

    @property
    def divergent(self) -> bool:
        return self.t_mix is None

    def to_json(self) -> dict:
        return {"t_mix": self.t_mix, "divergent": self.divergent, "tv": self.tv,
                "starts": self.starts, "gap": self.gap, "lower": self.lower,
                "upper": self.upper, "bracket_ok": self.bracket_ok}


def tv_mixing_time(tm: TransitionMatrix, start=None, t_max: int = 10000, eps: float = 0.25,
                   gap: float | None = None, batch: int | None = None) -> MixingReport:
    """Smallest t with worst-start total variation ≤ eps.

    ``start`` may be None (every state), an array of state indices (e.g. orbit
    representatives of a symmetry the chain commutes with), or a probability
    vector.
    """
    check_cap(tm.n, MATRIX_CAP, "mixing-time state space")
    pi = tm.pi
    if start is None:
        idx = np.arange(tm.n)
        D0 = None
    else:
        start = np.asarray(start)
        if start.dtype.kind == "f" and start.shape == (tm.n,):
            idx = None
            D0 = start[None, :].astype(np.float64)
        else:
            idx = start.astype(np.int64).ravel()
            D0 = None
    if D0 is None:
        D0 = np.zeros((idx.size, tm.n))
        D0[np.arange(idx.size), idx] = 1.0
    D = D0
    history = []
    t_mix = None
    for t in range(1, t_max + 1):
        Dn = tm.apply_left(D)
        tv = float(0.5 * np.abs(Dn - pi).sum(axis=1).max())
        history.append(tv)
        if tv <= eps:
            t_mix = t
            break
        if np.array_equal(Dn, D):
            break
        D = Dn
    rep = MixingReport(t_mix, history, int(D0.shape[0]))
    if gap is not None and gap > 0:
        rep.gap = gap
        rep.lower = (1.0 / gap - 1.0) * math.log(1.0 / (2 * eps))
        rep.upper = math.ceil((1.0 / gap) * math.log(1.0 / (eps * pi.min())))
        rep.bracket_ok = t_mix is not None and rep.lower - 1e-9 <= t_mix <= rep.upper
    return rep


def conductance(tm: TransitionMatrix, S: np.ndarray) -> float:
    """Φ(S) = Q(S, S^c) / π(S) with Q(x,y) = π(x) P(x,y)."""
    ind = _indicator(S, tm.n)
    pS = float(ind @ tm.pi)
    if pS <= 0:
        raise ValueError("conductance needs π(S) > 0")
    flow = pS - float((ind * tm.apply(ind)) @ tm.pi)
    return max(flow, 0.0) / pS


def edge_measure(tm: TransitionMatrix, S: np.ndarray) -> float:
    ind = _indicator(S, tm.n)
    return max(float(ind @ tm.pi) - float((ind * tm.apply(ind)) @ tm.pi), 0.0)


def _indicator(S, n) -> np.ndarray:
    S = np.asarray(S)
    if S.dtype == bool and S.shape == (n,):
        return S.astype(np.float64)
    ind = np.zeros(n)
    ind[S.astype(np.int64)] = 1.0
    return ind


def min_conductance_set(tm: TransitionMatrix, max_states: int = 16) -> dict:
    """Exhaustive search of min Φ(S) over 0 < π(S) ≤ 1/2 (small spaces only)."""
    check_cap(tm.n, max_states, "exhaustive conductance search")
    P = tm.dense()
    pi = tm.pi
    best = (math.inf, None)
    for code in range(1, 2 ** tm.n - 1):
        S = ((code >> np.arange(tm.n)) & 1).astype(bool)
        pS = pi[S].sum()
        if pS > 0.5 + 1e-15:
            continue
        flow = (pi[S][:, None] * P[np.ix_(S, ~S)]).sum()
        phi = flow / pS
        if phi < best[0]:
            best = (phi, S)
    return {"phi": float(best[0]), "set": np.nonzero(best[1])[0].tolist()}


# ---------------------------------------------------------------------------
# symmetry reduction for worst-start mixing times
# ---------------------------------------------------------------------------

def _canonical_labels(tree: TreeTopology, own: np.ndarray, leaf_keys: np.ndarray | None,
                      child_key: Callable[[np.ndarray, int], np.ndarray]) -> np.ndarray:
    """Bottom-up AHU labels of rooted subtrees for many configurations at once.

    ``own`` holds a per-vertex value, ``leaf_keys`` an extra (N, #leaves) key
    for what hangs below each leaf, and ``child_key(lab, depth)`` turns child
    labels at ``depth`` into the keys compared by their parent.
    """
    N = own.shape[0]
    d = tree.d
    lab = np.zeros((N, tree.n), dtype=np.int64)
    leaves = tree.leaves
    keys = own[:, leaves.start:leaves.stop].astype(np.int64)
    if leaf_keys is not None:
        lk = np.broadcast_to(leaf_keys, keys.shape).astype(np.int64)
        keys = keys * (int(lk.max()) + 1) + lk
    _, inv = np.unique(keys.ravel(), return_inverse=True)
    lab[:, leaves.start:leaves.stop] = inv.reshape(N, -1)
    for k in range(tree.h - 1, -1, -1):
        rg = tree.depth_range(k)
        ch = tree.depth_range(k + 1)
        kid = child_key(lab[:, ch.start:ch.stop], k + 1).reshape(N, len(rg), d)
        kid = np.sort(kid, axis=2)
        rows = np.concatenate([own[:, rg.start:rg.stop, None].astype(np.int64), kid], axis=2)
        _, inv = np.unique(rows.reshape(-1, d + 1), axis=0, return_inverse=True)
        lab[:, rg.start:rg.stop] = inv.reshape(N, len(rg))
    return lab[:, 0]


def spin_orbit_representatives(tree: TreeTopology, tau: SpinBoundary, q: int) -> dict:
    """Orbits of Ω^τ under tree automorphisms that preserve the boundary spins."""
    sig = all_spin_configs(tree.n, q)
    leaf_extra = None
    if not tau.is_free:
        kids = tau.array().reshape(-1, tree.d)
        _, leaf_extra = np.unique(np.sort(kids, axis=1), axis=0, return_inverse=True)
        leaf_extra = leaf_extra.ravel()
    root = _canonical_labels(tree, sig, leaf_extra, lambda lab, depth: lab)
    _, reps, counts = np.unique(root, return_index=True, return_counts=True)
    return {"representatives": np.sort(reps), "num_orbits": int(reps.size),
            "orbit_sizes": counts}


def edge_orbit_representatives(tree: TreeTopology, xi: RCBoundary) -> dict:
    """Orbits of edge configurations under tree automorphisms (free or wired ξ only)."""
    if xi.kind not in ("free", "wired"):
        raise ValueError("edge orbits are available for free or wired boundaries only")
    m = tree.n_edges
    check_cap(2 ** m, MATRIX_CAP, "edge configuration space")
    bits = decode_bits(np.arange(2 ** m), m).astype(np.int64)
    n, d = tree.n, tree.d
    own = np.zeros((bits.shape[0], n), dtype=np.int64)

    def child_key(lab, depth):
        rg = tree.depth_range(depth)
        return lab * 2 + bits[:, rg.start - 1:rg.stop - 1]

    # what hangs below a leaf is the number of its open boundary edges
    leaf_keys = bits[:, n - 1:].reshape(bits.shape[0], -1, d).sum(axis=2)
    root = _canonical_labels(tree, own, leaf_keys, child_key)
    _, reps, counts = np.unique(root, return_index=True, return_counts=True)
    return {"representatives": np.sort(reps), "num_orbits": int(reps.size), "orbit_sizes": counts}


# ---------------------------------------------------------------------------
# chain dispatcher
# ---------------------------------------------------------------------------

SPIN_CHAINS = ("sw", "block-sw", "glauber", "block-hb")
RC_CHAINS = ("rc-edge", "rc-sw", "single-bond")


def transition_matrix(chain: str, tree: TreeTopology, params: PottsParams,
                      tau: SpinBoundary | None = None, xi: RCBoundary | None = None,
                      blocks: BlockSpec | None = None, ell: int | None = None) -> TransitionMatrix:
    """Build a chain's exact kernel by name."""
    if chain in SPIN_CHAINS:
        tau = tau if tau is not None else SpinBoundary.mono(tree, 0)
        if blocks is None and ell is not None:
            blocks = BlockSpec.tiled(tree, ell)
        if chain == "sw":
            return sw_matrix(tree, tau, params)
        if chain == "glauber":
            return glauber_matrix(tree, tau, params)
        if blocks is None:
            raise ValueError(f"chain {chain!r} needs blocks or ell")
        if chain == "block-sw":
            return sw_matrix(tree, tau, params, blocks)
        return heat_bath_matrix(tree, tau, params, blocks)
    if chain in RC_CHAINS:
        inst = RCInstance.from_tree(tree)
        xi = xi if xi is not None else RCBoundary.wired(tree.boundary_slots)
        if chain == "rc-edge":
            return rc_edge_hb_matrix(inst, xi, params.p, params.q)
        if chain == "rc-sw":
            return rc_sw_matrix(inst, xi, params.p, params.q)
        return single_bond_matrix(inst, xi, params.p, params.q)
    raise ValueError(f"unknown chain {chain!r}")


def worst_start_mixing(chain: str, tree: TreeTopology, params: PottsParams,
                       tau: SpinBoundary | None = None, xi: RCBoundary | None = None,
                       t_max: int = 10000, with_gap: bool = True, **kw) -> MixingReport:
    """Worst-start τ_mix, using symmetry orbit representatives as start states."""
    tm = transition_matrix(chain, tree, params, tau=tau, xi=xi, **kw)
    if chain in SPIN_CHAINS:
        tau = tau if tau is not None else SpinBoundary.mono(tree, 0)
        reps = spin_orbit_representatives(tree, tau, params.q)["representatives"]
    else:
        xi = xi if xi is not None else RCBoundary.wired(tree.boundary_slots)
        reps = edge_orbit_representatives(tree, xi)["representatives"]
    gap = None
    if with_gap and tm.n <= DENSE_CAP:
        gap = spectral_gap(tm).gap
    return tv_mixing_time(tm, reps, t_max=t_max, gap=gap)


# ---------------------------------------------------------------------------
# comparison between SW, block SW and heat-bath block dynamics
# ---------------------------------------------------------------------------

def _restricted_gap(P: np.ndarray, pi: np.ndarray, idx: np.ndarray) -> float:
    """Absolute gap of P restricted to a closed class ``idx``."""
    if idx.size == 1:
        return 1.0
    sub = P[np.ix_(idx, idx)]
    w = scipy.linalg.eigh(_symmetrized(sub, pi[idx] / pi[idx].sum()), eigvals_only=True)
    return float(1.0 - max(abs(w[-2]), abs(w[0])))


def fiber_gaps(tree: TreeTopology, tau: SpinBoundary, params: PottsParams,
               block: Iterable[int]) -> dict:
    """gap(SW_k^η) for every configuration η outside ``block``."""
    block = sorted(block)
    P = sw_block_component(tree, tau, params, block)
    pi = gibbs_space(tree, tau, params).pi
    out = _outside_codes(tree, params.q, block)
    keys, inv = np.unique(out, return_inverse=True)
    gaps = np.array([_restricted_gap(P, pi, np.nonzero(inv == k)[0]) for k in range(keys.size)])
    return {"eta": keys, "gaps": gaps, "fiber_of_state": inv}


def _interacting_edge_count(tree: TreeTopology, tau: SpinBoundary, piece: Iterable[int]) -> int:
    """|E_kj|: edges of E(T ∪ ∂T) with at least one endpoint in the piece."""
    inside = np.zeros(tree.n_total, dtype=bool)
    inside[list(piece)] = True
    par, ch = tree.edges[:, 0], tree.edges[:, 1]
    hit = inside[par] | inside[ch]
    if tau.is_free:
        hit[tree.n_internal_edges:] = False
    return int(hit.sum())


@dataclass
class ComparisonReport:
    gamma_min: float
    gamma_block: list
    piece_equality_error: float
    piece_lower_bound_ok: bool
    gap_sw: float
    gap_swd: float
    gap_bd: float
    min_slack_sw_swd: float
    min_slack_swd_bd: float
    n_functions: int
    gap_inequality_ok: bool

    def to_json(self) -> dict:
        return dict(self.__dict__)


def comparison_check(tree: TreeTopology, tau: SpinBoundary, params: PottsParams,
                     blocks: BlockSpec, n_functions: int = 1000, seed: int = 0,
                     tol: float = 1e-12) -> ComparisonReport:
    """E_SW ≥ E_SW_D ≥ γ_min·E_B_D on random functions, with γ_min from exact fiber gaps."""
    sw = sw_matrix(tree, tau, params)
    swd = sw_matrix(tree, tau, params, blocks)
    bd = heat_bath_matrix(tree, tau, params, blocks)
    gam_blocks, eq_err, lb_ok = [], 0.0, True
    for b, pieces in zip(blocks.blocks, blocks.pieces):
        fb = fiber_gaps(tree, tau, params, b)
        gam_blocks.append(float(fb["gaps"].min()))
        piece_min = np.full(fb["gaps"].size, np.inf)
        for piece in pieces:
            fp = fiber_gaps(tree, tau, params, piece)
            bound = math.exp(-params.beta * _interacting_edge_count(tree, tau, piece))
            lb_ok &= bool((fp["gaps"] >= bound - 1e-10).all())
            # the piece fiber through each state, grouped by the block fiber
            g_state = fp["gaps"][fp["fiber_of_state"]]
            per_block = np.full(fb["gaps"].size, np.inf)
            np.minimum.at(per_block, fb["fiber_of_state"], g_state)
            piece_min = np.minimum(piece_min, per_block)
        eq_err = max(eq_err, float(np.abs(piece_min - fb["gaps"]).max()))
    gamma = min(gam_blocks)
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((n_functions, sw.n))
    e_sw, e_swd, e_bd = (dirichlet_form(tm, F) for tm in (sw, swd, bd))
    g_sw, g_swd, g_bd = (spectral_gap(tm).gap for tm in (sw, swd, bd))
    return ComparisonReport(
        gamma_min=gamma, gamma_block=gam_blocks, piece_equality_error=eq_err,
        piece_lower_bound_ok=lb_ok, gap_sw=g_sw, gap_swd=g_swd, gap_bd=g_bd,
        min_slack_sw_swd=float((e_sw - e_swd).min()),
        min_slack_swd_bd=float((e_swd - gamma * e_bd).min()),
        n_functions=n_functions,
        gap_inequality_ok=bool(g_sw >= gamma * g_bd - tol))
