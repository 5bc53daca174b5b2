"""Seeded samplers for the spin and random-cluster chains.

Spin chains work on arrays of shape ``(n,)`` or ``(R, n)`` (R replicas, each
row an internal configuration).  All randomness for step ``t`` comes from the
counter-based cell ``(seed, stream, t)`` of :mod:`swtree.rng`; row ``r`` of a
batch reads draws ``r*width .. (r+1)*width - 1``, so a replica's trajectory
does not depend on how many replicas share its batch.

Spin-chain updates exploit the tree: connected components are found with one
bottom-up and one top-down sweep over the levels, and heat-bath conditionals
are sampled exactly by upward log-messages followed by top-down draws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .model import (PottsParams, RCBoundary, RCInstance, SpinBoundary, UnionFind,
                    component_counts, decode_bits, log_bernoulli_weight)
from .rng import StepRandomness
from .tree import ExactInfeasibleError, TreeTopology, connected_pieces, decompose

BULK_CAP = 2 ** 20


# ---------------------------------------------------------------------------
# state containers
# ---------------------------------------------------------------------------

@dataclass
class ChainState:
    """Configuration (spins or edge bits), step counter and RNG coordinates."""

    config: np.ndarray
    seed: int = 0
    step: int = 0
    stream: int = 0

    def randomness(self) -> StepRandomness:
        return StepRandomness(self.seed, self.step, self.stream)

    def advanced(self, config: np.ndarray) -> "ChainState":
        return ChainState(config, self.seed, self.step + 1, self.stream)


@dataclass
class CoupledState:
    """Two spin configurations driven by the same per-step randomness."""

    X: np.ndarray
    Y: np.ndarray
    seed: int = 0
    step: int = 0
    stream: int = 0


@dataclass(frozen=True)
class BlockSpec:
    """Blocks D_1..D_m covering V(T), each split into pieces at distance >= 2."""

    blocks: tuple[frozenset, ...]
    pieces: tuple[tuple[frozenset, ...], ...]

    @classmethod
    def from_blocks(cls, tree: TreeTopology, blocks: Sequence) -> "BlockSpec":
        blocks = tuple(frozenset(int(v) for v in b) for b in blocks)
        cover = frozenset().union(*blocks) if blocks else frozenset()
        if cover != frozenset(tree.vertices):
            raise ValueError("blocks must cover every internal vertex")
        pieces = tuple(connected_pieces(tree, b) for b in blocks)
        return cls(blocks, pieces)

    @classmethod
    def tiled(cls, tree: TreeTopology, ell: int) -> "BlockSpec":
        _, fam = decompose(tree, ell)
        return cls(fam.tiles, fam.pieces)

    @classmethod
    def whole(cls, tree: TreeTopology) -> "BlockSpec":
        return cls.from_blocks(tree, [tree.vertices])

    @classmethod
    def singletons(cls, tree: TreeTopology) -> "BlockSpec":
        return cls.from_blocks(tree, [[v] for v in tree.vertices])

    @property
    def m(self) -> int:
        return len(self.blocks)

    @property
    def volume(self) -> int:
        return max(len(p) for ps in self.pieces for p in ps)

    def masks(self, n: int) -> np.ndarray:
        out = np.zeros((self.m, n), dtype=bool)
        for k, b in enumerate(self.blocks):
            out[k, sorted(b)] = True
        return out


# ---------------------------------------------------------------------------
# tree sweeps (vectorized over replicas)
# ---------------------------------------------------------------------------

class _Levels:
    """Per-depth index ranges used by the vectorized sweeps."""

    def __init__(self, tree: TreeTopology):
        self.tree = tree
        self.ranges = [tree.depth_range(k) for k in range(tree.h + 1)]


@lru_cache(maxsize=64)
def _levels(tree: TreeTopology) -> _Levels:
    return _Levels(tree)


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x)
    return (x[None, :], True) if x.ndim == 1 else (x, False)


def tree_components(tree: TreeTopology, open_int: np.ndarray, open_bd: np.ndarray,
                    bad_own: np.ndarray | None = None):
    """Component tops and boundary/outside contact for percolation on T ∪ ∂T.

    ``open_int`` is (R, n-1) for edges (parent(c), c), c = 1..n-1; ``open_bd`` is
    (R, n_boundary).  ``bad_own`` (R, n) marks vertices whose component must be
    frozen (e.g. outside the active block).  Returns ``top`` (R, n), the index of
    each vertex's component top (closest to the root) and ``frozen`` (R, n),
    true when the component touches ∂T or a bad vertex.
    """
    R = open_int.shape[0]
    n, d, h = tree.n, tree.d, tree.h
    lv = _levels(tree)
    bad = np.zeros((R, n), dtype=bool) if bad_own is None else bad_own.copy()
    leaves = lv.ranges[h]
    bad[:, leaves.start:leaves.stop] |= open_bd.reshape(R, len(leaves), d).any(axis=2)
    for k in range(h - 1, -1, -1):
        par = lv.ranges[k]
        ch = lv.ranges[k + 1]
        contrib = (open_int[:, ch.start - 1:ch.stop - 1] & bad[:, ch.start:ch.stop])
        bad[:, par.start:par.stop] |= contrib.reshape(R, len(par), d).any(axis=2)
    top = np.empty((R, n), dtype=np.int64)
    top[:, 0] = 0
    for k in range(1, h + 1):
        ch = lv.ranges[k]
        idx = np.arange(ch.start, ch.stop)
        par_top = top[:, (idx - 1) // d]
        top[:, ch.start:ch.stop] = np.where(open_int[:, ch.start - 1:ch.stop - 1], par_top, idx)
    frozen = np.take_along_axis(bad, top, axis=1)
    return top, frozen


def sw_update(tree: TreeTopology, sigma: np.ndarray, tau: SpinBoundary, p: float,
              r: np.ndarray, s: np.ndarray, region: np.ndarray | None = None) -> np.ndarray:
    """One SW move given explicit randomness.

    ``r`` (R, n_edges) are edge uniforms, ``s`` (R, n) fresh spins.  Monochromatic
    edges with r_e <= p are open.  Components that touch ∂T, or contain a vertex
    outside ``region`` (R, n) when given, keep their spins; every other
    component takes the fresh spin of its top vertex.
    """
    n = tree.n
    par = tree.parent_array[1:n]
    ch = np.arange(1, n)
    open_int = (sigma[:, par] == sigma[:, ch]) & (r[:, :n - 1] <= p)
    if tau.is_free:
        open_bd = np.zeros((sigma.shape[0], tree.n_boundary), dtype=bool)
    else:
        leaf_of = tree.parent_array[n:]
        open_bd = (sigma[:, leaf_of] == tau.array()[None, :]) & (r[:, n - 1:] <= p)
    bad_own = None if region is None else ~region
    top, frozen = tree_components(tree, open_int, open_bd, bad_own)
    fresh = np.take_along_axis(s, top, axis=1).astype(sigma.dtype)
    return np.where(frozen, sigma, fresh)


def heat_bath_update(tree: TreeTopology, sigma: np.ndarray, tau: SpinBoundary, beta: float, q: int,
                     region: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Resample ``region`` (R, n) exactly from the conditional Gibbs law given the rest.

    Upward log-messages are computed level by level; the region is then sampled
    top-down with the inverse-CDF uniforms ``u`` (R, n).
    """
    R, n = sigma.shape
    d, h = tree.d, tree.h
    lv = _levels(tree)
    spins = np.arange(q)
    kern = -beta * (spins[:, None] != spins[None, :])      # (q, q)
    logm = np.zeros((R, n, q))
    if not tau.is_free:
        tau_arr = tau.array().reshape(-1, d)                # per-leaf boundary spins
        leaf_bd = -beta * (tau_arr[:, :, None] != spins[None, None, :]).sum(axis=1)  # (nleaves, q)
    for k in range(h, -1, -1):
        rg = lv.ranges[k]
        sl = slice(rg.start, rg.stop)
        acc = np.zeros((R, len(rg), q))
        if k == h:
            if not tau.is_free:
                acc += leaf_bd[None]
        else:
            chg = lv.ranges[k + 1]
            csl = slice(chg.start, chg.stop)
            lm = logm[:, csl, :]                                         # (R, nc, q)
            inside = logsumexp(kern[None, None] + lm[:, :, None, :], axis=3)   # (R, nc, q)
            outside = kern[sigma[:, csl]]                                # (R, nc, q) = -beta 1(s != σ_c)
            cont = np.where(region[:, csl, None], inside, outside)
            acc += cont.reshape(R, len(rg), d, q).sum(axis=2)
        if k > 0:
            idx = np.arange(rg.start, rg.stop)
            pidx = (idx - 1) // d
            par_out = ~region[:, pidx]
            acc += np.where(par_out[:, :, None], kern[sigma[:, pidx]], 0.0)
        logm[:, sl, :] = acc - acc.max(axis=2, keepdims=True)
    new = sigma.copy()
    for k in range(h + 1):
        rg = lv.ranges[k]
        sl = slice(rg.start, rg.stop)
        logits = logm[:, sl, :].copy()
        if k > 0:
            idx = np.arange(rg.start, rg.stop)
            pidx = (idx - 1) // d
            par_in = region[:, pidx]
            logits += np.where(par_in[:, :, None], kern[new[:, pidx]], 0.0)
        logits -= logits.max(axis=2, keepdims=True)
        w = np.exp(logits)
        cdf = np.cumsum(w, axis=2)
        cdf /= cdf[:, :, -1:]
        draw = np.minimum((cdf < u[:, sl, None]).sum(axis=2), q - 1)
        new[:, sl] = np.where(region[:, sl], draw, new[:, sl])
    return new


# ---------------------------------------------------------------------------
# spin chains
# ---------------------------------------------------------------------------

def _check_boundary(tree, tau, q):
    tau.validate(tree, q)


def sw_step(state: ChainState, tree: TreeTopology, tau: SpinBoundary, params: PottsParams) -> ChainState:
    """One Swendsen-Wang step with boundary τ (single configuration or batch)."""
    _check_boundary(tree, tau, params.q)
    sigma, single = _as_batch(state.config)
    rnd = state.randomness()
    R = sigma.shape[0]
    r = rnd.edge_uniforms((R, tree.n_edges))
    s = rnd.vertex_spins((R, tree.n), params.q)
    new = sw_update(tree, sigma, tau, params.p, r, s)
    return state.advanced(new[0] if single else new)


def block_step(state: ChainState, tree: TreeTopology, tau: SpinBoundary, params: PottsParams,
               blocks: BlockSpec, kind: str = "heat-bath", max_piece: int | None = None) -> ChainState:
    """Heat-bath or SW block move on a uniformly chosen block."""
    if kind not in ("heat-bath", "sw"):
        raise ValueError(f"kind must be 'heat-bath' or 'sw', got {kind!r}")
    if max_piece is not None and blocks.volume > max_piece:
        raise ExactInfeasibleError(
            f"block piece of size {blocks.volume} exceeds the conditional-sampling limit {max_piece}")
    _check_boundary(tree, tau, params.q)
    sigma, single = _as_batch(state.config)
    R = sigma.shape[0]
    rnd = state.randomness()
    choice = rnd.aux().integers(0, blocks.m, R)
    region = blocks.masks(tree.n)[choice]
    if kind == "heat-bath":
        u = rnd.heat_bath_uniforms((R, tree.n))
        new = heat_bath_update(tree, sigma, tau, params.beta, params.q, region, u)
    else:
        r = rnd.edge_uniforms((R, tree.n_edges))
        s = rnd.vertex_spins((R, tree.n), params.q)
        new = sw_update(tree, sigma, tau, params.p, r, s, region)
    return state.advanced(new[0] if single else new)


def glauber_step(state: ChainState, tree: TreeTopology, tau: SpinBoundary, params: PottsParams) -> ChainState:
    """Heat-bath update of one uniformly chosen vertex."""
    return block_step(state, tree, tau, params, BlockSpec.singletons(tree), "heat-bath")


def coupled_sw_step(cs: CoupledState, tree: TreeTopology, tau: SpinBoundary, params: PottsParams,
                    restriction: np.ndarray | None = None) -> CoupledState:
    """Advance X and Y with identical edge uniforms and vertex spins.

    ``restriction`` (boolean mask over V) limits Y's recolouring to components
    fully inside it.
    """
    X, single = _as_batch(cs.X)
    Y, _ = _as_batch(cs.Y)
    R = X.shape[0]
    rnd = StepRandomness(cs.seed, cs.step, cs.stream)
    r = rnd.edge_uniforms((R, tree.n_edges))
    s = rnd.vertex_spins((R, tree.n), params.q)
    X2 = sw_update(tree, X, tau, params.p, r, s)
    region = None if restriction is None else np.broadcast_to(np.asarray(restriction, bool), Y.shape)
    Y2 = sw_update(tree, Y, tau, params.p, r, s, region)
    if single:
        X2, Y2 = X2[0], Y2[0]
    return CoupledState(X2, Y2, cs.seed, cs.step + 1, cs.stream)


# ---------------------------------------------------------------------------
# random-cluster chains
# ---------------------------------------------------------------------------

def _union_find(instance: RCInstance, bits: np.ndarray, wiring: RCBoundary | None,
                skip: int | None = None) -> UnionFind:
    uf = UnionFind(instance.num_vertices)
    if wiring is not None:
        for cls in wiring.classes:
            for v in cls[1:]:
                uf.union(cls[0], v)
    for e in np.nonzero(bits)[0]:
        if e != skip:
            u, v = instance.edges[e]
            uf.union(u, v)
    return uf


def rc_cut_probability(p: float, q: float) -> float:
    """Heat-bath inclusion probability of a cut-edge."""
    return p / (q * (1 - p) + p)


def rc_edge_hb_step(state: ChainState, instance: RCInstance, xi: RCBoundary | None,
                    p: float, q: float) -> ChainState:
    """Heat-bath update of one uniformly chosen edge of the random-cluster state."""
    bits = np.asarray(state.config, dtype=bool).copy()
    rnd = state.randomness()
    gen = rnd.aux()
    e = int(gen.integers(0, instance.m))
    u = rnd.heat_bath_uniforms(1)[0]
    uf = _union_find(instance, bits, xi, skip=e)
    a, b = instance.edges[e]
    cut = uf.find(a) != uf.find(b)
    prob = rc_cut_probability(p, q) if cut else p
    bits[e] = u < prob
    return state.advanced(bits)


def _component_spins(instance: RCInstance, uf: UnionFind, s: np.ndarray) -> np.ndarray:
    """Each component takes the fresh spin of its smallest vertex index."""
    V = instance.num_vertices
    roots = np.array([uf.find(v) for v in range(V)])
    first = {}
    for v in range(V):
        first.setdefault(roots[v], v)
    return np.array([s[first[roots[v]]] for v in range(V)])


def rc_sw_step(state: ChainState, instance: RCInstance, xi: RCBoundary, p: float, q: int) -> ChainState:
    """Random-cluster SW move on the wired tree."""
    if not xi.is_wired:
        raise ValueError("rc_sw_step is defined for the wired boundary only")
    bits = np.asarray(state.config, dtype=bool)
    rnd = state.randomness()
    uf = _union_find(instance, bits, xi)
    s = rnd.vertex_spins(instance.num_vertices, q)
    spins = _component_spins(instance, uf, s)
    r = rnd.edge_uniforms(instance.m)
    ea = instance.edge_array
    new = (spins[ea[:, 0]] == spins[ea[:, 1]]) & (r <= p)
    return state.advanced(new)


def single_bond_step(state: ChainState, instance: RCInstance, xi: RCBoundary | None,
                     p: float, q: int) -> ChainState:
    """Spin components uniformly, then refresh one random edge if it is monochromatic."""
    bits = np.asarray(state.config, dtype=bool).copy()
    rnd = state.randomness()
    uf = _union_find(instance, bits, xi)
    s = rnd.vertex_spins(instance.num_vertices, q)
    spins = _component_spins(instance, uf, s)
    e = int(rnd.aux().integers(0, instance.m))
    u = rnd.heat_bath_uniforms(1)[0]
    a, b = instance.edges[e]
    if spins[a] == spins[b]:
        bits[e] = u < p
    return state.advanced(bits)


@dataclass
class MHBSpec:
    """Data for the modified heat-bath chain on the embedded tree.

    ``interior`` lists I_h; ``gadgets`` maps each used gadget's c-vertex to its two
    edge indices; every other edge belongs to the bulk.
    """

    instance: RCInstance
    wiring: RCBoundary
    interior: tuple[int, ...]
    gadgets: dict
    p: float
    q: float
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def gadget_edges(self) -> list[int]:
        return [e for pair in self.gadgets.values() for e in pair]

    @property
    def bulk_edges(self) -> list[int]:
        g = set(self.gadget_edges)
        return [e for e in range(self.instance.m) if e not in g]

    def log_weight(self, bits: np.ndarray) -> np.ndarray:
        bits = np.atleast_2d(bits)
        k = bits.sum(axis=1)
        cc = component_counts(self.instance, bits, self.wiring)["c_xi"]
        return log_bernoulli_weight(k, self.instance.m, self.p) + cc * math.log(self.q)

    def bulk_table(self, gadget_bits: tuple) -> tuple[np.ndarray, np.ndarray]:
        """All bulk configurations and their conditional probabilities given the gadgets."""
        if gadget_bits in self._cache:
            return self._cache[gadget_bits]
        bulk = self.bulk_edges
        if 2 ** len(bulk) > BULK_CAP:
            raise ExactInfeasibleError(
                f"bulk resampling needs 2**{len(bulk)} states, cap is {BULK_CAP}")
        cfg = decode_bits(np.arange(2 ** len(bulk)), len(bulk))
        full = np.zeros((cfg.shape[0], self.instance.m), dtype=bool)
        full[:, bulk] = cfg
        full[:, self.gadget_edges] = np.asarray(gadget_bits, dtype=bool)
        lw = self.log_weight(full)
        w = np.exp(lw - lw.max())
        self._cache[gadget_bits] = (cfg, w / w.sum())
        return self._cache[gadget_bits]


def mhb_step(state: ChainState, spec: MHBSpec) -> ChainState:
    """Modified heat-bath move: gadget pair update at c_i, otherwise bulk refresh."""
    bits = np.asarray(state.config, dtype=bool).copy()
    rnd = state.randomness()
    gen = rnd.aux()
    v = spec.interior[int(gen.integers(0, len(spec.interior)))]
    u = rnd.heat_bath_uniforms(1)[0]
    if v in spec.gadgets:
        e1, e2 = spec.gadgets[v]
        opts = np.repeat(bits[None, :], 4, axis=0)
        opts[:, e1] = [False, True, False, True]
        opts[:, e2] = [False, False, True, True]
        lw = spec.log_weight(opts)
        w = np.exp(lw - lw.max())
        cdf = np.cumsum(w / w.sum())
        bits = opts[min(int((cdf < u).sum()), 3)]
    else:
        key = tuple(bool(b) for b in bits[spec.gadget_edges])
        cfg, prob = spec.bulk_table(key)
        idx = min(int((np.cumsum(prob) < u).sum()), len(prob) - 1)
        bits[spec.bulk_edges] = cfg[idx]
    return state.advanced(bits)
