"""Embedding a host graph into the leaves of a binary tree with an RC boundary.

Every edge {u, v} of the host graph G is subdivided into u - r_uv - v.  The
subdivided graph is realised inside the binary tree T_h through gadgets: the
two left-most leaves (a_i, b_i) of a height-ℓ subtree B_i and their parent c_i.
The wiring boundary ξ(Ĝ) glues together all leaves that stand for the same
vertex of G, so the random-cluster measure on T_h restricted to the gadget
edges behaves like the random-cluster measure on Ĝ once the bulk is closed.

Tree conventions: T_h is ``TreeTopology(2, h - 1)``; its boundary slots play
the role of the 2**h leaves that carry the wiring.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.stats

from .dynamics import MHBSpec
from .exact import (DENSE_CAP, MATRIX_CAP, HeatBathOperator, TransitionMatrix, min_conductance_set,
                    rc_edge_hb_matrix, rc_space, spectral_gap)
from .model import RCBoundary, RCInstance, check_cap, component_counts, decode_bits
from .tree import ExactInfeasibleError, TreeTopology

HOST_D = 2   # the construction is written for binary host trees


# ---------------------------------------------------------------------------
# host graphs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HostGraph:
    """Simple undirected graph on vertices 0..n-1.

    ``middles`` is empty for an original graph.  For a subdivided graph it
    lists the middle vertex of every original edge, and edges ``2k`` and
    ``2k + 1`` form the path that replaced original edge ``k``.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    middles: tuple[int, ...] = ()

    def __post_init__(self):
        seen = set()
        for u, v in self.edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) has an endpoint outside 0..{self.n - 1}")
            if u == v:
                raise ValueError(f"self-loop at vertex {u} is not allowed")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"multi-edge {key} is not allowed")
            seen.add(key)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> "HostGraph":
        return cls(int(n), tuple((int(u), int(v)) for u, v in edges))

    @classmethod
    def parse(cls, text: str) -> "HostGraph":
        """Whitespace edge list preceded by a header line ``n m``."""
        lines = [ln.split("#")[0].split() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln]
        if not lines or len(lines[0]) != 2:
            raise ValueError("graph file must start with a header line 'n m'")
        n, m = map(int, lines[0])
        body = lines[1:]
        if len(body) != m:
            raise ValueError(f"header announces {m} edges, found {len(body)}")
        return cls.from_edges(n, [tuple(map(int, ln[:2])) for ln in body])

    @classmethod
    def read(cls, path: str | Path) -> "HostGraph":
        return cls.parse(Path(path).read_text())

    def to_text(self) -> str:
        rows = [f"{self.n} {self.m}"] + [f"{u} {v}" for u, v in self.edges]
        return "\n".join(rows) + "\n"

    @classmethod
    def path(cls, m: int) -> "HostGraph":
        return cls.from_edges(m + 1, [(i, i + 1) for i in range(m)])

    @classmethod
    def matching(cls, m: int) -> "HostGraph":
        return cls.from_edges(2 * m, [(2 * i, 2 * i + 1) for i in range(m)])

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    @property
    def pairs(self) -> list[tuple[int, int]]:
        if not self.middles:
            raise ValueError("only a subdivided graph has edge pairs")
        return [(2 * k, 2 * k + 1) for k in range(len(self.middles))]

    def rc_instance(self) -> RCInstance:
        return RCInstance.from_edges(self.n, self.edges)

    def to_json(self) -> dict:
        return {"n": self.n, "m": self.m, "edges": [list(e) for e in self.edges],
                "middles": list(self.middles)}


def subdivide(G: HostGraph) -> HostGraph:
    """Replace each edge k = {u, v} by u - r_k - v with r_k = n + k."""
    if G.middles:
        raise ValueError("graph is already subdivided")
    edges, middles = [], []
    for k, (u, v) in enumerate(G.edges):
        r = G.n + k
        middles.append(r)
        edges.extend([(u, r), (r, v)])
    return HostGraph(G.n + G.m, tuple(edges), tuple(middles))


def projection_codes(m: int) -> np.ndarray:
    """For each edge bitset of Ĝ, the bitset of G whose bit k says 'both halves open'."""
    codes = np.arange(2 ** (2 * m), dtype=np.int64)
    out = np.zeros_like(codes)
    for k in range(m):
        both = ((codes >> (2 * k)) & 1) & ((codes >> (2 * k + 1)) & 1)
        out |= both << k
    return out


# ---------------------------------------------------------------------------
# embedding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Gadget:
    index: int
    root: int          # root of the subtree B_i
    a: int             # left-most leaf
    b: int             # its sibling
    c: int             # their parent
    edge_a: int        # tree edge index of {a, c}
    edge_b: int        # tree edge index of {c, b}


@dataclass
class EmbeddingSpec:
    """Placement of Ĝ on the leaves of T_h and the induced wiring ξ(Ĝ)."""

    graph: HostGraph
    subdivided: HostGraph
    h: int
    ell: int
    tree: TreeTopology
    subtree_roots: tuple[int, ...]
    gadgets: tuple[Gadget, ...]
    wiring: RCBoundary
    vertex_classes: dict            # G vertex -> tuple of leaves wired for it
    instance: RCInstance = field(repr=False)

    @property
    def m(self) -> int:
        return self.graph.m

    @property
    def W(self) -> tuple[int, ...]:
        return tuple(sorted(x for g in self.gadgets for x in (g.a, g.b, g.c)))

    @property
    def interior(self) -> tuple[int, ...]:
        return tuple(self.tree.vertices)

    @property
    def gadget_edges(self) -> list[int]:
        return [e for g in self.gadgets for e in (g.edge_a, g.edge_b)]

    @property
    def bulk_edges(self) -> list[int]:
        used = set(self.gadget_edges)
        return [e for e in range(self.instance.m) if e not in used]

    def mhb_spec(self, p_hat: float, q: float) -> MHBSpec:
        return MHBSpec(self.instance, self.wiring, self.interior,
                       {g.c: (g.edge_a, g.edge_b) for g in self.gadgets}, p_hat, q)

    def gadget_partition(self) -> list[list[int]]:
        """Gadgets grouped by the wiring: i ~ j when their leaves share a class, closed transitively."""
        parent = list(range(self.m))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        owner = {}
        for g in self.gadgets:
            for leaf in (g.a, g.b):
                cls = self._class_of_leaf.get(leaf)
                if cls is None:
                    continue
                if cls in owner:
                    parent[find(g.index)] = find(owner[cls])
                else:
                    owner[cls] = g.index
        groups: dict = {}
        for i in range(self.m):
            groups.setdefault(find(i), []).append(i)
        return sorted(groups.values())

    @property
    def _class_of_leaf(self) -> dict:
        return {leaf: v for v, leaves in self.vertex_classes.items() for leaf in leaves}

    def decode(self) -> HostGraph:
        """Rebuild G from the wiring classes and the gadget placement."""
        owner = self._class_of_leaf
        edges = [(owner[g.a], owner[g.b]) for g in self.gadgets]
        return HostGraph.from_edges(self.graph.n, edges)

    def to_json(self) -> dict:
        return {
            "h": self.h, "ell": self.ell, "d": HOST_D,
            "tree_vertices": self.tree.n_total, "tree_edges": self.instance.m,
            "graph": self.graph.to_json(),
            "subtree_roots": list(self.subtree_roots),
            "gadgets": [{"i": g.index, "root": g.root, "a": g.a, "b": g.b, "c": g.c,
                         "edges": [g.edge_a, g.edge_b]} for g in self.gadgets],
            "wiring": self.wiring.to_json(),
            "vertex_classes": {str(k): list(v) for k, v in self.vertex_classes.items()},
            "W": list(self.W), "n_interior": len(self.interior),
        }


def embed_boundary(G: HostGraph, h: int, ell: int) -> EmbeddingSpec:
    """Map edge k of G to gadget k: u -> a_k, r_k -> c_k, v -> b_k."""
    if ell < 1 or h < ell:
        raise ValueError(f"need 1 <= ell <= h, got ell={ell}, h={h}")
    slots = 2 ** (h - ell)
    if G.m > slots:
        raise ExactInfeasibleError(
            f"graph has {G.m} edges but T_{h} with ell={ell} offers only {slots} subtrees")
    tree = TreeTopology(HOST_D, h - 1)
    roots = tuple(tree.depth_range(h - ell))
    gadgets = []
    for k in range(G.m):
        c = tree.leftmost_descendant(roots[k], ell - 1)
        a, b = tree.children(c)
        gadgets.append(Gadget(k, roots[k], a, b, c, tree.edge_index(c, a), tree.edge_index(c, b)))
    vclasses: dict = {}
    for g, (u, v) in zip(gadgets, G.edges):
        vclasses.setdefault(u, []).append(g.a)
        vclasses.setdefault(v, []).append(g.b)
    vclasses = {k: tuple(sorted(vclasses[k])) for k in sorted(vclasses)}
    used = {leaf for leaves in vclasses.values() for leaf in leaves}
    classes = list(vclasses.values()) + [(s,) for s in tree.boundary_slots if s not in used]
    wiring = RCBoundary.partition(classes)
    return EmbeddingSpec(G, subdivide(G), h, ell, tree, roots, tuple(gadgets), wiring, vclasses,
                         RCInstance.from_tree(tree))


# ---------------------------------------------------------------------------
# gap transfer between G and Ĝ
# ---------------------------------------------------------------------------

def transferred_p(p_hat: float, q: float) -> float:
    """Edge parameter on G matching the two-edge block chain on Ĝ at p̂."""
    num = p_hat ** 2
    return num / (num + 2 * p_hat * (1 - p_hat) + (1 - p_hat) ** 2 * q)


def cut_probability(p: float, q: float) -> float:
    return p / (q * (1 - p) + p)


def pair_chain(Ghat: HostGraph, p_hat: float, q: float) -> TransitionMatrix:
    """Heat-bath chain on Ĝ that refreshes one uniformly chosen edge pair."""
    check_cap(2 ** (2 * len(Ghat.middles)), MATRIX_CAP, "pair chain state space")
    space = rc_space(Ghat.rc_instance(), None, p_hat, q)
    op = HeatBathOperator(space, [list(pr) for pr in Ghat.pairs])
    P = op.dense() if space.size <= DENSE_CAP else op
    return TransitionMatrix(P, space.pi, "pair-hb", psd=True)


@dataclass
class GapTransferReport:
    p_hat: float
    q: float
    p: float
    gap_edge: float
    gap_pair: float
    gap_error: float
    projection_error: float
    pair_rule_error: float
    spectra: dict

    @property
    def ok(self) -> bool:
        return self.gap_error <= 1e-10 and self.projection_error <= 1e-12

    def to_json(self) -> dict:
        return {"p_hat": self.p_hat, "q": self.q, "p": self.p, "gap_edge": self.gap_edge,
                "gap_pair": self.gap_pair, "gap_error": self.gap_error,
                "projection_error": self.projection_error, "pair_rule_error": self.pair_rule_error,
                "ok": self.ok, **self.spectra}


def _pair_rule_error(G: HostGraph, Ghat: HostGraph, pi_hat: np.ndarray, p: float, q: float) -> float:
    """Largest gap between P(both halves open | rest) on Ĝ and the edge rule on G."""
    m = G.m
    codes = np.arange(pi_hat.size, dtype=np.int64)
    proj = projection_codes(m)
    inst = G.rc_instance()
    c_g = component_counts(inst, decode_bits(np.arange(2 ** m), m))["c_xi"]
    worst = 0.0
    for k in range(m):
        mask = np.int64(3 << (2 * k))
        base = codes[(codes & mask) == 0]
        quad = np.stack([pi_hat[base | (np.int64(s) << (2 * k))] for s in range(4)], axis=1)
        both = quad[:, 3] / quad.sum(axis=1)
        rest = proj[base]
        bit = np.int64(1 << k)
        connected = c_g[rest] == c_g[rest | bit]
        rule = np.where(connected, p, cut_probability(p, q))
        worst = max(worst, float(np.abs(both - rule).max()))
    return worst


def gap_transfer_check(G: HostGraph, p_hat: float, q: float) -> GapTransferReport:
    """Compare the edge heat-bath on G at p with the pair chain on Ĝ at p̂."""
    if not 0 < p_hat < 1:
        raise ValueError(f"p_hat must lie in (0, 1), got {p_hat}")
    Ghat = subdivide(G)
    p = transferred_p(p_hat, q)
    M = rc_edge_hb_matrix(G.rc_instance(), None, p, q)
    Mh = pair_chain(Ghat, p_hat, q)
    gM, gMh = spectral_gap(M), spectral_gap(Mh)
    proj = projection_codes(G.m)
    lifted = np.bincount(proj, weights=Mh.pi, minlength=M.n)
    proj_err = float(np.abs(lifted - M.pi).max())
    rule_err = _pair_rule_error(G, Ghat, Mh.pi, p, q)
    spectra = {"lambda2_edge": gM.lambda2, "lambda2_pair": gMh.lambda2,
               "lambda_min_edge": gM.lambda_min, "lambda_min_pair": gMh.lambda_min}
    return GapTransferReport(p_hat, q, p, gM.spectral_gap, gMh.spectral_gap,
                             abs(gM.spectral_gap - gMh.spectral_gap), proj_err, rule_err, spectra)


# ---------------------------------------------------------------------------
# bulk connections and the bad set
# ---------------------------------------------------------------------------

def bulk_labels(tree: TreeTopology, open_bits: np.ndarray) -> np.ndarray:
    """Component labels on T_h using only the given open edges (no wiring).

    ``open_bits`` has shape (K, n_edges).  Each vertex inherits its parent's
    label across an open edge, else labels itself; one top-down sweep suffices.
    """
    K = open_bits.shape[0]
    lab = np.broadcast_to(np.arange(tree.n_total, dtype=np.int32), (K, tree.n_total)).copy()
    for depth in range(1, tree.h + 2):
        rng = tree.depth_range(depth)
        ch = np.arange(rng.start, rng.stop)
        par = (ch - 1) // tree.d
        keep = open_bits[:, ch - 1]
        lab[:, ch] = np.where(keep, lab[:, par], lab[:, ch])
    return lab


def escape_indicators(emb: EmbeddingSpec, open_bits: np.ndarray) -> np.ndarray:
    """(K, m) booleans: c_i joined to the root of its subtree B_i through open edges."""
    lab = bulk_labels(emb.tree, open_bits)
    cs = np.array([g.c for g in emb.gadgets])
    rs = np.array([g.root for g in emb.gadgets])
    return lab[:, cs] == lab[:, rs]


def connected_groups(emb: EmbeddingSpec, open_bits: np.ndarray) -> np.ndarray:
    """|S^ξ(ω)|: number of gadget groups with a bulk path from one of their c's to another group's c."""
    lab = bulk_labels(emb.tree, open_bits)
    groups = emb.gadget_partition()
    group_of = np.empty(emb.m, dtype=np.int64)
    for gi, members in enumerate(groups):
        group_of[members] = gi
    cs = np.array([g.c for g in emb.gadgets])
    cl = lab[:, cs]                                                 # (K, m)
    same = cl[:, :, None] == cl[:, None, :]
    other = group_of[:, None] != group_of[None, :]
    touched = (same & other[None]).any(axis=2)                      # gadget i meets another group
    out = np.zeros(open_bits.shape[0], dtype=np.int64)
    for members in groups:
        out += touched[:, members].any(axis=1)
    return out


@dataclass
class ConductanceReport:
    descriptor: str
    M: int
    m: int
    r: float
    pi_S_star: float
    pi_A: float
    pi_Ac: float
    Q: float
    phi_A: float
    phi_Ac: float
    phi_S_star: float
    pi_R: float
    gap_mhb: float
    gap_edge_hb: float | None
    cheeger_ok: bool
    claim_i: dict
    claim_ii: dict
    conditional_identity_error: float
    S_count_tail: dict

    def to_json(self) -> dict:
        return dict(self.__dict__)


def s_star_mask(descriptor, m: int, pi_hat: np.ndarray | None = None,
                chain: TransitionMatrix | None = None) -> np.ndarray:
    """Indicator over Ĝ edge bitsets for a named or explicit bad set.

    ``"majority"``: more than half of the gadget pairs fully open.
    ``"min-conductance"``: exhaustive search on the pair chain (≤ 16 states).
    A list of integer codes selects those configurations directly.
    """
    N = 2 ** (2 * m)
    if isinstance(descriptor, str):
        if descriptor == "majority":
            both = decode_bits(projection_codes(m), m).sum(axis=1)
            return both > m / 2
        if descriptor == "min-conductance":
            if chain is None:
                raise ValueError("min-conductance needs the pair chain")
            found = min_conductance_set(chain, max_states=16)
            mask = np.zeros(N, dtype=bool)
            mask[found["set"]] = True
            return mask
        raise ValueError(f"unknown S* descriptor {descriptor!r}")
    mask = np.zeros(N, dtype=bool)
    mask[np.asarray(list(descriptor), dtype=np.int64)] = True
    return mask


def bad_set_conductance(G: HostGraph, h: int, ell: int, p_hat: float, q: float, M: int,
                        descriptor="majority", with_edge_gap: bool = True) -> ConductanceReport:
    """Exact conductance of A_M = {ω(W) ∈ S*, |S^ξ(ω(bulk))| ≤ M} under the MHB kernel."""
    emb = embed_boundary(G, h, ell)
    inst = emb.instance
    check_cap(2 ** inst.m, MATRIX_CAP, "random-cluster state space on T_h")
    Ghat = emb.subdivided
    pair = pair_chain(Ghat, p_hat, q)
    Smask = s_star_mask(descriptor, G.m, pair.pi, pair)
    if not Smask.any():
        raise ValueError("S* is empty; conductance is undefined")

    space = rc_space(inst, emb.wiring, p_hat, q)
    N = space.size
    codes = np.arange(N, dtype=np.int64)
    bits = decode_bits(codes, inst.m)
    # Ĝ code of each tree configuration: Ĝ edge 2k is {a_k, c_k}, 2k+1 is {c_k, b_k}
    ghat = np.zeros(N, dtype=np.int64)
    for k, g in enumerate(emb.gadgets):
        ghat |= bits[:, g.edge_a].astype(np.int64) << (2 * k)
        ghat |= bits[:, g.edge_b].astype(np.int64) << (2 * k + 1)
    bulk = np.zeros_like(bits)
    bulk[:, emb.bulk_edges] = bits[:, emb.bulk_edges]
    s_count = connected_groups(emb, bulk)
    in_R = s_count <= M
    A = Smask[ghat] & in_R
    pi = space.pi
    pi_A = float(pi[A].sum())
    if pi_A <= 0 or pi_A >= 1:
        raise ValueError(f"A_M has mass {pi_A}; conductance of A_M or its complement is undefined")

    spec = emb.mhb_spec(p_hat, q)
    I = len(spec.interior)
    g = len(spec.gadgets)
    blocks = [[gd.edge_a, gd.edge_b] for gd in emb.gadgets]
    weights = [1.0 / I] * g
    if I > g:
        blocks.append(emb.bulk_edges)
        weights.append((I - g) / I)
    op = HeatBathOperator(space, blocks, weights)
    mhb = TransitionMatrix(op.dense() if N <= DENSE_CAP else op, pi, "mhb", psd=False)
    ind = A.astype(np.float64)
    Q = max(pi_A - float((ind * mhb.apply(ind)) @ pi), 0.0)
    gap = spectral_gap(mhb).spectral_gap
    phi_A, phi_Ac = Q / pi_A, Q / (1 - pi_A)
    gap_edge = spectral_gap(rc_edge_hb_matrix(inst, emb.wiring, p_hat, q)).spectral_gap \
        if with_edge_gap else None

    pi_hat = pair.pi
    pS = float(pi_hat[Smask].sum())
    indS = Smask.astype(np.float64)
    QS = max(pS - float((indS * pair.apply(indS)) @ pi_hat), 0.0)
    pi_R = float(pi[in_R].sum())
    # with the bulk closed the gadget law is the random-cluster law of Ĝ
    closed = ~bits[:, emb.bulk_edges].any(axis=1)
    cond = np.bincount(ghat[closed], weights=pi[closed], minlength=pi_hat.size)
    cond_err = float(np.abs(cond / cond.sum() - pi_hat).max())
    lower_i = q ** (-M) * pi_R * pS
    lower_ii = q ** (-M) * pi_R * (1 - pS)
    return ConductanceReport(
        descriptor=str(descriptor), M=int(M), m=G.m, r=p_hat ** (ell - 1),
        pi_S_star=pS, pi_A=pi_A, pi_Ac=1 - pi_A, Q=Q, phi_A=phi_A, phi_Ac=phi_Ac,
        phi_S_star=QS / pS if pS > 0 else math.inf, pi_R=pi_R,
        gap_mhb=gap, gap_edge_hb=gap_edge,
        cheeger_ok=bool(gap <= 2 * max(phi_A, phi_Ac) + 1e-9),
        claim_i={"pi_A": pi_A, "lower": lower_i, "holds": bool(pi_A >= lower_i)},
        claim_ii={"pi_Ac": 1 - pi_A, "lower": lower_ii, "holds": bool(1 - pi_A >= lower_ii)},
        conditional_identity_error=cond_err,
        S_count_tail={int(k): float(pi[s_count == k].sum()) for k in np.unique(s_count)},
    )


# ---------------------------------------------------------------------------
# tail of the bulk connection count under the dominating percolation
# ---------------------------------------------------------------------------

@dataclass
class TailReport:
    m: int
    ell: int
    h: int
    p_hat: float
    M: int
    r: float
    samples: int
    seed: int
    frequency: float
    frequency_ci: tuple[float, float]
    binomial_tail: float
    oracle_interval: tuple[float, float]
    inside: bool
    frequency_groups: float
    groups_below_oracle: bool
    max_cov_z: float
    independence_ok: bool
    mean_escapes: float

    def to_json(self) -> dict:
        out = dict(self.__dict__)
        out["frequency_ci"] = list(self.frequency_ci)
        out["oracle_interval"] = list(self.oracle_interval)
        return out


def minimal_height(m: int, ell: int) -> int:
    return ell + max(0, math.ceil(math.log2(max(m, 1))))


def sample_percolation(n_edges: int, p: float, samples: int, seed: int,
                       chunk: int = 20000) -> Iterable[np.ndarray]:
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    done = 0
    while done < samples:
        k = min(chunk, samples - done)
        yield rng.random((k, n_edges)) < p
        done += k


def tail_monte_carlo(emb: EmbeddingSpec, p_hat: float, M: int, samples: int = 100000,
                     seed: int = 0, level: float = 0.99) -> TailReport:
    """Frequency of more than M escaping gadgets under Bernoulli(p̂) bulk percolation.

    A gadget escapes when c_i is joined to the root of B_i; the escape
    indicators use disjoint edge sets, so their count is Binomial(m, p̂^(ℓ-1))
    and that binomial tail serves as the oracle.  The count of connected
    wiring groups is reported alongside; it never exceeds the escape count.
    """
    m, ell = emb.m, emb.ell
    r = p_hat ** (ell - 1)
    bulk = np.array(emb.bulk_edges)
    exceed = exceed_groups = 0
    s1 = np.zeros(m)
    s2 = np.zeros((m, m))
    for chunk in sample_percolation(len(bulk), p_hat, samples, seed):
        bits = np.zeros((chunk.shape[0], emb.instance.m), dtype=bool)
        bits[:, bulk] = chunk
        esc = escape_indicators(emb, bits)
        exceed += int((esc.sum(axis=1) > M).sum())
        exceed_groups += int((connected_groups(emb, bits) > M).sum())
        x = esc.astype(np.float64)
        s1 += x.sum(axis=0)
        s2 += x.T @ x
    freq = exceed / samples
    tail = float(scipy.stats.binom.sf(M, m, r))
    alpha = 1 - level
    lo = float(scipy.stats.binom.ppf(alpha / 2, samples, tail)) / samples
    hi = float(scipy.stats.binom.ppf(1 - alpha / 2, samples, tail)) / samples
    ci = scipy.stats.binomtest(exceed, samples).proportion_ci(level, method="exact")
    mean = s1 / samples
    cov = s2 / samples - np.outer(mean, mean)
    var = np.clip(np.diag(cov), 0, None)
    se = np.sqrt(np.outer(var, var) / samples)
    iu = np.triu_indices(m, 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(se[iu] > 0, np.abs(cov[iu]) / se[iu], 0.0)
    max_z = float(z.max()) if z.size else 0.0
    n_pairs = max(len(iu[0]), 1)
    z_crit = float(scipy.stats.norm.isf(alpha / (2 * n_pairs)))
    freq_g = exceed_groups / samples
    return TailReport(m, ell, emb.h, p_hat, int(M), r, samples, seed, freq,
                      (float(ci.low), float(ci.high)), tail, (lo, hi), bool(lo <= freq <= hi),
                      freq_g, bool(freq_g <= hi), max_z, bool(max_z <= z_crit),
                      float(mean.mean()) if m else 0.0)
