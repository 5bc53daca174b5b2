"""Exact Potts, random-cluster and Edwards-Sokal measures on small instances.

Spins take values in ``{0, ..., q-1}``.  Spin configurations of the internal
vertices are encoded as base-q integers, little-endian over the breadth-first
vertex order (vertex 0 is the least significant digit).  Edge configurations
are bitsets over the deterministic edge order of the instance.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .tree import ExactInfeasibleError, TreeTopology

TABLE_CAP = 2 ** 24


# ---------------------------------------------------------------------------
# parameters and boundary conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PottsParams:
    """Potts parameters.  ``p = 1 - exp(-beta)`` is the percolation probability."""

    q: int
    beta: float

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 1:
            raise ValueError(f"q must be a positive integer, got q={self.q}")
        if not (self.beta >= 0) or not math.isfinite(self.beta):
            raise ValueError(f"beta must be finite and >= 0, got beta={self.beta}")
        if self.p >= 1.0:
            raise ValueError(f"beta={self.beta} gives p=1 in floating point; not supported")

    @property
    def p(self) -> float:
        return -math.expm1(-self.beta)

    @classmethod
    def from_p(cls, q: int, p: float) -> "PottsParams":
        if not 0 <= p < 1:
            raise ValueError(f"p must lie in [0, 1), got p={p}")
        return cls(q, -math.log1p(-p))

    def p_min_bound(self, d: int) -> float:
        """Lower bound exp(-beta (d+1)) / q on single-site conditional probabilities."""
        return math.exp(-self.beta * (d + 1)) / self.q

    def p_min(self, d: int) -> float:
        """Exact minimum single-site conditional probability on the d-ary tree."""
        if self.q == 1:
            return 1.0
        a = math.exp(-self.beta * (d + 1))
        return a / (a * (self.q - 1) + 1.0)


@dataclass(frozen=True)
class SpinBoundary:
    """Fixed spins on the boundary slots; ``spins is None`` means free boundary."""

    spins: tuple[int, ...] | None
    kind: str = "list"

    @classmethod
    def mono(cls, tree: TreeTopology, k: int = 0) -> "SpinBoundary":
        return cls(tuple([int(k)] * tree.n_boundary), "mono")

    @classmethod
    def from_list(cls, tree: TreeTopology, spins: Sequence[int]) -> "SpinBoundary":
        if len(spins) != tree.n_boundary:
            raise ValueError(f"boundary needs {tree.n_boundary} spins, got {len(spins)}")
        return cls(tuple(int(s) for s in spins), "list")

    @classmethod
    def random(cls, tree: TreeTopology, q: int, seed: int) -> "SpinBoundary":
        rng = np.random.Generator(np.random.Philox(int(seed)))
        return cls(tuple(int(s) for s in rng.integers(0, q, tree.n_boundary)), "list")

    @classmethod
    def free(cls) -> "SpinBoundary":
        return cls(None, "free")

    @property
    def is_free(self) -> bool:
        return self.spins is None

    @property
    def is_mono(self) -> bool:
        return self.spins is not None and len(set(self.spins)) <= 1

    def array(self) -> np.ndarray | None:
        return None if self.spins is None else np.asarray(self.spins, dtype=np.int64)

    def validate(self, tree: TreeTopology, q: int) -> None:
        if self.spins is None:
            return
        if len(self.spins) != tree.n_boundary:
            raise ValueError(f"boundary has {len(self.spins)} spins, tree needs {tree.n_boundary}")
        if min(self.spins) < 0 or max(self.spins) >= q:
            raise ValueError(f"boundary spins must lie in [0, {q})")

    def to_json(self) -> dict:
        if self.spins is None:
            return {"kind": "free"}
        if self.kind == "mono" and self.is_mono:
            return {"kind": "mono", "spin": self.spins[0]}
        return {"kind": "list", "spins": list(self.spins)}

    @classmethod
    def from_json(cls, tree: TreeTopology, obj: dict | str, q: int | None = None) -> "SpinBoundary":
        if isinstance(obj, str):
            obj = json.loads(obj)
        kind = obj.get("kind")
        if kind == "mono":
            return cls.mono(tree, int(obj.get("spin", 0)))
        if kind == "list":
            return cls.from_list(tree, obj["spins"])
        if kind == "free":
            return cls.free()
        if kind == "random":
            if q is None:
                raise ValueError("random boundary needs q")
            return cls.random(tree, q, int(obj.get("seed", 0)))
        raise ValueError(f"unknown spin boundary kind {kind!r}")


@dataclass(frozen=True)
class RCBoundary:
    """Partition of boundary vertices into wiring classes (absolute vertex ids)."""

    classes: tuple[tuple[int, ...], ...]
    kind: str = "partition"

    def __post_init__(self):
        seen: set = set()
        for c in self.classes:
            for v in c:
                if v in seen:
                    raise ValueError(f"wiring classes overlap at vertex {v}")
                seen.add(v)

    @classmethod
    def free(cls, boundary: Iterable[int]) -> "RCBoundary":
        return cls(tuple((int(v),) for v in boundary), "free")

    @classmethod
    def wired(cls, boundary: Iterable[int]) -> "RCBoundary":
        b = tuple(int(v) for v in boundary)
        return cls((b,) if b else (), "wired")

    @classmethod
    def partition(cls, classes: Iterable[Iterable[int]]) -> "RCBoundary":
        cl = (tuple(int(v) for v in c) for c in classes)
        return cls(tuple(c for c in cl if c), "partition")

    @property
    def vertices(self) -> tuple[int, ...]:
        return tuple(v for c in self.classes for v in c)

    @property
    def is_wired(self) -> bool:
        return len(self.classes) == 1

    def covers(self, boundary: Iterable[int]) -> bool:
        return sorted(self.vertices) == sorted(int(v) for v in boundary)

    def to_json(self) -> dict:
        if self.kind in ("free", "wired"):
            return {"kind": self.kind}
        return {"kind": "partition", "classes": [list(c) for c in self.classes]}

    @classmethod
    def from_json(cls, obj: dict | str, boundary: Sequence[int]) -> "RCBoundary":
        if isinstance(obj, str):
            obj = json.loads(obj)
        kind = obj.get("kind")
        if kind == "free":
            return cls.free(boundary)
        if kind == "wired":
            return cls.wired(boundary)
        if kind == "partition":
            out = cls.partition(obj["classes"])
            if not out.covers(boundary):
                raise ValueError("partition classes must cover the boundary exactly")
            return out
        raise ValueError(f"unknown RC boundary kind {kind!r}")


@dataclass(frozen=True)
class RCInstance:
    """A graph for random-cluster purposes: vertices 0..V-1, ordered edges, boundary set."""

    num_vertices: int
    edges: tuple[tuple[int, int], ...]
    boundary: tuple[int, ...] = ()

    @classmethod
    def from_tree(cls, tree: TreeTopology) -> "RCInstance":
        return cls(tree.n_total, tuple(map(tuple, tree.edges.tolist())), tuple(tree.boundary_slots))

    @classmethod
    def from_edges(cls, num_vertices: int, edges: Iterable[tuple[int, int]]) -> "RCInstance":
        return cls(int(num_vertices), tuple((int(u), int(v)) for u, v in edges), ())

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_array(self) -> np.ndarray:
        return np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)

    @property
    def inner_vertices(self) -> list[int]:
        b = set(self.boundary)
        return [v for v in range(self.num_vertices) if v not in b]


# ---------------------------------------------------------------------------
# encodings
# ---------------------------------------------------------------------------

def check_cap(size: int, cap: int, what: str) -> None:
    if size > cap:
        raise ExactInfeasibleError(f"exact mode infeasible: {what} has {size} entries, cap is {cap}")


def decode_base_q(codes: np.ndarray, n: int, q: int) -> np.ndarray:
    """(K,) integer codes -> (K, n) digit array, little-endian."""
    codes = np.asarray(codes, dtype=np.int64)
    out = np.empty((codes.size, n), dtype=np.int8)
    c = codes.copy()
    for v in range(n):
        out[:, v] = c % q
        c //= q
    return out


def encode_base_q(configs: np.ndarray, q: int) -> np.ndarray:
    configs = np.asarray(configs, dtype=np.int64)
    weights = q ** np.arange(configs.shape[-1], dtype=np.int64)
    return configs @ weights


def all_spin_configs(n: int, q: int) -> np.ndarray:
    return decode_base_q(np.arange(q ** n), n, q)


def decode_bits(codes: np.ndarray, m: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    return ((codes[:, None] >> np.arange(m)) & 1).astype(bool)


def encode_bits(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    return bits @ (np.int64(1) << np.arange(bits.shape[-1], dtype=np.int64))


def full_spins(tree: TreeTopology, sigma: np.ndarray, tau: SpinBoundary) -> np.ndarray:
    """Append boundary spins (or -1 for a free boundary) to internal configurations."""
    sigma = np.asarray(sigma)
    lead = sigma.shape[:-1]
    if tau.is_free:
        bd = np.full(lead + (tree.n_boundary,), -1, dtype=sigma.dtype)
    else:
        bd = np.broadcast_to(tau.array().astype(sigma.dtype), lead + (tree.n_boundary,))
    return np.concatenate([sigma, bd], axis=-1)


def monochromatic_mask(tree: TreeTopology, sigma: np.ndarray, tau: SpinBoundary) -> np.ndarray:
    """M(σ) as a boolean array over E(T ∪ ∂T) (leading axes broadcast).

    With a free boundary the leaf-to-boundary edges carry no interaction and are
    reported as not monochromatic.
    """
    full = full_spins(tree, sigma, tau)
    par = tree.edges[:, 0]
    ch = tree.edges[:, 1]
    mono = full[..., par] == full[..., ch]
    if tau.is_free:
        mono[..., tree.n_internal_edges:] = False
    return mono


def bichromatic_count(tree: TreeTopology, sigma: np.ndarray, tau: SpinBoundary) -> np.ndarray:
    full = full_spins(tree, sigma, tau)
    par = tree.edges[:, 0]
    ch = tree.edges[:, 1]
    bi = full[..., par] != full[..., ch]
    if tau.is_free:
        bi[..., tree.n_internal_edges:] = False
    return bi.sum(axis=-1)


# ---------------------------------------------------------------------------
# measure tables
# ---------------------------------------------------------------------------

@dataclass
class MeasureTable:
    """Enumerated measure: support codes, log weights and normalized probabilities."""

    codes: np.ndarray
    logw: np.ndarray
    space: dict = field(default_factory=dict)

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.int64)
        self.logw = np.asarray(self.logw, dtype=np.float64)
        finite = np.isfinite(self.logw)
        top = self.logw[finite].max() if finite.any() else 0.0
        w = np.where(finite, np.exp(self.logw - top), 0.0)
        s = w.sum()
        if s <= 0:
            raise ValueError("measure has zero total mass")
        self.log_z = float(top + math.log(s))
        self.probs = w / s

    @property
    def weights(self) -> np.ndarray:
        return np.where(np.isfinite(self.logw), np.exp(self.logw), 0.0)

    @property
    def Z(self) -> float:
        return math.exp(self.log_z)

    def prob_of(self, code: int) -> float:
        idx = np.nonzero(self.codes == code)[0]
        return float(self.probs[idx].sum())

    def as_dense(self, size: int) -> np.ndarray:
        out = np.zeros(size)
        np.add.at(out, self.codes, self.probs)
        return out

    def marginal(self, keys: np.ndarray) -> dict:
        """Push the measure forward through integer keys (one key per support point)."""
        keys = np.asarray(keys)
        uniq, inv = np.unique(keys, return_inverse=True, axis=0)
        mass = np.bincount(inv.ravel(), weights=self.probs, minlength=len(uniq))
        return {"keys": uniq, "probs": mass}

    def conditional(self, mask: np.ndarray) -> "MeasureTable":
        mask = np.asarray(mask, dtype=bool)
        return MeasureTable(self.codes[mask], self.logw[mask], dict(self.space, conditioned=True))


def potts_measure(tree: TreeTopology, region: Iterable[int] | None, eta: np.ndarray | None,
                  params: PottsParams, tau: SpinBoundary, cap: int = TABLE_CAP) -> MeasureTable:
    """μ_A^η on the tree: configurations agree with ``eta`` off ``region``.

    Codes are base-q encodings of the full internal configuration.  The log
    weight is -beta times the number of bichromatic edges meeting the region
    (edges of E(A ∪ ∂A), leaf-to-boundary edges included).
    """
    q = params.q
    tau.validate(tree, q)
    region = sorted(set(range(tree.n)) if region is None else set(int(v) for v in region))
    check_cap(q ** len(region), cap, f"potts table over region of size {len(region)}")
    base = np.zeros(tree.n, dtype=np.int8) if eta is None else np.asarray(eta, dtype=np.int8).copy()
    local = all_spin_configs(len(region), q)
    configs = np.broadcast_to(base, (local.shape[0], tree.n)).copy()
    configs[:, region] = local
    full = full_spins(tree, configs, tau)
    in_region = np.zeros(tree.n_total, dtype=bool)
    in_region[region] = True
    par, ch = tree.edges[:, 0], tree.edges[:, 1]
    touches = in_region[par] | in_region[ch]
    if tau.is_free:
        touches[tree.n_internal_edges:] = False
    bi = (full[:, par[touches]] != full[:, ch[touches]]).sum(axis=1)
    logw = -params.beta * bi.astype(np.float64)
    codes = encode_base_q(configs, q)
    return MeasureTable(codes, logw, {"kind": "potts", "q": q, "n": tree.n, "region": region})


# ---------------------------------------------------------------------------
# connected components
# ---------------------------------------------------------------------------

class UnionFind:
    """Disjoint sets with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


@dataclass
class ComponentReport:
    labels: np.ndarray          # component representative per vertex
    c_xi: int                   # components with wiring classes merged
    c: int                      # components containing no boundary vertex
    c_block: int | None         # components fully inside the block (and not touching ∂)
    mono: np.ndarray | None = None   # M(σ) if a spin configuration was supplied
    bi: np.ndarray | None = None     # D(σ)


def components(instance: RCInstance, A: np.ndarray | int, wiring: RCBoundary | None = None,
               block: Iterable[int] | None = None,
               sigma_full: np.ndarray | None = None) -> ComponentReport:
    """Union-find component accounting for one edge configuration."""
    m = instance.m
    bits = decode_bits(np.array([A]), m)[0] if np.isscalar(A) or np.ndim(A) == 0 else np.asarray(A, bool)
    uf = UnionFind(instance.num_vertices)
    if wiring is not None:
        for cls in wiring.classes:
            for v in cls[1:]:
                uf.union(cls[0], v)
    for e in np.nonzero(bits)[0]:
        u, v = instance.edges[e]
        uf.union(u, v)
    labels = np.array([uf.find(v) for v in range(instance.num_vertices)])
    roots = set(labels.tolist())
    bd_roots = {labels[b] for b in instance.boundary}
    c = len(roots - bd_roots)
    c_block = None
    if block is not None:
        inside = set(int(v) for v in block)
        bad = {labels[v] for v in range(instance.num_vertices) if v not in inside}
        c_block = len(roots - bad - bd_roots)
    mono = bi = None
    if sigma_full is not None:
        s = np.asarray(sigma_full)
        ea = instance.edge_array
        mono = s[ea[:, 0]] == s[ea[:, 1]]
        bi = ~mono
    return ComponentReport(labels, len(roots), c, c_block, mono, bi)


def component_counts(instance: RCInstance, masks: np.ndarray, wiring: RCBoundary | None = None,
                     block: Iterable[int] | None = None) -> dict:
    """Vectorized component counts for many edge configurations at once.

    ``masks`` is a (K, m) boolean array.  Returns a dict with arrays ``c_xi``
    (wiring merged), ``c`` (components avoiding the boundary) and, if a block
    is given, ``c_block`` (components inside the block avoiding the boundary).
    Works by min-label propagation until a fixed point is reached.
    """
    masks = np.asarray(masks, dtype=bool)
    K = masks.shape[0]
    V = instance.num_vertices
    dtype = np.int16 if V < 32000 else np.int32
    lab = np.broadcast_to(np.arange(V, dtype=dtype), (K, V)).copy()
    classes = [] if wiring is None else [np.asarray(c) for c in wiring.classes if len(c) > 1]
    for cls in classes:
        lab[:, cls] = cls.min()
    ea = instance.edge_array
    while True:
        changed = False
        for e in range(instance.m):
            u, v = ea[e]
            act = masks[:, e]
            if not act.any():
                continue
            lu, lv = lab[:, u], lab[:, v]
            mn = np.minimum(lu, lv)
            upd = act & (lu != lv)
            if upd.any():
                changed = True
                lab[upd, u] = mn[upd]
                lab[upd, v] = mn[upd]
        for cls in classes:
            mn = lab[:, cls].min(axis=1)
            if (lab[:, cls] != mn[:, None]).any():
                changed = True
                lab[:, cls] = mn[:, None]
        if not changed:
            break
    # at the fixed point every vertex carries the smallest index of its component
    rows = np.arange(K)
    is_root = lab == np.arange(V, dtype=dtype)
    out = {"c_xi": is_root.sum(axis=1), "labels": lab}
    touched = np.zeros((K, V), dtype=bool)
    for b in instance.boundary:
        touched[rows, lab[:, b]] = True
    out["c"] = (is_root & ~touched).sum(axis=1)
    if block is not None:
        inside = np.zeros(V, dtype=bool)
        inside[list(block)] = True
        bad = touched.copy()
        for v in np.nonzero(~inside)[0]:
            bad[rows, lab[:, v]] = True
        out["c_block"] = (is_root & ~bad).sum(axis=1)
    return out


def log_bernoulli_weight(k: np.ndarray, m: int, p: float) -> np.ndarray:
    """log of p^k (1-p)^(m-k), with 0^0 = 1 and log 0 = -inf."""
    k = np.asarray(k, dtype=np.float64)
    out = np.zeros_like(k)
    if p > 0:
        out += k * math.log(p)
    else:
        out[k > 0] = -np.inf
    if p < 1:
        out += (m - k) * math.log1p(-p)
    else:
        out[k < m] = -np.inf
    return out


def rc_measure(instance: RCInstance, xi: RCBoundary | None, p: float, q: float,
               cap: int = TABLE_CAP) -> MeasureTable:
    """Random-cluster measure over all edge subsets, wiring classes merged."""
    m = instance.m
    check_cap(2 ** m, cap, f"random-cluster table over {m} edges")
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0,1], got {p}")
    codes = np.arange(2 ** m, dtype=np.int64)
    bits = decode_bits(codes, m)
    k = bits.sum(axis=1)
    cc = component_counts(instance, bits, xi)["c_xi"].astype(np.float64)
    logw = log_bernoulli_weight(k, m, p) + cc * math.log(q)
    return MeasureTable(codes, logw, {"kind": "rc", "m": m, "p": p, "q": q})


def percolation_measure(m: int, p: float) -> np.ndarray:
    """Product Bernoulli(p) measure on {0,1}^m as a dense vector over bitset codes."""
    bits = decode_bits(np.arange(2 ** m), m)
    k = bits.sum(axis=1)
    return p ** k * (1 - p) ** (m - k)


def free_rc_edge_probability(p: float, q: float) -> float:
    return p / (q * (1 - p) + p)


def edwards_sokal_measure(tree: TreeTopology, tau: SpinBoundary, params: PottsParams,
                          cap: int = TABLE_CAP) -> MeasureTable:
    """Joint measure ν(A, σ) ∝ p^|A| (1-p)^|E\\A| 1(A ⊆ M(σ)).

    Codes are ``code(σ) * 2**m + bits(A)``.  Edges of E(T ∪ ∂T) are used; with
    a free boundary the leaf-to-boundary edges are dropped from the edge set.
    """
    q, p = params.q, params.p
    m = tree.n_edges if not tau.is_free else tree.n_internal_edges
    check_cap(q ** tree.n * 2 ** m, cap, "Edwards-Sokal joint table")
    sig = all_spin_configs(tree.n, q)
    mono = monochromatic_mask(tree, sig, tau)[:, :m]
    edge_codes = np.arange(2 ** m, dtype=np.int64)
    bits = decode_bits(edge_codes, m)
    k = bits.sum(axis=1)
    mono_codes = encode_bits(mono)
    ok = (edge_codes[None, :] & ~mono_codes[:, None]) == 0     # A ⊆ M(σ)
    base = log_bernoulli_weight(k, m, p)
    logw = np.where(ok, base[None, :], -np.inf)
    codes = np.arange(q ** tree.n, dtype=np.int64)[:, None] * 2 ** m + edge_codes[None, :]
    keep = ok.ravel()
    return MeasureTable(codes.ravel()[keep], logw.ravel()[keep],
                        {"kind": "edwards-sokal", "m": m, "q": q, "n": tree.n})


def boundary_induced_wiring(tree: TreeTopology, tau: SpinBoundary) -> RCBoundary:
    """Boundary slots grouped by their fixed spin."""
    if tau.is_free:
        return RCBoundary.free(tree.boundary_slots)
    groups: dict = {}
    for j, s in enumerate(tau.spins):
        groups.setdefault(s, []).append(tree.n + j)
    return RCBoundary.partition(groups[s] for s in sorted(groups))
