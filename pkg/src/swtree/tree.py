"""Complete d-ary trees, their external boundary, and level/block decompositions.

Indexing conventions
--------------------
Vertices are numbered breadth-first with the root at 0, so the children of
vertex ``v`` are ``d*v + 1, ..., d*v + d`` (left to right).  The boundary
slots hanging below the leaves continue the same numbering: they occupy
indices ``n, ..., n + d**(h+1) - 1``.  Every non-root position ``c`` (internal
or boundary) owns exactly one edge, namely ``(parent(c), c)``, and that edge
gets index ``c - 1``.  Internal edges therefore come first (indices
``0 .. n-2``) followed by the leaf-to-boundary edges.

Levels are counted from the boundary: ``L[1]`` holds the leaves and
``L[h+1] = {root}``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class ExactInfeasibleError(ValueError):
    """Raised when an exact enumeration would exceed its configured cap."""


@dataclass(frozen=True)
class TreeTopology:
    """Complete d-ary tree of height ``h`` together with its boundary slots."""

    d: int
    h: int

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"branching factor d must be an integer >= 2, got d={self.d}")
        if int(self.h) != self.h or self.h < 0:
            raise ValueError(f"height h must be an integer >= 0, got h={self.h}")

    # sizes -----------------------------------------------------------------
    @property
    def n(self) -> int:
        """Number of internal vertices."""
        return (self.d ** (self.h + 1) - 1) // (self.d - 1)

    @property
    def n_boundary(self) -> int:
        return self.d ** (self.h + 1)

    @property
    def n_total(self) -> int:
        """Internal vertices plus boundary slots."""
        return self.n + self.n_boundary

    @property
    def n_edges(self) -> int:
        return self.n_total - 1

    @property
    def n_internal_edges(self) -> int:
        return self.n - 1

    @property
    def vertices(self) -> range:
        return range(self.n)

    @property
    def boundary_slots(self) -> range:
        return range(self.n, self.n_total)

    # adjacency -------------------------------------------------------------
    def parent(self, v: int) -> int:
        if v <= 0 or v >= self.n_total:
            raise ValueError(f"vertex {v} has no parent")
        return (v - 1) // self.d

    def children(self, v: int) -> list[int]:
        """Children of an internal vertex (boundary slots for leaves)."""
        if not 0 <= v < self.n:
            return []
        return list(range(self.d * v + 1, self.d * v + self.d + 1))

    def depth(self, v: int) -> int:
        return int(self.depth_array[v])

    def level(self, v: int) -> int:
        """Distance from the boundary: leaves are at level 1, the root at h+1."""
        return self.h + 1 - self.depth(v)

    def is_leaf(self, v: int) -> bool:
        return self.depth(v) == self.h and v < self.n

    @cached_property
    def parent_array(self) -> np.ndarray:
        """parent_array[c] for c in 1..n_total-1; entry 0 is -1."""
        par = (np.arange(self.n_total) - 1) // self.d
        par[0] = -1
        return par

    @cached_property
    def depth_array(self) -> np.ndarray:
        dep = np.zeros(self.n_total, dtype=np.int64)
        start = 1
        for k in range(1, self.h + 2):
            width = self.d ** k
            dep[start:start + width] = k
            start += width
        return dep

    @cached_property
    def edges(self) -> np.ndarray:
        """Edge list of E(T ∪ ∂T) as an (n_total-1, 2) array of (parent, child)."""
        child = np.arange(1, self.n_total)
        return np.stack([(child - 1) // self.d, child], axis=1)

    def edge_index(self, u: int, v: int) -> int:
        c = max(u, v)
        if self.parent(c) != min(u, v):
            raise ValueError(f"({u}, {v}) is not an edge")
        return c - 1

    def depth_range(self, k: int) -> range:
        """Breadth-first index range of depth ``k`` (k = h+1 gives boundary slots)."""
        start = (self.d ** k - 1) // (self.d - 1)
        return range(start, start + self.d ** k)

    @property
    def leaves(self) -> range:
        return self.depth_range(self.h)

    def subtree(self, v: int) -> list[int]:
        """Internal vertices of T_v (v and all its internal descendants)."""
        out, frontier = [], [v]
        while frontier:
            out.extend(frontier)
            frontier = [c for u in frontier for c in self.children(u) if c < self.n]
        return sorted(out)

    def ball(self, v: int, ell: int) -> list[int]:
        """B(v, ell): vertices of T_v at distance < ell from v."""
        out, frontier = [], [v]
        for _ in range(ell):
            if not frontier:
                break
            out.extend(frontier)
            frontier = [c for u in frontier for c in self.children(u) if c < self.n]
        return sorted(out)

    def leftmost_descendant(self, v: int, steps: int) -> int:
        for _ in range(steps):
            v = self.d * v + 1
        return v

    def distances_from(self, source: int) -> np.ndarray:
        """Breadth-first graph distances on the internal tree T (boundary excluded)."""
        dist = np.full(self.n, -1, dtype=np.int64)
        dist[source] = 0
        queue = deque([source])
        while queue:
            u = queue.popleft()
            nbrs = self.children(u)
            if u > 0:
                nbrs = nbrs + [self.parent(u)]
            for w in nbrs:
                if w < self.n and dist[w] < 0:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return dist

    def describe(self) -> dict:
        return {"d": self.d, "h": self.h, "n": self.n, "n_boundary": self.n_boundary,
                "n_edges": self.n_edges}


def build_tree(d: int, h: int, *, q: int | None = None, cap: int | None = None) -> TreeTopology:
    """Build T_h^d.  When ``q`` and ``cap`` are given, also require q**n <= cap."""
    tree = TreeTopology(d, h)
    if q is not None and cap is not None and q ** tree.n > cap:
        raise ExactInfeasibleError(
            f"exact mode infeasible: q**n = {q}**{tree.n} exceeds cap {cap} (d={d}, h={h})")
    return tree


@dataclass(frozen=True)
class LevelSets:
    """Level sets L_i (distance i from the boundary), prefixes F_i, and parity classes."""

    h: int
    L: tuple[frozenset, ...]
    even: frozenset
    odd: frozenset

    def F(self, i: int) -> frozenset:
        """F_i = union of L_j for j <= i, with F_i = {} for i <= 0 and F_i = V for i > h+1."""
        i = min(i, self.h + 1)
        out: set = set()
        for j in range(1, i + 1):
            out |= self.L[j]
        return frozenset(out)

    def level(self, i: int) -> frozenset:
        if 1 <= i <= self.h + 1:
            return self.L[i]
        return frozenset()


@dataclass(frozen=True)
class BlockFamily:
    """Blocks B_i^ell and the tiled family T_j^ell built from them."""

    ell: int
    levels: LevelSets
    tiles: tuple[frozenset, ...]          # tiles[j-1] = T_j^ell, j = 1..ell+1
    pieces: tuple[tuple[frozenset, ...], ...]  # connected pieces of each tile
    _tree: TreeTopology = field(repr=False, compare=False)

    def B(self, i: int) -> frozenset:
        """B_i^ell = F_i minus F_{i-ell}."""
        return self.levels.F(i) - self.levels.F(i - self.ell)

    def ball(self, v: int) -> frozenset:
        return frozenset(self._tree.ball(v, self.ell))

    def subtree(self, v: int) -> frozenset:
        return frozenset(self._tree.subtree(v))

    def tile(self, j: int) -> frozenset:
        return self.tiles[j - 1]

    @property
    def volume(self) -> int:
        return max(len(p) for ps in self.pieces for p in ps)


def level_sets(tree: TreeTopology) -> LevelSets:
    L = [frozenset()]
    for i in range(1, tree.h + 2):
        L.append(frozenset(tree.depth_range(tree.h + 1 - i)))
    even = frozenset(v for v in tree.vertices if (tree.h - tree.depth(v)) % 2 == 0)
    odd = frozenset(tree.vertices) - even
    return LevelSets(tree.h, tuple(L), even, odd)


def connected_pieces(tree: TreeTopology, vertex_set) -> tuple[frozenset, ...]:
    """Connected components of the subgraph of T induced by ``vertex_set``."""
    vs = set(vertex_set)
    pieces = []
    for v in sorted(vs):
        # a piece is identified by its top vertex: parent outside the set
        if v == 0 or tree.parent(v) not in vs:
            comp, frontier = [], [v]
            while frontier:
                comp.extend(frontier)
                frontier = [c for u in frontier for c in tree.children(u) if c in vs]
            pieces.append(frozenset(comp))
    return tuple(pieces)


def decompose(tree: TreeTopology, ell: int) -> tuple[LevelSets, BlockFamily]:
    """Level sets and the tiled block family for block height ``ell``."""
    if not 1 <= ell <= tree.h + 1:
        raise ValueError(f"ell must satisfy 1 <= ell <= h+1 = {tree.h + 1}, got {ell}")
    lv = level_sets(tree)
    h = tree.h
    tiles = []
    for j in range(1, ell + 2):
        tile: set = set()
        k = 0
        while j + k * (ell + 1) <= h + ell:  # k <= (h + ell - j)/(ell + 1)
            i = j + k * (ell + 1)
            tile |= lv.F(i) - lv.F(i - ell)
            k += 1
        tiles.append(frozenset(tile))
    pieces = tuple(connected_pieces(tree, t) for t in tiles)
    fam = BlockFamily(ell, lv, tuple(tiles), pieces, tree)
    return lv, fam


def tree_info(d: int, h: int, ell: int | None = None) -> dict:
    """JSON-ready description of the tree and (optionally) its decomposition."""
    tree = build_tree(d, h)
    out = tree.describe()
    lv = level_sets(tree)
    out["levels"] = {str(i): sorted(lv.L[i]) for i in range(1, h + 2)}
    out["even"] = sorted(lv.even)
    out["odd"] = sorted(lv.odd)
    if ell is not None:
        _, fam = decompose(tree, ell)
        out["ell"] = ell
        out["blocks"] = {str(i): sorted(fam.B(i)) for i in range(1, h + ell + 1)}
        out["tiles"] = {str(j): sorted(fam.tile(j)) for j in range(1, ell + 2)}
        out["tile_pieces"] = {str(j): [sorted(p) for p in fam.pieces[j - 1]]
                              for j in range(1, ell + 2)}
    return out
