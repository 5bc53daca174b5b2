"""Finite-size experiments around the logarithmic lower bound for SW on trees.

* :func:`lb_experiment` runs the coupled pair (X, Y): X is ordinary SW on the
  whole tree; Y only recolours components inside the union B of the bottom
  subtrees B_i.  It records how often disagreements stay away from the test
  edges e_i, the one-step surplus of the events A_i, and a plug-in TV lower
  bound built from the monochromatic count f.
* :func:`cmd_check` evaluates the complete-monotonicity bound for a PSD chain
  started from π restricted to an event.
* :func:`decay_profile` computes, by exact message passing, how much the
  marginal of the left-most leaf edge depends on the spin above the root.
* :func:`mixing_scaling` tabulates τ_mix across tree heights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.stats
from scipy.special import logsumexp

from .dynamics import ChainState, CoupledState, coupled_sw_step, sw_step
from .exact import (DENSE_CAP, MATRIX_CAP, TransitionMatrix, _symmetrized, gibbs_space,
                    worst_start_mixing)
from .model import (PottsParams, RCBoundary, SpinBoundary, all_spin_configs, check_cap,
                    encode_base_q)
from .rng import AUX, cell
from .tree import ExactInfeasibleError, TreeTopology

BLOCK_CAP = 2 ** 20
ALPHAS = (0.125, 0.25, 0.5, 1.0)


# ---------------------------------------------------------------------------
# exact Gibbs tables on one block
# ---------------------------------------------------------------------------

@dataclass
class BlockTable:
    """μ^s_{B_i}: Gibbs law on T_v with spin s fixed above v and τ on ∂T."""

    root: int
    vertices: np.ndarray        # block vertices in breadth-first order
    configs: np.ndarray         # (K, |B|) spins
    probs: np.ndarray           # (K,)
    edge: tuple[int, int]       # test edge e_i as (parent, leaf)
    in_A: np.ndarray            # (K,) endpoints of e_i agree

    @property
    def mu_A(self) -> float:
        return float(self.probs[self.in_A].sum())

    def sample(self, gen: np.random.Generator, size: int, conditioned: bool = False) -> np.ndarray:
        p = np.where(self.in_A, self.probs, 0.0) if conditioned else self.probs
        cdf = np.cumsum(p / p.sum())
        idx = np.minimum(np.searchsorted(cdf, gen.random(size), side="right"), len(cdf) - 1)
        return self.configs[idx]


def block_table(tree: TreeTopology, root: int, tau: SpinBoundary, params: PottsParams,
                parent_spin: int = 0) -> BlockTable:
    q, beta = params.q, params.beta
    verts = np.array(tree.subtree(root))
    check_cap(q ** len(verts), BLOCK_CAP, f"block table over {len(verts)} vertices")
    configs = all_spin_configs(len(verts), q).astype(np.int8)
    pos = {int(v): i for i, v in enumerate(verts)}
    bi = np.zeros(configs.shape[0], dtype=np.int64)
    if root > 0:
        bi += configs[:, 0] != parent_spin
    tau_arr = None if tau.is_free else tau.array()
    for v in verts:
        col = configs[:, pos[int(v)]]
        for c in tree.children(int(v)):
            if c < tree.n:
                bi += col != configs[:, pos[c]]
            elif tau_arr is not None:
                bi += col != tau_arr[c - tree.n]
    logw = -beta * bi
    w = np.exp(logw - logw.max())
    leaf = tree.leftmost_descendant(root, tree.h - tree.depth(root))
    par = tree.parent(leaf)
    if par < root:
        raise ValueError("a block needs height at least 1 to contain a test edge")
    in_A = configs[:, pos[par]] == configs[:, pos[leaf]]
    return BlockTable(root, verts, configs, w / w.sum(), (par, leaf), in_A)


# ---------------------------------------------------------------------------
# the coupled lower-bound experiment
# ---------------------------------------------------------------------------

@dataclass
class LBExperimentSpec:
    d: int = 2
    h: int = 6
    q: int = 2
    beta: float = math.log(2)
    boundary: dict = field(default_factory=lambda: {"kind": "mono", "spin": 0})
    replicas: int = 10000
    alphas: tuple = ALPHAS
    xi: float = 0.5             # R̂ = min(N, floor(n**xi))
    R: int | None = None        # number of test edges in f; defaults to R̂
    stationary_samples: int = 10000
    level: float = 0.99

    def __post_init__(self):
        if self.h < 1:
            raise ValueError("the experiment needs h >= 1")
        self.alphas = tuple(float(a) for a in self.alphas)

    @property
    def tree(self) -> TreeTopology:
        return TreeTopology(self.d, self.h)

    @property
    def params(self) -> PottsParams:
        return PottsParams(self.q, self.beta)

    @property
    def k(self) -> int:
        n = self.tree.n
        k = math.ceil(0.5 * math.log(n) / math.log(self.d) - 1e-12)
        return min(max(k, 2), self.h + 1)

    @property
    def block_roots(self) -> list[int]:
        # L_k sits at depth h + 1 - k
        return list(self.tree.depth_range(self.h + 1 - self.k))

    @property
    def N(self) -> int:
        return len(self.block_roots)

    @property
    def R_hat(self) -> int:
        return max(1, min(self.N, int(math.floor(self.tree.n ** self.xi + 1e-12))))

    @property
    def R_used(self) -> int:
        return self.R_hat if self.R is None else max(1, min(int(self.R), self.N))

    def horizons(self) -> list[int]:
        n = self.tree.n
        return [int(math.ceil(a * math.log(n) - 1e-12)) for a in self.alphas]

    def spin_boundary(self) -> SpinBoundary:
        return SpinBoundary.from_json(self.tree, self.boundary, self.q)

    def to_json(self) -> dict:
        return {"d": self.d, "h": self.h, "q": self.q, "beta": self.beta, "boundary": self.boundary,
                "replicas": self.replicas, "alphas": list(self.alphas), "xi": self.xi,
                "R": self.R_used, "R_hat": self.R_hat, "k": self.k, "N": self.N, "n": self.tree.n,
                "stationary_samples": self.stationary_samples, "level": self.level}


def _clopper_pearson(k: int, n: int, level: float) -> tuple[float, float]:
    ci = scipy.stats.binomtest(int(k), int(n)).proportion_ci(level, method="exact")
    return float(ci.low), float(ci.high)


def _poisson_binomial_sf(ps: np.ndarray) -> np.ndarray:
    """P(sum of independent Bernoulli(ps) >= a) for a = 0..len(ps)."""
    pmf = np.array([1.0])
    for p in ps:
        pmf = np.convolve(pmf, [1 - p, p])
    return np.cumsum(pmf[::-1])[::-1]


def _hoeffding(R: int, W: float) -> dict:
    band = math.sqrt(R * math.log(R)) if R > 1 else 0.0
    return {"W": W, "band": band, "a": W + band}


def lb_experiment(spec: LBExperimentSpec, seed: int = 0) -> dict:
    """Coupled SW pair from the lower-bound starting state; one row per α."""
    tree, params = spec.tree, spec.params
    q, p = params.q, params.p
    tau = spec.spin_boundary()
    tables = [block_table(tree, r, tau, params, 0) for r in spec.block_roots]
    mu_A = np.array([t.mu_A for t in tables])
    R, Rhat, reps = spec.R_used, spec.R_hat, spec.replicas

    # starting state: U = T \ B at spin 0, each block from μ^0 conditioned on A_i
    gen = cell(seed, 0, AUX, stream=1)
    X0 = np.zeros((reps, tree.n), dtype=np.int8)
    inB = np.zeros(tree.n, dtype=bool)
    for t in tables:
        X0[:, t.vertices] = t.sample(gen, reps, conditioned=True)
        inB[t.vertices] = True
    edges = np.array([t.edge for t in tables])                  # (N, 2)

    horizons = spec.horizons()
    t_max = max(horizons + [1])
    cs = CoupledState(X0, X0.copy(), seed, 0, 0)
    snapshots = {}
    for step in range(1, t_max + 1):
        cs = coupled_sw_step(cs, tree, tau, params, restriction=inB)
        snapshots[step] = (cs.X.copy(), cs.Y.copy())
    snapshots[0] = (X0, X0.copy())

    # one-step surplus of A_i under Y, per block
    Y1 = snapshots[1][1]
    freq1 = (Y1[:, edges[:, 0]] == Y1[:, edges[:, 1]]).mean(axis=0)
    sigma1 = np.sqrt(np.maximum(freq1 * (1 - freq1), 1e-300) / reps)
    surplus = freq1 - mu_A
    floor = (1 - mu_A) * (q - 1) * p / q
    surplus_ok = surplus >= floor - 3 * sigma1

    # stationary reference for f: exact Poisson-binomial and an independent sample
    sf_exact = _poisson_binomial_sf(mu_A[:R])
    gen_s = cell(seed, 0, AUX, stream=2)
    f_stat = np.zeros(spec.stationary_samples, dtype=np.int64)
    for t in tables[:R]:
        s = t.sample(gen_s, spec.stationary_samples)
        f_stat += s[:, np.searchsorted(t.vertices, t.edge[0])] == s[:, np.searchsorted(t.vertices, t.edge[1])]
    hoeff = _hoeffding(R, float(mu_A[:R].sum()))
    contract = (q - 1) * p / q

    rows = []
    for alpha, tau_steps in zip(spec.alphas, horizons):
        X, Y = snapshots[tau_steps]
        agree = np.ones(reps, dtype=bool)
        for i in range(Rhat):
            agree &= (X[:, edges[i]] == Y[:, edges[i]]).all(axis=1)
        k_agree = int(agree.sum())
        lo, hi = _clopper_pearson(k_agree, reps, spec.level)
        mono = Y[:, edges[:R, 0]] == Y[:, edges[:R, 1]]
        f_Y = mono.sum(axis=1)
        grid = np.arange(R + 1)
        pY = np.array([(f_Y >= a).mean() for a in grid])
        pS = np.array([(f_stat >= a).mean() for a in grid])
        tv_plugin = float(np.max(pY - pS))
        tv_exact_ref = float(np.max(pY - sf_exact))
        a_idx = min(int(math.ceil(hoeff["a"] - 1e-12)), R + 1)
        pA = mono.mean(axis=0)
        cmd_lower = mu_A[:R] + (1 - mu_A[:R]) * contract ** tau_steps
        # disagreement must travel k edges; the per-step reach is dominated by Geom(1 - p)
        reach = float(scipy.stats.nbinom.sf(spec.k - 1, max(tau_steps, 1), 1 - p)) if tau_steps else 0.0
        rows.append({
            "alpha": alpha, "tau": tau_steps,
            "containment": k_agree / reps, "containment_ci": [lo, hi],
            "containment_ok": bool(lo >= 0.9),
            "dp_union_bound": max(0.0, 1.0 - Rhat * reach),
            "f_mean": float(f_Y.mean()), "W": hoeff["W"], "hoeffding_a": hoeff["a"],
            "P_f_ge_a": float(pY[a_idx]) if a_idx <= R else 0.0,
            "P_stat_f_ge_a": float(sf_exact[a_idx]) if a_idx <= R else 0.0,
            "tv_plugin": tv_plugin, "tv_vs_exact_stationary": tv_exact_ref,
            "P_A_mean": float(pA.mean()), "cmd_lower_mean": float(cmd_lower.mean()),
            "cmd_margin_min": float(np.min(pA - cmd_lower)),
        })
    return {
        "spec": spec.to_json(), "seed": seed,
        "blocks": [{"root": t.root, "edge": list(t.edge), "mu_A": t.mu_A} for t in tables],
        "surplus": {"freq_Y1": freq1.tolist(), "sigma": sigma1.tolist(), "mu_A": mu_A.tolist(),
                    "surplus": surplus.tolist(), "floor": floor.tolist(),
                    "ok": surplus_ok.tolist(), "all_ok": bool(surplus_ok.all())},
        "rows": rows,
        "containment_ok_any": any(r["containment_ok"] for r in rows),
    }


# ---------------------------------------------------------------------------
# complete monotonicity
# ---------------------------------------------------------------------------

@dataclass
class CMDRow:
    t: int
    prob: float
    bound: float
    pi_B: float
    violation: float


def cmd_check(tm: TransitionMatrix, B: np.ndarray, horizon: int = 50, psd_tol: float = 1e-12) -> dict:
    """Pr(X_t ∈ B) against π(B) + (1-π(B))^(1-t) (Pr(X_1 ∈ B) - π(B))^t for t ≤ horizon."""
    P = tm.dense()
    pi = tm.pi
    lam_min = float(scipy.linalg.eigvalsh(_symmetrized(P, pi))[0])
    if lam_min < -psd_tol:
        raise ValueError(f"transition matrix is not positive semidefinite (λ_min = {lam_min:.3e})")
    B = np.asarray(B, dtype=bool)
    if not B.any():
        raise ValueError("event B is empty")
    pB = float(pi[B].sum())
    D = np.where(B, pi, 0.0) / pB
    rows = []
    p1 = None
    for t in range(0, horizon + 1):
        prob = float(D[B].sum())
        if t == 1:
            p1 = prob
        if t == 0 or pB >= 1.0:
            bound = pB if t else 1.0
        else:
            gap = 1.0 - pB
            bound = pB + gap * ((p1 - pB) / gap) ** t
        viol = max(bound - prob, pB - prob, 0.0)
        rows.append(CMDRow(t, prob, bound, pB, viol))
        D = D @ P
    worst = max(r.violation for r in rows)
    return {"pi_B": pB, "lambda_min": lam_min, "rows": [r.__dict__ for r in rows],
            "max_violation": worst, "holds": bool(worst <= 1e-12)}


def random_events(n_states: int, count: int, seed: int) -> list[np.ndarray]:
    gen = cell(seed, 0, AUX, stream=3)
    out = []
    while len(out) < count:
        B = gen.random(n_states) < gen.uniform(0.1, 0.9)
        if B.any() and not B.all():
            out.append(B)
    return out


# ---------------------------------------------------------------------------
# decay of the leaf-edge marginal
# ---------------------------------------------------------------------------

def _subtree_messages(tree: TreeTopology, tau: SpinBoundary, beta: float, q: int) -> np.ndarray:
    """log m_v(s): log partition function of T_v (with its boundary edges) given σ_v = s."""
    spins = np.arange(q)
    kern = -beta * (spins[:, None] != spins[None, :])
    logm = np.zeros((tree.n, q))
    tau_arr = None if tau.is_free else tau.array()
    for depth in range(tree.h, -1, -1):
        for v in tree.depth_range(depth):
            acc = np.zeros(q)
            for c in tree.children(v):
                if c < tree.n:
                    acc += logsumexp(kern + logm[c][None, :], axis=1)
                elif tau_arr is not None:
                    acc += kern[:, tau_arr[c - tree.n]]
            logm[v] = acc
    return logm


def leaf_edge_marginal(tree: TreeTopology, tau: SpinBoundary, beta: float, q: int, top: int) -> np.ndarray:
    """(q, q) law of (σ_parent, σ_leaf) on the left-most leaf edge, spin ``top`` above the root."""
    if tree.h < 1:
        raise ValueError("the tree needs height >= 1 to have a leaf edge")
    spins = np.arange(q)
    kern = -beta * (spins[:, None] != spins[None, :])
    logm = _subtree_messages(tree, tau, beta, q)
    path = [0]
    while len(path) <= tree.h:
        path.append(tree.d * path[-1] + 1)
    # forward messages down the left-most path
    fwd = kern[top].copy()                                   # log weight of σ_root
    for a, b in zip(path[:-1], path[1:]):
        off = logm[a] - logsumexp(kern + logm[b][None, :], axis=1)   # a's weight without child b
        if b == path[-1]:
            joint = (fwd + off)[:, None] + kern + logm[b][None, :]
            joint = np.exp(joint - joint.max())
            return joint / joint.sum()
        fwd = logsumexp((fwd + off)[:, None] + kern, axis=0)
    raise AssertionError("unreachable")


@dataclass
class DecayProfile:
    heights: list
    tv: list
    rate: float | None
    delta_hat: float | None
    residuals: list
    ratios: list

    def to_json(self) -> dict:
        return dict(self.__dict__)


def decay_profile(d: int, heights: Sequence[int], q: int, beta: float,
                  boundary: dict | None = None, pair: tuple[int, int] = (0, 1)) -> DecayProfile:
    """TV between leaf-edge marginals under spins i and j above the root, per height."""
    boundary = boundary or {"kind": "free"}
    i, j = pair
    tvs = []
    for H in heights:
        tree = TreeTopology(d, int(H))
        tau = SpinBoundary.from_json(tree, boundary, q)
        mi = leaf_edge_marginal(tree, tau, beta, q, i)
        mj = leaf_edge_marginal(tree, tau, beta, q, j)
        tvs.append(float(min(1.0, 0.5 * np.abs(mi - mj).sum())))
    hs = np.asarray(heights, dtype=np.float64)
    tv = np.asarray(tvs)
    pos = tv > 1e-300
    rate = residuals = None
    if pos.sum() >= 2:
        slope, icpt = np.polyfit(hs[pos], np.log(tv[pos]), 1)
        rate = float(-slope)
        residuals = (np.log(tv[pos]) - (slope * hs[pos] + icpt)).tolist()
    ratios = [float(b / a) if a > 0 else 0.0 for a, b in zip(tv[:-1], tv[1:])]
    delta = float(1 - max(ratios)) if ratios and pos.all() else None
    return DecayProfile([int(x) for x in heights], tvs, rate, delta, residuals or [], ratios)


# ---------------------------------------------------------------------------
# scaling of the mixing time
# ---------------------------------------------------------------------------

def _fit(x: np.ndarray, y: np.ndarray) -> dict:
    A = np.stack([np.ones_like(x), x], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return {"intercept": float(coef[0]), "slope": float(coef[1]), "rms_residual": res}


def _empirical_tv(tree: TreeTopology, tau: SpinBoundary, params: PottsParams, replicas: int,
                  t_max: int, seed: int, start_spin: int) -> list[float]:
    space = gibbs_space(tree, tau, params, cap=2 ** 20)
    pi = space.pi
    state = ChainState(np.full((replicas, tree.n), start_spin, dtype=np.int8), seed)
    out = []
    for _ in range(t_max):
        state = sw_step(state, tree, tau, params)
        codes = encode_base_q(state.config, params.q)
        emp = np.bincount(codes, minlength=pi.size) / replicas
        out.append(float(0.5 * np.abs(emp - pi).sum()))
    return out


def mixing_scaling(chain: str, heights: Sequence[int], d: int = 2, q: int = 2,
                   beta: float = math.log(2), boundary: dict | None = None,
                   mode: str = "exact", t_max: int = 10000, replicas: int = 20000,
                   seed: int = 0, eps: float = 0.25) -> dict:
    """τ_mix per height with fits against log n and against n.

    Exact mode runs worst-start τ_mix on the enumerated chain and refuses
    spaces larger than 2**16 states.  Statistical mode (SW only) estimates
    the TV curve from replicated runs started at the all-(q-1) state.
    """
    params = PottsParams(q, beta)
    rows = []
    for H in heights:
        tree = TreeTopology(d, int(H))
        row = {"h": int(H), "n": tree.n}
        if mode == "exact":
            if chain in ("rc-edge", "rc-sw", "single-bond"):
                size = 2 ** tree.n_edges
                xi = RCBoundary.from_json(boundary or {"kind": "wired"}, list(tree.boundary_slots))
                tau = None
            else:
                size = q ** tree.n
                tau = SpinBoundary.from_json(tree, boundary or {"kind": "mono", "spin": 0}, q)
                xi = None
            row["states"] = size
            if size > MATRIX_CAP:
                row.update({"t_mix": None, "status": f"infeasible: {size} states exceed cap {MATRIX_CAP}"})
                rows.append(row)
                continue
            rep = worst_start_mixing(chain, tree, params, tau=tau, xi=xi, t_max=t_max)
            row.update({"t_mix": rep.t_mix, "gap": rep.gap, "bracket_ok": rep.bracket_ok,
                        "status": "ok"})
        elif mode == "statistical":
            if chain != "sw":
                raise ValueError("statistical mode is implemented for chain 'sw' only")
            tau = SpinBoundary.from_json(tree, boundary or {"kind": "mono", "spin": 0}, q)
            tvs = _empirical_tv(tree, tau, params, replicas, min(t_max, 200), seed, q - 1)
            hit = [t + 1 for t, v in enumerate(tvs) if v <= eps]
            row.update({"t_mix": hit[0] if hit else None, "tv_curve": tvs, "status": "ok",
                        "states": q ** tree.n})
        else:
            raise ValueError(f"unknown mode {mode!r}")
        rows.append(row)
    ok = [r for r in rows if r.get("t_mix") is not None]
    fits = {}
    if len(ok) >= 2:
        n = np.array([r["n"] for r in ok], dtype=np.float64)
        t = np.array([r["t_mix"] for r in ok], dtype=np.float64)
        fits = {"log_n": _fit(np.log(n), t), "n": _fit(n, t)}
        fits["better"] = "log_n" if fits["log_n"]["rms_residual"] <= fits["n"]["rms_residual"] else "n"
    for r in rows:
        if r.get("t_mix") is not None:
            r["t_over_log"] = r["t_mix"] / (r["h"] + 1)
            r["t_over_nlogn"] = r["t_mix"] / (r["n"] * math.log(r["n"])) if r["n"] > 1 else None
    return {"chain": chain, "d": d, "q": q, "beta": beta, "mode": mode, "rows": rows, "fits": fits,
            "complete": len(ok) == len(rows)}


def trend_summary(table: dict, key: str) -> dict:
    """Non-decrease of τ_mix and the max/min spread of a normalised column."""
    rows = table["rows"]
    if not table["complete"]:
        missing = [r["h"] for r in rows if r.get("t_mix") is None]
        return {"complete": False, "missing_heights": missing, "spread": None,
                "non_decreasing": None}
    t = [r["t_mix"] for r in rows]
    vals = [r[key] for r in rows]
    return {"complete": True, "non_decreasing": all(a <= b for a, b in zip(t, t[1:])),
            "spread": max(vals) / min(vals), "values": vals}
