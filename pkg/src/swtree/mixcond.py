"""Spatial-mixing certificates (GVM, VM, PVM, EM) and factorization audits.

GVM for a joint law ρ on Φ×Ψ is a statement about the up-down walk P↑P↓:
its second eigenvalue is the squared second singular value of
K = D_ν^{-1/2} ρ D_π^{-1/2}.  VM and PVM apply this to marginals of
conditional Gibbs measures, so both reduce to batches of small SVDs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.optimize

from .dynamics import BlockSpec
from .exact import (TensorMeasure, dirichlet_form_pairs, gibbs_space, heat_bath_matrix,
                    spectral_gap)
from .model import (PottsParams, SpinBoundary, all_spin_configs, check_cap,
                    potts_measure, decode_base_q)
from .tree import TreeTopology, decompose, level_sets

EXHAUSTIVE_CAP = 2 ** 20


# ---------------------------------------------------------------------------
# general variance mixing for a joint distribution
# ---------------------------------------------------------------------------

@dataclass
class UpDownPair:
    rho: np.ndarray           # joint law, rows indexed by Φ, columns by Ψ
    nu: np.ndarray            # marginal on Φ
    pi: np.ndarray            # marginal on Ψ
    P_up: np.ndarray          # P↑(x, y) = ρ(y | x)
    P_down: np.ndarray        # P↓(y, x) = ρ(x | y)
    eps: float                # λ2(P↑P↓)
    witness: np.ndarray | None
    degenerate: bool
    checks: dict = field(default_factory=dict)

    def ratio(self, f: np.ndarray) -> np.ndarray:
        """Var_π(P↓f) / Var_ν(f) for functions f on Φ (batched on leading axes)."""
        f = np.asarray(f, dtype=np.float64)
        f = f - (f @ self.nu)[..., None]          # centring first avoids cancellation
        g = f @ self.P_down.T
        g = g - (g @ self.pi)[..., None]
        vf = f ** 2 @ self.nu
        vg = g ** 2 @ self.pi
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(vf > 0, vg / vf, np.nan)


def _sigma2_batch(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Second singular value of the normalized joint for a stack of joints."""
    rho = np.asarray(rho, dtype=np.float64)
    nu = rho.sum(axis=2)
    pi = rho.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        K = rho / np.sqrt(nu[:, :, None] * pi[:, None, :])
    K = np.nan_to_num(K)
    if min(K.shape[1:]) < 2:
        return np.zeros(K.shape[0]), K
    s = np.linalg.svd(K, compute_uv=False)
    return s[:, 1], K


def updown_gap(rho: np.ndarray) -> UpDownPair:
    """ε_GVM = λ2(P↑P↓) of a joint law, with the second eigenvector as witness."""
    rho = np.asarray(rho, dtype=np.float64)
    if rho.ndim != 2 or (rho < 0).any():
        raise ValueError("rho must be a nonnegative matrix")
    rho = rho / rho.sum()
    nu, pi = rho.sum(axis=1), rho.sum(axis=0)
    if (nu <= 0).any() or (pi <= 0).any():
        raise ValueError("rho must have strictly positive marginals (drop empty rows/columns)")
    P_up = rho / nu[:, None]
    P_down = rho.T / pi[:, None]
    checks = {
        "P_up_rows": float(np.abs(P_up.sum(axis=1) - 1).max()),
        "P_down_rows": float(np.abs(P_down.sum(axis=1) - 1).max()),
        "nu_P_up": float(np.abs(nu @ P_up - pi).max()),
        "pi_P_down": float(np.abs(pi @ P_down - nu).max()),
    }
    a = np.linalg.eigvals(P_up @ P_down)
    b = np.linalg.eigvals(P_down @ P_up)
    k = min(a.size, b.size)
    a_sorted = np.sort(np.abs(a))[::-1][:k]
    b_sorted = np.sort(np.abs(b))[::-1][:k]
    checks["shared_spectrum"] = float(np.abs(a_sorted - b_sorted).max())
    if min(rho.shape) <= 1:
        return UpDownPair(rho, nu, pi, P_up, P_down, 0.0, None, True, checks)
    K = rho / np.sqrt(nu[:, None] * pi[None, :])
    U, s, _ = np.linalg.svd(K)
    witness = U[:, 1] / np.sqrt(nu)
    return UpDownPair(rho, nu, pi, P_up, P_down, float(s[1] ** 2), witness, False, checks)


def variational_sup(pair: UpDownPair, n_functions: int = 10_000, seed: int = 0,
                    refine_steps: int = 400) -> dict:
    """Largest Var_π(P↓f)/Var_ν(f) over random test functions.

    Each random start is refined by power iteration with P↑P↓ on mean-zero
    functions, which only moves f uphill in the Rayleigh quotient; the raw
    (unrefined) maximum is reported alongside.
    """
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((n_functions, pair.nu.size))
    raw = float(np.nanmax(pair.ratio(F))) if pair.nu.size > 1 else 0.0
    M = pair.P_up @ pair.P_down
    for _ in range(refine_steps):
        F = F - (F @ pair.nu)[:, None]
        F = F @ M.T
        F /= np.maximum(np.abs(F).max(axis=1, keepdims=True), 1e-300)
    r = pair.ratio(F)
    best = float(np.nanmax(r)) if np.isfinite(r).any() else 0.0
    return {"sup": max(best, raw), "raw_sup": raw, "n_functions": n_functions, "seed": seed,
            "refine_steps": refine_steps}


# ---------------------------------------------------------------------------
# VM / PVM on trees
# ---------------------------------------------------------------------------

@dataclass
class MixingCertificate:
    condition: str
    ell: int
    eps: float
    instance: dict
    witness: dict
    mode: str
    details: list = field(default_factory=list)
    lower_bound: bool = False
    note: str = ""

    def to_json(self) -> dict:
        return {"condition": self.condition, "ell": self.ell, "eps": self.eps,
                "instance": self.instance, "witness": self.witness, "mode": self.mode,
                "lower_bound": self.lower_bound, "note": self.note, "details": self.details}


def _instance(tree, tau, params) -> dict:
    return {"d": tree.d, "h": tree.h, "q": params.q, "beta": params.beta, "boundary": tau.to_json()}


def _compact(digits: np.ndarray, S: Sequence[int], q: int) -> np.ndarray:
    S = list(S)
    if not S:
        return np.zeros(digits.shape[0], dtype=np.int64)
    return digits[:, S].astype(np.int64) @ (q ** np.arange(len(S), dtype=np.int64))


class GibbsTable:
    """The full Gibbs measure with its digit table, for exhaustive η sweeps."""

    def __init__(self, tree: TreeTopology, tau: SpinBoundary, params: PottsParams):
        check_cap(params.q ** tree.n, EXHAUSTIVE_CAP, "exhaustive Gibbs table")
        self.tree, self.tau, self.params = tree, tau, params
        self.space = gibbs_space(tree, tau, params)
        self.mu = self.space.pi
        self.digits = all_spin_configs(tree.n, params.q)

    def joints(self, region: Iterable[int], phi: Sequence[int], psi: Sequence[int]):
        """ρ^η(x_Φ, y_Ψ) for every η outside ``region``: (η codes, (n_η, |Φ|, |Ψ|))."""
        q = self.params.q
        region = set(region)
        outside = [v for v in range(self.tree.n) if v not in region]
        eta_key = _compact(self.digits, outside, q)
        etas, inv = np.unique(eta_key, return_inverse=True)
        rho = np.zeros((etas.size, q ** len(phi), q ** len(psi)))
        np.add.at(rho, (inv, _compact(self.digits, phi, q), _compact(self.digits, psi, q)), self.mu)
        rho /= rho.sum(axis=(1, 2), keepdims=True)
        return etas, rho, outside


def _sampled_joint(tree, tau, params, region, phi, psi, eta_full):
    q = params.q
    tab = potts_measure(tree, region, eta_full, params, tau)
    dig = decode_base_q(tab.codes, tree.n, q)
    rho = np.zeros((q ** len(phi), q ** len(psi)))
    np.add.at(rho, (_compact(dig, phi, q), _compact(dig, psi, q)), tab.probs)
    return rho


def _vm_sites(tree: TreeTopology, ell: int):
    for v in tree.vertices:
        Tv = tree.subtree(v)
        ball = set(tree.ball(v, ell))
        phi = [u for u in Tv if u not in ball]
        yield v, Tv, phi


def _eta_samples(tree, outside, q, budget, rng):
    """Uniformly random outside configurations (every η is admissible)."""
    if not outside:
        return np.zeros((1, tree.n), dtype=np.int8)
    return rng.integers(0, q, size=(budget, tree.n)).astype(np.int8)


def vm_epsilon(tree: TreeTopology, tau: SpinBoundary, ell: int, params: PottsParams,
               mode: str = "exhaustive", budget: int = 64, seed: int = 0,
               table: GibbsTable | None = None) -> MixingCertificate:
    """ε_VM = max over v and η of λ2 for the marginal of μ_{T_v}^η on (T_v \\ B(v,ℓ)) × {v}."""
    if ell < 1:
        raise ValueError(f"ell must be >= 1, got {ell}")
    q = params.q
    best, witness, details = 0.0, {}, []
    rng = np.random.default_rng(seed)
    if mode == "exhaustive":
        table = table or GibbsTable(tree, tau, params)
    for v, Tv, phi in _vm_sites(tree, ell):
        if not phi:
            details.append({"v": v, "eps": 0.0, "degenerate": True})
            continue
        if mode == "exhaustive":
            etas, rho, _ = table.joints(Tv, phi, [v])
            s2, _ = _sigma2_batch(rho)
            lam = s2 ** 2
            k = int(np.argmax(lam))
            site = {"v": v, "eps": float(lam[k]), "eta": int(etas[k]), "n_eta": int(etas.size)}
        elif mode == "sampled":
            outside = [u for u in tree.vertices if u not in set(Tv)]
            samples = _eta_samples(tree, outside, q, budget, rng)
            lam = np.array([_sigma2_batch(_sampled_joint(tree, tau, params, Tv, phi, [v], e)[None])[0][0] ** 2
                            for e in samples])
            k = int(np.argmax(lam))
            site = {"v": v, "eps": float(lam[k]), "eta": samples[k].tolist(), "n_eta": int(len(samples))}
        else:
            raise ValueError(f"unknown mode {mode!r}")
        details.append(site)
        if site["eps"] > best or not witness:
            best, witness = site["eps"], {"v": v, "eta": site["eta"]}
    note = "" if mode == "exhaustive" else f"max over {budget} sampled η per site (seed {seed}); not a bound for every η"
    return MixingCertificate("VM", ell, float(best), _instance(tree, tau, params), witness, mode,
                             details, note=note)


def pvm_epsilon(tree: TreeTopology, tau: SpinBoundary, ell: int, params: PottsParams,
                mode: str = "exhaustive", budget: int = 64, seed: int = 0,
                table: GibbsTable | None = None, per_vertex: bool = True) -> MixingCertificate:
    """ε_PVM = max over levels i and η of λ2 for the marginal of μ_{F_i}^η on F_{i-ℓ} × L_i.

    With ``per_vertex`` the level gap is also compared with the smallest
    single-subtree gap under the same η (the level chain is a product chain).
    """
    if ell < 1:
        raise ValueError(f"ell must be >= 1, got {ell}")
    q = params.q
    lv = level_sets(tree)
    rng = np.random.default_rng(seed)
    if mode == "exhaustive":
        table = table or GibbsTable(tree, tau, params)
    best, witness, details = 0.0, {}, []
    for i in range(1, tree.h + 2):
        Fi = sorted(lv.F(i))
        phi = sorted(lv.F(i - ell))
        psi = sorted(lv.level(i))
        if not phi:
            details.append({"i": i, "eps": 0.0, "degenerate": True})
            continue
        if mode == "exhaustive":
            etas, rho, _ = table.joints(Fi, phi, psi)
            s2, _ = _sigma2_batch(rho)
            lam = s2 ** 2
            k = int(np.argmax(lam))
            site = {"i": i, "eps": float(lam[k]), "eta": int(etas[k]), "n_eta": int(etas.size)}
            if per_vertex:
                vmax = np.zeros(etas.size)
                for v in psi:
                    phi_v = [u for u in phi if u in set(tree.subtree(v))]
                    if not phi_v:
                        continue
                    e_v, rho_v, _ = table.joints(Fi, phi_v, [v])
                    vmax = np.maximum(vmax, _sigma2_batch(rho_v)[0] ** 2)
                # gap(Q_{L_i}) = 1 - λ2(level) and min_v gap(Q_v) = 1 - max_v λ2(Q_v)
                site["product_gap_error"] = float(np.abs(lam - vmax).max())
        elif mode == "sampled":
            outside = [u for u in tree.vertices if u not in set(Fi)]
            samples = _eta_samples(tree, outside, q, budget, rng)
            lam = np.array([_sigma2_batch(_sampled_joint(tree, tau, params, Fi, phi, psi, e)[None])[0][0] ** 2
                            for e in samples])
            k = int(np.argmax(lam))
            site = {"i": i, "eps": float(lam[k]), "eta": samples[k].tolist(), "n_eta": int(len(samples))}
        else:
            raise ValueError(f"unknown mode {mode!r}")
        details.append(site)
        if site["eps"] > best or not witness:
            best, witness = site["eps"], {"i": i, "eta": site["eta"]}
    note = "" if mode == "exhaustive" else f"max over {budget} sampled η per level (seed {seed}); not a bound for every η"
    return MixingCertificate("PVM", ell, float(best), _instance(tree, tau, params), witness, mode,
                             details, note=note)


def pvm_epsilon_field(table: GibbsTable, ell: int) -> dict:
    """Per-level arrays ε_i(σ) = λ2 for η = σ outside F_i (functions on Ω)."""
    tree, q = table.tree, table.params.q
    lv = level_sets(tree)
    out = {}
    for i in range(1, tree.h + 2):
        Fi = sorted(lv.F(i))
        phi = sorted(lv.F(i - ell))
        if not phi:
            out[i] = np.zeros(table.mu.size)
            continue
        etas, rho, outside = table.joints(Fi, phi, sorted(lv.level(i)))
        lam = _sigma2_batch(rho)[0] ** 2
        key = _compact(table.digits, outside, q)
        out[i] = lam[np.searchsorted(etas, key)]
    return out


# ---------------------------------------------------------------------------
# entropy mixing (lower-bound estimate)
# ---------------------------------------------------------------------------

def _ent(w: np.ndarray, g: np.ndarray) -> float:
    m = float(w @ g)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(g > 0, g * np.log(np.where(g > 0, g, 1.0)), 0.0)
    return float(w @ t) - (m * math.log(m) if m > 0 else 0.0)


def entropy_ratio_max(rho: np.ndarray, restarts: int = 16, seed: int = 0,
                      bound: float = 30.0) -> dict:
    """max over g ≥ 0 on Φ of Ent_π(P↓g)/Ent_ν(g), by L-BFGS-B on log g with restarts."""
    rho = np.asarray(rho, dtype=np.float64)
    rho = rho / rho.sum()
    nu, pi = rho.sum(axis=1), rho.sum(axis=0)
    a, b = rho.shape
    if a <= 1 or b <= 1:
        return {"ratio": 0.0, "g": None, "degenerate": True}
    P_down = rho.T / pi[:, None]

    def neg_ratio(theta):
        g = np.exp(theta)
        u = P_down @ g
        m = float(nu @ g)
        lm = math.log(m)
        lu = np.log(u)
        A = float(pi @ (u * lu)) - m * lm
        B = float(nu @ (g * theta)) - m * lm
        if B <= 1e-300:
            return 0.0, np.zeros_like(theta)
        dA = rho @ lu - nu * lm
        dB = nu * (theta - lm)
        grad = g * (dA * B - A * dB) / B ** 2
        return -A / B, -grad

    rng = np.random.default_rng(seed)
    best = (-1.0, None)
    for r in range(restarts):
        scale = [0.5, 2.0, 8.0][r % 3]
        th0 = np.clip(rng.standard_normal(a) * scale, -bound, bound)
        res = scipy.optimize.minimize(neg_ratio, th0, jac=True, method="L-BFGS-B",
                                      bounds=[(-bound, bound)] * a,
                                      options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 2000})
        val = -float(res.fun)
        if val > best[0]:
            best = (val, np.exp(res.x))
    g = best[1]
    # recompute at the optimum with the plain formula
    ratio = _ent(pi, P_down @ g) / _ent(nu, g)
    return {"ratio": float(min(max(ratio, 0.0), 1.0)), "g": g, "degenerate": False}


def em_epsilon_estimate(tree: TreeTopology, tau: SpinBoundary, ell: int, params: PottsParams,
                        restarts: int = 16, seed: int = 0, mode: str = "exhaustive",
                        budget: int = 16, table: GibbsTable | None = None) -> MixingCertificate:
    """Lower bound on the EM constant ε(ℓ): best entropy ratio found over (v, η, g)."""
    q = params.q
    rng = np.random.default_rng(seed)
    if mode == "exhaustive":
        table = table or GibbsTable(tree, tau, params)
    best, witness, details = 0.0, {}, []
    for v, Tv, phi in _vm_sites(tree, ell):
        if not phi:
            details.append({"v": v, "eps": 0.0, "degenerate": True})
            continue
        if mode == "exhaustive":
            etas, rho, _ = table.joints(Tv, phi, [v])
        else:
            outside = [u for u in tree.vertices if u not in set(Tv)]
            samples = _eta_samples(tree, outside, q, budget, rng)
            etas = np.arange(len(samples))
            rho = np.stack([_sampled_joint(tree, tau, params, Tv, phi, [v], e) for e in samples])
        # identical joints (η differing only far away) are optimized once
        seen: dict = {}
        site_best, site_eta = 0.0, None
        for k in range(rho.shape[0]):
            key = np.round(rho[k], 13).tobytes()
            if key not in seen:
                seen[key] = entropy_ratio_max(rho[k], restarts, seed)["ratio"]
            if seen[key] > site_best or site_eta is None:
                site_best, site_eta = seen[key], int(etas[k])
        details.append({"v": v, "eps": site_best, "eta": site_eta, "distinct_joints": len(seen)})
        if site_best > best or not witness:
            best, witness = site_best, {"v": v, "eta": site_eta}
    return MixingCertificate("EM", ell, float(best), _instance(tree, tau, params), witness, mode,
                             details, lower_bound=True,
                             note="lower bound: best ratio found by L-BFGS-B with random restarts")


# ---------------------------------------------------------------------------
# factorization audit
# ---------------------------------------------------------------------------

def random_test_functions(digits: np.ndarray, q: int, k: int, rng: np.random.Generator,
                          positive: bool = False) -> np.ndarray:
    """A mix of test functions: Gaussian, heavy-tailed, indicators and local spin functions."""
    N, n = digits.shape
    parts = []
    k4 = k // 4
    parts.append(rng.standard_normal((k4, N)))
    parts.append(rng.standard_t(2, size=(k4, N)))
    parts.append((rng.random((k4, N)) < rng.random((k4, 1))).astype(np.float64))
    rest = k - 3 * k4
    local = np.empty((rest, N))
    onehot = np.eye(q)[digits.astype(np.int64)]            # (N, n, q)
    for r in range(rest):
        size = int(rng.integers(1, n + 1))
        S = rng.choice(n, size=size, replace=False)
        coef = rng.standard_normal((size, q))
        local[r] = np.einsum("nsq,sq->n", onehot[:, S, :], coef)
        if rng.random() < 0.5:
            local[r] = local[r] ** 2
    parts.append(local)
    F = np.concatenate(parts, axis=0)
    if positive:
        F = np.exp(np.clip(F, -30, 30))
    return F


@dataclass
class InequalityResult:
    name: str
    applicable: bool
    evaluated: int
    skipped: int
    min_slack: float | None
    worst_ratio: float | None
    holds: bool | None
    note: str = ""

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _result(name, lhs, rhs, tol, note="", applicable=True):
    """Inequality lhs ≥ rhs, evaluated entrywise; zero-lhs samples are skipped for ratios."""
    lhs, rhs = np.asarray(lhs, float).ravel(), np.asarray(rhs, float).ravel()
    scale = np.maximum(1.0, np.abs(lhs))
    slack = (lhs - rhs) / scale
    live = lhs > 1e-14
    ratio = float((rhs[live] / lhs[live]).max()) if live.any() else None
    return InequalityResult(name, applicable, int(lhs.size), int((~live).sum()),
                            float(slack.min()), ratio, bool(slack.min() >= -tol), note)


def _rel_err(a, b) -> float:
    """Largest |a-b| / max(1, |b|)."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float((np.abs(a - b) / np.maximum(1.0, np.abs(b))).max())


@dataclass
class AuditReport:
    instance: dict
    ell: int
    eps_pvm: float
    delta: float
    eps_em: float | None
    p_min: float
    results: list
    identities: dict
    constants: dict
    gap_tb: float
    gap_tb_bound: float | None

    def to_json(self) -> dict:
        return {"instance": self.instance, "ell": self.ell, "eps_pvm": self.eps_pvm,
                "delta": self.delta, "eps_em": self.eps_em, "p_min": self.p_min,
                "results": [r.to_json() for r in self.results], "identities": self.identities,
                "constants": self.constants, "gap_tb": self.gap_tb, "gap_tb_bound": self.gap_tb_bound}

    def failed(self) -> list:
        return [r.name for r in self.results if r.applicable and r.holds is False]


def factorization_audit(tree: TreeTopology, tau: SpinBoundary, params: PottsParams, ell: int,
                        n_functions: int = 10_000, seed: int = 0, tol: float = 1e-12,
                        em_restarts: int = 8, batch: int = 2500) -> AuditReport:
    """Evaluate the variance/entropy factorization inequalities on random test functions."""
    table = GibbsTable(tree, tau, params)
    sp: TensorMeasure = table.space
    lv, fam = decompose(tree, ell)
    h = tree.h
    tiles = [sorted(t) for t in fam.tiles]
    eps_pvm = pvm_epsilon(tree, tau, ell, params, table=table, per_vertex=False).eps
    delta = 1.0 - 2 * (ell + 1) * eps_pvm
    eps_field = pvm_epsilon_field(table, ell)
    em = em_epsilon_estimate(tree, tau, ell, params, restarts=em_restarts, seed=seed, table=table)
    p_min = params.p_min(tree.d)
    em_applicable = em.eps < p_min ** 2
    eps_prime = math.sqrt(em.eps) / p_min if em_applicable else None
    P_tb = heat_bath_matrix(tree, tau, params, BlockSpec.tiled(tree, ell))
    gap_tb = spectral_gap(P_tb).gap
    P_dense = P_tb.dense()
    even, odd = sorted(lv.even), sorted(lv.odd)
    V = list(tree.vertices)

    rng = np.random.default_rng(seed)
    acc: dict = {}

    def add(name, lhs, rhs):
        acc.setdefault(name, ([], []))
        acc[name][0].append(np.ravel(lhs))
        acc[name][1].append(np.ravel(rhs))

    dirichlet_err = tlv_err = tle_err = 0.0
    ceo = ctb = 0.0
    eo_den_min = math.inf
    done = 0
    while done < n_functions:
        k = min(batch, n_functions - done)
        F = random_test_functions(table.digits, params.q, k, rng)
        G = random_test_functions(table.digits, params.q, k, rng, positive=True)
        done += k
        E = sp.expect
        var_f = sp.var(F)
        ent_g = sp.ent(G)
        tile_var = sum(E(sp.cond_var(F, t)) for t in tiles)
        tile_ent = sum(E(sp.cond_ent(G, t)) for t in tiles)
        blk_var = np.zeros(k)
        blk_ent = np.zeros(k)
        for i in range(1, h + 2):
            Bi = sorted(fam.B(i))
            Fm = sorted(lv.F(i - ell - 1))
            blk_var += E(sp.cond_var(sp.cond_expect(F, Fm), Bi))
            blk_ent += E(sp.cond_ent(sp.cond_expect(G, Fm), Bi))
        # Dirichlet form of the tiled block dynamics against its variance form
        e_tb = dirichlet_form_pairs(P_dense, sp.pi, F)
        dirichlet_err = max(dirichlet_err, _rel_err(e_tb, tile_var / (ell + 1)))
        add("tile-block-variance", tile_var, blk_var)
        add("tile-block-entropy", tile_ent, blk_ent)
        if delta > 0:
            add("block-variance-total", (2.0 / delta) * blk_var, var_f)
        # parallel variance factorization, pointwise in η for every level
        for i in range(1, h + 2):
            Fi = sorted(lv.F(i))
            A = sorted(lv.F(i - 1))
            Bi = sorted(fam.B(i))
            Ap = sorted(lv.F(i - ell - 1))
            e = eps_field[i]
            ok = e < 0.5
            if not ok.any():
                continue
            c1 = 2 * (1 - e) / (1 - 2 * np.where(ok, e, 0))
            c2 = 2 * e / (1 - 2 * np.where(ok, e, 0))
            lhs1 = sp.cond_var(sp.cond_expect(F, A), Fi)
            rhs1 = c1 * sp.cond_expect(sp.cond_var(F, Bi), Fi) + c2 * sp.cond_expect(sp.cond_var(F, A), Fi)
            add("parallel-variance", rhs1[:, ok], lhs1[:, ok])
            FA = sp.cond_expect(F, Ap)
            rhs2 = c1 * sp.cond_expect(sp.cond_var(FA, Bi), Fi) + c2 * sp.cond_expect(sp.cond_var(FA, A), Fi)
            add("parallel-variance-projected", rhs2[:, ok], lhs1[:, ok])
            if em_applicable:
                lhs = (1 - eps_prime) * sp.cond_ent(G, Fi)
                rhs = sp.cond_expect(sp.cond_ent(G, Bi), Fi) + sp.cond_expect(sp.cond_ent(G, A), Fi)
                add("level-entropy", rhs, lhs)
        # laws of total variance and entropy for a random split
        Asub = sorted(rng.choice(tree.n, size=max(1, tree.n // 2), replace=False).tolist())
        tlv_err = max(tlv_err, _rel_err(var_f, E(sp.cond_var(F, Asub)) + sp.var(sp.cond_expect(F, Asub))))
        tle_err = max(tle_err, _rel_err(ent_g, E(sp.cond_ent(G, Asub)) + sp.ent(sp.cond_expect(G, Asub))))
        # constants of the entropy factorizations
        eo = E(sp.cond_ent(G, even)) + E(sp.cond_ent(G, odd))
        live = ent_g > 1e-12
        if live.any():
            ceo = max(ceo, float((ent_g[live] / eo[live]).max()))
            ctb = max(ctb, float((ent_g[live] / tile_ent[live]).max()))
            eo_den_min = min(eo_den_min, float((eo[live] / ent_g[live]).min()))

    results = []
    for name in ["tile-block-variance", "block-variance-total", "parallel-variance", "parallel-variance-projected",
                 "tile-block-entropy", "level-entropy"]:
        if name in acc:
            results.append(_result(name, np.concatenate(acc[name][0]), np.concatenate(acc[name][1]), tol))
        else:
            why = {"block-variance-total": f"delta = {delta:.6g} <= 0",
                   "level-entropy": f"EM estimate {em.eps:.6g} >= p_min^2 = {p_min ** 2:.6g}",
                   }.get(name, "no (i, eta) with eps < 1/2")
            results.append(InequalityResult(name, False, 0, 0, None, None, None, why))
    results.append(InequalityResult(
        "even-odd-entropy", True, n_functions, 0, None, ceo, bool(np.isfinite(ceo) and eo_den_min > 0),
        "C_EO estimated as the largest observed ratio; holds means every nonconstant g has a "
        "positive even/odd denominator"))
    gap_bound = delta / (2 * (ell + 1)) if delta > 0 else None
    if gap_bound is not None:
        results.append(InequalityResult("tiled-gap", True, 1, 0, gap_tb - gap_bound,
                                        gap_bound / gap_tb, bool(gap_tb >= gap_bound - 1e-9)))
    else:
        results.append(InequalityResult("tiled-gap", False, 0, 0, None, None, None, f"delta = {delta:.6g} <= 0"))
    return AuditReport(
        instance=_instance(tree, tau, params), ell=ell, eps_pvm=eps_pvm, delta=delta,
        eps_em=em.eps, p_min=p_min, results=results,
        identities={"dirichlet_tiles": dirichlet_err, "total_variance": tlv_err, "total_entropy": tle_err},
        constants={"C_EO": ceo, "C_TB": ctb}, gap_tb=gap_tb, gap_tb_bound=gap_bound)
