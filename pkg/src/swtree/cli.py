"""Command-line entry point: ``swtree <command> [subcommand] [options]``.

Every run resolves its configuration as defaults < JSON config file < flags,
prints the JSON report to stdout and, with ``--out DIR``, writes
``manifest.json`` first and then the artifacts (``report.json`` plus a CSV
for tabular results).  Floats are written with 17 significant digits.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (BlockSpec, ChainState, block_step, glauber_step, rc_edge_hb_step,
                       rc_sw_step, single_bond_step, sw_step)
from .exact import (RC_CHAINS, SPIN_CHAINS, comparison_check, spectral_gap, transition_matrix,
                    ullrich_check, worst_start_mixing)
from .experiments import (LBExperimentSpec, cmd_check, decay_profile, lb_experiment,
                          mixing_scaling, random_events)
from .mixcond import (em_epsilon_estimate, factorization_audit, pvm_epsilon, updown_gap,
                      variational_sup, vm_epsilon)
from .model import PottsParams, RCBoundary, RCInstance, SpinBoundary, decode_base_q
from .rng import default_seed
from .slowmix import (HostGraph, bad_set_conductance, embed_boundary, gap_transfer_check,
                      minimal_height, tail_monte_carlo)
from .tree import TreeTopology, tree_info

SCHEMA_VERSION = "1"

DEFAULTS = {
    "d": 2, "h": None, "q": 2, "beta": math.log(2), "p": None, "boundary": None,
    "rc_boundary": "wired", "chain": "sw", "ell": 1, "seed": None, "t_max": 10000,
    "eps": 0.25, "functions": 1000, "mode": "exhaustive", "budget": 64, "restarts": 8,
    "steps": 10, "replicas": 100, "horizon": 50, "event": "root", "events": 0,
    "heights": None, "pair": "0,1", "xi": 0.5, "alphas": "0.125,0.25,0.5,1",
    "graph": None, "edges": None, "p_hat": 0.5, "M": 1, "s_star": "majority", "samples": 100000,
    "fixture": "product", "rows": 4, "cols": 3, "rho": None, "save_matrix": False,
}


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _plain(obj):
    """Recursively convert numpy and dataclass-ish values to JSON-ready types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if hasattr(obj, "to_json"):
        return _plain(obj.to_json())
    return obj


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float printed to 17 significant digits."""
    obj = _plain(obj) if _level == 0 else obj
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent, _level + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    return json.dumps(obj)


def rows_to_csv(rows: list[dict]) -> str:
    cols: list = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        out = []
        for c in cols:
            v = _plain(r.get(c))
            if isinstance(v, float):
                out.append(_fmt_float(v))
            elif isinstance(v, (list, dict)):
                out.append(dumps(v, indent=0).replace("\n", ""))
            else:
                out.append("" if v is None else v)
        w.writerow(out)
    return buf.getvalue()


def manifest(command: str, config: dict, artifacts: list[str]) -> dict:
    canon = json.dumps(_plain(config), sort_keys=True, separators=(",", ":"))
    import scipy
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "config_sha256": hashlib.sha256(canon.encode()).hexdigest(),
        "seed": config.get("seed"),
        "versions": {"swtree": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "artifacts": artifacts,
    }


def write_outputs(out_dir: str | None, command: str, config: dict, report, rows=None) -> None:
    if out_dir is None:
        return
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    artifacts = ["report.json"] + (["table.csv"] if rows else [])
    (path / "manifest.json").write_text(dumps(manifest(command, config, artifacts)) + "\n")
    (path / "report.json").write_text(dumps(report) + "\n")
    if rows:
        (path / "table.csv").write_text(rows_to_csv(rows))


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def resolve_config(ns: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(ns, "config", None):
        loaded = json.loads(Path(ns.config).read_text())
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for k in DEFAULTS:
        v = getattr(ns, k, None)
        if v is not None and v is not False:
            cfg[k] = v
    if cfg["seed"] is None:
        cfg["seed"] = default_seed(0)
    return cfg


def parse_spin_boundary(text, tree: TreeTopology, q: int) -> SpinBoundary:
    if text is None:
        text = "mono"
    if isinstance(text, dict):
        return SpinBoundary.from_json(tree, text, q)
    text = str(text).strip()
    if text.startswith("{"):
        return SpinBoundary.from_json(tree, text, q)
    kind, _, arg = text.partition(":")
    if kind == "mono":
        return SpinBoundary.mono(tree, int(arg or 0))
    if kind == "free":
        return SpinBoundary.free()
    if kind == "random":
        return SpinBoundary.random(tree, q, int(arg or 0))
    if kind == "list":
        return SpinBoundary.from_list(tree, [int(s) for s in arg.split(",")])
    raise ValueError(f"boundary: unknown descriptor {text!r}")


def boundary_json(text, tree: TreeTopology, q: int) -> dict:
    return parse_spin_boundary(text, tree, q).to_json()


def parse_rc_boundary(text, tree: TreeTopology) -> RCBoundary:
    if isinstance(text, dict):
        return RCBoundary.from_json(text, list(tree.boundary_slots))
    text = str(text).strip()
    if text.startswith("{"):
        return RCBoundary.from_json(text, list(tree.boundary_slots))
    if text == "wired":
        return RCBoundary.wired(tree.boundary_slots)
    if text == "free":
        return RCBoundary.free(tree.boundary_slots)
    raise ValueError(f"rc_boundary: unknown descriptor {text!r}")


def instance_of(cfg: dict):
    tree = TreeTopology(int(cfg["d"]), 1 if cfg["h"] is None else int(cfg["h"]))
    q = int(cfg["q"])
    params = PottsParams.from_p(q, float(cfg["p"])) if cfg["p"] is not None else PottsParams(q, float(cfg["beta"]))
    return tree, params


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _ints(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if "-" in part[1:]:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _chain_matrix(cfg):
    tree, params = instance_of(cfg)
    chain = cfg["chain"]
    if chain in SPIN_CHAINS:
        tau = parse_spin_boundary(cfg["boundary"], tree, params.q)
        return tree, params, transition_matrix(chain, tree, params, tau=tau, ell=int(cfg["ell"])), tau, None
    xi = parse_rc_boundary(cfg["rc_boundary"], tree)
    return tree, params, transition_matrix(chain, tree, params, xi=xi), None, xi


def cmd_tree_info(cfg):
    h = 1 if cfg["h"] is None else int(cfg["h"])
    return tree_info(int(cfg["d"]), h, int(cfg["ell"]) if cfg["ell"] else None), None


def cmd_exact(cfg, sub):
    if sub == "matrix":
        tree, params, tm, _, _ = _chain_matrix(cfg)
        rep = {"chain": tm.name, "states": tm.n, "encoding": tm.encoding, "checks": tm.check()}
        rows = None
        if cfg["save_matrix"]:
            P = tm.dense()
            rows = [{"from": int(i), "to": int(j), "P": float(P[i, j])}
                    for i, j in zip(*np.nonzero(P))]
        return rep, rows
    if sub == "gap":
        _, _, tm, _, _ = _chain_matrix(cfg)
        rep = spectral_gap(tm).to_json()
        rep.update({"chain": cfg["chain"], "states": tm.n})
        return rep, None
    if sub == "mix":
        tree, params = instance_of(cfg)
        chain = cfg["chain"]
        tau = parse_spin_boundary(cfg["boundary"], tree, params.q) if chain in SPIN_CHAINS else None
        xi = parse_rc_boundary(cfg["rc_boundary"], tree) if chain in RC_CHAINS else None
        kw = {"ell": int(cfg["ell"])} if chain in ("block-sw", "block-hb") else {}
        rep = worst_start_mixing(chain, tree, params, tau=tau, xi=xi, t_max=int(cfg["t_max"]), **kw)
        out = rep.to_json()
        return out, [{"t": t + 1, "tv": v} for t, v in enumerate(rep.tv)]
    if sub == "ullrich":
        tree, params = instance_of(cfg)
        tau = parse_spin_boundary(cfg["boundary"], tree, params.q)
        blocks = BlockSpec.tiled(tree, int(cfg["ell"]))
        return ullrich_check(tree, tau, params, blocks), None
    if sub == "compare":
        tree, params = instance_of(cfg)
        tau = parse_spin_boundary(cfg["boundary"], tree, params.q)
        blocks = BlockSpec.tiled(tree, int(cfg["ell"]))
        rep = comparison_check(tree, tau, params, blocks, n_functions=int(cfg["functions"]),
                               seed=int(cfg["seed"]))
        return rep.to_json(), None
    raise ValueError(f"unknown exact subcommand {sub!r}")


def gvm_fixture(kind: str, rows: int, cols: int, seed: int) -> np.ndarray:
    gen = np.random.default_rng(seed)
    if kind == "product":
        return np.outer(gen.dirichlet(np.ones(rows)), gen.dirichlet(np.ones(cols)))
    if kind == "diagonal":
        k = min(rows, cols)
        rho = np.zeros((rows, cols))
        rho[np.arange(k), np.arange(k)] = gen.dirichlet(np.ones(k))
        return rho
    if kind == "random":
        rho = gen.random((rows, cols))
        return rho / rho.sum()
    raise ValueError(f"fixture: unknown kind {kind!r}")


def load_rho(path: str) -> np.ndarray:
    text = Path(path).read_text()
    rho = np.array(json.loads(text), dtype=np.float64) if text.lstrip().startswith("[") \
        else np.loadtxt(io.StringIO(text), delimiter=",", ndmin=2)
    return rho / rho.sum()


def run_check(cfg, sub):
    if sub == "gvm":
        rho = load_rho(cfg["rho"]) if cfg["rho"] else gvm_fixture(cfg["fixture"], int(cfg["rows"]),
                                                                  int(cfg["cols"]), int(cfg["seed"]))
        pair = updown_gap(rho)
        sup = variational_sup(pair, n_functions=int(cfg["functions"]), seed=int(cfg["seed"]))
        return {"eps": pair.eps, "degenerate": pair.degenerate, "checks": pair.checks,
                "variational": sup, "shape": list(rho.shape)}, None
    tree, params = instance_of(cfg)
    tau = parse_spin_boundary(cfg["boundary"], tree, params.q)
    ell, seed = int(cfg["ell"]), int(cfg["seed"])
    if sub in ("vm", "pvm"):
        fn = vm_epsilon if sub == "vm" else pvm_epsilon
        cert = fn(tree, tau, ell, params, mode=cfg["mode"], budget=int(cfg["budget"]), seed=seed)
        return cert.to_json(), None
    if sub == "em":
        cert = em_epsilon_estimate(tree, tau, ell, params, restarts=int(cfg["restarts"]), seed=seed,
                                   mode=cfg["mode"], budget=int(cfg["budget"]))
        return cert.to_json(), None
    if sub == "factorization":
        rep = factorization_audit(tree, tau, params, ell, n_functions=int(cfg["functions"]), seed=seed,
                                  em_restarts=int(cfg["restarts"]))
        out = rep.to_json()
        return out, out.get("results")
    raise ValueError(f"unknown check subcommand {sub!r}")


def cmd_simulate(cfg):
    tree, params = instance_of(cfg)
    chain, seed, steps = cfg["chain"], int(cfg["seed"]), int(cfg["steps"])
    rows = []
    if chain in SPIN_CHAINS:
        tau = parse_spin_boundary(cfg["boundary"], tree, params.q)
        R = int(cfg["replicas"])
        state = ChainState(np.zeros((R, tree.n), dtype=np.int8), seed)
        blocks = BlockSpec.tiled(tree, int(cfg["ell"])) if chain in ("block-sw", "block-hb") else None
        for t in range(1, steps + 1):
            if chain == "sw":
                state = sw_step(state, tree, tau, params)
            elif chain == "glauber":
                state = glauber_step(state, tree, tau, params)
            else:
                state = block_step(state, tree, tau, params, blocks,
                                   "sw" if chain == "block-sw" else "heat-bath")
            frac = (state.config == 0).mean(axis=1)
            rows.append({"t": t, "mean_frac_spin0": float(frac.mean()), "sd_frac_spin0": float(frac.std())})
        final = {"mean_frac_spin0": rows[-1]["mean_frac_spin0"] if rows else 1.0}
    elif chain in RC_CHAINS:
        inst = RCInstance.from_tree(tree)
        xi = parse_rc_boundary(cfg["rc_boundary"], tree)
        state = ChainState(np.zeros(inst.m, dtype=bool), seed)
        for t in range(1, steps + 1):
            if chain == "rc-edge":
                state = rc_edge_hb_step(state, inst, xi, params.p, params.q)
            elif chain == "rc-sw":
                state = rc_sw_step(state, inst, xi, params.p, params.q)
            else:
                state = single_bond_step(state, inst, xi, params.p, params.q)
            rows.append({"t": t, "open_edges": int(np.asarray(state.config).sum())})
        final = {"open_edges": rows[-1]["open_edges"] if rows else 0}
    else:
        raise ValueError(f"chain: unknown chain {chain!r}")
    return {"chain": chain, "steps": steps, "seed": seed, **final}, rows


def cmd_lowerbound(cfg):
    tree, params = instance_of(cfg)
    spec = LBExperimentSpec(d=tree.d, h=tree.h, q=params.q, beta=params.beta,
                            boundary=boundary_json(cfg["boundary"], tree, params.q),
                            replicas=int(cfg["replicas"]), alphas=tuple(_floats(cfg["alphas"])),
                            xi=float(cfg["xi"]))
    rep = lb_experiment(spec, seed=int(cfg["seed"]))
    return rep, rep["rows"]


def run_cmd_check(cfg):
    tree, params, tm, tau, xi = _chain_matrix(cfg)
    if not tm.psd:
        raise ValueError(f"chain: {cfg['chain']!r} is not positive semidefinite")
    events = []
    if cfg["event"] == "root" and tau is not None:
        events.append(("root=0", decode_base_q(np.arange(tm.n), tree.n, params.q)[:, 0] == 0))
    elif cfg["event"] == "full":
        events.append(("full", np.ones(tm.n, dtype=bool)))
    for i, B in enumerate(random_events(tm.n, int(cfg["events"]), int(cfg["seed"]))):
        events.append((f"random{i}", B))
    reports, rows = [], []
    for name, B in events:
        rep = cmd_check(tm, B, int(cfg["horizon"]))
        reports.append({"event": name, "pi_B": rep["pi_B"], "max_violation": rep["max_violation"],
                        "holds": rep["holds"]})
        rows.extend({"event": name, **r} for r in rep["rows"])
    return {"chain": cfg["chain"], "events": reports,
            "holds": all(r["holds"] for r in reports)}, rows


def cmd_decay(cfg):
    heights = _ints(cfg["heights"] or "1-10")
    tree0 = TreeTopology(int(cfg["d"]), 1)
    q = int(cfg["q"])
    bd = cfg["boundary"] or "free"
    desc = boundary_json(bd, tree0, q) if not str(bd).startswith(("list", "random")) else None
    if desc is None:
        raise ValueError("boundary: decay accepts 'free', 'mono[:s]' or a JSON kind without per-slot spins")
    i, j = _ints(cfg["pair"])
    beta = instance_of(cfg)[1].beta
    prof = decay_profile(int(cfg["d"]), heights, q, beta, desc, (i, j))
    rows = [{"height": h, "tv": tv} for h, tv in zip(prof.heights, prof.tv)]
    return prof.to_json(), rows


def cmd_scaling(cfg):
    heights = _ints(cfg["heights"] or "1-3")
    chain = cfg["chain"]
    beta = instance_of(cfg)[1].beta
    if chain in RC_CHAINS:
        bd = parse_rc_boundary(cfg["rc_boundary"], TreeTopology(int(cfg["d"]), 1)).to_json()
    else:
        bd = boundary_json(cfg["boundary"], TreeTopology(int(cfg["d"]), 1), int(cfg["q"]))
        if bd.get("kind") not in ("mono", "free"):
            raise ValueError("boundary: scaling needs a size-independent boundary (mono or free)")
    mode = cfg["mode"] if cfg["mode"] in ("exact", "statistical") else "exact"
    tab = mixing_scaling(chain, heights, d=int(cfg["d"]), q=int(cfg["q"]), beta=beta, boundary=bd,
                         mode=mode, t_max=int(cfg["t_max"]), replicas=int(cfg["replicas"]),
                         seed=int(cfg["seed"]))
    return tab, [{k: v for k, v in r.items() if k != "tv_curve"} for r in tab["rows"]]


def host_graph(cfg) -> HostGraph:
    if cfg["graph"]:
        return HostGraph.read(cfg["graph"])
    if cfg["edges"]:
        pairs = [tuple(int(x) for x in e.split("-")) for e in str(cfg["edges"]).split(",")]
        n = max(max(e) for e in pairs) + 1
        return HostGraph.from_edges(n, pairs)
    return HostGraph.from_edges(2, [(0, 1)])


def cmd_slowmix(cfg, sub):
    G = host_graph(cfg)
    ell = int(cfg["ell"])
    h = int(cfg["h"]) if cfg["h"] is not None else minimal_height(G.m, ell)
    q, p_hat = float(cfg["q"]), float(cfg["p_hat"])
    if sub == "embed":
        return embed_boundary(G, h, ell).to_json(), None
    if sub == "gap-transfer":
        return gap_transfer_check(G, p_hat, q).to_json(), None
    if sub == "conductance":
        s_star = cfg["s_star"]
        if isinstance(s_star, str) and s_star[:1].isdigit():
            s_star = _ints(s_star)
        return bad_set_conductance(G, h, ell, p_hat, q, int(cfg["M"]), s_star).to_json(), None
    if sub == "tail":
        emb = embed_boundary(G, h, ell)
        rep = tail_monte_carlo(emb, p_hat, int(cfg["M"]), int(cfg["samples"]), int(cfg["seed"]))
        return rep.to_json(), None
    raise ValueError(f"unknown slowmix subcommand {sub!r}")


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, *groups: str) -> None:
    p.add_argument("--config", help="JSON file with option values (flags override it)")
    p.add_argument("--out", help="directory for manifest.json and artifacts")
    p.add_argument("--seed", type=int, help="RNG seed (default: $SWTREE_SEED or 0)")
    if "instance" in groups:
        p.add_argument("--d", type=int, help="branching factor")
        p.add_argument("--h", type=int, help="tree height")
        p.add_argument("--q", type=int, help="number of spins")
        p.add_argument("--beta", type=float, help="inverse temperature")
        p.add_argument("--p", type=float, help="edge probability (overrides beta)")
        p.add_argument("--boundary", help="mono[:s] | free | random:seed | list:s0,s1,... | JSON")
        p.add_argument("--ell", type=int, help="block / certificate parameter ℓ")
    if "chain" in groups:
        p.add_argument("--chain", choices=SPIN_CHAINS + RC_CHAINS)
        p.add_argument("--rc-boundary", dest="rc_boundary", help="wired | free | JSON partition")
        p.add_argument("--t-max", dest="t_max", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="swtree", description="Exact and Monte Carlo tools for "
                                 "Swendsen-Wang and random-cluster dynamics on d-ary trees.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tree-info", help="sizes, levels and block decomposition")
    _add_common(p, "instance")

    ex = sub.add_parser("exact", help="exact transition matrices and their spectra")
    exs = ex.add_subparsers(dest="sub", required=True)
    for name in ("matrix", "gap", "mix", "ullrich", "compare"):
        p = exs.add_parser(name)
        _add_common(p, "instance", "chain")
        if name == "matrix":
            p.add_argument("--save-matrix", dest="save_matrix", action="store_true")
        if name == "compare":
            p.add_argument("--functions", type=int)

    ck = sub.add_parser("check", help="mixing certificates and factorization audits")
    cks = ck.add_subparsers(dest="sub", required=True)
    for name in ("gvm", "vm", "pvm", "em", "factorization"):
        p = cks.add_parser(name)
        _add_common(p, "instance")
        p.add_argument("--mode", choices=("exhaustive", "sampled"))
        p.add_argument("--budget", type=int)
        p.add_argument("--restarts", type=int)
        p.add_argument("--functions", type=int)
        if name == "gvm":
            p.add_argument("--rho", help="CSV or JSON matrix of a joint distribution")
            p.add_argument("--fixture", choices=("product", "diagonal", "random"))
            p.add_argument("--rows", type=int)
            p.add_argument("--cols", type=int)

    p = sub.add_parser("simulate", help="run a chain and record a summary per step")
    _add_common(p, "instance", "chain")
    p.add_argument("--steps", type=int)
    p.add_argument("--replicas", type=int)

    p = sub.add_parser("lowerbound", help="coupled SW experiment behind the log n lower bound")
    _add_common(p, "instance")
    p.add_argument("--replicas", type=int)
    p.add_argument("--alphas", help="comma-separated α values")
    p.add_argument("--xi", type=float, help="exponent in R̂ = n^xi")

    p = sub.add_parser("cmd-check", help="complete-monotonicity bound by exact matrix powers")
    _add_common(p, "instance", "chain")
    p.add_argument("--horizon", type=int)
    p.add_argument("--event", choices=("root", "full", "none"))
    p.add_argument("--events", type=int, help="number of additional random events")

    p = sub.add_parser("decay", help="TV decay of the leaf-edge marginal with height")
    _add_common(p, "instance")
    p.add_argument("--heights", help="e.g. 1-10 or 1,2,5")
    p.add_argument("--pair", help="spin pair i,j above the root")

    p = sub.add_parser("scaling", help="mixing time against tree size")
    _add_common(p, "instance", "chain")
    p.add_argument("--heights")
    p.add_argument("--mode", choices=("exact", "statistical"))
    p.add_argument("--replicas", type=int)

    sm = sub.add_parser("slowmix", help="graph embedding through a random-cluster boundary")
    sms = sm.add_subparsers(dest="sub", required=True)
    for name in ("embed", "gap-transfer", "conductance", "tail"):
        p = sms.add_parser(name)
        _add_common(p)
        p.add_argument("--graph", help="edge-list file with header 'n m'")
        p.add_argument("--edges", help="inline edges, e.g. 0-1,1-2")
        p.add_argument("--h", type=int)
        p.add_argument("--ell", type=int)
        p.add_argument("--q", type=float)
        p.add_argument("--p-hat", dest="p_hat", type=float)
        p.add_argument("--M", type=int)
        p.add_argument("--s-star", dest="s_star", help="majority | min-conductance | comma-separated codes")
        p.add_argument("--samples", type=int)
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    try:
        cfg = resolve_config(ns)
        sub = getattr(ns, "sub", None)
        cmd = ns.command
        if cmd == "tree-info":
            report, rows = cmd_tree_info(cfg)
        elif cmd == "exact":
            report, rows = cmd_exact(cfg, sub)
        elif cmd == "check":
            report, rows = run_check(cfg, sub)
        elif cmd == "simulate":
            report, rows = cmd_simulate(cfg)
        elif cmd == "lowerbound":
            report, rows = cmd_lowerbound(cfg)
        elif cmd == "cmd-check":
            report, rows = run_cmd_check(cfg)
        elif cmd == "decay":
            report, rows = cmd_decay(cfg)
        elif cmd == "scaling":
            report, rows = cmd_scaling(cfg)
        else:
            report, rows = cmd_slowmix(cfg, sub)
    except (ValueError, KeyError, OSError) as err:
        print(f"swtree: error: {err}", file=sys.stderr)
        return 2
    name = ns.command + (f" {sub}" if sub else "")
    write_outputs(ns.out, name, cfg, report, rows)
    print(dumps(report))
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
