"""Instance generation, the end-to-end solver chain, invariant audits and reports."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .box_ptas import NetEnumerationInfeasible, make_grid, solve_bounded
from .chopping import layer_and_bundle
from .graph import DIST_TOL, build_udg
from .instance import FLInstance, FLSolution, InfeasibleAssignment, evaluate, exact_solve
from .net_tree import build_decomp_tree, build_net, portal_detour_bound_audit
from .portal_dp import DPTableTooLarge, extract_solution, fill_table
from .reduction import baseline_approx, filter_clients, merge_solutions, partition_by_aspect
from .separator import verify_separator

log = logging.getLogger(__name__)

FAMILIES = ("uniform", "clustered", "corridor")
SOLVERS = ("exact", "baseline", "boxptas", "qptas")
ROUTES = ("auto", "dp", "box")


@dataclass
class RunConfig:
    solver: str = "qptas"
    eps: float = 0.5
    eps_prime: float = 0.25
    seed: int = 0
    # generator
    family: str = "uniform"
    n: int = 40
    box: float = 3.0
    client_frac: float = 0.7
    facility_frac: float = 0.3
    n_facilities: int | None = None
    clusters: int = 3
    cost_low: float = 0.5
    cost_high: float = 3.0
    largest_component: bool = True
    # caps
    oracle_cap: int = 14
    vector_cap: int = 10**6
    work_cap: int = 200_000
    memo_cap: int = 50_000
    net_cap: int = 200_000
    net_vertex_cap: int = 400
    sample_nets: int = 2000
    # box solver
    grid_trials: int = 32
    L: float | None = None
    # qptas routing and overrides
    route: str = "auto"
    thickness: int | None = None
    chop_delta: int | None = None
    audit_samples: int = 2000

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.route not in ROUTES:
            raise ValueError(f"unknown route {self.route!r}")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if not self.eps_prime > 0:
            raise ValueError("eps_prime must be positive")
        for name in ("oracle_cap", "vector_cap", "work_cap", "memo_cap", "net_cap", "net_vertex_cap",
                     "sample_nets", "grid_trials"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@contextmanager
def _stage(name, timings):
    t0 = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        raise StageError(name, e) from e
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0


# ---------------------------------------------------------------------------
# generation


def generate_instance(cfg: RunConfig) -> FLInstance:
    if cfg.n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n
    if cfg.family == "uniform":
        pts = rng.uniform(0, cfg.box, (n, 2))
    elif cfg.family == "clustered":
        centers = rng.uniform(0, cfg.box, (max(1, cfg.clusters), 2))
        lab = rng.integers(0, len(centers), n)
        pts = centers[lab] + rng.normal(0, 0.25, (n, 2))
    else:  # corridor: a long strip of width 0.6
        pts = np.column_stack([rng.uniform(0, cfg.box, n), rng.uniform(0, 0.6, n)])
    is_client = rng.random(n) < cfg.client_frac
    if cfg.n_facilities is not None:
        fac = set(rng.choice(n, min(n, cfg.n_facilities), replace=False).tolist())
    else:
        fac = set(np.nonzero(rng.random(n) < cfg.facility_frac)[0].tolist())
    if not is_client.any():
        is_client[0] = True
    if not fac:
        fac = {int(rng.integers(0, n))}
    cost = rng.uniform(cfg.cost_low, cfg.cost_high, n)
    g = build_udg(pts)
    _, lab = connected_components(g.csr, directed=False)
    clients = set(np.nonzero(is_client)[0].tolist())
    # a component with clients but no facility gets its smallest vertex as one
    for c in np.unique(lab):
        members = np.nonzero(lab == c)[0]
        if clients & set(members.tolist()) and not fac & set(members.tolist()):
            fac.add(int(members[0]))
    inst = FLInstance(g, sorted(clients), {int(f): float(cost[f]) for f in sorted(fac)})
    if cfg.largest_component and g.n > 1:
        sizes = np.bincount(lab)
        ok = [c for c in range(len(sizes)) if clients & set(np.nonzero(lab == c)[0].tolist())]
        best = max(ok, key=lambda c: (sizes[c], -c))
        inst, _ = inst.induced(np.nonzero(lab == best)[0])
    return inst


# ---------------------------------------------------------------------------
# reports


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, set, frozenset)):
        seq = sorted(x) if isinstance(x, (set, frozenset)) else x
        return [_jsonable(v) for v in seq]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    return x


@dataclass
class RunReport:
    config: dict
    instance: dict
    solution: dict | None
    cost: float | None
    diagnostics: dict
    audits: dict
    oracle: dict | None
    timings: dict = field(default_factory=dict)
    error: dict | None = None

    @property
    def audits_passed(self) -> bool:
        return all(a["passed"] for a in self.audits.values())

    def to_dict(self, timings: bool = True) -> dict:
        d = asdict(self)
        if not timings:
            d.pop("timings")
        return _jsonable(d)

    def comparable(self) -> str:
        """Canonical JSON without timings (for determinism checks)."""
        return json.dumps(self.to_dict(timings=False), sort_keys=True)

    def to_json(self, indent=1) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=indent)

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(**{k: d.get(k) for k in ("config", "instance", "solution", "cost", "diagnostics",
                                             "audits", "oracle", "timings", "error")})


def ratio_rows(reports) -> list[dict]:
    rows = []
    for r in reports:
        opt = (r.oracle or {}).get("opt")
        rows.append({"solver": r.config["solver"], "seed": r.config["seed"], "cost": r.cost,
                     "opt": opt, "ratio": (r.cost / opt) if opt and r.cost is not None else None})
    return rows


def write_ratio_csv(reports, path) -> None:
    rows = ratio_rows(reports)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["solver", "seed", "cost", "opt", "ratio"])
        w.writeheader()
        w.writerows(rows)


# ---------------------------------------------------------------------------
# solving


@dataclass
class _Artifacts:
    comps: list = field(default_factory=list)  # per component: dict of stage outputs
    pieces: list = field(default_factory=list)  # (H, net, tree, table, sol)
    box_runs: list = field(default_factory=list)  # (inst, sol)


def _box(inst, cfg, rng, diag, L=None):
    try:
        sol = solve_bounded(inst, L=L, eps=cfg.eps, grid_trials=cfg.grid_trials, rng=rng,
                            net_limit=cfg.net_cap)
    except NetEnumerationInfeasible as e:
        log.warning("%s; falling back to sampled nets (heuristic)", e)
        seed = baseline_approx(inst, 1.0).open if inst.clients else ()
        sol = solve_bounded(inst, L=L, eps=cfg.eps, grid_trials=cfg.grid_trials, rng=rng,
                            sample=cfg.sample_nets, seed_nets=[seed])
        sol.provenance["enumeration_error"] = str(e)
    diag.setdefault("box", []).append(
        {k: sol.provenance.get(k) for k in ("nets", "size_cap", "heuristic", "L", "bound")}
        | {"cost": sol.total_cost, "n": inst.graph.n, "facilities": len(inst.costs)})
    return sol


def solve_piece(H, cfg: RunConfig, rng, diag: dict, art: _Artifacts | None = None,
                timings: dict | None = None) -> FLSolution:
    """Net -> decomposition tree -> portal DP on one piece, coarsening portals on overflow.

    Falls back to the box solver when the net is too big or the DP keeps
    overflowing; every fallback is recorded under ``diag['dp']``.
    """
    timings = {} if timings is None else timings
    inst = H.inst
    if not inst.costs or not inst.clients:
        return FLSolution(tuple(sorted(inst.free)), {}, 0.0, 0.0, 0.0)
    rec = {"piece": H.index, "n": inst.graph.n, "Gamma": H.Gamma, "attempts": []}
    diag.setdefault("dp", []).append(rec)
    with _stage("net", timings):
        net = build_net(H)
    rec["net_size"] = len(net.net_vertices)
    rec["net_bound"] = net.size_bound()
    if cfg.route != "box" and len(net.net_vertices) <= cfg.net_vertex_cap:
        eps_p = cfg.eps_prime
        last = None
        for _ in range(8):
            with _stage("tree", timings):
                tree = build_decomp_tree(net, eps_prime=eps_p)
            if tree.delta_portal == last:
                # spacing saturated: coarser eps' no longer removes portals
                break
            last = tree.delta_portal
            try:
                with _stage("dp", timings):
                    table, dp = fill_table(tree, inst, vector_cap=cfg.vector_cap, work_cap=cfg.work_cap,
                                           memo_cap=cfg.memo_cap)
                    sol = extract_solution(dp)
            except StageError as e:
                if not isinstance(e.cause, DPTableTooLarge):
                    raise
                rec["attempts"].append({"eps_prime": eps_p, "error": str(e.cause)})
                eps_p *= 2
                continue
            rec.update(eps_prime=eps_p, delta_portal=tree.delta_portal, nodes=len(tree.nodes),
                       depth=tree.depth, max_portals=tree.max_portals, entries=table.stats["entries"],
                       K=table.K, g=table.g, root_cost=table.root_cost, true_cost=sol.total_cost,
                       route="dp")
            if art is not None:
                art.pieces.append((H, net, tree, table, sol))
            return sol
        rec["fallback"] = "dp overflow at every distinct portal spacing"
    else:
        rec["fallback"] = "box route forced" if cfg.route == "box" else "net too large"
    with _stage("box", timings):
        sol = _box(inst, cfg, rng, diag)
    rec.update(route="box", true_cost=sol.total_cost)
    if art is not None:
        art.box_runs.append((inst, sol))
    return sol


def _components_with_clients(inst):
    _, lab = connected_components(inst.graph.csr, directed=False)
    clients = set(inst.clients)
    out = []
    for c in np.unique(lab):
        verts = np.nonzero(lab == c)[0]
        if clients & set(verts.tolist()):
            out.append(verts)
    return out


def _solve_qptas(inst, cfg, rng, diag, art, timings) -> FLSolution:
    opens = set(inst.free)
    small = 1.0 / (cfg.eps * cfg.eps)
    diag["components"] = []
    diag["chopping"] = []
    for verts in _components_with_clients(inst):
        ci, vmap = inst.induced(verts)
        crec = {"n": ci.graph.n, "subs": []}
        diag["components"].append(crec)
        with _stage("baseline", timings):
            base = baseline_approx(ci, cfg.eps)
        with _stage("filter", timings):
            Ip, ledger = filter_clients(ci, base, cfg.eps)
        with _stage("partition", timings):
            subs = partition_by_aspect(Ip, base, cfg.eps)
        crec.update(baseline_open=list(base.open), baseline_cost=base.cost(ci), credited=len(ledger.entries),
                    credits=ledger.to_dict())
        sub_sols = []
        comp_art = {"inst": ci, "base": base, "Iprime": Ip, "ledger": ledger, "subs": [], "layers": []}
        for sub in subs:
            route = cfg.route if cfg.route != "auto" else ("box" if sub.N <= small else "dp")
            srec = {"N": sub.N, "r": sub.r, "aspect_bound": sub.aspect_bound, "anchors": list(sub.anchors),
                    "clients": len(sub.inst.clients), "route": route}
            crec["subs"].append(srec)
            if route == "box" and cfg.route == "auto":
                with _stage("box", timings):
                    sol = _box(sub.inst, cfg, rng, diag)
                art.box_runs.append((sub.inst, sol))
            else:
                with _stage("chopping", timings):
                    lay = layer_and_bundle(sub, cfg.eps, rng, thickness=cfg.thickness,
                                           chop_delta=cfg.chop_delta)
                diag["chopping"].append(lay.diagnostics | {"pieces": len(lay.pieces)})
                comp_art["layers"].append((sub, lay))
                opened = set(lay.red_open) | set(sub.inst.free)
                for H in lay.pieces:
                    hs = solve_piece(H, cfg, rng, diag, art, timings)
                    opened |= set(H.to_parent(hs.open))
                with _stage("merge", timings):
                    sol = evaluate(sub.inst, opened) if opened else _cheapest(sub.inst)
            srec["cost"] = sol.total_cost
            sub_sols.append((sub, sol))
            comp_art["subs"].append((sub, sol))
        with _stage("merge", timings):
            merged = merge_solutions(sub_sols, ledger, ci) if (sub_sols or ledger.entries) else _cheapest(ci)
        comp_art["merged"] = merged
        crec["cost"] = merged.total_cost
        art.comps.append(comp_art)
        opens |= {int(vmap[f]) for f in merged.open}
    with _stage("merge", timings):
        merged = evaluate(inst, opens)
    with _stage("prune", timings):
        pruned = prune_open(inst, merged)
    diag["prune"] = {"merged_cost": merged.total_cost, "pruned_cost": pruned.total_cost,
                     "closed": sorted(set(merged.open) - set(pruned.open))}
    return pruned


def prune_open(inst: FLInstance, sol: FLSolution) -> FLSolution:
    """Close paid facilities one at a time (most expensive first) while that lowers the cost."""
    best = sol
    for f in sorted(sol.open, key=lambda f: (-inst.costs[f], f)):
        if f in inst.free or f not in best.open:
            continue
        rest = set(best.open) - {f}
        if not rest:
            continue
        try:
            trial = evaluate(inst, rest)
        except InfeasibleAssignment:  # f was the only facility of some component
            continue
        if trial.total_cost < best.total_cost - 1e-12:
            best = trial
    return best


def _cheapest(inst):
    return evaluate(inst, set(inst.free) | {min(inst.costs, key=lambda f: (inst.costs[f], f))})


def run_pipeline(cfg: RunConfig, inst: FLInstance | None = None, audit: bool = True) -> RunReport:
    timings: dict = {}
    diag: dict = {}
    art = _Artifacts()
    rng = np.random.default_rng(cfg.seed)
    report = RunReport(_jsonable(asdict(cfg)), {}, None, None, diag, {}, None, timings)
    try:
        if inst is None:
            with _stage("generate", timings):
                inst = generate_instance(cfg)
        report.instance = {"n": inst.graph.n, "edges": inst.graph.n_edges, "clients": len(inst.clients),
                           "facilities": len(inst.costs), "free": sorted(inst.free),
                           "components": len(_components_with_clients(inst)),
                           "bounding_side": float(np.ptp(inst.graph.points, axis=0).max()) if inst.graph.n else 0.0}
        if cfg.solver == "exact":
            with _stage("exact", timings):
                sol = exact_solve(inst)
        elif cfg.solver == "baseline":
            with _stage("baseline", timings):
                base = baseline_approx(inst, 1.0)
                sol = evaluate(inst, set(base.open) | set(inst.free))
            art.comps.append({"inst": inst, "base": base})
        elif cfg.solver == "boxptas":
            with _stage("box", timings):
                sol = _box(inst, cfg, rng, diag, L=cfg.L)
            art.box_runs.append((inst, sol))
        else:
            sol = _solve_qptas(inst, cfg, rng, diag, art, timings)
        sol.provenance = dict(sol.provenance, solver=cfg.solver)
        report.solution = sol.to_dict()
        report.solution["credits"] = [c.get("credits") for c in diag.get("components", [])]
        report.cost = sol.total_cost
        if len(inst.costs) <= min(cfg.oracle_cap, 24):
            with _stage("oracle", timings):
                opt = exact_solve(inst).total_cost if cfg.solver != "exact" else sol.total_cost
            report.oracle = {"opt": opt, "ratio": sol.total_cost / opt if opt > 0 else 1.0}
        if audit:
            with _stage("audit", timings):
                report.audits = invariant_audit(inst, sol, art, cfg, report.oracle)
    except StageError as e:
        report.error = {"stage": e.stage, "type": type(e.cause).__name__, "message": str(e.cause)}
    report.diagnostics = _jsonable(diag)
    report.artifacts = art  # in-memory only, never serialised
    return report


# ---------------------------------------------------------------------------
# audits


def _result(checked, witness=None, **extra):
    return {"passed": witness is None, "checked": checked, "witness": witness, **extra}


def _audit_udg(g):
    if g.n > 1500:
        return _result(0, skipped="graph too large for the brute-force check")
    P = g.points
    d2 = ((P[:, None, :] - P[None, :, :]) ** 2).sum(axis=2)
    iu = np.triu_indices(g.n, 1)
    brute = {(int(a), int(b)) for a, b, d in zip(iu[0], iu[1], d2[iu]) if d <= 1 + 1e-12}
    got = g.edge_set()
    diff = sorted(brute ^ got)
    return _result(len(brute), {"edge": list(diff[0])} if diff else None)


def _audit_reduction(comps, eps):
    out = {"baseline_clusters": None, "filter_bounds": None, "aspect_partition": None, "merge_dominance": None}
    checked = dict.fromkeys(out, 0)
    for c in comps:
        inst, base = c["inst"], c["base"]
        seen = [j for cl in base.cluster.values() for j in cl]
        checked["baseline_clusters"] += 1
        if sorted(seen) != sorted(inst.clients) and out["baseline_clusters"] is None:
            out["baseline_clusters"] = {"reason": "clusters do not partition the clients"}
        for i, cl in base.cluster.items():
            want = (inst.costs[i] + sum(base.distance[j] for j in cl)) / len(cl)
            if abs(want - base.avgcost[i]) > 1e-9 * max(1, want) and out["baseline_clusters"] is None:
                out["baseline_clusters"] = {"anchor": i, "avgcost": base.avgcost[i], "expected": want}
        if "Iprime" not in c:
            continue
        lo, hi = eps * eps, 1 / (eps * eps)
        anchor = base.anchor_of
        for j in c["Iprime"].clients:
            checked["filter_bounds"] += 1
            a = base.avgcost[anchor[j]]
            d = base.distance[j]
            if not (lo * a - DIST_TOL * max(1, a) <= d <= hi * a + DIST_TOL * max(1, a)):
                out["filter_bounds"] = out["filter_bounds"] or {"client": j, "d": d, "avgcost": a}
        cover = []
        for sub, _ in c["subs"]:
            checked["aspect_partition"] += 1
            vals = list(sub.avgcost.values())
            if min(vals) > 0 and max(vals) / min(vals) > sub.aspect_bound * (1 + 1e-12):
                out["aspect_partition"] = out["aspect_partition"] or {"anchors": list(sub.anchors),
                                                                      "ratio": max(vals) / min(vals)}
            cover.extend(sub.inst.clients)
        if sorted(cover) != sorted(c["Iprime"].clients):
            out["aspect_partition"] = out["aspect_partition"] or {"reason": "sub-instances do not partition I'"}
        parts = sum(sol.total_cost for _, sol in c["subs"]) + c["ledger"].total()
        checked["merge_dominance"] += 1
        if c["merged"].total_cost > parts + 1e-9 * max(1, parts):
            out["merge_dominance"] = out["merge_dominance"] or {"merged": c["merged"].total_cost, "parts": parts}
    return {k: _result(checked[k], w) for k, w in out.items()}


def _audit_chopping(comps, eps):
    witness, checked = None, 0
    for c in comps:
        for sub, lay in c.get("layers", []):
            seen = set()
            clients = set(sub.inst.clients)
            for H in lay.pieces:
                checked += 1
                core = set(H.to_parent(H.core_clients))
                if core & seen:
                    witness = witness or {"reason": "core client sets overlap", "piece": H.index}
                seen |= core
                if set(H.to_parent(H.inst.clients)) - clients:
                    witness = witness or {"reason": "padding brought in clients", "piece": H.index}
                if H.Gamma > 3 * sub.r * sub.N / (eps * eps) + DIST_TOL:
                    witness = witness or {"reason": "diameter bound", "piece": H.index, "Gamma": H.Gamma}
    return _result(checked, witness)


def _audit_net(pieces):
    witness, checked = None, 0
    for H, net, _, _, _ in pieces:
        checked += 1
        P = net.host.points
        base = sorted(net.base)
        if len(base) > 1:
            B = P[base]
            d2 = ((B[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
            np.fill_diagonal(d2, np.inf)
            if d2.min() < 0.125 ** 2 - 1e-12:
                witness = witness or {"reason": "net points closer than 1/8", "piece": H.index}
        cov = np.linalg.norm(P - P[net.ball_of], axis=1)
        if cov.max() > 0.125 + 1e-12:
            witness = witness or {"reason": "vertex outside its ball", "piece": H.index}
        if len(net.net_vertices) > net.size_bound():
            witness = witness or {"reason": "net size bound", "piece": H.index}
    return _result(checked, witness)


def _audit_separators(pieces):
    witness, checked = None, 0
    for H, net, tree, _, _ in pieces:
        G = net.net_udg
        for t in tree.nodes:
            if t.separator is None:
                continue
            checked += 1
            psi = sorted(t.psi)
            loc = {v: i for i, v in enumerate(psi)}
            v = verify_separator(G.subgraph(psi), [loc[x] for x in t.X], t.separator)
            if not v and witness is None:
                witness = {"piece": H.index, "node": t.id, "reason": v.reason, "detail": v.detail}
    return _result(checked, witness)


def _audit_detour(pieces, samples, rng):
    witness, checked, excess = None, 0, 0.0
    ball = {"pairs": 0, "violations": 0, "max_excess": 0.0}
    for H, net, tree, _, _ in pieces:
        rep = portal_detour_bound_audit(net, tree, samples=samples, rng=rng, host_samples=samples // 5)
        checked += rep["pairs"]
        excess = max(excess, rep["max_excess"])
        if rep["violations"] and witness is None:
            witness = dict(rep["first_violation"], piece=H.index)
        for k in ("pairs", "violations"):
            ball[k] += rep["ball"][k]
        ball["max_excess"] = max(ball["max_excess"], rep["ball"]["max_excess"])
    return _result(checked, witness, max_excess=excess, ball_centre=ball)


def _audit_dp(pieces):
    witness, checked = None, 0
    for H, _, _, table, sol in pieces:
        checked += 1
        if sol.total_cost > table.root_cost + 1e-9 * max(1, table.root_cost):
            witness = witness or {"piece": H.index, "true": sol.total_cost, "dp": table.root_cost}
    return _result(checked, witness)


def _audit_grid(box_runs, rng):
    witness, checked = None, 0
    for inst, _ in box_runs:
        grid = make_grid(inst.graph.points, rng)
        edges = inst.graph.edge_set()
        for cell, vs in grid.cells.items():
            for a in range(len(vs)):
                for b in range(a + 1, len(vs)):
                    checked += 1
                    if (min(vs[a], vs[b]), max(vs[a], vs[b])) not in edges:
                        witness = witness or {"cell": list(cell), "u": vs[a], "v": vs[b]}
    return _result(checked, witness)


def invariant_audit(inst: FLInstance, sol: FLSolution, art: _Artifacts, cfg: RunConfig,
                    oracle: dict | None = None) -> dict:
    """Run every module's checks on the artifacts a run kept; pass/fail plus first witness."""
    rng = np.random.default_rng(cfg.seed + 1)
    audits = {"udg_edges": _audit_udg(inst.graph)}
    re = evaluate(inst, sol.open)
    audits["solution_consistency"] = _result(
        1, None if abs(re.total_cost - sol.total_cost) <= 1e-9 * max(1, sol.total_cost)
        else {"reported": sol.total_cost, "recomputed": re.total_cost})
    if art.comps:
        audits.update(_audit_reduction(art.comps, cfg.eps))
        audits["chopping"] = _audit_chopping(art.comps, cfg.eps)
    if art.pieces:
        audits["net"] = _audit_net(art.pieces)
        audits["separators"] = _audit_separators(art.pieces)
        audits["portal_detour"] = _audit_detour(art.pieces, cfg.audit_samples, rng)
        audits["dp_soundness"] = _audit_dp(art.pieces)
    if art.box_runs:
        audits["grid_cells"] = _audit_grid(art.box_runs, rng)
    if oracle is not None:
        audits["oracle_dominance"] = _result(
            1, None if oracle["opt"] <= sol.total_cost + 1e-9 * max(1, sol.total_cost)
            else {"opt": oracle["opt"], "cost": sol.total_cost})
    return audits
