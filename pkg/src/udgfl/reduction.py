"""Reduction to structured sub-instances of bounded aspect ratio.

A constant-factor solution on cost-scaled facilities defines clusters and
their average costs; clients too close to or too far from their cluster
center are pre-assigned (credited), and the remaining clusters are grouped
by average cost into independent sub-instances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import DIST_TOL, multi_source_sssp
from .instance import FLInstance, FLSolution, InfeasibleAssignment, evaluate

EVENT_TOL = 1e-12


class AspectPartitionError(RuntimeError):
    pass


@dataclass
class BaselineResult:
    open: tuple
    cluster: dict  # anchor -> tuple of clients
    avgcost: dict  # anchor -> average cluster cost (unscaled opening cost)
    distance: dict  # client -> distance to its anchor
    alpha: float = 3.0
    scaled_cost: float = 0.0

    @property
    def anchor_of(self) -> dict:
        return {j: i for i, cl in self.cluster.items() for j in cl}

    def cost(self, inst: FLInstance) -> float:
        """Cost of the clustering on ``inst`` (opening plus cluster connections)."""
        return float(sum(inst.costs[i] for i in self.open) + sum(self.distance.values()))


def primal_dual(D: np.ndarray, f: np.ndarray) -> list[int]:
    """Jain-Vazirani dual ascent with greedy conflict resolution.

    ``D`` is |C| x |F| (a metric), ``f`` the opening costs. Returns the column
    indices of the opened facilities; nearest-facility assignment to them costs
    at most three times the optimum.
    """
    n_c, n_f = D.shape
    if n_c == 0:
        return []
    active = np.ones(n_c, dtype=bool)
    alpha = np.zeros(n_c)
    open_time = np.full(n_f, np.inf)
    t = 0.0
    while active.any():
        act = np.nonzero(active)[0]
        is_open = np.isfinite(open_time)
        frozen = ~active
        frozen_pay = np.clip(alpha[frozen, None] - D[frozen], 0.0, None).sum(axis=0) if frozen.any() else np.zeros(n_f)

        t_reach = np.inf
        if is_open.any():
            t_reach = D[np.ix_(act, np.nonzero(is_open)[0])].min()

        t_pay = np.full(n_f, np.inf)
        for i in np.nonzero(~is_open)[0]:
            need = f[i] - frozen_pay[i]
            if need <= EVENT_TOL:
                t_pay[i] = t
                continue
            ds = np.sort(D[act, i])
            ds = ds[np.isfinite(ds)]
            for k in range(len(ds)):
                # paid(t') on [ds[k], ds[k+1]] = (k+1) * t' - sum(ds[:k+1])
                acc_k = ds[: k + 1].sum()
                hi = ds[k + 1] if k + 1 < len(ds) else np.inf
                cand = (need + acc_k) / (k + 1)
                if cand <= hi + EVENT_TOL:
                    t_pay[i] = max(cand, t)
                    break
        t_next = min(t_reach, t_pay.min())
        if not np.isfinite(t_next):
            raise InfeasibleAssignment("infeasible assignment: client cannot reach any facility")
        t = max(t, t_next)
        newly = (~is_open) & (t_pay <= t + EVENT_TOL)
        open_time[newly] = t
        is_open = np.isfinite(open_time)
        opened = np.nonzero(is_open)[0]
        for j in act:
            if (D[j, opened] <= t + EVENT_TOL).any():
                active[j] = False
                alpha[j] = t

    temp = sorted(np.nonzero(np.isfinite(open_time))[0], key=lambda i: (open_time[i], i))
    contrib = (alpha[:, None] - D) > 1e-9
    chosen: list[int] = []
    for i in temp:
        if not any((contrib[:, i] & contrib[:, k]).any() for k in chosen):
            chosen.append(int(i))
    return sorted(chosen)


def baseline_approx(inst: FLInstance, scale: float) -> BaselineResult:
    """Constant-factor solution on the instance whose opening costs are multiplied by ``scale``."""
    if not 0 < scale <= 1:
        raise ValueError("scale must lie in (0, 1]")
    scaled = inst.scaled(scale)
    if not inst.clients:
        return BaselineResult((), {}, {}, {})
    fac = list(inst.facilities)
    D = inst.client_facility_distances()
    f = np.array([scaled.costs[i] for i in fac])
    chosen = [fac[k] for k in primal_dual(D, f)]
    sol = evaluate(scaled, chosen)
    cluster: dict = {}
    for j, (i, _) in sol.assignment.items():
        cluster.setdefault(i, []).append(j)
    cluster = {i: tuple(sorted(cl)) for i, cl in sorted(cluster.items())}
    distance = {j: r for j, (_, r) in sol.assignment.items()}
    avgcost = {
        i: (inst.costs[i] + sum(distance[j] for j in cl)) / len(cl) for i, cl in cluster.items()
    }
    used = tuple(cluster)
    scaled_cost = scale * sum(inst.costs[i] for i in used) + sum(distance.values())
    return BaselineResult(used, cluster, avgcost, distance, 3.0, scaled_cost)


@dataclass
class CreditLedger:
    """Clients removed by filtering, each pre-assigned to its cluster anchor."""

    entries: dict = field(default_factory=dict)  # client -> (anchor, route cost, reason)
    anchor_costs: dict = field(default_factory=dict)  # anchor -> opening cost

    @property
    def anchors(self) -> tuple:
        return tuple(sorted({a for a, _, _ in self.entries.values()}))

    def total(self, open_set=()) -> float:
        opened = set(open_set)
        routes = sum(r for _, r, _ in self.entries.values())
        return float(routes + sum(self.anchor_costs[a] for a in self.anchors if a not in opened))

    def extend(self, inst: FLInstance, sol: FLSolution) -> FLSolution:
        """Solution of ``inst`` keeping ``sol``'s routes and serving credited clients at their anchors."""
        open_set = tuple(sorted(set(sol.open) | set(self.anchors)))
        assignment = dict(sol.assignment)
        for j, (a, r, _) in self.entries.items():
            assignment[j] = (a, r)
        open_cost = inst.opening_cost(open_set)
        conn = float(sum(r for _, r in assignment.values()))
        return FLSolution(open_set, assignment, open_cost, conn, open_cost + conn)

    def to_dict(self) -> dict:
        return {
            "clients": [[j, a, r, why] for j, (a, r, why) in sorted(self.entries.items())],
            "anchor_costs": {str(a): c for a, c in sorted(self.anchor_costs.items())},
        }


def filter_clients(inst: FLInstance, base: BaselineResult, eps: float):
    """Keep clients with eps^2 * avgcost <= d(j, anchor) <= eps^-2 * avgcost; credit the rest."""
    lo, hi = eps * eps, 1.0 / (eps * eps)
    ledger = CreditLedger()
    keep = []
    for i, cl in base.cluster.items():
        a = base.avgcost[i]
        for j in cl:
            d = base.distance[j]
            if d < lo * a - DIST_TOL * max(1.0, a):
                ledger.entries[j] = (i, d, "near")
            elif d > hi * a + DIST_TOL * max(1.0, a):
                ledger.entries[j] = (i, d, "far")
            else:
                keep.append(j)
    ledger.anchor_costs = {a: inst.costs[a] for a in ledger.anchors}
    return inst.replace(clients=keep), ledger


@dataclass
class StructuredSubInstance:
    inst: FLInstance
    anchors: tuple
    cluster: dict  # anchor -> clients of this sub-instance
    avgcost: dict
    N: float
    r: float
    aspect_bound: float

    def anchor_distance(self) -> dict:
        base = {}
        for i, cl in self.cluster.items():
            for j in cl:
                base[j] = i
        return base


def aspect_bound_for(eps: float, cap: float = 1e6) -> float:
    """Configured cap on max/min average cost inside one group."""
    return float(min(eps ** -math.ceil(1.0 / (eps * eps) - 1e-9), cap))


def r_for(eps: float, cap: float = 1e6) -> float:
    """Distance-ratio bound N <= d <= rN implied by the aspect cap and the eps^{+-2} client band."""
    return aspect_bound_for(eps, cap) * eps ** -4


def _split_groups(anchors, avg, gap, bound):
    groups, cur = [], [anchors[0]]
    for prev, a in zip(anchors, anchors[1:]):
        if avg[a] > gap * avg[prev] + 1e-12 or (avg[prev] == 0 and avg[a] > 0):
            groups.append(cur)
            cur = [a]
        else:
            cur.append(a)
    groups.append(cur)
    # over-wide groups are cut into windows of ratio <= bound, greedily from the cheapest
    out = []
    for grp in groups:
        win = [grp[0]]
        for a in grp[1:]:
            if avg[a] > bound * avg[win[0]] * (1 + 1e-12):
                out.append(win)
                win = [a]
            else:
                win.append(a)
        out.append(win)
    return out


def partition_by_aspect(Iprime: FLInstance, base: BaselineResult, eps: float,
                        aspect_cap: float = 1e6) -> list[StructuredSubInstance]:
    remaining = set(Iprime.clients)
    cluster = {i: tuple(j for j in cl if j in remaining) for i, cl in base.cluster.items()}
    cluster = {i: cl for i, cl in cluster.items() if cl}
    if not cluster:
        return []
    avg = base.avgcost
    anchors = sorted(cluster, key=lambda i: (avg[i], i))
    bound = aspect_bound_for(eps, aspect_cap)
    r = r_for(eps, aspect_cap)
    gap = 1.0 / (eps * eps)
    subs = []
    for grp in _split_groups(anchors, avg, gap, bound):
        lo, hi = min(avg[a] for a in grp), max(avg[a] for a in grp)
        if hi > bound * lo * (1 + 1e-12) and not (hi == lo):
            raise AspectPartitionError(f"aspect partition failed: ratio {hi / lo:.3g} > {bound:.3g}")
        reach, _ = multi_source_sssp(Iprime.graph, grp, limit=gap * hi + DIST_TOL)
        facs = {f: c for f, c in Iprime.costs.items() if reach[f] <= gap * hi + DIST_TOL}
        for a in grp:
            facs[a] = Iprime.costs[a]
        clients = sorted(j for a in grp for j in cluster[a])
        sub = FLInstance(Iprime.graph, clients, facs, frozenset(f for f in Iprime.free if f in facs))
        N = min(base.distance[j] for j in clients)
        subs.append(StructuredSubInstance(
            sub, tuple(sorted(grp)), {a: cluster[a] for a in sorted(grp)},
            {a: avg[a] for a in grp}, float(N), r, bound,
        ))
    return subs


def merge_solutions(subs, ledger: CreditLedger, original: FLInstance) -> FLSolution:
    """Union of the sub-solutions' open sets and the credited anchors, re-evaluated on ``original``."""
    open_set = set(ledger.anchors)
    for _, sol in subs:
        open_set |= set(sol.open)
    open_set |= set(original.free)
    return evaluate(original, open_set)
