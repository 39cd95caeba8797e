"""Facility-location instances and solutions on a unit disk graph, plus the exact oracle."""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import CoincidentPointsError, UnitDiskGraph, build_udg, distance_matrix

ROLES = ("client", "facility", "both", "none")


class InfeasibleAssignment(ValueError):
    pass


class OracleTooLarge(ValueError):
    pass


@dataclass(eq=False)
class FLInstance:
    graph: UnitDiskGraph
    clients: tuple
    costs: dict  # facility vertex -> opening cost
    free: frozenset = frozenset()

    def __post_init__(self):
        self.clients = tuple(sorted(int(c) for c in self.clients))
        self.costs = {int(f): float(c) for f, c in sorted(self.costs.items())}
        self.free = frozenset(int(f) for f in self.free)
        n = self.graph.n
        if any(c < 0 or c >= n for c in self.clients) or any(f < 0 or f >= n for f in self.costs):
            raise ValueError("clients and facilities must be graph vertices")
        if any(c < 0 for c in self.costs.values()):
            raise ValueError("opening costs must be nonnegative")
        if not self.free <= set(self.costs):
            raise ValueError("free facilities must be facilities")
        for f in self.free:
            self.costs[f] = 0.0

    @property
    def facilities(self) -> tuple:
        return tuple(self.costs)

    def opening_cost(self, open_set) -> float:
        return float(sum(self.costs[f] for f in open_set))

    def replace(self, **kw) -> "FLInstance":
        args = dict(graph=self.graph, clients=self.clients, costs=dict(self.costs), free=self.free)
        args.update(kw)
        return FLInstance(**args)

    def scaled(self, factor: float) -> "FLInstance":
        return self.replace(costs={f: c * factor for f, c in self.costs.items()})

    def induced(self, vertices) -> tuple["FLInstance", np.ndarray]:
        """Restrict to ``vertices``; returns the sub-instance and its local->parent id map."""
        sub = self.graph.subgraph(vertices)
        verts = np.array(sorted(set(int(v) for v in vertices)), dtype=int)
        local = {int(v): i for i, v in enumerate(verts)}
        inst = FLInstance(
            sub,
            [local[c] for c in self.clients if c in local],
            {local[f]: c for f, c in self.costs.items() if f in local},
            frozenset(local[f] for f in self.free if f in local),
        )
        return inst, verts

    def client_facility_distances(self) -> np.ndarray:
        """|C| x |F| matrix of graph distances (columns follow ``facilities``)."""
        if not self.costs:
            return np.zeros((len(self.clients), 0))
        D = distance_matrix(self.graph, self.facilities)
        return D[:, list(self.clients)].T if self.clients else np.zeros((0, len(self.costs)))


@dataclass
class FLSolution:
    open: tuple
    assignment: dict  # client -> (facility, route cost)
    open_cost: float
    conn_cost: float
    total_cost: float
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "open": list(self.open),
            "assignment": [[c, f, r] for c, (f, r) in sorted(self.assignment.items())],
            "open_cost": self.open_cost,
            "conn_cost": self.conn_cost,
            "total_cost": self.total_cost,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FLSolution":
        return cls(
            tuple(d["open"]),
            {int(c): (int(f), float(r)) for c, f, r in d["assignment"]},
            float(d["open_cost"]),
            float(d["conn_cost"]),
            float(d["total_cost"]),
            dict(d.get("provenance", {})),
        )


def _nearest_open(g: UnitDiskGraph, open_set):
    """Multi-source Dijkstra; equal distances resolve to the smaller facility id."""
    n = g.n
    dist = np.full(n, np.inf)
    owner = -np.ones(n, dtype=int)
    heap = [(0.0, f, f) for f in sorted(open_set)]
    for _, f, _ in heap:
        dist[f] = 0.0
        owner[f] = f
    heapq.heapify(heap)
    done = np.zeros(n, dtype=bool)
    while heap:
        d, f, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, w in g.adjacency[u]:
            nd = d + w
            if nd < dist[v] or (nd == dist[v] and f < owner[v] and not done[v]):
                dist[v] = nd
                owner[v] = f
                heapq.heappush(heap, (nd, f, v))
    return dist, owner


def evaluate(inst: FLInstance, open_set) -> FLSolution:
    open_set = tuple(sorted(set(int(f) for f in open_set)))
    unknown = set(open_set) - set(inst.costs)
    if unknown:
        raise ValueError(f"not facilities: {sorted(unknown)}")
    if not open_set and inst.clients:
        raise InfeasibleAssignment("infeasible assignment: no open facility")
    dist, owner = _nearest_open(inst.graph, open_set)
    assignment = {}
    for c in inst.clients:
        if not np.isfinite(dist[c]):
            raise InfeasibleAssignment(f"infeasible assignment: client {c} cannot reach an open facility")
        assignment[c] = (int(owner[c]), float(dist[c]))
    open_cost = inst.opening_cost(open_set)
    conn = float(sum(r for _, r in assignment.values()))
    return FLSolution(open_set, assignment, open_cost, conn, open_cost + conn)


def subset_min_table(D: np.ndarray) -> np.ndarray:
    """Row ``m`` holds the per-client min distance to the facility columns set in bitmask ``m``."""
    k = D.shape[1]
    table = np.empty((1 << k, D.shape[0]))
    table[0] = np.inf
    for m in range(1, 1 << k):
        low = m & -m
        table[m] = np.minimum(table[m ^ low], D[:, low.bit_length() - 1])
    return table


def subset_sum_table(costs: np.ndarray) -> np.ndarray:
    k = len(costs)
    out = np.zeros(1 << k)
    for m in range(1, 1 << k):
        low = m & -m
        out[m] = out[m ^ low] + costs[low.bit_length() - 1]
    return out


def exact_solve(inst: FLInstance, cap: int = 24) -> FLSolution:
    """Optimal solution by enumerating every subset of the non-free facilities.

    Free facilities are always open. Ties go to the lexicographically smallest open set.
    """
    fac = list(inst.facilities)
    paid = [f for f in fac if f not in inst.free]
    free = sorted(inst.free)
    if len(paid) > cap:
        raise OracleTooLarge(f"instance too large for oracle: {len(paid)} facilities > cap {cap}")
    if not inst.clients:
        return evaluate(inst, free)

    D = inst.client_facility_distances()
    col = {f: i for i, f in enumerate(fac)}
    base = np.full(len(inst.clients), np.inf)
    for f in free:
        base = np.minimum(base, D[:, col[f]])
    Dp = D[:, [col[f] for f in paid]] if paid else np.zeros((len(inst.clients), 0))
    cost_p = np.array([inst.costs[f] for f in paid])

    # split the enumeration: a table over the low facilities, a loop over the high ones
    n_low = min(len(paid), 12)
    low_min = subset_min_table(Dp[:, :n_low])
    low_open = subset_sum_table(cost_p[:n_low])
    n_high = len(paid) - n_low
    high_min = subset_min_table(Dp[:, n_low:]) if n_high else np.full((1, len(base)), np.inf)
    high_open = subset_sum_table(cost_p[n_low:])

    totals = np.empty((1 << n_high, 1 << n_low))
    with np.errstate(invalid="ignore"):
        for h in range(1 << n_high):
            reach = np.minimum(base, high_min[h])
            conn = np.minimum(low_min, reach[None, :]).sum(axis=1)
            totals[h] = high_open[h] + low_open + conn
    best = totals.min()
    if not np.isfinite(best):
        raise InfeasibleAssignment("infeasible assignment: some client reaches no facility")
    tol = 1e-9 * max(1.0, abs(best))
    candidates = []
    for h, l in zip(*np.nonzero(totals <= best + tol)):
        mask = (int(h) << n_low) | int(l)
        candidates.append(tuple(sorted(free + [paid[i] for i in range(len(paid)) if mask >> i & 1])))
    sol = evaluate(inst, min(candidates))
    sol.provenance = {"solver": "exact"}
    return sol


# ---------------------------------------------------------------------------
# instance files


def parse_instance_records(records, merge: bool = False) -> FLInstance:
    """Build an instance from ``(id, x, y, role, cost)`` records.

    With ``merge`` coincident points collapse into one vertex that keeps the
    cheapest facility cost and is a client if any merged record was.
    """
    recs = sorted(records, key=lambda r: int(r[0]))
    if [int(r[0]) for r in recs] != list(range(len(recs))):
        raise ValueError("record ids must be contiguous from 0")
    if not recs:
        raise ValueError("empty instance")
    merged: dict = {}
    order = []
    for rid, x, y, role, cost in recs:
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        key = (float(x), float(y))
        is_fac = role in ("facility", "both")
        if is_fac and cost is None:
            raise ValueError(f"record {rid}: facility without cost")
        if key in merged:
            if not merge:
                raise CoincidentPointsError(f"coincident points {merged[key]['id']} and {rid}")
            slot = merged[key]
        else:
            slot = merged[key] = {"id": rid, "client": False, "cost": None}
            order.append(key)
        slot["client"] |= role in ("client", "both")
        if is_fac:
            c = float(cost)
            slot["cost"] = c if slot["cost"] is None else min(slot["cost"], c)
    pts = np.array(order, dtype=float)
    g = build_udg(pts)
    clients = [i for i, k in enumerate(order) if merged[k]["client"]]
    costs = {i: merged[k]["cost"] for i, k in enumerate(order) if merged[k]["cost"] is not None}
    return FLInstance(g, clients, costs)


def instance_records(inst: FLInstance) -> list:
    out = []
    cl = set(inst.clients)
    for v in range(inst.graph.n):
        x, y = inst.graph.points[v]
        is_c, is_f = v in cl, v in inst.costs
        role = "both" if is_c and is_f else "client" if is_c else "facility" if is_f else "none"
        out.append((v, float(x), float(y), role, inst.costs[v] if is_f else None))
    return out


def read_instance(path, merge: bool = False) -> FLInstance:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json" or text.lstrip().startswith(("{", "[")):
        data = json.loads(text)
        rows = data["points"] if isinstance(data, dict) else data
        recs = [(r["id"], r["x"], r["y"], r["role"], r.get("cost")) for r in rows]
    else:
        recs = []
        for ln, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (4, 5):
                raise ValueError(f"line {ln}: expected 'id x y role [cost]'")
            cost = float(parts[4]) if len(parts) == 5 else None
            recs.append((int(parts[0]), float(parts[1]), float(parts[2]), parts[3], cost))
    return parse_instance_records(recs, merge=merge)


def write_instance(inst: FLInstance, path) -> None:
    path = Path(path)
    recs = instance_records(inst)
    if path.suffix == ".json":
        rows = [{"id": i, "x": x, "y": y, "role": r, **({"cost": c} if c is not None else {})}
                for i, x, y, r, c in recs]
        path.write_text(json.dumps({"points": rows}, indent=1))
    else:
        lines = [f"{i} {x!r} {y!r} {r}" + (f" {c!r}" if c is not None else "") for i, x, y, r, c in recs]
        path.write_text("\n".join(lines) + "\n")
