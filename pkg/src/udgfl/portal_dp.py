"""Dynamic program over the decomposition tree with rounded in/out portal vectors.

One unit of a vector value is ``g`` (the portal spacing, a bound on the
weighted length of that many hops). A finite ``in`` value v promises an open
facility of the subtree within v*g of the portal; a finite ``out`` value
lets clients leave through the portal and pay v*g beyond it. The value K is
the sentinel "no constraint" / "no outside route".
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .instance import FLInstance, FLSolution, evaluate, subset_min_table, subset_sum_table
from .net_tree import DecompNode, DecompTree

INF = math.inf
TOL = 1e-9


class DPTableTooLarge(RuntimeError):
    pass


@dataclass(frozen=True)
class PortalVector:
    node: int
    values: tuple
    kind: str = "in"


@dataclass
class DPEntry:
    cost: float
    choice: object = None  # leaf: (mask, opened facilities); internal: ((in1, out1), (in2, out2))
    load: tuple = ()  # clients leaving through each portal (leaves only)


def rounded_distances(D: np.ndarray, g: float) -> np.ndarray:
    """Pairwise portal distances rounded to the nearest multiple of ``g`` (in units)."""
    with np.errstate(invalid="ignore"):
        Z = np.where(np.isfinite(D), np.floor(D / g + 0.5), np.iinfo(np.int32).max)
    return Z.astype(np.int64)


def is_valid(values, Z, K) -> bool:
    vals = list(values)
    for i, j in itertools.combinations(range(len(vals)), 2):
        a, b = vals[i], vals[j]
        if a < K and b < K and abs(a - b) > Z[i, j] + 1:
            return False
    return True


def _valid_tuples(Z, K, fixed=None):
    """Backtracking over 0..K per portal; ``fixed`` pins some coordinates."""
    m = len(Z)
    fixed = fixed or {}
    cur = [0] * m

    def rec(i):
        if i == m:
            yield tuple(cur)
            return
        choices = [fixed[i]] if i in fixed else range(K + 1)
        for v in choices:
            ok = v == K or all(cur[j] == K or abs(cur[j] - v) <= Z[i, j] + 1 for j in range(i))
            if ok:
                cur[i] = v
                yield from rec(i + 1)
        cur[i] = 0

    yield from rec(0)


def enumerate_valid_vectors(node: DecompNode, K: int, Z: np.ndarray, kind: str = "in", cap: int = 10**6):
    """Stream every valid vector over ``node``'s portals (``Z`` holds their rounded distances)."""
    count = 0
    for vals in _valid_tuples(Z, K):
        count += 1
        if count > cap:
            raise DPTableTooLarge(f"more than {cap} valid vectors at node {node.id}; use coarser portals")
        yield PortalVector(node.id, vals, kind)


def check_consistency(t: DecompNode, inV, outV, t1: DecompNode, inV1, outV1,
                      t2: DecompNode, inV2, outV2) -> bool:
    """The three join rules between a node and its two children."""
    P, P1, P2 = list(t.portals), list(t1.portals), list(t2.portals)
    i0 = {p: k for k, p in enumerate(P)}
    i1 = {p: k for k, p in enumerate(P1)}
    i2 = {p: k for k, p in enumerate(P2)}
    for p in P:
        a = inV1[i1[p]] if p in i1 else None
        b = inV2[i2[p]] if p in i2 else None
        if a != inV[i0[p]] and b != inV[i0[p]]:
            return False
    for p in (set(P1) & set(P2)) - set(P):
        if inV1[i1[p]] != outV2[i2[p]] or inV2[i2[p]] != outV1[i1[p]]:
            return False
    for p in set(P1) & set(P2) & set(P):
        if not (outV1[i1[p]] == outV2[i2[p]] == outV[i0[p]]):
            return False
    return True


@dataclass
class _Leaf:
    L: list  # host ids of the leaf's snapping targets (portals first, then the core)
    m: int  # number of real portals
    DL: np.ndarray  # |L| x n host distances
    n_p: np.ndarray
    snap_cost: float
    facs: list  # (L index, facility, cost)
    inside: np.ndarray  # mask x |L|
    feas: np.ndarray  # mask x m
    open_sum: np.ndarray


@dataclass
class DPTable:
    entries: dict
    root_cost: float
    g: float
    K: int
    stats: dict = field(default_factory=dict)


class PortalDP:
    """Top-down memoised evaluation of the table; only reachable entries are built."""

    def __init__(self, tree: DecompTree, inst: FLInstance, g: float | None = None,
                 K: int | None = None, vector_cap: int = 10**6, work_cap: int = 200_000,
                 base_cap: int = 16, memo_cap: int = 250_000):
        self.tree = tree
        self.net = tree.net
        self.inst = inst
        self.host = tree.net.host
        if inst.graph.n != self.host.n:
            raise ValueError("instance and net must share the host graph")
        self.g = float(g if g is not None else tree.delta_portal)
        Gamma = tree.net.Gamma
        self.K = int(K if K is not None else math.ceil(Gamma / self.g - 1e-9) + 1)
        self.vector_cap, self.work_cap, self.base_cap = vector_cap, work_cap, base_cap
        self.memo_cap = memo_cap
        hv = self.net.net_vertices
        rows = sorted({int(hv[p]) for t in tree.nodes for p in t.portals}
                      | {int(hv[t.core]) for t in tree.leaves() if t.core is not None})
        self._row = {v: i for i, v in enumerate(rows)}
        self._D = np.atleast_2d(dijkstra(self.host.csr, indices=rows)) if rows else np.zeros((0, self.host.n))
        self._Z = {}
        self._leaf = {}
        self.memo: dict = {}
        self._cache: dict = {}
        self.work = 0
        # host points each leaf accounts for
        local = self.net.local
        center = np.array([local[int(c)] for c in self.net.ball_of])
        self._owner = {}
        for t in tree.leaves():
            for v in np.nonzero(np.isin(center, list(t.owned)))[0].tolist():
                self._owner[v] = t.id
        self._clients = set(inst.clients)

    # -- helpers -------------------------------------------------------
    def host_portals(self, t: DecompNode) -> list:
        hv = self.net.net_vertices
        return [int(hv[p]) for p in t.portals]

    def Z(self, t: DecompNode) -> np.ndarray:
        if t.id not in self._Z:
            hp = self.host_portals(t)
            D = self._D[[self._row[p] for p in hp]][:, hp] if hp else np.zeros((0, 0))
            self._Z[t.id] = rounded_distances(D, self.g)
        return self._Z[t.id]

    def valid(self, t, values) -> bool:
        return is_valid(values, self.Z(t), self.K)

    def leaf_data(self, t: DecompNode) -> _Leaf:
        if t.id in self._leaf:
            return self._leaf[t.id]
        hv = self.net.net_vertices
        L = self.host_portals(t)
        m = len(L)
        if t.core is not None and int(hv[t.core]) not in L:
            L.append(int(hv[t.core]))
        DL = self._D[[self._row[v] for v in L]]
        pts = [v for v, o in self._owner.items() if o == t.id]
        n_p = np.zeros(len(L))
        snap_cost = 0.0
        best = {}
        for v in sorted(pts):
            k = int(np.argmin(DL[:, v]))
            if v in self._clients:
                n_p[k] += 1
                snap_cost += DL[k, v]
            if v in self.inst.costs:
                c = self.inst.costs[v]
                if k not in best or (c, v) < (best[k][1], best[k][0]):
                    best[k] = (v, c)
        facs = [(k, f, c) for k, (f, c) in sorted(best.items())]
        if len(facs) > self.base_cap:
            raise DPTableTooLarge(f"leaf {t.id} has {len(facs)} facility portals (cap {self.base_cap})")
        if facs:
            M = np.array([[DL[p, L[k]] + DL[k, f] for k, f, _ in facs] for p in range(len(L))])
            inside = subset_min_table(M)
            F = np.array([[DL[p, f] for _, f, _ in facs] for p in range(m)]).reshape(m, len(facs))
            feas = subset_min_table(F)
            open_sum = subset_sum_table(np.array([c for _, _, c in facs]))
        else:
            inside = np.full((1, len(L)), INF)
            feas = np.full((1, m), INF)
            open_sum = np.zeros(1)
        data = _Leaf(L, m, DL, n_p, snap_cost, facs, inside, feas, open_sum)
        self._leaf[t.id] = data
        return data

    # -- base case -----------------------------------------------------
    def _out_costs(self, t, d, outV):
        key = (t.id, "out", outV)
        hit = self._cache.get(key)
        if hit is None:
            g, K = self.g, self.K
            out_route = np.full(len(d.L), INF)
            for i, o in enumerate(outV):
                if o < K:
                    out_route = np.minimum(out_route, d.DL[i, d.L] + o * g)
            active = d.n_p > 0
            with np.errstate(invalid="ignore"):
                per = np.minimum(d.inside[:, active], out_route[active][None, :])
                conn = (per * d.n_p[active][None, :]).sum(axis=1)
            hit = self._cache[key] = (d.open_sum + conn + d.snap_cost, out_route)
        return hit

    def _in_ok(self, t, d, inV):
        key = (t.id, "in", inV)
        hit = self._cache.get(key)
        if hit is None:
            ok = np.ones(len(d.open_sum), dtype=bool)
            for i, v in enumerate(inV):
                if v < self.K:
                    ok &= d.feas[:, i] <= v * self.g + TOL
            hit = self._cache[key] = ok
        return hit

    def solve_base_case(self, t: DecompNode, inV, outV) -> DPEntry:
        d = self.leaf_data(t)
        cost, _ = self._out_costs(t, d, outV)
        masked = np.where(self._in_ok(t, d, inV), cost, INF)
        mask = int(np.argmin(masked))
        if not np.isfinite(masked[mask]):
            return DPEntry(INF)
        opened = tuple(sorted(f for b, (_, f, _) in enumerate(d.facs) if mask >> b & 1))
        return DPEntry(float(masked[mask]), (mask, opened))

    def leaf_load(self, t: DecompNode, inV, outV, mask: int) -> tuple:
        """Clients of leaf ``t`` that leave through each portal under the chosen open set."""
        d = self.leaf_data(t)
        _, out_route = self._out_costs(t, d, outV)
        g, K = self.g, self.K
        load = [0] * len(outV)
        for p in np.nonzero((d.n_p > 0) & (out_route < d.inside[mask] - TOL))[0]:
            i = int(np.argmin([d.DL[q, d.L[p]] + outV[q] * g if outV[q] < K else INF
                               for q in range(len(outV))]))
            load[i] += int(d.n_p[p])
        return tuple(load)

    # -- joins ---------------------------------------------------------
    def solve(self, t: DecompNode, inV: tuple, outV: tuple) -> DPEntry:
        key = (t.id, inV, outV)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        if len(self.memo) >= self.memo_cap:
            raise DPTableTooLarge(f"table exceeds {self.memo_cap} entries")
        if t.is_leaf:
            entry = self.solve_base_case(t, inV, outV)
        else:
            entry = self._join(t, inV, outV)
        self.memo[key] = entry
        return entry

    def _join(self, t: DecompNode, inV, outV) -> DPEntry:
        K = self.K
        c1, c2 = (self.tree.nodes[c] for c in t.children)
        Pc = list(c1.portals)
        pos = {p: k for k, p in enumerate(t.portals)}
        new = [k for k, p in enumerate(Pc) if p not in pos]
        finite = [k for k, p in enumerate(Pc) if p in pos and inV[pos[p]] < K]
        est = (2 ** len(finite)) * (K + 1) ** (2 * len(new))
        self.work += est
        if est > self.work_cap or self.work > 50 * self.work_cap:
            raise DPTableTooLarge(f"join at node {t.id} needs ~{est} combinations (cap {self.work_cap})")
        Zc = self.Z(c1)
        base_out = {k: outV[pos[p]] for k, p in enumerate(Pc) if p in pos}
        best = DPEntry(INF)
        for bits in range(1 << len(finite)):
            fix1, fix2 = {}, {}
            for k, p in enumerate(Pc):
                if p in pos:
                    v = inV[pos[p]]
                    fix1[k] = fix2[k] = K
                    if v < K:
                        (fix1 if not bits >> finite.index(k) & 1 else fix2)[k] = v
            # in1 and out2 share the new-portal values a; in2 and out1 share b
            A = self._completions(Zc, fix1, base_out, new)
            B = self._completions(Zc, fix2, base_out, new)
            if len(A) * len(B) > self.vector_cap:
                raise DPTableTooLarge(f"{len(A) * len(B)} child vector pairs at node {t.id}")
            for in1, out2 in A:
                for in2, out1 in B:
                    e1 = self.solve(c1, in1, out1)
                    if e1.cost == INF:
                        continue
                    e2 = self.solve(c2, in2, out2)
                    total = e1.cost + e2.cost
                    if total < best.cost - TOL:
                        best = DPEntry(total, ((in1, out1), (in2, out2)))
        return best

    def _completions(self, Z, fix_in, base_out, new):
        """Pairs (in vector, out vector) over child portals sharing values on ``new``."""
        K = self.K
        out = []
        for vals in itertools.product(range(K + 1), repeat=len(new)):
            iv = dict(fix_in)
            ov = dict(base_out)
            for k, v in zip(new, vals):
                iv[k] = ov[k] = v
            a = tuple(iv[k] for k in range(len(Z)))
            b = tuple(ov[k] for k in range(len(Z)))
            if is_valid(a, Z, K) and is_valid(b, Z, K):
                out.append((a, b))
        return out

    # -- driver --------------------------------------------------------
    def fill(self) -> DPTable:
        root = self.tree.root
        e = self.solve(root, (), ())
        if e.cost == INF:
            raise RuntimeError("instance infeasible under portal discretization")
        per_node = {}
        for (tid, _, _) in self.memo:
            per_node[tid] = per_node.get(tid, 0) + 1
        stats = {"entries": len(self.memo), "work": self.work, "g": self.g, "K": self.K,
                 "per_node": per_node, "max_portals": self.tree.max_portals}
        return DPTable(self.memo, e.cost, self.g, self.K, stats)

    def opened(self) -> list:
        out = set()
        stack = [(self.tree.root, (), ())]
        while stack:
            t, inV, outV = stack.pop()
            e = self.memo[(t.id, inV, outV)]
            if t.is_leaf:
                out.update(e.choice[1])
                e.load = self.leaf_load(t, inV, outV, e.choice[0])
            else:
                (in1, out1), (in2, out2) = e.choice
                c1, c2 = (self.tree.nodes[c] for c in t.children)
                stack.append((c1, in1, out1))
                stack.append((c2, in2, out2))
        return sorted(out)


def fill_table(tree: DecompTree, inst: FLInstance, **kw) -> tuple[DPTable, PortalDP]:
    dp = PortalDP(tree, inst, **kw)
    return dp.fill(), dp


def extract_solution(dp: PortalDP, inst: FLInstance | None = None) -> FLSolution:
    """Backtrack the opened facilities and price them exactly on the piece's own metric."""
    inst = inst or dp.inst
    opened = set(dp.opened()) | set(inst.free)
    if not opened and inst.clients:
        opened = {min(inst.costs, key=lambda f: (inst.costs[f], f))}
    sol = evaluate(inst, opened)
    root = dp.memo[(dp.tree.root.id, (), ())]
    sol.provenance = {"solver": "portal_dp", "dp_cost": root.cost, "g": dp.g, "K": dp.K}
    return sol

