"""Approximation scheme for instances inside a bounded box.

Guess a sparse facility set F' (every subset up to a size cap), cut the
plane with a randomly shifted grid of 1/2 x 1/2 cells, solve each cell as a
prize-collecting instance whose penalties are distances to F', and keep the
cheapest assembled solution.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .graph import bounding_side, distance_matrix
from .instance import FLInstance, FLSolution, evaluate, subset_min_table, subset_sum_table

CELL = 0.5
NET_CONSTANT = 64 / math.pi


class NetEnumerationInfeasible(RuntimeError):
    pass


def net_size_cap(L: float, eps: float) -> int:
    return math.ceil(NET_CONSTANT * L / (eps * eps) - 1e-9)


def count_nets(n_fac: int, size_cap: int) -> int:
    return sum(math.comb(n_fac, k) for k in range(min(size_cap, n_fac) + 1))


def enumerate_candidate_nets(F, size_cap: int, limit: int | None = 200_000):
    """All subsets of ``F`` with at most ``size_cap`` members, smallest first."""
    F = sorted(F)
    total = count_nets(len(F), size_cap)
    if limit is not None and total > limit:
        raise NetEnumerationInfeasible(
            f"net enumeration infeasible: {total} candidate sets (|F|={len(F)}, cap {size_cap}) > {limit}")
    for k in range(min(size_cap, len(F)) + 1):
        yield from itertools.combinations(F, k)


def sample_candidate_nets(F, size_cap: int, n: int, rng=None, seeds=()):
    """Heuristic stand-in for full enumeration: ``seeds``, the empty set, all singletons, then random subsets."""
    rng = np.random.default_rng(rng)
    F = sorted(F)
    seen = {()}
    for s in seeds:
        s = tuple(sorted(f for f in s if f in set(F)))[:size_cap]
        if s not in seen:
            seen.add(s)
            yield s
    yield ()
    for f in F[:n]:
        seen.add((f,))
        yield (f,)
    tries = 0
    while len(seen) < n and tries < 20 * n:
        tries += 1
        k = int(rng.integers(1, min(size_cap, len(F)) + 1)) if F else 0
        s = tuple(sorted(rng.choice(F, k, replace=False).tolist())) if k else ()
        if s not in seen:
            seen.add(s)
            yield s


@dataclass
class GridPartition:
    offset: tuple
    cells: dict  # (i, j) -> sorted vertex list

    def cell_of(self) -> dict:
        return {v: c for c, vs in self.cells.items() for v in vs}


def cell_index(points: np.ndarray, offset) -> np.ndarray:
    return np.floor((points - np.asarray(offset)) / CELL).astype(np.int64)


def make_grid(points, rng=None, offset=None) -> GridPartition:
    """Grid of 1/2-cells shifted by a uniform offset in [0, 1/2)^2."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if offset is None:
        rng = np.random.default_rng(rng)
        offset = tuple(float(x) for x in rng.uniform(0.0, CELL, 2))
    idx = cell_index(pts, offset)
    cells: dict = {}
    for v, (i, j) in enumerate(idx.tolist()):
        cells.setdefault((i, j), []).append(v)
    return GridPartition(tuple(offset), cells)


@dataclass
class PCFLInstance:
    clients: list
    facilities: list
    costs: np.ndarray
    penalties: np.ndarray  # per client, distance to F' (inf if unreachable)
    dist: np.ndarray  # |clients| x |facilities| Euclidean distances

    @property
    def n_clients(self) -> int:
        return len(self.clients)


@dataclass
class PCFLResult:
    open: tuple
    served: tuple
    penalized: tuple
    cost: float
    mode: str = "exact"


def build_pcfl(cell, Fprime, inst: FLInstance, D_net: np.ndarray | None = None) -> PCFLInstance:
    """Prize-collecting instance of one cell; penalties are graph distances to ``Fprime``."""
    cell = sorted(cell)
    cl = [v for v in cell if v in set(inst.clients)]
    fa = [v for v in cell if v in inst.costs]
    pts = inst.graph.points
    if D_net is None:
        if Fprime:
            D_net = distance_matrix(inst.graph, sorted(Fprime)).min(axis=0)
        else:
            D_net = np.full(inst.graph.n, np.inf)
    pen = np.array([D_net[j] for j in cl], dtype=float)
    dist = np.linalg.norm(pts[cl][:, None, :] - pts[fa][None, :, :], axis=2) if cl and fa else np.zeros((len(cl), len(fa)))
    return PCFLInstance(cl, fa, np.array([inst.costs[f] for f in fa], dtype=float), pen, dist)


def _pcfl_cost(p: PCFLInstance, mask_open) -> float:
    idx = [k for k in range(len(p.facilities)) if mask_open[k]]
    conn = p.dist[:, idx].min(axis=1) if idx else np.full(p.n_clients, np.inf)
    return float(p.costs[idx].sum() + np.minimum(conn, p.penalties).sum())


def solve_pcfl(p: PCFLInstance, eps: float | None = None, exact_cap: int = 20, rng=None) -> PCFLResult:
    """Exact subset enumeration for small cells, open/close/swap local search otherwise."""
    k = len(p.facilities)
    if p.n_clients == 0:
        return PCFLResult((), (), (), 0.0)
    if k <= exact_cap:
        table = subset_min_table(p.dist) if k else np.full((1, p.n_clients), np.inf)
        opened = subset_sum_table(p.costs) if k else np.zeros(1)
        with np.errstate(invalid="ignore"):
            tot = opened + np.minimum(table, p.penalties[None, :]).sum(axis=1)
        mask = int(np.argmin(tot))
        cur = [bool(mask >> b & 1) for b in range(k)]
        mode = "exact"
        cost = float(tot[mask])
    else:
        cur = [False] * k
        cost = _pcfl_cost(p, cur)
        improved = True
        while improved:
            improved = False
            moves = [(a,) for a in range(k)] + [(a, b) for a in range(k) for b in range(k) if cur[a] and not cur[b]]
            for mv in moves:
                trial = list(cur)
                for a in mv:
                    trial[a] = not trial[a]
                c = _pcfl_cost(p, trial)
                if c < cost - 1e-12:
                    cur, cost, improved = trial, c, True
                    break
        mode = "local_search"
    idx = [b for b in range(k) if cur[b]]
    conn = p.dist[:, idx].min(axis=1) if idx else np.full(p.n_clients, np.inf)
    served = tuple(p.clients[j] for j in range(p.n_clients) if conn[j] <= p.penalties[j])
    pen = tuple(p.clients[j] for j in range(p.n_clients) if conn[j] > p.penalties[j])
    return PCFLResult(tuple(p.facilities[b] for b in idx), served, pen, cost, mode)


@dataclass
class _Cell:
    clients: np.ndarray  # column indices into the client list
    fac: list  # facility ids in the cell
    conn: np.ndarray  # 2^k x |clients| subset minimum distances
    open_sum: np.ndarray


def _cell_tables(inst, grid, client_col):
    pts = inst.graph.points
    cells = []
    for vs in grid.cells.values():
        cl = [v for v in vs if v in client_col]
        if not cl:
            continue
        fa = [v for v in vs if v in inst.costs]
        if len(fa) > 16:
            fa = sorted(fa, key=lambda f: (inst.costs[f], f))[:16]
        if fa:
            dist = np.linalg.norm(pts[cl][:, None, :] - pts[fa][None, :, :], axis=2)
            conn = subset_min_table(dist)
            open_sum = subset_sum_table(np.array([inst.costs[f] for f in fa]))
        else:
            conn = np.full((1, len(cl)), np.inf)
            open_sum = np.zeros(1)
        cells.append(_Cell(np.array([client_col[v] for v in cl]), fa, conn, open_sum))
    return cells


def solve_bounded(inst: FLInstance, L: float | None = None, eps: float = 0.5, grid_trials: int = 32,
                  rng=None, net_limit: int | None = 200_000, sample: int | None = None,
                  seed_nets=(), top: int = 8) -> FLSolution:
    """Best assembled solution over candidate nets x random grids, priced exactly at the end.

    ``sample`` switches to the heuristic sampled-net mode (``seed_nets`` go first).
    """
    rng = np.random.default_rng(rng)
    pts = inst.graph.points
    side = bounding_side(pts)
    L = side if L is None else float(L)
    if side > L + 1e-9:
        raise ValueError(f"points span {side:.3f} > L = {L}")
    free = sorted(inst.free)
    paid = [f for f in inst.facilities if f not in inst.free]
    cap = net_size_cap(max(L, CELL), eps)
    if sample:
        nets = list(sample_candidate_nets(paid, cap, sample, rng, seed_nets))
        heuristic = True
    else:
        nets = list(enumerate_candidate_nets(paid, cap, net_limit))
        heuristic = False
    if not inst.clients:
        return evaluate(inst, free)

    clients = list(inst.clients)
    client_col = {c: k for k, c in enumerate(clients)}
    facs = list(inst.facilities)
    Dfc = distance_matrix(inst.graph, facs)[:, clients]  # |F| x |C|
    row = {f: i for i, f in enumerate(facs)}
    free_min = Dfc[[row[f] for f in free]].min(axis=0) if free else np.full(len(clients), np.inf)
    # penalty rows: distance from each client to F' (free facilities always included)
    if len(paid) <= 20 and not heuristic:
        table = subset_min_table(Dfc[[row[f] for f in paid]].T) if paid else np.full((1, len(clients)), np.inf)
        masks = [sum(1 << paid.index(f) for f in net) for net in nets]
        pen = np.minimum(table[masks], free_min[None, :])
    else:
        pen = np.array([np.minimum(Dfc[[row[f] for f in net]].min(axis=0) if net else np.inf, free_min)
                        for net in nets])
    net_open = np.array([sum(inst.costs[f] for f in net) for net in nets])

    offsets = [tuple(float(x) for x in rng.uniform(0.0, CELL, 2)) for _ in range(grid_trials)]
    candidates = []  # (bound, trial, net index)
    choices = {}
    for tr, off in enumerate(offsets):
        grid = make_grid(pts, offset=off)
        total = net_open.copy()
        picks = []
        for cell in _cell_tables(inst, grid, client_col):
            P = pen[:, cell.clients]  # nets x |J|
            with np.errstate(invalid="ignore"):
                # nets x subsets; chunk to bound memory
                best = np.empty(len(nets))
                arg = np.empty(len(nets), dtype=int)
                chunk = max(1, 2_000_000 // max(1, cell.conn.size))
                for s in range(0, len(nets), chunk):
                    val = np.minimum(cell.conn[None, :, :], P[s:s + chunk, None, :]).sum(axis=2)
                    val += cell.open_sum[None, :]
                    arg[s:s + chunk] = val.argmin(axis=1)
                    best[s:s + chunk] = val[np.arange(len(val)), arg[s:s + chunk]]
            total += best
            picks.append((cell.fac, arg))
        choices[tr] = picks
        for k in np.argsort(total, kind="stable")[:top]:
            candidates.append((float(total[k]), tr, int(k)))
    candidates.sort()
    best_sol = None
    seen = set()
    for bound, tr, k in candidates[: top * 2]:
        if not np.isfinite(bound):
            continue
        opened = set(nets[k]) | set(free)
        for fac, arg in choices[tr]:
            m = int(arg[k])
            opened |= {fac[b] for b in range(len(fac)) if m >> b & 1}
        key = tuple(sorted(opened))
        if key in seen:
            continue
        seen.add(key)
        sol = evaluate(inst, key)
        if best_sol is None or sol.total_cost < best_sol.total_cost - 1e-12:
            best_sol = sol
            best_sol.provenance = {"solver": "boxptas", "bound": bound, "trial": tr,
                                   "net": list(nets[k]), "offset": list(offsets[tr])}
    if best_sol is None:
        # no finite assembly (no candidate reaches every client): open everything reachable
        best_sol = evaluate(inst, facs)
        best_sol.provenance = {"solver": "boxptas", "fallback": "all facilities"}
    best_sol.provenance.update(nets=len(nets), grid_trials=grid_trials, size_cap=cap,
                               heuristic=heuristic, L=L)
    return best_sol
