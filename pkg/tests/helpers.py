"""Independent oracles and instance builders shared by the tests.

Nothing here calls into the solver code paths being tested, except to build
the objects under test.
"""
import itertools
import math

import numpy as np

from udgfl.graph import build_udg
from udgfl.instance import FLInstance


def brute_edges(points, tol=1e-12):
    P = np.asarray(points, float)
    out = set()
    for a in range(len(P)):
        for b in range(a + 1, len(P)):
            dx, dy = P[a] - P[b]
            if dx * dx + dy * dy <= 1 + tol:
                out.add((a, b))
    return out


def bellman_ford(n, edges, weights, src):
    d = np.full(n, np.inf)
    d[src] = 0.0
    if len(edges) == 0:
        return d
    a = np.concatenate([edges[:, 0], edges[:, 1]])
    b = np.concatenate([edges[:, 1], edges[:, 0]])
    w = np.concatenate([weights, weights])
    for _ in range(n):
        cand = d[a] + w
        nd = d.copy()
        np.minimum.at(nd, b, cand)
        if np.array_equal(nd, d):
            break
        d = nd
    return d


def floyd(points):
    """All-pairs UDG distances by Floyd-Warshall on the brute-force edge set."""
    P = np.asarray(points, float)
    n = len(P)
    D = np.full((n, n), np.inf)
    np.fill_diagonal(D, 0.0)
    for a, b in brute_edges(P):
        D[a, b] = D[b, a] = float(np.hypot(*(P[a] - P[b])))
    for k in range(n):
        D = np.minimum(D, D[:, k:k + 1] + D[k:k + 1, :])
    return D


def bnb_fl(points, clients, costs):
    """Branch and bound facility location over Floyd distances; returns the optimal cost."""
    D = floyd(points)
    fac = sorted(costs)
    C = list(clients)
    if not C:
        return 0.0
    DC = D[np.ix_(C, fac)]
    best = [math.inf]
    order = sorted(range(len(fac)), key=lambda k: costs[fac[k]])

    def conn(opened):
        if not opened:
            return math.inf
        return float(DC[:, opened].min(axis=1).sum())

    def rec(i, opened, open_cost):
        # lower bound: current opening plus every client at its best reachable distance among
        # opened and undecided facilities
        undecided = order[i:]
        pool = opened + undecided
        if not pool:
            return
        lb = open_cost + float(DC[:, pool].min(axis=1).sum())
        if lb >= best[0] - 1e-12:
            return
        if i == len(order):
            best[0] = min(best[0], open_cost + conn(opened))
            return
        k = order[i]
        rec(i + 1, opened + [k], open_cost + costs[fac[k]])
        rec(i + 1, opened, open_cost)

    rec(0, [], 0.0)
    return best[0]


def tight_cluster_instance(rng, k_range=(2, 5), per=(2, 6), fac=(2, 9), spread=0.05):
    """A few tiny clusters chained so consecutive ones always touch; nets stay small."""
    k = int(rng.integers(*k_range))
    ang = rng.uniform(0, 2 * np.pi, k)
    step = rng.uniform(0.5, 0.8, k)
    cents = np.cumsum(np.column_stack([np.cos(ang), np.sin(ang)]) * step[:, None], axis=0)
    pts = np.concatenate([c + rng.uniform(-spread, spread, (int(rng.integers(*per)), 2)) for c in cents])
    g = build_udg(pts)
    n = g.n
    fset = rng.choice(n, min(n, int(rng.integers(*fac))), replace=False)
    return FLInstance(g, range(n), {int(f): float(rng.uniform(0.2, 3)) for f in fset})


def random_instance(rng, n=(6, 14), side=2.0, n_fac=(2, 8), client_p=0.8, connected=True):
    while True:
        m = int(rng.integers(*n))
        pts = rng.uniform(0, side, (m, 2))
        g = build_udg(pts)
        if connected and not g.is_connected():
            continue
        clients = [v for v in range(m) if rng.random() < client_p] or [0]
        fset = rng.choice(m, min(m, int(rng.integers(*n_fac))), replace=False)
        return FLInstance(g, clients, {int(f): float(rng.uniform(0.1, 3.0)) for f in fset})


def brute_pcfl(dist, costs, pen):
    """Cheapest open set for a prize-collecting cell by plain subset enumeration."""
    k = len(costs)
    best = math.inf
    for r in range(k + 1):
        for S in itertools.combinations(range(k), r):
            tot = sum(costs[s] for s in S)
            for j in range(len(pen)):
                c = min((dist[j][s] for s in S), default=math.inf)
                tot += min(c, pen[j])
            best = min(best, tot)
    return best


def brute_valid_vectors(Z, K):
    m = len(Z)
    out = []
    for vals in itertools.product(range(K + 1), repeat=m):
        if all(vals[i] == K or vals[j] == K or abs(vals[i] - vals[j]) <= Z[i, j] + 1
               for i in range(m) for j in range(i + 1, m)):
            out.append(vals)
    return out


def tiny_instances(rng, count):
    out = []
    while len(out) < count:
        k = int(rng.integers(2, 5))
        pts = np.concatenate([rng.uniform(0, 0.5, (1, 2)) + rng.normal(0, 0.03, (int(rng.integers(2, 5)), 2))
                              + i * np.array([0.15, 0.1]) for i in range(k)])
        g = build_udg(pts)
        if not g.is_connected():
            continue
        fac = rng.choice(g.n, int(rng.integers(1, min(g.n, 6) + 1)), replace=False)
        out.append(FLInstance(g, range(g.n), {int(f): float(rng.uniform(0.05, 1.0)) for f in fac}))
    return out


def exhaustive_root(dp, tree, D):
    """Cheapest root value over every consistent pair of valid child vector pairs."""
    root = tree.root
    assert root.portals == ()
    c1, c2 = (tree.nodes[c] for c in root.children)
    assert c1.portals == c2.portals
    hv = dp.net.net_vertices
    hp = [int(hv[p]) for p in c1.portals]
    with np.errstate(invalid="ignore"):
        Z = np.floor(D[np.ix_(hp, hp)] / dp.g + 0.5)
    V = brute_valid_vectors(Z, dp.K)
    shared = [k for k, p in enumerate(c1.portals) if p not in root.portals]
    Va = np.array(V).reshape(len(V), -1)
    same = np.all(Va[:, None, shared] == Va[None, :, shared], axis=2)
    C1 = np.array([[dp.solve_base_case(c1, a, b).cost for b in V] for a in V])
    C2 = np.array([[dp.solve_base_case(c2, a, b).cost for b in V] for a in V])
    # in1 ~ out2 and in2 ~ out1 on portals the parent does not carry
    mask = same[:, None, None, :] & same.T[None, :, :, None]
    tot = C1[:, :, None, None] + C2[None, None, :, :]
    tot = np.where(mask, tot, np.inf)
    return float(tot.min())
