"""1/8-nets over a bounded-diameter piece and the separator decomposition tree with portals."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .graph import DIST_TOL, UnitDiskGraph, diameter
from .separator import Separator, find_partly_separator

NET_SPACING = 0.125
NET_SIZE_CONSTANT = 64


@dataclass(eq=False)
class NetGraph:
    host: UnitDiskGraph
    net_vertices: np.ndarray  # sorted host ids of V' (base net plus augmentation)
    base: frozenset  # host ids of the greedy net
    ball_of: np.ndarray  # host id -> host id of its ball center
    augmented_pairs: list  # (u', v', a, b): balls u', v' joined through host edge (a, b)
    net_udg: UnitDiskGraph  # induced on net_vertices; local id k <-> net_vertices[k]
    Gamma: float

    @property
    def local(self) -> dict:
        return {int(v): k for k, v in enumerate(self.net_vertices)}

    def size_bound(self) -> float:
        return NET_SIZE_CONSTANT * (2 * self.Gamma + 1) ** 4


def build_net(H, Gamma: float | None = None) -> NetGraph:
    """Greedy 1/8-net in vertex-id order plus witness vertices for far-apart adjacent balls.

    ``H`` is a SubInstanceH or a bare UnitDiskGraph.
    """
    host = H if isinstance(H, UnitDiskGraph) else H.inst.graph
    if Gamma is None:
        Gamma = H.Gamma if hasattr(H, "Gamma") else diameter(host)
    pts = host.points
    cell = np.floor(pts / NET_SPACING).astype(np.int64)
    grid = defaultdict(list)
    base = []
    ball = np.empty(host.n, dtype=int)
    for v in range(host.n):
        cx, cy = cell[v]
        near = [u for dx in (-1, 0, 1) for dy in (-1, 0, 1) for u in grid.get((cx + dx, cy + dy), ())]
        d2 = [((pts[u] - pts[v]) ** 2).sum() for u in near]
        if all(d >= NET_SPACING ** 2 for d in d2):
            base.append(v)
            grid[(cx, cy)].append(v)
            ball[v] = v
        else:
            # first processed center whose closed 1/8-ball holds v
            ball[v] = min(u for u, d in zip(near, d2) if d <= NET_SPACING ** 2 + 1e-15)
    witness = {}
    for a, b in host.edges.tolist():
        u, w = ball[a], ball[b]
        if u == w:
            continue
        key = (min(u, w), max(u, w))
        if ((pts[u] - pts[w]) ** 2).sum() <= 1.0 + 1e-12:
            continue  # centres already adjacent
        if key not in witness or (a, b) < witness[key]:
            witness[key] = (a, b)
    extra = set()
    pairs = []
    for (u, w), (a, b) in sorted(witness.items()):
        extra.update((a, b))
        pairs.append((int(u), int(w), int(a), int(b)))
    verts = np.array(sorted(set(base) | extra), dtype=int)
    return NetGraph(host, verts, frozenset(base), ball, pairs, host.subgraph(verts), float(Gamma))


def path_portals(path, step: int) -> list:
    """Every ``step``-th vertex of ``path`` plus both endpoints."""
    idx = sorted(set(range(0, len(path), step)) | {len(path) - 1})
    return [path[i] for i in idx]


def portal_spacing(Gamma: float, eps_prime: float) -> int:
    return max(1, math.ceil(eps_prime * Gamma / math.log2(Gamma + 2) - 1e-9))


@dataclass
class DecompNode:
    id: int
    depth: int
    psi: frozenset  # net-local ids
    bd: list  # boundary paths (net-local vertex lists)
    X: frozenset
    portals: tuple  # all portals on the boundary paths
    owned: frozenset  # net vertices whose balls this subtree accounts for
    children: tuple = ()
    separator: Separator | None = None
    sep_paths: tuple = ()  # the two new paths (net-local)
    sep_portals: tuple = ()  # portals lying on the two new paths
    new_portals: tuple = ()  # sep_portals not already in ``portals``
    source: int = 0  # separator source handed down from the parent

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def core(self):
        return next(iter(self.X)) if len(self.X) == 1 else None


@dataclass
class DecompTree:
    nodes: list
    net: NetGraph
    s: int
    delta_portal: int
    eps_prime: float

    @property
    def root(self) -> DecompNode:
        return self.nodes[0]

    def leaves(self):
        return [t for t in self.nodes if t.is_leaf]

    @property
    def depth(self) -> int:
        return max(t.depth for t in self.nodes)

    @property
    def max_portals(self) -> int:
        return max(len(t.portals) for t in self.nodes)

    def depth_bound(self) -> int:
        n = len(self.net.net_vertices)
        return math.ceil(math.log(max(n, 1), 1.5) - 1e-9) + 1

    def to_dict(self) -> dict:
        hv = self.net.net_vertices
        return {
            "s": int(hv[self.s]),
            "delta_portal": self.delta_portal,
            "eps_prime": self.eps_prime,
            "nodes": [
                {
                    "id": t.id, "depth": t.depth, "psi": len(t.psi), "core": len(t.X),
                    "portals": [int(hv[p]) for p in t.portals],
                    "new_portals": [int(hv[p]) for p in t.new_portals],
                    "children": list(t.children),
                }
                for t in self.nodes
            ],
        }


def build_decomp_tree(net: NetGraph, s: int | None = None, eps_prime: float = 1 / 32,
                      delta_portal: int | None = None) -> DecompTree:
    """Split regions with partly separators until every core has at most one vertex.

    ``s`` is a net-local id (default 0). Children get ``side_i`` plus the new
    paths; the first child also owns the path vertices' balls.
    """
    G = net.net_udg
    s = 0 if s is None else int(s)
    step = delta_portal if delta_portal is not None else portal_spacing(net.Gamma, eps_prime)
    allv = frozenset(range(G.n))
    nodes = [DecompNode(0, 0, allv, [], allv, (), allv, source=s)]
    stack = [0]
    while stack:
        t = nodes[stack.pop()]
        if len(t.X) <= 1:
            continue
        psi = sorted(t.psi)
        loc = {v: i for i, v in enumerate(psi)}
        region = G.subgraph(psi)
        sep = find_partly_separator(region, [loc[v] for v in t.X], loc[t.source],
                                    avoid=[loc[p] for p in t.portals if p in loc])
        px = [psi[v] for v in sep.path_x]
        py = [psi[v] for v in sep.path_y]
        P = set(px) | set(py)
        side1 = {psi[v] for v in sep.side1}
        side2 = {psi[v] for v in sep.side2}
        sp = sorted(set(path_portals(px, step)) | set(path_portals(py, step)))
        portals = tuple(sorted(set(t.portals) | set(sp)))
        bd = t.bd + [px, py]
        t.separator = sep
        t.sep_paths = (px, py)
        t.sep_portals = tuple(sp)
        t.new_portals = tuple(p for p in sp if p not in set(t.portals))
        kids = []
        for side, own in ((side1, t.owned & (side1 | P)), (side2, t.owned & side2)):
            node = DecompNode(len(nodes), t.depth + 1, frozenset(side | P), bd,
                              frozenset(t.X & side), portals, frozenset(own),
                              source=psi[sep.source])
            nodes.append(node)
            kids.append(node.id)
            stack.append(node.id)
        t.children = tuple(kids)
    return DecompTree(nodes, net, s, step, eps_prime)


def _path_gap(path, portals, D_pairs):
    """Largest along-path weighted distance between consecutive portals of ``path``."""
    pos = [i for i, v in enumerate(path) if v in portals]
    gap = 0.0
    for i, j in zip(pos, pos[1:]):
        gap = max(gap, sum(D_pairs(path[k], path[k + 1]) for k in range(i, j)))
    return gap


def portal_detour_bound_audit(net: NetGraph, tree: DecompTree, samples: int = 10_000, rng=None,
                              host_samples: int = 2_000) -> dict:
    """Check d(u',pi) + d(v',pi) <= d(u',v') + delta + 4 over sampled sibling pairs.

    Distances live in the region graph G'[psi(t)]. delta is the declared
    portal spacing (hops, each of weight <= 1), so a missing portal shows up
    as a violation; the measured gap is reported as ``max_gap``. The
    ball-centre variant (host points, +5) is reported separately.

    ``samples`` counts checked pairs per tree (u != v, connected in the
    region); a tree with fewer sibling pairs is checked exhaustively.
    """
    rng = np.random.default_rng(rng)
    G = net.net_udg
    hv = net.net_vertices
    internal = [t for t in tree.nodes if not t.is_leaf]
    report = {"pairs": 0, "violations": 0, "max_excess": 0.0, "first_violation": None,
              "nodes": len(internal), "max_gap": 0.0, "ball": {"pairs": 0, "violations": 0, "max_excess": 0.0}}
    if not internal:
        return report
    wt = {}
    for (a, b), w in zip(G.edges.tolist(), G.weights.tolist()):
        wt[(a, b)] = wt[(b, a)] = w
    # water-fill the budget over valid pairs: small nodes are checked exhaustively,
    # whatever they leave over goes to the larger ones
    size = {t.id: len(tree.nodes[t.children[0]].psi) * len(tree.nodes[t.children[1]].psi) for t in internal}
    internal.sort(key=lambda t: (size[t.id], t.id))
    left = samples
    per_node_host = max(1, math.ceil(host_samples / len(internal)))
    host_inv = defaultdict(list)
    for v, c in enumerate(net.ball_of.tolist()):
        host_inv[c].append(v)
    for k, t in enumerate(internal):
        psi = sorted(t.psi)
        loc = {v: i for i, v in enumerate(psi)}
        region = G.subgraph(psi)
        t1, t2 = (tree.nodes[c] for c in t.children)
        A = np.array([loc[v] for v in sorted(t1.psi)])
        B = np.array([loc[v] for v in sorted(t2.psi)])
        portals = [p for p in t.sep_portals]
        pset = set(portals)
        if not portals:
            continue
        gap = max(_path_gap(p, pset, lambda a, b: wt[(a, b)]) for p in t.sep_paths)
        report["max_gap"] = max(report["max_gap"], gap)
        bound = tree.delta_portal + 4.0
        DS = np.atleast_2d(dijkstra(region.csr, indices=[loc[p] for p in portals]))
        share = max(1, left // (len(internal) - k))
        if size[t.id] <= share:
            uu, vv = np.repeat(A, len(B)), np.tile(B, len(A))
        else:
            uu = rng.choice(A, 2 * share)
            vv = rng.choice(B, 2 * share)
        keep = uu != vv
        uu, vv = uu[keep], vv[keep]
        if not len(uu):
            continue
        srcs, inv = np.unique(uu, return_inverse=True)
        DU = np.atleast_2d(dijkstra(region.csr, indices=srcs))
        d = DU[inv, vv]
        fin = np.nonzero(np.isfinite(d))[0][:share]
        uu, vv, d = uu[fin], vv[fin], d[fin]
        left -= len(d)
        det = (DS[:, uu] + DS[:, vv]).min(axis=0)
        excess = det - d
        report["pairs"] += len(d)
        if len(excess):
            report["max_excess"] = max(report["max_excess"], float(excess.max()))
        bad = np.nonzero(excess > bound + DIST_TOL)[0]
        report["violations"] += len(bad)
        if len(bad) and report["first_violation"] is None:
            i = bad[0]
            report["first_violation"] = {
                "node": t.id, "u": int(hv[psi[uu[i]]]), "v": int(hv[psi[vv[i]]]),
                "detour": float(det[i]), "dist": float(d[i]), "bound": bound,
            }
        # ball-centre variant: host points through their centres
        hu = [h for c in t1.psi for h in host_inv.get(int(hv[c]), ())]
        hw = [h for c in t2.psi for h in host_inv.get(int(hv[c]), ())]
        if hu and hw:
            su = rng.choice(hu, min(per_node_host, len(hu) * len(hw)))
            sw = rng.choice(hw, len(su))
            keep = su != sw
            su, sw = su[keep], sw[keep]
            if len(su):
                srcs, inv = np.unique(su, return_inverse=True)
                DH = np.atleast_2d(dijkstra(net.host.csr, indices=srcs))
                cu = np.array([loc[int(np.searchsorted(hv, net.ball_of[h]))] for h in su])
                cw = np.array([loc[int(np.searchsorted(hv, net.ball_of[h]))] for h in sw])
                lu = np.linalg.norm(net.host.points[su] - net.host.points[net.ball_of[su]], axis=1)
                lw = np.linalg.norm(net.host.points[sw] - net.host.points[net.ball_of[sw]], axis=1)
                via = lu + (DS[:, cu] + DS[:, cw]).min(axis=0) + lw
                dh = DH[inv, sw]
                ok = np.isfinite(dh) & np.isfinite(via)
                ex = via[ok] - dh[ok]
                b = report["ball"]
                b["pairs"] += int(ok.sum())
                if len(ex):
                    b["max_excess"] = max(b["max_excess"], float(ex.max()))
                    b["violations"] += int((ex > tree.delta_portal + 5.0 + DIST_TOL).sum())
    return report
