"""Hop-band chopping and the red/blue layering that splits a structured
sub-instance into independent pieces of bounded diameter."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .graph import DIST_TOL, UnitDiskGraph, _bfs_levels, diameter, distance_matrix, r_neighborhood
from .instance import FLInstance

log = logging.getLogger(__name__)


@dataclass
class ChopResult:
    annuli: list  # annuli[j] = A_j; A_0 may be empty
    r0: int
    delta: int
    cut_edges: list

    def band_of(self) -> dict:
        return {v: j for j, A in enumerate(self.annuli) for v in A}


def chop_once(g: UnitDiskGraph, delta: int, root: int = 0, rng=None) -> ChopResult:
    """One chop: A_j = {v : r0 + (j-1)*delta <= hops(root, v) < r0 + j*delta}, r0 uniform in 0..delta."""
    if delta < 1:
        raise ValueError("delta must be >= 1")
    rng = np.random.default_rng(rng)
    r0 = int(rng.integers(0, delta + 1))
    return chop_at(g, delta, root, r0)


def chop_at(g: UnitDiskGraph, delta: int, root: int, r0: int) -> ChopResult:
    hops, _ = _bfs_levels(g, root)
    if not np.all(np.isfinite(hops)):
        raise ValueError("chop_once needs a connected graph")
    # j = floor((d - r0) / delta) + 1, so d < r0 lands in A_0
    band = np.floor((hops - r0) / delta).astype(int) + 1
    annuli = [set() for _ in range(int(band.max()) + 1)]
    for v, j in enumerate(band.tolist()):
        annuli[j].add(v)
    cut = [(int(a), int(b)) for a, b in g.edges if band[a] != band[b]]
    return ChopResult(annuli, r0, delta, cut)


def _components(g: UnitDiskGraph, verts) -> list[list[int]]:
    verts = sorted(verts)
    sub = g.subgraph(verts)
    k, lab = connected_components(sub.csr, directed=False)
    out = [[] for _ in range(k)]
    for i, c in enumerate(lab.tolist()):
        out[c].append(verts[i])
    return sorted(out, key=lambda c: c[0])


def _weak_diam(host: UnitDiskGraph, part) -> float:
    part = sorted(part)
    if len(part) <= 1:
        return 0.0
    D = distance_matrix(host, part)
    return float(D[:, part].max())


def chop_iterated(g: UnitDiskGraph, delta: int, rounds: int = 4, rng=None,
                  diagnostics: dict | None = None) -> list[set]:
    """Chop every connected piece ``rounds`` times; returns the final connected parts.

    A piece whose weak diameter (in ``g``) is already below ``delta`` is left alone.
    ``diagnostics`` (if given) receives the measured max weak-diameter/delta ratio.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    rng = np.random.default_rng(rng)
    parts = _components(g, range(g.n))
    cuts = []
    for _ in range(rounds):
        nxt = []
        for comp in parts:
            if _weak_diam(g, comp) < delta:
                nxt.append(comp)
                continue
            sub = g.subgraph(comp)
            res = chop_once(sub, delta, 0, rng)
            cuts.append(len(res.cut_edges) / max(1, sub.n_edges))
            for A in res.annuli:
                if A:
                    nxt.extend(_components(g, [comp[v] for v in A]))
        parts = nxt
    parts = [set(p) for p in parts]
    if diagnostics is not None:
        wd = [_weak_diam(g, p) for p in parts]
        diagnostics.update(
            parts=len(parts),
            max_weak_diameter=max(wd) if wd else 0.0,
            ratio=(max(wd) if wd else 0.0) / delta,
            cut_fractions=cuts,
        )
    return parts


@dataclass
class SubInstanceH:
    inst: FLInstance  # over a local induced graph; free facilities include red-opened anchors
    core_clients: tuple  # local ids
    padded: frozenset  # local ids of routing-only padding vertices
    Gamma: float
    vertices: np.ndarray  # local -> parent-graph id
    index: int = 0

    def to_parent(self, local) -> list[int]:
        return [int(self.vertices[v]) for v in local]


@dataclass
class LayeringResult:
    pieces: list
    red_cost: float
    red_open: tuple
    red_clients: tuple
    diagnostics: dict = field(default_factory=dict)

    def __iter__(self):
        # unpacks as (pieces, red_cost)
        return iter((self.pieces, self.red_cost))


def layer_and_bundle(sub, eps: float, rng=None, rounds: int = 4, thickness: int | None = None,
                     chop_delta: int | None = None) -> LayeringResult:
    """Split ``sub`` (a StructuredSubInstance) into independent bounded-diameter pieces.

    Hop layers of thickness ceil(14 N r) from the smallest vertex; every
    ceil(1/eps^2)-th layer (random offset) is red: its anchors open for free
    and their clusters leave. Each bundle keeps its blue layers plus the near
    half of each adjacent red layer, is chopped, and padded for routing.
    ``thickness`` and ``chop_delta`` override the derived hop constants (the
    derived ones dwarf any desk-sized graph).
    """
    rng = np.random.default_rng(rng)
    inst = sub.inst
    g = inst.graph
    N, r = sub.N, sub.r
    T = thickness or max(1, math.ceil(14 * N * r - 1e-9))
    B = math.ceil(1.0 / (eps * eps) - 1e-9)
    offset = int(rng.integers(0, B))

    root = min(set(inst.clients) | set(inst.costs))
    hops, _ = _bfs_levels(g, root)
    reach = np.isfinite(hops)
    layer = np.where(reach, np.floor(np.where(reach, hops, 0) / T), -1).astype(int)
    pos = np.where(reach, hops, 0) - layer * T
    red = lambda i: (i + offset) % B == 0
    bundle_of_layer = lambda i: (i + offset) // B

    red_open = sorted(a for a in sub.anchors if red(layer[a]))
    red_clients = sorted(j for a in red_open for j in sub.cluster[a])
    dist_to = {}
    for a in red_open:
        for j in sub.cluster[a]:
            dist_to[j] = a
    anchor_dist = {}
    if red_open:
        D = distance_matrix(g, red_open)
        row = {a: k for k, a in enumerate(red_open)}
        anchor_dist = {j: float(D[row[a], j]) for j, a in dist_to.items()}
    red_cost = float(sum(inst.costs[a] for a in red_open) + sum(anchor_dist.values()))

    # every reachable vertex belongs to exactly one bundle region
    region = {}
    for v in np.nonzero(reach)[0].tolist():
        i = layer[v]
        b = bundle_of_layer(i)
        if red(i) and pos[v] < T / 2:
            b -= 1
        region.setdefault(b, []).append(v)

    removed = set(red_clients)
    free = set(inst.free) | set(red_open)
    budget = r * N / (eps * eps)
    delta = chop_delta or max(1, math.ceil(r * N / (eps * eps * 8) - 1e-9))
    diag = {
        "layer_thickness": T, "bundle_layers": B, "offset": offset,
        "layers": int(layer.max()) + 1, "red_layers": sorted({int(layer[a]) for a in red_open}),
        "red_cost": red_cost, "chop_delta": delta, "recalibrations": 0, "merged_parts": 0,
        "weak_diameters": [], "chop_ratio": 0.0, "Gamma": [],
    }

    all_clients = set(inst.clients)
    pieces = []
    for b in sorted(region):
        verts = region[b]
        clients = [j for j in verts if j in all_clients and j not in removed]
        if not clients:
            continue
        d_try = delta
        for attempt in range(8):
            cd: dict = {}
            sub_g = g.subgraph(verts)
            parts = chop_iterated(sub_g, d_try, rounds, rng, cd)
            parts = [{verts[v] for v in p} for p in parts]
            wd = [_weak_diam(g, p) for p in parts]
            if max(wd) <= budget + DIST_TOL or d_try == 1:
                break
            d_try = max(1, d_try // 2)
            diag["recalibrations"] += 1
            log.warning("chopping exceeded the diameter budget; retrying with delta=%d", d_try)
        diag["chop_ratio"] = max(diag["chop_ratio"], cd.get("ratio", 0.0))
        parts, merged = _merge_facilityless(g, parts, set(clients), set(inst.costs))
        diag["merged_parts"] += merged
        cset = set(clients)
        for p in parts:
            core = sorted(j for j in p if j in cset)
            if not core:
                continue
            pad = r_neighborhood(g, p, budget)
            allv = sorted(set(p) | pad)
            local = {v: k for k, v in enumerate(allv)}
            hg = g.subgraph(allv)
            owned = p if p & set(inst.costs) else set(allv)  # isolated facility-less part
            costs = {local[f]: c for f, c in inst.costs.items() if f in owned}
            h_inst = FLInstance(hg, [local[j] for j in core], costs,
                                frozenset(local[f] for f in free if f in owned))
            gam = diameter(hg)
            diag["weak_diameters"].append(_weak_diam(g, p))
            diag["Gamma"].append(gam)
            pieces.append(SubInstanceH(
                h_inst, tuple(local[j] for j in core),
                frozenset(local[v] for v in pad - set(p)), gam, np.array(allv), len(pieces),
            ))
    return LayeringResult(pieces, red_cost, tuple(red_open), tuple(red_clients), diag)


def _merge_facilityless(g, parts, clients, facilities):
    """Fold parts that hold clients but no facility into a neighbouring part."""
    parts = [set(p) for p in parts]
    merged = 0
    changed = True
    while changed:
        changed = False
        for k, p in enumerate(parts):
            if p & clients and not p & facilities and len(parts) > 1:
                touching = [m for m, q in enumerate(parts) if m != k and any(
                    u in q for v in p for u in g.neighbors(v))]
                if not touching:
                    continue
                m = touching[0]
                parts[m] |= p
                del parts[k]
                merged += 1
                changed = True
                break
    return parts, merged
