"""Unit disk graphs and their two metrics (weighted shortest path and hop count)."""
from __future__ import annotations

import heapq
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

# squared-distance threshold; avoids sqrt in the adjacency test
EDGE_TOL = 1e-12
DIST_TOL = 1e-9

# half of the 3x3 cell neighbourhood, so every unordered cell pair is visited once
_FORWARD_CELLS = ((0, 0), (1, 0), (-1, 1), (0, 1), (1, 1))


class CoincidentPointsError(ValueError):
    pass


@dataclass(frozen=True)
class Point:
    id: int
    x: float
    y: float


@dataclass
class DistanceField:
    source: int
    weighted: np.ndarray
    hops: np.ndarray
    parent: np.ndarray

    def path_to(self, v: int) -> list[int]:
        if not np.isfinite(self.hops[v]):
            raise ValueError(f"vertex {v} unreachable from {self.source}")
        out = [v]
        while out[-1] != self.source:
            out.append(int(self.parent[out[-1]]))
        return out[::-1]


@dataclass(eq=False)
class UnitDiskGraph:
    """Immutable UDG over a point array.

    ``adjacency[v]`` lists ``(neighbor, weight)`` sorted by neighbor id.
    ``original`` maps local ids back to the ids of the graph this one was
    induced from (identity for a freshly built graph).
    """

    points: np.ndarray
    adjacency: list[list[tuple[int, float]]]
    edges: np.ndarray
    weights: np.ndarray
    original: np.ndarray
    component: np.ndarray = field(init=False)
    csr: csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.points)
        if len(self.edges):
            i, j = self.edges[:, 0], self.edges[:, 1]
            # explicit zeros would be dropped by scipy; weights are > 0 by construction
            data = np.concatenate([self.weights, self.weights])
            rows = np.concatenate([i, j])
            cols = np.concatenate([j, i])
        else:
            data = np.zeros(0)
            rows = cols = np.zeros(0, dtype=int)
        self.csr = csr_matrix((data, (rows, cols)), shape=(n, n))
        _, self.component = connected_components(self.csr, directed=False)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, v: int) -> list[int]:
        return [u for u, _ in self.adjacency[v]]

    def is_connected(self) -> bool:
        return self.n <= 1 or bool(np.all(self.component == self.component[0]))

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(a), int(b)) for a, b in self.edges}

    def subgraph(self, vertices) -> "UnitDiskGraph":
        """Induced subgraph; local ids follow the sorted order of ``vertices``."""
        verts = np.array(sorted(set(int(v) for v in vertices)), dtype=int)
        local = -np.ones(self.n, dtype=int)
        local[verts] = np.arange(len(verts))
        if len(self.edges):
            keep = (local[self.edges[:, 0]] >= 0) & (local[self.edges[:, 1]] >= 0)
            edges = local[self.edges[keep]]
            weights = self.weights[keep]
        else:
            edges = np.zeros((0, 2), dtype=int)
            weights = np.zeros(0)
        adjacency = _adjacency_from_edges(len(verts), edges, weights)
        return UnitDiskGraph(self.points[verts], adjacency, edges, weights, self.original[verts])


def _adjacency_from_edges(n, edges, weights):
    adjacency = [[] for _ in range(n)]
    for (a, b), w in zip(edges.tolist(), weights.tolist()):
        adjacency[a].append((b, w))
        adjacency[b].append((a, w))
    for lst in adjacency:
        lst.sort()
    return adjacency


def as_point_array(points) -> np.ndarray:
    if len(points) and isinstance(points[0], Point):
        ids = [p.id for p in points]
        if ids != list(range(len(points))):
            raise ValueError("point ids must be contiguous from 0")
        arr = np.array([[p.x, p.y] for p in points], dtype=float)
    else:
        arr = np.asarray(points, dtype=float).reshape(-1, 2)
    return arr


def build_udg(points, allow_coincident: bool = False) -> UnitDiskGraph:
    """Build the exact UDG using unit-cell bucketing.

    Only the 3x3 block of cells around each point can hold neighbours, so the
    work is O(n + |E|) for points spread at bounded density.
    """
    pts = as_point_array(points)
    n = len(pts)
    if n < 1:
        raise ValueError("need at least one point")
    if not np.all(np.isfinite(pts)):
        raise ValueError("point coordinates must be finite")

    buckets = defaultdict(list)
    cells = np.floor(pts).astype(np.int64)
    for idx, (cx, cy) in enumerate(cells.tolist()):
        buckets[(cx, cy)].append(idx)
    buckets = {k: np.array(v, dtype=int) for k, v in buckets.items()}

    src, dst = [], []
    for (cx, cy), here in buckets.items():
        for dx, dy in _FORWARD_CELLS:
            there = buckets.get((cx + dx, cy + dy))
            if there is None:
                continue
            diff = pts[here][:, None, :] - pts[there][None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            if dx == 0 and dy == 0:
                ii, jj = np.nonzero(np.triu(d2 <= 1.0 + EDGE_TOL, k=1))
            else:
                ii, jj = np.nonzero(d2 <= 1.0 + EDGE_TOL)
            if len(ii):
                src.append(here[ii])
                dst.append(there[jj])

    if src:
        a = np.concatenate(src)
        b = np.concatenate(dst)
    else:
        a = b = np.zeros(0, dtype=int)
    # hypot keeps tiny separations positive where the squared distance underflows
    w = np.hypot(*(pts[a] - pts[b]).T) if len(a) else np.zeros(0)

    same = np.all(pts[a] == pts[b], axis=1) if len(a) else np.zeros(0, dtype=bool)
    if np.any(same):
        if not allow_coincident:
            k = int(np.argmax(same))
            raise CoincidentPointsError(f"coincident points {min(a[k], b[k])} and {max(a[k], b[k])}")
        a, b, w = a[~same], b[~same], w[~same]

    edges = np.stack([np.minimum(a, b), np.maximum(a, b)], axis=1) if len(a) else np.zeros((0, 2), dtype=int)
    order = np.lexsort((edges[:, 1], edges[:, 0])) if len(edges) else np.zeros(0, dtype=int)
    edges = edges[order]
    weights = w[order]
    adjacency = _adjacency_from_edges(n, edges, weights)
    return UnitDiskGraph(pts, adjacency, edges, weights, np.arange(n))


def weighted_sssp(g: UnitDiskGraph, src: int) -> DistanceField:
    """Dijkstra from ``src``; equal-distance ties settle the smaller id first."""
    n = g.n
    dist = np.full(n, np.inf)
    hops = np.full(n, np.inf)
    parent = -np.ones(n, dtype=int)
    dist[src] = 0.0
    hops[src] = 0
    done = np.zeros(n, dtype=bool)
    heap = [(0.0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, w in g.adjacency[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                hops[v] = hops[u] + 1
                heapq.heappush(heap, (nd, v))
    return DistanceField(src, dist, hops, parent)


def _bfs_levels(g: UnitDiskGraph, src: int):
    n = g.n
    hops = np.full(n, np.inf)
    parent = -np.ones(n, dtype=int)
    hops[src] = 0
    frontier = [src]
    level = 0
    while frontier:
        nxt = []
        for u in sorted(frontier):
            for v, _ in g.adjacency[u]:
                if hops[v] == np.inf:
                    hops[v] = level + 1
                    parent[v] = u
                    nxt.append(v)
        frontier = nxt
        level += 1
    return hops, parent


def hop_bfs(g: UnitDiskGraph, src: int) -> DistanceField:
    """BFS tree from ``src``; each vertex's parent is the smallest-id vertex of the previous level adjacent to it.

    ``weighted`` holds the exact weighted distance so both metrics are on hand.
    """
    hops, parent = _bfs_levels(g, src)
    weighted = dijkstra(g.csr, indices=src)
    return DistanceField(src, weighted, hops, parent)


def multi_source_sssp(g: UnitDiskGraph, sources, limit: float = np.inf):
    """Distances to the nearest source and which source that is (-1 if none)."""
    sources = np.asarray(sorted(set(int(s) for s in sources)), dtype=int)
    if len(sources) == 0:
        return np.full(g.n, np.inf), -np.ones(g.n, dtype=int)
    dist, _, nearest = dijkstra(g.csr, indices=sources, min_only=True, limit=limit,
                                return_predecessors=True)
    nearest = np.where(np.isfinite(dist), nearest, -1)
    return dist, nearest


def distance_matrix(g: UnitDiskGraph, sources, limit: float = np.inf) -> np.ndarray:
    sources = np.asarray(list(sources), dtype=int)
    if len(sources) == 0:
        return np.zeros((0, g.n))
    return np.atleast_2d(dijkstra(g.csr, indices=sources, limit=limit))


def weak_diameter(g: UnitDiskGraph, subset, host: UnitDiskGraph | None = None) -> float:
    """Largest host-graph distance between two vertices of ``subset``.

    ``subset`` holds ids of ``host``; when ``host`` is omitted ``g`` is the host.
    """
    host = g if host is None else host
    subset = sorted(set(int(v) for v in subset))
    if len(subset) <= 1:
        return 0.0
    D = distance_matrix(host, subset)
    return float(D[:, subset].max())


def r_neighborhood(g: UnitDiskGraph, seed, radius: float) -> set[int]:
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    seed = list(seed)
    if not seed:
        return set()
    dist, _ = multi_source_sssp(g, seed, limit=radius + DIST_TOL)
    return set(np.nonzero(dist <= radius + DIST_TOL)[0].tolist())


def diameter(g: UnitDiskGraph) -> float:
    """Exact weighted diameter (inf if disconnected)."""
    if g.n <= 1:
        return 0.0
    return float(dijkstra(g.csr).max())


def hop_eccentricity(g: UnitDiskGraph, src: int) -> int:
    hops, _ = _bfs_levels(g, src)
    finite = hops[np.isfinite(hops)]
    return int(finite.max())


def bounding_side(points: np.ndarray) -> float:
    if len(points) == 0:
        return 0.0
    span = points.max(axis=0) - points.min(axis=0)
    return float(max(span.max(), 0.0))


def ceil_tol(x: float) -> int:
    return int(math.ceil(x - 1e-9))
