import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import brute_edges, floyd
from udgfl.graph import build_udg, hop_bfs
from udgfl.separator import find_partly_separator, verify_separator


def connected_udg(rng, n, density=3.0):
    while True:
        side = np.sqrt(n / density)
        g = build_udg(rng.uniform(0, side, (n, 2)))
        big = np.bincount(g.component).argmax()
        comp = np.nonzero(g.component == big)[0]
        if len(comp) >= max(3, n // 2):
            return g.subgraph(comp)


def independent_check(g, X, sep):
    """Re-derive every property with brute-force edges and Floyd distances."""
    E = brute_edges(g.points)
    D = floyd(g.points)
    hops = hop_bfs(g, sep.source).hops
    for path in (sep.path_x, sep.path_y):
        assert path[0] == sep.source
        assert all((min(a, b), max(a, b)) in E for a, b in zip(path, path[1:]))
        assert len(path) - 1 == hops[path[-1]]
    P = set(sep.path_x) | set(sep.path_y)
    s1, s2 = set(sep.side1), set(sep.side2)
    assert s1 | s2 | P == set(range(g.n)) and not (s1 & s2) and not (s1 & P) and not (s2 & P)
    X = set(X)
    assert 3 * len(s1 & X) <= 2 * len(X) and 3 * len(s2 & X) <= 2 * len(X)
    for a, b in E:
        if (a in s1 and b in s2) or (a in s2 and b in s1):
            assert min(max(D[c, a], D[c, b]) for c in P) <= 4 + 1e-9


def test_random_graphs(rng):
    for _ in range(20):
        g = connected_udg(rng, int(rng.integers(10, 120)))
        X = sorted(rng.choice(g.n, int(rng.integers(2, g.n + 1)), replace=False).tolist())
        s = int(rng.integers(0, g.n))
        sep = find_partly_separator(g, X, s)
        assert verify_separator(g, X, sep)
        independent_check(g, X, sep)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_property_small_graphs(seed):
    rng = np.random.default_rng(seed)
    g = connected_udg(rng, int(rng.integers(4, 30)), density=4.0)
    X = sorted(rng.choice(g.n, int(rng.integers(2, g.n + 1)), replace=False).tolist())
    sep = find_partly_separator(g, X, int(rng.integers(0, g.n)))
    assert verify_separator(g, X, sep)
    independent_check(g, X, sep)


def test_path_graph_degenerate_separator():
    g = build_udg(np.column_stack([np.arange(30) * 0.9, np.zeros(30)]))
    X = list(range(30))
    sep = find_partly_separator(g, X, 0)
    assert verify_separator(g, X, sep)


def test_disconnected_graph_moves_source_to_heavy_component():
    pts = np.concatenate([np.column_stack([np.arange(3) * 0.9, np.zeros(3)]),
                          np.column_stack([20 + np.arange(12) * 0.5, np.zeros(12)])])
    g = build_udg(pts)
    X = list(range(3, 15))
    sep = find_partly_separator(g, X, 0)
    assert sep.stats["source_switched"] and sep.source >= 3
    assert verify_separator(g, X, sep)


def test_needs_two_core_vertices():
    g = build_udg([(0, 0), (0.5, 0)])
    with pytest.raises(ValueError):
        find_partly_separator(g, [0], 0)
    with pytest.raises(ValueError):
        find_partly_separator(g, [0, 1], 5)


@pytest.fixture
def good(rng):
    g = connected_udg(rng, 80)
    X = list(range(g.n))
    return g, X, find_partly_separator(g, X, 0)


def test_forced_imbalance_fails_balance(good):
    g, X, sep = good
    moved = set(sep.side1) | set(sep.side2)
    bad = dataclasses.replace(sep, side1=frozenset(moved), side2=frozenset())
    v = verify_separator(g, X, bad)
    assert not v and v.reason in ("balance", "certificate")
    bad = dataclasses.replace(sep, side1=frozenset(moved), side2=frozenset(), certificates=[])
    assert verify_separator(g, X, bad).reason == "balance"


def test_broken_path_fails(good):
    g, X, sep = good
    far = int(np.argmax(hop_bfs(g, sep.source).hops))
    bad = dataclasses.replace(sep, path_x=[sep.source, far])
    assert verify_separator(g, X, bad).reason == "path"


def test_missing_certificate_fails(good):
    g, X, sep = good
    if not sep.certificates:
        pytest.skip("no crossing edges to certify")
    bad = dataclasses.replace(sep, certificates=sep.certificates[1:])
    assert verify_separator(g, X, bad).reason == "certificate"


def test_partition_check(good):
    g, X, sep = good
    bad = dataclasses.replace(sep, side1=frozenset(set(sep.side1) | {sep.source}))
    assert verify_separator(g, X, bad).reason == "partition"


def test_avoided_endpoints_are_tried_last(rng):
    g = connected_udg(rng, 60)
    X = list(range(g.n))
    first = find_partly_separator(g, X, 0)
    ends = {first.path_x[-1], first.path_y[-1]} - {0}
    again = find_partly_separator(g, X, 0, avoid=ends)
    assert verify_separator(g, X, again)
