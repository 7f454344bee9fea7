import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import components, lca_altitude, leaves_under, min_spanning_weight, same_partition
from swshier.errors import GraphError
from swshier.graph import (Mst, Rag, build_dendrogram, build_rag, cut_at, cut_edges, cut_to_k,
                           hierarchy_from_rag, kruskal_mst, marker_segmentation,
                           minimum_spanning_tree, partition_labelmap)
from swshier.synthetic import (random_connected_graph, random_hierarchy, random_tree_edges,
                               threshold_example_graph)

seeds = st.integers(0, 2**32 - 1)


# -- RAG --------------------------------------------------------------------

def test_rag_two_by_two():
    labels = np.array([[0, 1], [2, 3]])
    img = np.zeros((2, 2))
    rag = build_rag(img, labels, np.zeros((2, 2)))
    assert rag.n_nodes == 4
    assert sorted(map(tuple, rag.edges)) == [(0, 1), (0, 2), (1, 3), (2, 3)]


def test_rag_single_region():
    rag = build_rag(np.ones((3, 3)), np.zeros((3, 3), dtype=int), np.zeros((3, 3)))
    assert rag.n_nodes == 1 and rag.n_edges == 0


def test_rag_pass_value_and_mean():
    labels = np.array([[0, 0, 1], [0, 0, 1]])
    relief = np.array([[0.0, 0.5, 0.2], [0.0, 0.1, 0.7]])
    img = np.zeros((2, 3))
    rag = build_rag(img, labels, relief)
    # pairs straddling the boundary: max(0.5, 0.2) and max(0.1, 0.7)
    assert rag.weights.tolist() == [0.5]
    assert build_rag(img, labels, relief, "mean").weights.tolist() == [0.6]
    assert rag.boundary.tolist() == [2]


def test_rag_disconnected_raises():
    labels = np.array([[0, 1, 2]])
    rag_edges = Rag.from_edges(3, [(0, 1)], [1.0])
    with pytest.raises(GraphError, match="2 components"):
        minimum_spanning_tree(rag_edges)
    assert build_rag(np.zeros((1, 3)), labels, np.zeros((1, 3))).n_edges == 2


@pytest.mark.parametrize("seed", range(5))
def test_rag_edges_match_pixel_scan(seed):
    rng = np.random.default_rng(seed)
    from swshier.pixel import normalize_labels

    labels = normalize_labels(rng.integers(0, 6, size=(16, 16)))
    relief = rng.random((16, 16))
    rag = build_rag(rng.random((16, 16)), labels, relief)
    expected = {}
    for y in range(16):
        for x in range(16):
            for yy, xx in ((y + 1, x), (y, x + 1)):
                if yy < 16 and xx < 16 and labels[y, x] != labels[yy, xx]:
                    key = tuple(sorted((labels[y, x], labels[yy, xx])))
                    val = max(relief[y, x], relief[yy, xx])
                    expected[key] = min(expected.get(key, np.inf), val)
    got = {tuple(e): w for e, w in zip(rag.edges.tolist(), rag.weights)}
    assert got == expected
    assert rag.area.tolist() == np.bincount(labels.ravel()).tolist()


# -- MST --------------------------------------------------------------------

def test_mst_triangle():
    rag = Rag.from_edges(3, [(0, 1), (1, 2), (0, 2)], [1, 2, 3])
    mst = minimum_spanning_tree(rag)
    assert sorted(mst.source.tolist()) == [0, 1]
    assert mst.total_weight == 3


def test_mst_of_tree_is_itself():
    edges = [(0, 1), (1, 2), (1, 3), (3, 4)]
    rag = Rag.from_edges(5, edges, [4, 1, 3, 2])
    mst = minimum_spanning_tree(rag)
    assert mst.edges.tolist() == [list(e) for e in edges]


@pytest.mark.parametrize("seed", range(30))
def test_mst_matches_exhaustive_and_kruskal(seed):
    rng = np.random.default_rng(seed)
    rag = random_connected_graph(rng, int(rng.integers(2, 8)), extra=0.5)
    mst = minimum_spanning_tree(rag)
    assert mst.total_weight == min_spanning_weight(rag.n_nodes, rag.edges.tolist(), rag.weights)
    kr = kruskal_mst(rag)
    assert mst.source.tolist() == kr.source.tolist()
    assert components(rag.n_nodes, mst.edges.tolist()).max() == 0


# -- dendrogram -------------------------------------------------------------

def test_dendrogram_two_leaves():
    h = build_dendrogram(Mst(2, np.array([[0, 1]]), np.array([5.0]), np.array([0])))
    assert h.altitude.tolist() == [5.0]
    assert h.children.tolist() == [[0, 1]]


def test_dendrogram_path_is_caterpillar():
    mst = Mst(4, np.array([[0, 1], [1, 2], [2, 3]]), np.array([1.0, 2.0, 3.0]), np.arange(3))
    h = build_dendrogram(mst)
    assert h.altitude.tolist() == [1.0, 2.0, 3.0]
    assert h.children.tolist() == [[0, 1], [2, 4], [3, 5]]


def test_dendrogram_ties_follow_edge_index():
    mst = Mst(4, np.array([[2, 3], [0, 1], [1, 2]]), np.zeros(3), np.arange(3))
    for _ in range(3):
        h = build_dendrogram(mst)
        assert h.merge_edge.tolist() == [0, 1, 2]
        assert h.children.tolist() == [[2, 3], [0, 1], [4, 5]]


@given(seeds, st.integers(2, 12))
def test_ultrametric(seed, n):
    h = random_hierarchy(np.random.default_rng(seed), n, distinct=False)
    assert (np.diff(h.altitude) >= 0).all()
    assert (h.parent_altitude >= h.node_altitude).all()
    d = np.array([[lca_altitude(h, x, y) for y in range(n)] for x in range(n)])
    lca = h.lca()
    xs, ys = np.indices((n, n))
    np.testing.assert_array_equal(h.node_altitude[lca(xs.ravel(), ys.ravel())].reshape(n, n), d)
    for x, y, z in itertools.product(range(n), repeat=3):
        assert d[x, y] <= max(d[x, z], d[z, y])


# -- cuts -------------------------------------------------------------------

def test_threshold_example_two_regions():
    rag = threshold_example_graph()
    h = hierarchy_from_rag(rag, provenance="grad")
    p = cut_at(h, 6)
    assert p.n_regions == 2
    assert p.labels.tolist() == [0, 0, 0, 0, 1, 1, 1, 1]
    assert cut_at(h, 5.999).n_regions == 3


def test_cut_extremes():
    h = random_hierarchy(np.random.default_rng(0), 9)
    assert cut_at(h, h.altitude.max()).n_regions == 1
    assert cut_at(h, h.altitude.min() - 1e-9).n_regions == 9
    assert cut_to_k(h, 1).n_regions == 1
    assert cut_to_k(h, 9).labels.tolist() == list(range(9))
    with pytest.raises(ValueError):
        cut_to_k(h, 10)


@given(seeds, st.integers(2, 10))
def test_cut_to_k_matches_threshold(seed, n):
    h = random_hierarchy(np.random.default_rng(seed), n)
    desc = np.sort(h.altitude)[::-1]
    for k in range(2, n + 1):
        lam = np.nextafter(desc[k - 2], -np.inf)
        assert cut_to_k(h, k).labels.tolist() == cut_at(h, lam).labels.tolist()


@given(seeds, st.integers(2, 10))
def test_graph_threshold_equals_mst_cut(seed, n):
    rng = np.random.default_rng(seed)
    rag = random_connected_graph(rng, n, extra=0.6)
    h = hierarchy_from_rag(rag)
    for lam in np.linspace(-0.5, 5.5, 16):
        ref = components(n, [e for e, w in zip(rag.edges.tolist(), rag.weights) if w <= lam])
        assert cut_at(h, max(lam, 0)).labels.tolist() == ref.tolist() or lam < 0


@given(seeds, st.integers(2, 10))
def test_cuts_nested(seed, n):
    h = random_hierarchy(np.random.default_rng(seed), n, distinct=False)
    grid = np.linspace(0, h.altitude.max(), 12)
    parts = [cut_at(h, lam).labels for lam in grid]
    for i, j in itertools.combinations(range(len(grid)), 2):
        fine, coarse = parts[i], parts[j]
        for region in np.unique(fine):
            assert len(np.unique(coarse[fine == region])) == 1


def test_partition_labelmap_bookkeeping(rng):
    fine = rng.integers(0, 5, size=(6, 6))
    fine[0, :5] = np.arange(5)
    from swshier.graph import Partition

    p = Partition(np.array([1, 0, 1, 2, 0]), 3)
    out = partition_labelmap(p, fine)
    area = np.bincount(fine.ravel(), minlength=5)
    assert np.bincount(out.ravel()).tolist() == [area[1] + area[4], area[0] + area[2], area[3]]
    assert partition_labelmap(Partition(np.zeros(5, dtype=int), 1), fine).max() == 0


# -- markers ----------------------------------------------------------------

def path_max_cut(mst, markers):
    """Reference: cut the highest edge (latest in merge order) on the MST
    path between every pair of markers."""
    n = mst.n_nodes
    rank = np.empty(n - 1, dtype=int)
    rank[np.lexsort((np.arange(n - 1), mst.weights))] = np.arange(n - 1)
    adj = {i: [] for i in range(n)}
    for e, (p, q) in enumerate(mst.edges.tolist()):
        adj[p].append((q, e))
        adj[q].append((p, e))
    cut = set()
    for a, b in itertools.combinations(markers, 2):
        prev = {a: None}
        stack = [a]
        while stack:
            v = stack.pop()
            for u, e in adj[v]:
                if u not in prev:
                    prev[u] = (v, e)
                    stack.append(u)
        path, v = [], b
        while prev[v] is not None:
            v, e = prev[v]
            path.append(e)
        cut.add(max(path, key=lambda e: rank[e]))
    keep = [mst.edges[e].tolist() for e in range(n - 1) if e not in cut]
    return components(n, keep)


def both_children_marked(h, markers):
    """Dendrogram criterion: an edge is cut when both merged children hold
    a marker."""
    n = h.n_leaves
    has = np.zeros(h.n_nodes, dtype=bool)
    has[list(markers)] = True
    cut = np.zeros(n - 1, dtype=bool)
    for k in range(n - 1):
        a, b = h.children[k]
        cut[h.merge_edge[k]] = has[a] and has[b]
        has[n + k] = has[a] or has[b]
    return cut


def test_marker_examples():
    h = random_hierarchy(np.random.default_rng(3), 7)
    assert marker_segmentation(h.mst, [4]).n_regions == 1
    assert marker_segmentation(h.mst, range(7)).n_regions == 7


def test_marker_two_subtrees_cut_linking_edge():
    # leaves 0-2 and 3-5 joined by the heaviest edge (2, 3)
    mst = Mst(6, np.array([[0, 1], [1, 2], [2, 3], [3, 4], [4, 5]]),
              np.array([1.0, 2.0, 9.0, 1.5, 2.5]), np.arange(5))
    p = marker_segmentation(mst, [0, 5])
    assert cut_edges(mst, p).tolist() == [False, False, True, False, False]


@pytest.mark.parametrize("seed", range(10))
def test_marker_criteria_agree_exhaustively(seed):
    rng = np.random.default_rng(seed)
    h = random_hierarchy(rng, 8, distinct=bool(seed % 2))
    for r in range(1, 9):
        for markers in itertools.combinations(range(8), r):
            p = marker_segmentation(h.mst, markers)
            assert cut_edges(h.mst, p).tolist() == both_children_marked(h, markers).tolist()
            assert same_partition(p.labels, path_max_cut(h.mst, markers))


def test_marker_moved_within_region_can_change_partition():
    # path 1 - 0 - 2: moving a marker across a region is not always harmless
    mst = Mst(3, np.array([[0, 1], [0, 2]]), np.array([2.0, 1.0]), np.arange(2))
    assert marker_segmentation(mst, [0, 2]).labels.tolist() == [0, 0, 1]
    assert marker_segmentation(mst, [1, 2]).labels.tolist() == [0, 1, 0]


@given(seeds, st.integers(2, 10), st.booleans(), st.data())
def test_marker_robustness(seed, n, distinct, data):
    """Moving a marker anywhere inside the largest cluster that holds no
    other marker leaves the partition unchanged."""
    h = random_hierarchy(np.random.default_rng(seed), n, distinct=distinct)
    markers = data.draw(st.sets(st.integers(0, n - 1), min_size=1))
    p = marker_segmentation(h.mst, markers)
    m = data.draw(st.sampled_from(sorted(markers)))
    node = m
    while h.parent[node] >= 0 and not (set(leaves_under(h, h.parent[node])) & (markers - {m})):
        node = h.parent[node]
    other = data.draw(st.sampled_from(leaves_under(h, node)))
    assert p.labels[other] == p.labels[m]
    moved = (markers - {m}) | {other}
    assert marker_segmentation(h.mst, moved).labels.tolist() == p.labels.tolist()


def test_random_tree_edges_span(rng):
    for n in range(2, 9):
        assert components(n, random_tree_edges(rng, n).tolist()).max() == 0
