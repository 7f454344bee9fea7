"""Region adjacency graph, minimum spanning tree and indexed hierarchy.

Node ids of a dendrogram: leaves are ``0..n-1`` (the fine regions); the
internal node created by the k-th merge is ``n + k``. Merges happen in
increasing (weight, MST edge index) order, so a parent always has a larger
id than its children and altitudes are non-decreasing along merge order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DimensionError, GraphError
from .pixel import channels, relabel_first_occurrence


class DisjointSet:
    """Union-find over ``0..n-1`` with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra


# -- RAG --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Rag:
    """Region adjacency graph. ``edges`` are sorted (p < q) pairs."""

    n_nodes: int
    edges: np.ndarray
    weights: np.ndarray
    boundary: np.ndarray
    area: np.ndarray
    sums: np.ndarray
    sumsq: np.ndarray

    @classmethod
    def from_edges(cls, n_nodes, edges, weights, area=None) -> "Rag":
        """Abstract graph with unit boundaries and no image statistics."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        weights = np.asarray(weights, dtype=float)
        if len(edges) != len(weights):
            raise ValueError("edges and weights differ in length")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise GraphError("self-edges are not allowed")
        if np.any(weights < 0):
            raise GraphError("edge weights must be non-negative")
        if area is None:
            area = np.ones(n_nodes)
        zeros = np.zeros((n_nodes, 1))
        return cls(n_nodes, np.sort(edges, axis=1), weights, np.ones(len(edges), dtype=np.int64),
                   np.asarray(area, dtype=float), zeros, zeros.copy())

    @property
    def n_edges(self) -> int:
        return len(self.edges)


def _adjacent_pairs(labels: np.ndarray):
    """Flat indices (a, b) of all 4-adjacent pixel pairs."""
    h, w = labels.shape
    idx = np.arange(h * w).reshape(h, w)
    a = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    b = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    return a, b


def build_rag(img, labels, relief, dissimilarity: str = "pass") -> Rag:
    """Region adjacency graph of a fine partition.

    Parameters
    ----------
    img : (H, W[, C]) image used for the node statistics.
    labels : (H, W) contiguous label map.
    relief : (H, W) non-negative field the dissimilarity is measured on.
    dissimilarity : ``"pass"`` (default) weights an edge by the lowest pass
        value ``max(relief[p], relief[q])`` over its straddling pixel pairs;
        ``"mean"`` uses the mean of those pass values.
    """
    labels = np.asarray(labels, dtype=np.int64)
    relief = np.asarray(relief, dtype=float)
    chans = channels(img)
    if labels.shape != relief.shape or labels.shape != chans.shape[:2]:
        raise DimensionError("image, labels and relief must share dimensions")
    n = int(labels.max()) + 1
    lab = labels.ravel()
    f = relief.ravel()
    a, b = _adjacent_pairs(labels)
    la, lb = lab[a], lab[b]
    cross = la != lb
    p = np.minimum(la[cross], lb[cross])
    q = np.maximum(la[cross], lb[cross])
    pair_value = np.maximum(f[a[cross]], f[b[cross]])
    keys = p * n + q
    uniq, inv = np.unique(keys, return_inverse=True)
    m = len(uniq)
    boundary = np.bincount(inv, minlength=m)
    if dissimilarity == "pass":
        weights = np.full(m, np.inf)
        np.minimum.at(weights, inv, pair_value)
    elif dissimilarity == "mean":
        weights = np.bincount(inv, weights=pair_value, minlength=m) / boundary
    else:
        raise ValueError(f"unknown dissimilarity {dissimilarity!r}")
    edges = np.stack([uniq // n, uniq % n], axis=1)

    area = np.bincount(lab, minlength=n).astype(float)
    c = chans.reshape(-1, chans.shape[2])
    sums = np.stack([np.bincount(lab, weights=c[:, i], minlength=n) for i in range(c.shape[1])], axis=1)
    sumsq = np.stack([np.bincount(lab, weights=c[:, i] ** 2, minlength=n) for i in range(c.shape[1])], axis=1)
    rag = Rag(n, edges, weights, boundary, area, sums, sumsq)
    if n > 1:
        n_comp = _n_components(n, edges)
        if n_comp != 1:
            raise GraphError(f"label map yields a disconnected graph ({n_comp} components)")
    return rag


def _n_components(n, edges) -> int:
    g = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    return connected_components(g, directed=False)[0]


# -- MST --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Mst:
    """Spanning tree: ``n_nodes - 1`` edges listed by ascending source index
    (the position of the edge in the parent graph)."""

    n_nodes: int
    edges: np.ndarray
    weights: np.ndarray
    source: np.ndarray

    def with_weights(self, weights) -> "Mst":
        weights = np.asarray(weights, dtype=float)
        if weights.shape != self.weights.shape:
            raise ValueError("weight vector does not match the tree")
        return Mst(self.n_nodes, self.edges, weights, self.source)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())


def _edge_order(weights: np.ndarray) -> np.ndarray:
    return np.lexsort((np.arange(len(weights)), weights))


def minimum_spanning_tree(rag: Rag) -> Mst:
    """Boruvka's algorithm; ties are broken by ascending edge index.

    Each round, every component picks its cheapest outgoing edge under the
    total order (weight, index); the chosen edges are then united.
    """
    n = rag.n_nodes
    edges = rag.edges
    m = len(edges)
    # rank under (weight, index); ranks are distinct so Boruvka cannot cycle
    rank = np.empty(m, dtype=np.int64)
    rank[_edge_order(rag.weights)] = np.arange(m)
    inv_rank = np.argsort(rank)
    comp = np.arange(n)
    chosen = np.zeros(m, dtype=bool)
    n_comp = n
    while n_comp > 1:
        cu = comp[edges[:, 0]]
        cv = comp[edges[:, 1]]
        out = cu != cv
        if not out.any():
            raise GraphError(f"graph is disconnected ({n_comp} components)")
        best = np.full(n, m, dtype=np.int64)
        np.minimum.at(best, cu[out], rank[out])
        np.minimum.at(best, cv[out], rank[out])
        picked = np.unique(best[best < m])
        chosen[inv_rank[picked]] = True
        sel = edges[chosen]
        g = coo_matrix((np.ones(len(sel)), (sel[:, 0], sel[:, 1])), shape=(n, n))
        n_comp, comp = connected_components(g, directed=False)
    idx = np.flatnonzero(chosen)
    return Mst(n, edges[idx], rag.weights[idx].astype(float), idx)


def kruskal_mst(rag: Rag) -> Mst:
    """Kruskal's algorithm with the same tie-break; a cross-check for Boruvka."""
    ds = DisjointSet(rag.n_nodes)
    keep = []
    for e in _edge_order(rag.weights):
        p, q = rag.edges[e]
        if ds.find(int(p)) != ds.find(int(q)):
            ds.union(int(p), int(q))
            keep.append(e)
    if len(keep) != rag.n_nodes - 1:
        n_comp = rag.n_nodes - len(keep)
        raise GraphError(f"graph is disconnected ({n_comp} components)")
    idx = np.sort(np.asarray(keep, dtype=np.int64))
    return Mst(rag.n_nodes, rag.edges[idx], rag.weights[idx].astype(float), idx)


# -- dendrogram -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class IndexedHierarchy:
    """MST plus its binary merge tree.

    ``children[k]``, ``merge_edge[k]`` and ``altitude[k]`` describe internal
    node ``n + k``. ``leaf_area`` and the optional fine ``labels`` map carry
    what cluster measures need; ``provenance`` is the canonical spec string.
    """

    mst: Mst
    children: np.ndarray
    merge_edge: np.ndarray
    altitude: np.ndarray
    parent: np.ndarray
    leaf_area: np.ndarray
    labels: np.ndarray | None = None
    provenance: str = ""
    _memo: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_leaves(self) -> int:
        return self.mst.n_nodes

    @property
    def n_nodes(self) -> int:
        return 2 * self.n_leaves - 1

    @property
    def root(self) -> int:
        return self.n_nodes - 1

    @property
    def is_stochastic(self) -> bool:
        # at least one re-weighting applied: altitudes are probabilities
        return "|" in self.provenance

    @property
    def node_altitude(self) -> np.ndarray:
        """Altitude of every node; leaves sit at 0."""
        if "node_altitude" not in self._memo:
            self._memo["node_altitude"] = np.concatenate([np.zeros(self.n_leaves), self.altitude])
        return self._memo["node_altitude"]

    @property
    def parent_altitude(self) -> np.ndarray:
        """Altitude at which each node merges into its parent (root: own)."""
        if "parent_altitude" not in self._memo:
            alt = self.node_altitude
            par = self.parent.copy()
            par[self.root] = self.root
            self._memo["parent_altitude"] = alt[par]
        return self._memo["parent_altitude"]

    @property
    def node_area(self) -> np.ndarray:
        if "node_area" not in self._memo:
            self._memo["node_area"] = accumulate_up(self, np.concatenate(
                [self.leaf_area, np.zeros(self.n_leaves - 1)]))
        return self._memo["node_area"]

    def edge_altitudes(self) -> np.ndarray:
        """Altitude per MST edge (in MST edge order)."""
        out = np.empty(len(self.merge_edge))
        out[self.merge_edge] = self.altitude
        return out

    def lca(self) -> "LcaIndex":
        if "lca" not in self._memo:
            self._memo["lca"] = LcaIndex(self)
        return self._memo["lca"]


def accumulate_up(h: IndexedHierarchy, values: np.ndarray) -> np.ndarray:
    """Subtree sums: each internal node adds its children's totals."""
    out = np.array(values, dtype=float)
    n = h.n_leaves
    ch = h.children
    for k in range(n - 1):
        out[n + k] += out[ch[k, 0]] + out[ch[k, 1]]
    return out


def build_dendrogram(mst: Mst, leaf_area=None, labels=None, provenance: str = "") -> IndexedHierarchy:
    """Kruskal-style union of MST edges in (weight, index) order."""
    n = mst.n_nodes
    order = _edge_order(mst.weights)
    ds = DisjointSet(n)
    top = list(range(n))  # dendrogram node currently representing each set
    children = np.empty((n - 1, 2), dtype=np.int64)
    parent = np.full(2 * n - 1, -1, dtype=np.int64)
    for k, e in enumerate(order):
        p, q = mst.edges[e]
        rp, rq = ds.find(int(p)), ds.find(int(q))
        if rp == rq:
            raise GraphError("MST contains a cycle")
        a, b = top[rp], top[rq]
        if a > b:
            a, b = b, a
        children[k] = (a, b)
        parent[a] = parent[b] = n + k
        top[ds.union(rp, rq)] = n + k
    if leaf_area is None:
        leaf_area = np.ones(n)
    leaf_area = np.asarray(leaf_area, dtype=float)
    if len(leaf_area) != n:
        raise DimensionError("leaf_area length differs from the number of leaves")
    return IndexedHierarchy(mst, children, order.astype(np.int64), mst.weights[order].copy(),
                            parent, leaf_area, labels, provenance)


def hierarchy_from_rag(rag: Rag, labels=None, provenance: str = "grad") -> IndexedHierarchy:
    return build_dendrogram(minimum_spanning_tree(rag), rag.area, labels, provenance)


class LcaIndex:
    """Lowest common ancestor queries by Euler tour + sparse-table RMQ."""

    def __init__(self, h: IndexedHierarchy):
        n = h.n_leaves
        n_nodes = h.n_nodes
        euler, depth = [], []
        first = np.empty(n_nodes, dtype=np.int64)
        node_depth = np.zeros(n_nodes, dtype=np.int64)
        stack = [(h.root, 0)]
        while stack:
            node, state = stack.pop()
            if state == 0:
                first[node] = len(euler)
            euler.append(node)
            depth.append(node_depth[node])
            if node >= n and state < 2:
                child = h.children[node - n, state]
                node_depth[child] = node_depth[node] + 1
                stack.append((node, state + 1))
                stack.append((child, 0))
        self.euler = np.asarray(euler, dtype=np.int64)
        self.first = first
        d = np.asarray(depth)
        table = [np.arange(len(d))]
        j = 1
        while (1 << j) <= len(d):
            prev = table[-1]
            half = 1 << (j - 1)
            a = prev[:len(d) - (1 << j) + 1]
            b = prev[half:half + len(a)]
            table.append(np.where(d[a] <= d[b], a, b))
            j += 1
        self.table = table
        self.depth = d

    def __call__(self, u, v):
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        l = np.minimum(self.first[u], self.first[v])
        r = np.maximum(self.first[u], self.first[v])
        span = r - l + 1
        j = np.floor(np.log2(span)).astype(np.int64)
        # np.log2 may round 2**j - eps up; fix the level where needed
        j = np.where((1 << j) > span, j - 1, j)
        out = np.empty(np.shape(l), dtype=np.int64)
        for level in np.unique(j):
            sel = j == level
            tab = self.table[level]
            a = tab[l[sel]]
            b = tab[r[sel] - (1 << level) + 1]
            out[sel] = self.euler[np.where(self.depth[a] <= self.depth[b], a, b)]
        return out


# -- partitions -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Partition:
    """Leaf labelling; ``param`` records the cut that produced it."""

    labels: np.ndarray
    n_regions: int
    param: tuple = ()


def _make_partition(roots: np.ndarray, param) -> Partition:
    lab = relabel_first_occurrence(roots)
    return Partition(lab, int(lab.max()) + 1 if len(lab) else 0, param)


def prefix_roots(h: IndexedHierarchy, k: int) -> np.ndarray:
    """For every leaf, its highest ancestor among the first ``k`` merges."""
    n = h.n_leaves
    up = h.parent.copy()
    ids = np.arange(h.n_nodes)
    stop = (up < 0) | (up - n >= k)
    up[stop] = ids[stop]
    while True:
        nxt = up[up]
        if np.array_equal(nxt, up):
            break
        up = nxt
    return up[:n]


def cut_at(h: IndexedHierarchy, lam: float) -> Partition:
    """Remove every MST edge whose altitude is strictly above ``lam``."""
    if lam < 0:
        raise ValueError("cut level must be >= 0")
    k = int(np.searchsorted(h.altitude, lam, side="right"))
    return _make_partition(prefix_roots(h, k), ("lambda", float(lam)))


def cut_to_k(h: IndexedHierarchy, k: int) -> Partition:
    """Remove the ``k - 1`` highest MST edges, leaving exactly ``k`` regions."""
    n = h.n_leaves
    if not 1 <= k <= n:
        raise ValueError(f"region count {k} outside [1, {n}]")
    return _make_partition(prefix_roots(h, n - k), ("k", int(k)))


def marker_segmentation(mst: Mst, markers) -> Partition:
    """Minimum spanning forest rooted in the marker leaves.

    Edges are united in (weight, index) order unless both sides already hold
    a marker, which amounts to cutting the highest edge on the MST path
    between every pair of markers.
    """
    markers = sorted({int(m) for m in markers})
    if not markers:
        raise ValueError("marker set is empty")
    if markers[0] < 0 or markers[-1] >= mst.n_nodes:
        raise ValueError("marker id outside the leaf range")
    ds = DisjointSet(mst.n_nodes)
    marked = [False] * mst.n_nodes
    for m in markers:
        marked[m] = True
    for e in _edge_order(mst.weights):
        rp, rq = ds.find(int(mst.edges[e, 0])), ds.find(int(mst.edges[e, 1]))
        if marked[rp] and marked[rq]:
            continue
        flag = marked[rp] or marked[rq]
        marked[ds.union(rp, rq)] = flag
    roots = np.array([ds.find(i) for i in range(mst.n_nodes)])
    return _make_partition(roots, ("markers", len(markers)))


def partition_labelmap(p: Partition, fine: np.ndarray) -> np.ndarray:
    fine = np.asarray(fine)
    if int(fine.max()) + 1 != len(p.labels):
        raise DimensionError(
            f"partition covers {len(p.labels)} regions, label map has {int(fine.max()) + 1}")
    return p.labels[fine]


def cut_edges(mst: Mst, p: Partition) -> np.ndarray:
    """Boolean mask of MST edges separating two regions of ``p``."""
    return p.labels[mst.edges[:, 0]] != p.labels[mst.edges[:, 1]]
