"""Independent reference implementations shared by the tests."""
from itertools import combinations

import numpy as np


def components(n, pairs):
    """Connected components by repeated label propagation; labels in
    first-occurrence order."""
    lab = list(range(n))
    changed = True
    while changed:
        changed = False
        for a, b in pairs:
            m = min(lab[a], lab[b])
            if lab[a] != m or lab[b] != m:
                lab[a] = lab[b] = m
                changed = True
    seen = {}
    return np.array([seen.setdefault(x, len(seen)) for x in lab])


def same_partition(a, b):
    a, b = np.asarray(a).ravel(), np.asarray(b).ravel()
    pairs = set(zip(a.tolist(), b.tolist()))
    return len(pairs) == len(set(a.tolist())) == len(set(b.tolist()))


def min_spanning_weight(n, edges, weights):
    """Minimum weight over all spanning trees, by enumeration."""
    best = np.inf
    for subset in combinations(range(len(edges)), n - 1):
        if components(n, [edges[i] for i in subset]).max() == 0:
            best = min(best, sum(weights[i] for i in subset))
    return best


def lca_altitude(h, x, y):
    """Altitude of the lowest common ancestor found by walking parents."""
    anc = set()
    while x >= 0:
        anc.add(x)
        x = h.parent[x]
    while y not in anc:
        y = h.parent[y]
    return h.node_altitude[y]


def leaves_under(h, node):
    n = h.n_leaves
    stack, out = [node], []
    while stack:
        v = stack.pop()
        if v < n:
            out.append(v)
        else:
            stack.extend(h.children[v - n])
    return sorted(out)
