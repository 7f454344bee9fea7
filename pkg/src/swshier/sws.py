"""Stochastic watershed re-weighting of MST edges.

An MST edge merging clusters C1 and C2 is cut by a marker-based segmentation
as soon as both clusters hold a marker. Its new valuation is the probability
of that event under a random marker process, computed in closed form from a
measure of each cluster taken at the merge level.

Cluster measures (``measure(C)`` at the altitude where C merges):

* surface        pixel area of C
* volume         recursive lake volume with leaves formed at altitude 0
* eroded_surface number of pixels where a structuring element fits inside C
* eroded_volume  volume scaled by the eroded/total area ratio of C

For the Monte Carlo check, a marker is a point of a "site" (a dendrogram
node) plus, for volume measures, a height drawn uniformly below the root
altitude. A marker counts for cluster C at level l when its site lies in C's
subtree and its height is at most l.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMeasureError
from .graph import IndexedHierarchy, accumulate_up, build_dendrogram
from .pixel import StructuringElement

DEFAULT_COUNT = 100.0
TRIAL_BLOCK = 4096


@dataclass(frozen=True)
class MarkerModel:
    """Random marker process and the cluster measure it samples.

    ``count`` is the expected number of markers for ``poisson`` (giving
    ``rate = count / total measure``) and the exact number N for
    ``uniform``. An explicit ``rate`` overrides ``count`` for poisson.
    """

    process: str = "poisson"
    measure: str = "surface"
    count: float = DEFAULT_COUNT
    se: StructuringElement | None = None
    rate: float | None = None
    exact_erosion: bool = True

    def __post_init__(self):
        if self.process not in ("poisson", "uniform"):
            raise ValueError(f"unknown marker process {self.process!r}")
        if self.measure not in ("surface", "volume"):
            raise ValueError(f"unknown measure {self.measure!r}")
        if self.rate is not None and not self.rate > 0:
            raise ValueError("poisson rate must be > 0")
        if self.process == "uniform":
            if self.rate is not None:
                raise ValueError("uniform markers take a count, not a rate")
            if self.count < 1 or int(self.count) != self.count:
                raise ValueError("uniform marker count must be an integer >= 1")
        elif not self.count > 0:
            raise ValueError("expected marker count must be > 0")

    @property
    def kind(self) -> str:
        return self.measure if self.se is None else f"eroded_{self.measure}"

    @property
    def token(self) -> str:
        """Canonical grammar token, e.g. ``svol(erode=vseg:15)@uniform(50)``."""
        text = "ssurf" if self.measure == "surface" else "svol"
        if self.se is not None:
            text += f"(erode={self.se})"
        if self.rate is not None:
            text += f"@poisson(rate={_fmt(self.rate)})"
        elif self.process != "poisson" or self.count != DEFAULT_COUNT:
            text += f"@{self.process}({_fmt(self.count)})"
        return text

    @property
    def display(self) -> str:
        name = "SSurf" if self.measure == "surface" else "SVol"
        if self.se is not None:
            name = f"({name},ε[{self.se}])"
        return name


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


# -- measures ---------------------------------------------------------------

def landing_nodes(h: IndexedHierarchy, se: StructuringElement) -> np.ndarray:
    """Per pixel, the smallest cluster whose mask contains the structuring
    element centred there (-1 when it pokes outside the image).

    Erosion is increasing, so the clusters containing a pixel in their
    erosion form the ancestor chain above this node; cluster eroded areas
    are therefore subtree sums of landing counts.
    """
    if h.labels is None:
        raise ValueError("erosion measures need the fine label map")
    labels = np.asarray(h.labels, dtype=np.int64)
    hh, ww = labels.shape
    lca = h.lca()
    land = labels.copy()
    valid = np.ones((hh, ww), dtype=bool)
    for dy, dx in se.offsets():
        if dy == 0 and dx == 0:
            continue
        if abs(dy) >= hh or abs(dx) >= ww:
            valid[:] = False
            break
        shifted = np.full((hh, ww), -1, dtype=np.int64)
        ys = slice(max(0, -dy), min(hh, hh - dy))
        xs = slice(max(0, -dx), min(ww, ww - dx))
        ys2 = slice(max(0, dy), min(hh, hh + dy))
        xs2 = slice(max(0, dx), min(ww, ww + dx))
        shifted[ys, xs] = labels[ys2, xs2]
        valid &= shifted >= 0
        sel = valid
        land[sel] = lca(land[sel], shifted[sel])
    return np.where(valid, land, -1)


def eroded_node_areas(h: IndexedHierarchy, se: StructuringElement, exact: bool = True) -> np.ndarray:
    """Eroded area of every dendrogram node's pixel mask.

    With ``exact=False`` internal nodes get the sum of their leaves' eroded
    areas (cheaper, but erosion is not additive under union).
    """
    key = ("eroded", str(se), exact)
    if key not in h._memo:
        land = landing_nodes(h, se)
        own = np.bincount(land[land >= 0], minlength=h.n_nodes).astype(float)
        if not exact:
            own[h.n_leaves:] = 0.0
            leaf_er = accumulate_up(h, own)[:h.n_leaves]
            own = np.concatenate([leaf_er, np.zeros(h.n_leaves - 1)])
        h._memo[key + ("own",)] = own
        h._memo[key] = accumulate_up(h, own)
    return h._memo[key]


def _landing_mass(h: IndexedHierarchy, se, exact) -> np.ndarray:
    if se is None:
        return np.concatenate([h.leaf_area, np.zeros(h.n_leaves - 1)])
    eroded_node_areas(h, se, exact)
    return h._memo[("eroded", str(se), exact, "own")]


def cluster_measure(h: IndexedHierarchy, kind: str, se: StructuringElement | None = None,
                    exact: bool = True) -> np.ndarray:
    """Measure of every dendrogram node evaluated where it merges into its
    parent; the root is evaluated at its own altitude (the total measure)."""
    eroded = kind.startswith("eroded_")
    if eroded != (se is not None):
        raise ValueError("a structuring element is required for, and only for, eroded measures")
    area = h.node_area
    if kind in ("surface", "eroded_surface"):
        return area if se is None else eroded_node_areas(h, se, exact)
    if kind not in ("volume", "eroded_volume"):
        raise ValueError(f"unknown measure kind {kind!r}")
    n = h.n_leaves
    alt = h.node_altitude
    up = h.parent_altitude
    vol = np.zeros(h.n_nodes)
    internal = np.zeros(h.n_nodes)
    for k in range(n - 1):
        a, b = h.children[k]
        vol[a] = internal[a] + area[a] * (up[a] - alt[a])
        vol[b] = internal[b] + area[b] * (up[b] - alt[b])
        internal[n + k] = vol[a] + vol[b]
    root = h.root
    vol[root] = internal[root]
    if se is None:
        return vol
    er = eroded_node_areas(h, se, exact)
    return vol * er / area


# -- closed form ------------------------------------------------------------

def _rate(m: MarkerModel, total: float) -> float:
    return m.rate if m.rate is not None else m.count / total


def cut_probability(m1, m2, model: MarkerModel, total: float) -> np.ndarray:
    """Probability that both clusters receive at least one marker."""
    m1 = np.asarray(m1, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    if model.process == "poisson":
        theta = _rate(model, total)
        p = (-np.expm1(-theta * m1)) * (-np.expm1(-theta * m2))
    else:
        n = int(model.count)
        if n == 1:
            # one marker cannot land on both sides; avoid rounding residue
            return np.zeros(np.broadcast(m1, m2).shape)
        a1 = np.clip(m1 / total, 0.0, 1.0)
        a2 = np.clip(m2 / total, 0.0, 1.0)
        rest = np.clip(1.0 - a1 - a2, 0.0, 1.0)
        with np.errstate(divide="ignore"):
            x1 = np.exp(n * np.log1p(-a1))
            x2 = np.exp(n * np.log1p(-a2))
            x12 = np.exp(n * np.log(rest))
        p = 1.0 - x1 - x2 + x12
    return np.clip(p, 0.0, 1.0)


def edge_probabilities(h: IndexedHierarchy, model: MarkerModel) -> np.ndarray:
    """Closed-form cut probability per MST edge (MST edge order)."""
    meas = cluster_measure(h, model.kind, model.se, model.exact_erosion)
    total = float(meas[h.root])
    if not total > 0 or not math.isfinite(total):
        raise DegenerateMeasureError(
            f"total {model.kind} measure is {total}; no marker can fall in the image")
    ch = h.children
    p = cut_probability(meas[ch[:, 0]], meas[ch[:, 1]], model, total)
    out = np.empty(len(p))
    out[h.merge_edge] = p
    return out


def sws_reweight(h: IndexedHierarchy, model: MarkerModel) -> IndexedHierarchy:
    """Same MST, edges re-valued by their cut probability; dendrogram rebuilt."""
    weights = edge_probabilities(h, model)
    prov = f"{model.token}|{h.provenance}" if h.provenance else model.token
    return build_dendrogram(h.mst.with_weights(weights), h.leaf_area, h.labels, prov)


# -- Monte Carlo ------------------------------------------------------------

def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(block)]))


def _sample_block(h, model, rng, size, sites, mass, total, height):
    """Per-site marker counts and the minimum marker height per site."""
    if model.process == "poisson":
        theta = _rate(model, total)
        scale = height if height is not None else 1.0
        counts = rng.poisson(theta * mass * scale, size=(size, len(sites)))
    else:
        counts = rng.multinomial(int(model.count), mass / mass.sum(), size=size)
    if height is None:
        return counts, np.where(counts > 0, 0.0, np.inf)
    u = rng.random(counts.shape)
    with np.errstate(divide="ignore"):
        lowest = height * (1.0 - u ** (1.0 / np.maximum(counts, 1)))
    return counts, np.where(counts > 0, lowest, np.inf)


def _site_setup(h: IndexedHierarchy, model: MarkerModel):
    meas = cluster_measure(h, model.kind, model.se, model.exact_erosion)
    total = float(meas[h.root])
    if not total > 0 or not math.isfinite(total):
        raise DegenerateMeasureError(f"total {model.kind} measure is {total}")
    mass = _landing_mass(h, model.se, model.exact_erosion)
    sites = np.flatnonzero(mass > 0)
    height = float(h.altitude[-1]) if model.measure == "volume" else None
    return sites, mass[sites], total, height


def monte_carlo_cut_frequency(h: IndexedHierarchy, model: MarkerModel, trials: int,
                              seed: int = 0) -> np.ndarray:
    """Empirical per-MST-edge cut frequency over ``trials`` marker draws.

    Trials are drawn in fixed blocks, each with its own stream derived from
    ``(seed, block index)``, so the result does not depend on how blocks are
    scheduled.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sites, mass, total, height = _site_setup(h, model)
    n = h.n_leaves
    hits = np.zeros(n - 1, dtype=np.int64)
    alt = h.altitude
    ch = h.children
    for block, start in enumerate(range(0, trials, TRIAL_BLOCK)):
        size = min(TRIAL_BLOCK, trials - start)
        rng = _block_rng(seed, block)
        _, lowest = _sample_block(h, model, rng, size, sites, mass, total, height)
        node_min = np.full((h.n_nodes, size), np.inf)
        node_min[sites] = lowest.T
        for k in range(n - 1):
            a, b = ch[k]
            ma, mb = node_min[a], node_min[b]
            hits[k] += np.count_nonzero((ma <= alt[k]) & (mb <= alt[k]))
            np.minimum(node_min[n + k], np.minimum(ma, mb), out=node_min[n + k])
    freq = np.empty(n - 1)
    freq[h.merge_edge] = hits / trials
    return freq


def monte_carlo_by_segmentation(h: IndexedHierarchy, model: MarkerModel, trials: int,
                                seed: int = 0) -> np.ndarray:
    """Slow reference for point markers on leaves: draws the same markers as
    :func:`monte_carlo_cut_frequency` and runs a marker-based segmentation
    per trial."""
    from .graph import cut_edges, marker_segmentation

    if model.se is not None or model.measure != "surface":
        raise ValueError("segmentation reference supports surface markers only")
    sites, mass, total, height = _site_setup(h, model)
    hits = np.zeros(h.n_leaves - 1, dtype=np.int64)
    for block, start in enumerate(range(0, trials, TRIAL_BLOCK)):
        size = min(TRIAL_BLOCK, trials - start)
        counts, _ = _sample_block(h, model, _block_rng(seed, block), size, sites, mass, total, height)
        for row in counts:
            markers = sites[row > 0]
            if len(markers) == 0:
                continue
            hits += cut_edges(h.mst, marker_segmentation(h.mst, markers))
    return hits / trials
