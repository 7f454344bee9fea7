import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import leaves_under
from swshier.errors import DegenerateMeasureError
from swshier.graph import Mst, build_dendrogram, cut_at
from swshier.pixel import disk, eroded_area, hseg, vseg
from swshier.sws import (MarkerModel, cluster_measure, cut_probability, edge_probabilities,
                         eroded_node_areas, monte_carlo_by_segmentation,
                         monte_carlo_cut_frequency, sws_reweight)
from swshier.synthetic import random_hierarchy, striped_grid_hierarchy

seeds = st.integers(0, 2**32 - 1)


def two_leaves(alt=2.0, area=(1.0, 1.0)):
    return build_dendrogram(Mst(2, np.array([[0, 1]]), np.array([alt]), np.array([0])), area)


def band(p, trials, k=4):
    return k * np.sqrt(p * (1 - p) / trials) + 1e-3


# -- closed form ------------------------------------------------------------

def test_uniform_single_marker_never_cuts():
    h = random_hierarchy(np.random.default_rng(0), 12)
    assert not edge_probabilities(h, MarkerModel("uniform", count=1)).any()


def test_uniform_two_markers_two_halves():
    p = cut_probability(0.5, 0.5, MarkerModel("uniform", count=2), 1.0)
    assert p == pytest.approx(0.5, abs=1e-15)
    h = two_leaves()
    assert edge_probabilities(h, MarkerModel("uniform", count=2)).tolist() == [0.5]


def test_poisson_ln2():
    model = MarkerModel("poisson", rate=math.log(2))
    assert cut_probability(1.0, 1.0, model, 10.0) == pytest.approx(0.25, abs=1e-15)


def test_reweighted_altitudes_are_probabilities():
    h = random_hierarchy(np.random.default_rng(4), 20)
    for model in (MarkerModel(), MarkerModel("uniform", "volume", count=30)):
        g = sws_reweight(h, model)
        assert (g.altitude >= 0).all() and (g.altitude <= 1).all()
        assert g.is_stochastic and not h.is_stochastic


def test_degenerate_measure():
    h = striped_grid_hierarchy(np.random.default_rng(0), size=6, block=3)
    with pytest.raises(DegenerateMeasureError):
        edge_probabilities(h, MarkerModel(se=vseg(15)))
    flat = build_dendrogram(Mst(2, np.array([[0, 1]]), np.array([0.0]), np.array([0])))
    with pytest.raises(DegenerateMeasureError):
        edge_probabilities(flat, MarkerModel(measure="volume"))


@given(seeds, st.integers(2, 15), st.floats(0.5, 50), st.floats(1.01, 3))
def test_monotone_in_intensity(seed, n, count, factor):
    h = random_hierarchy(np.random.default_rng(seed), n)
    lo = edge_probabilities(h, MarkerModel(count=count))
    hi = edge_probabilities(h, MarkerModel(count=count * factor))
    assert (hi >= lo - 1e-12).all()
    k = int(count)
    lo = edge_probabilities(h, MarkerModel("uniform", count=k + 1))
    hi = edge_probabilities(h, MarkerModel("uniform", count=k + 2))
    assert (hi >= lo - 1e-12).all()


@given(seeds, st.integers(2, 15))
def test_reweight_keeps_topology(seed, n):
    h = random_hierarchy(np.random.default_rng(seed), n)
    g = sws_reweight(sws_reweight(h, MarkerModel()), MarkerModel(measure="volume"))
    assert g.mst.edges.tolist() == h.mst.edges.tolist()
    assert g.mst.source.tolist() == h.mst.source.tolist()
    assert g.provenance == "svol|ssurf|grad"


# -- measures ---------------------------------------------------------------

def test_volume_two_unit_leaves():
    vol = cluster_measure(two_leaves(2.0), "volume")
    assert vol.tolist() == [2.0, 2.0, 4.0]


def volume_by_levels(h):
    """Per-level accumulation: between consecutive altitudes, every pixel of
    a cluster contributes the level increment until the cluster merges."""
    levels = np.concatenate([[0.0], np.unique(h.altitude)])
    vol = np.zeros(h.n_nodes)
    for node in range(h.n_nodes):
        top = h.parent_altitude[node]
        pix = sum(h.leaf_area[i] for i in leaves_under(h, node))
        for lo, hi in zip(levels[:-1], levels[1:]):
            if hi > top:
                break
            # pixels of `node` lying below the water line between lo and hi
            clusters = cut_at(h, lo).labels
            inside = [i for i in leaves_under(h, node)]
            vol[node] += (hi - lo) * sum(h.leaf_area[i] for i in inside
                                         if clusters[i] in clusters[inside])
        assert vol[node] == pytest.approx(pix * top)
    return vol


@given(seeds, st.integers(2, 9), st.booleans())
def test_volume_matches_level_integration(seed, n, distinct):
    h = random_hierarchy(np.random.default_rng(seed), n, distinct=distinct)
    np.testing.assert_allclose(cluster_measure(h, "volume"), volume_by_levels(h), rtol=1e-12)


@given(seeds, st.integers(2, 15))
def test_measure_additivity(seed, n):
    h = random_hierarchy(np.random.default_rng(seed), n)
    area = cluster_measure(h, "surface")
    vol = cluster_measure(h, "volume")
    for k, (a, b) in enumerate(h.children):
        assert area[n + k] == area[a] + area[b]
        assert vol[n + k] >= max(vol[a], vol[b])
    assert area[h.root] == h.leaf_area.sum()


@pytest.mark.parametrize("se", [disk(0), disk(1), disk(2), hseg(2), hseg(4), vseg(3), vseg(5)])
@pytest.mark.parametrize("seed", range(3))
def test_eroded_node_areas_match_masks(se, seed):
    rng = np.random.default_rng(seed)
    h = striped_grid_hierarchy(rng, size=15, block=3)
    got = eroded_node_areas(h, se)
    for node in range(h.n_nodes):
        mask = np.isin(h.labels, leaves_under(h, node))
        assert got[node] == eroded_area(mask, se)
    assert (got <= h.node_area).all()
    approx = eroded_node_areas(h, se, exact=False)
    assert (approx <= got).all()
    np.testing.assert_array_equal(approx[:h.n_leaves], got[:h.n_leaves])


def test_disk_zero_reproduces_surface():
    h = striped_grid_hierarchy(np.random.default_rng(5), size=12, block=2)
    np.testing.assert_array_equal(cluster_measure(h, "eroded_surface", disk(0)),
                                  cluster_measure(h, "surface"))
    np.testing.assert_array_equal(edge_probabilities(h, MarkerModel(se=disk(0))),
                                  edge_probabilities(h, MarkerModel()))


# -- Monte Carlo ------------------------------------------------------------

def test_mc_uniform_single_marker_zero():
    h = random_hierarchy(np.random.default_rng(1), 10)
    assert not monte_carlo_cut_frequency(h, MarkerModel("uniform", count=1), 5000).any()


def test_mc_two_leaves_half():
    f = monte_carlo_cut_frequency(two_leaves(), MarkerModel("uniform", count=2), 10_000, seed=3)
    assert abs(f[0] - 0.5) <= 3 * np.sqrt(0.25 / 10_000)


def test_mc_deterministic():
    h = random_hierarchy(np.random.default_rng(2), 15)
    model = MarkerModel(count=20)
    a = monte_carlo_cut_frequency(h, model, 9000, seed=11)
    b = monte_carlo_cut_frequency(h, model, 9000, seed=11)
    assert a.tobytes() == b.tobytes()
    assert monte_carlo_cut_frequency(h, model, 9000, seed=12).tobytes() != a.tobytes()


@pytest.mark.parametrize("process", ["poisson", "uniform"])
def test_mc_matches_segmentation_reference(process):
    h = random_hierarchy(np.random.default_rng(7), 8)
    model = MarkerModel(process, count=4)
    fast = monte_carlo_cut_frequency(h, model, 600, seed=5)
    slow = monte_carlo_by_segmentation(h, model, 600, seed=5)
    np.testing.assert_array_equal(fast, slow)


@pytest.mark.parametrize("model", [
    MarkerModel("poisson", count=10), MarkerModel("uniform", count=10),
    MarkerModel("poisson", "volume", count=10), MarkerModel("uniform", "volume", count=10)],
    ids=lambda m: m.token)
def test_mc_matches_closed_form(model):
    trials = 100_000
    h = random_hierarchy(np.random.default_rng(20), 20)
    p = edge_probabilities(h, model)
    f = monte_carlo_cut_frequency(h, model, trials, seed=1)
    assert (np.abs(p - f) <= band(p, trials)).all()


@pytest.mark.parametrize("se", [disk(1), hseg(4)])
def test_mc_matches_closed_form_eroded(se):
    trials = 50_000
    h = striped_grid_hierarchy(np.random.default_rng(3), size=15, block=3)
    for measure in ("surface", "volume"):
        model = MarkerModel(measure=measure, count=8, se=se)
        p = edge_probabilities(h, model)
        f = monte_carlo_cut_frequency(h, model, trials, seed=2)
        assert (np.abs(p - f) <= band(p, trials)).all()
