import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swshier.chain import (HierarchyBuilder, HierarchySpec, apply_spec, base_hierarchy,
                           enumerate_specs, normalized_altitudes, parse_spec)
from swshier.errors import ConfigError
from swshier.graph import cut_to_k
from swshier.pixel import hseg, vseg
from swshier.storage import hierarchy_bytes
from swshier.sws import MarkerModel, sws_reweight
from swshier.synthetic import noisy_disks


@pytest.mark.parametrize("text", [
    "grad", "ssurf|grad", "svol(erode=vseg:15)|ssurf|grad", "ssurf@uniform(50)|grad",
    "svol@poisson(rate=0.01)|grad", "ssurf(erode=disk:4)@poisson(20)|svol|grad",
])
def test_grammar_round_trip(text):
    spec = parse_spec(text)
    assert spec.canonical == text
    assert parse_spec(spec.canonical) == spec


def test_grammar_details():
    spec = parse_spec("svol(erode=vseg:15)|ssurf@poisson(100)|grad")
    assert spec.canonical == "svol(erode=vseg:15)|ssurf|grad"
    assert spec.ops[0] == MarkerModel()
    assert spec.ops[1] == MarkerModel(measure="volume", se=vseg(15))
    assert spec.display == "λ_(SVol,ε[vseg:15])(λ_SSurf(λ_Grad))"
    assert parse_spec("ssurf|grad", process="uniform", count=5).canonical == "ssurf@uniform(5)|grad"
    for bad in ("ssurf", "sfoo|grad", "ssurf(erode=ring:2)|grad", "ssurf|ssurf|ssurf|grad",
                "ssurf@uniform(0.5)|grad", "ssurf(size=3)|grad"):
        with pytest.raises(ConfigError):
            parse_spec(bad)


def test_enumeration_counts():
    assert len(enumerate_specs(("ssurf", "svol", "ssurf@uniform(10)", "svol@uniform(10)"))) == 21
    assert [s.canonical for s in enumerate_specs(())] == ["grad"]
    specs = enumerate_specs()
    assert len(specs) == 73
    assert len({s.canonical for s in specs}) == 73
    assert specs[0].depth == 0 and specs[1].canonical == "ssurf|grad"
    assert sum(s.depth == 1 for s in specs) == 8
    eroding = {str(m.se) for s in specs for m in s.ops if m.se is not None}
    assert eroding == {"disk:4", "hseg:4", "vseg:15"}
    assert len(enumerate_specs(se_catalog=(hseg(2),))) == 1 + 4 + 16


@pytest.fixture(scope="module")
def disk_image():
    img, truth = noisy_disks(np.random.default_rng(0), size=40, n_disks=2, radius=(6, 8))
    return img, truth


def test_empty_chain_is_base(disk_image):
    img, _ = disk_image
    base = base_hierarchy(img)
    h = apply_spec(base, HierarchySpec())
    assert h is base and h.provenance == "grad"


def test_builder_matches_stepwise(disk_image, tmp_path):
    img, _ = disk_image
    base = base_hierarchy(img)
    spec = parse_spec("svol(erode=hseg:4)|ssurf|grad")
    step = sws_reweight(sws_reweight(base, MarkerModel()), MarkerModel("poisson", "volume",
                                                                       se=hseg(4)))
    built = HierarchyBuilder(base, "x", tmp_path).get(spec)
    assert hierarchy_bytes(built) == hierarchy_bytes(step) == hierarchy_bytes(apply_spec(base, spec))
    # second builder reads the cached files
    again = HierarchyBuilder(base, "x", tmp_path).get(spec)
    assert hierarchy_bytes(again) == hierarchy_bytes(step)
    assert len(list(tmp_path.glob("x__*.swsh"))) == 2


def test_cache_mismatch_detected(disk_image, tmp_path):
    img, _ = disk_image
    base = base_hierarchy(img)
    b = HierarchyBuilder(base, "x", tmp_path)
    spec = parse_spec("ssurf|grad")
    b.get(spec)
    other = HierarchyBuilder(base, "x", tmp_path)
    path = other._path(spec)
    from swshier.storage import save_hierarchy

    save_hierarchy(path, sws_reweight(base, MarkerModel(measure="volume")))
    with pytest.raises(ConfigError):
        other.get(spec)


def test_normalized_altitudes(disk_image):
    img, _ = disk_image
    base = base_hierarchy(img)
    alt = normalized_altitudes(base)
    assert alt[-1] == 1.0 and (alt >= 0).all()
    g = sws_reweight(base, MarkerModel())
    assert normalized_altitudes(g) is g.altitude


def test_surface_reweighting_demotes_small_contrasted_regions():
    # one large dim disk and a tiny very bright dot: the gradient ranks the dot's
    # contour highest, surface markers rarely hit the dot so it is demoted
    img = np.full((40, 40), 0.1)
    yy, xx = np.mgrid[:40, :40]
    img[(yy - 20) ** 2 + (xx - 14) ** 2 <= 81] = 0.4
    img[(yy - 8) ** 2 + (xx - 33) ** 2 <= 2] = 1.0
    base = base_hierarchy(img)
    dot = base.labels[8, 33]
    big = base.labels[20, 14]
    bg = base.labels[0, 0]

    def first_separated(h):
        """Largest region count at which the dot still splits from the background."""
        for k in range(2, h.n_leaves + 1):
            lab = cut_to_k(h, k).labels
            if lab[dot] != lab[bg]:
                return k
        return h.n_leaves

    ssurf = sws_reweight(base, MarkerModel())
    assert first_separated(base) <= 3
    assert first_separated(ssurf) > first_separated(base)
    lab = cut_to_k(ssurf, 2).labels
    assert lab[big] != lab[bg] and lab[dot] == lab[bg]


@given(st.sampled_from([s.canonical for s in enumerate_specs()]))
def test_every_default_spec_round_trips(text):
    assert parse_spec(text).canonical == text
