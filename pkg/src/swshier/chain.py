"""Hierarchy specs: chains of at most two re-weightings over the gradient
hierarchy, their text grammar, enumeration and construction.

Grammar (read right to left, like function composition)::

    grad
    ssurf|grad
    ssurf@poisson(100)|grad
    svol(erode=vseg:15)|ssurf|grad
    ssurf@uniform(50)|grad
    svol@poisson(rate=0.01)|grad
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .graph import IndexedHierarchy, Partition, build_rag, hierarchy_from_rag, prefix_roots
from .pixel import (StructuringElement, morphological_gradient, relabel_first_occurrence,
                    watershed_fine_partition)
from .sws import DEFAULT_COUNT, MarkerModel, sws_reweight

MAX_DEPTH = 2
BASE = "grad"
DEFAULT_SE_CATALOG = (StructuringElement("disk", 4), StructuringElement("hseg", 4),
                      StructuringElement("vseg", 15))
DEFAULT_OPERATORS = ("ssurf", "svol", "ssurf(erode=*)", "svol(erode=*)")

_TERM = re.compile(
    r"(?P<op>ssurf|svol)"
    r"(?:\((?P<args>[^)]*)\))?"
    r"(?:@(?P<proc>poisson|uniform)\((?P<pargs>[^)]*)\))?")


@dataclass(frozen=True)
class HierarchySpec:
    """Operators in application order (first applied first)."""

    ops: tuple[MarkerModel, ...] = ()

    def __post_init__(self):
        if len(self.ops) > MAX_DEPTH:
            raise ConfigError(f"chains deeper than {MAX_DEPTH} are not supported")

    @property
    def canonical(self) -> str:
        return "|".join([m.token for m in reversed(self.ops)] + [BASE])

    @property
    def display(self) -> str:
        text = "λ_Grad"
        for m in self.ops:
            text = f"λ_{m.display}({text})"
        return text

    @property
    def depth(self) -> int:
        return len(self.ops)

    @property
    def prefix(self) -> "HierarchySpec":
        return HierarchySpec(self.ops[:-1])

    def __str__(self):
        return self.canonical


def parse_term(text: str, process: str = "poisson", count: float = DEFAULT_COUNT,
               exact_erosion: bool = True) -> MarkerModel:
    m = _TERM.fullmatch(text.strip())
    if not m:
        raise ConfigError(f"cannot parse operator {text!r}")
    measure = "surface" if m.group("op") == "ssurf" else "volume"
    se = None
    if m.group("args"):
        for arg in m.group("args").split(","):
            key, _, value = arg.partition("=")
            if key.strip() != "erode":
                raise ConfigError(f"unknown operator argument {key!r} in {text!r}")
            try:
                se = StructuringElement.parse(value)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
    rate = None
    if m.group("proc"):
        process = m.group("proc")
        pargs = m.group("pargs").strip()
        try:
            if pargs.startswith("rate="):
                rate = float(pargs[5:])
            elif pargs:
                count = float(pargs)
        except ValueError as exc:
            raise ConfigError(f"bad marker parameter in {text!r}") from exc
    try:
        return MarkerModel(process=process, measure=measure, count=count, se=se, rate=rate,
                           exact_erosion=exact_erosion)
    except ValueError as exc:
        raise ConfigError(f"{text!r}: {exc}") from exc


def parse_spec(text: str, process: str = "poisson", count: float = DEFAULT_COUNT,
               exact_erosion: bool = True) -> HierarchySpec:
    """Parse ``op|op|grad``; ``process``/``count`` fill in terms without ``@``."""
    terms = [t.strip() for t in text.split("|")]
    if terms[-1] != BASE:
        raise ConfigError(f"spec {text!r} must end with {BASE!r}")
    ops = [parse_term(t, process, count, exact_erosion) for t in reversed(terms[:-1])]
    return HierarchySpec(tuple(ops))


def expand_operators(operators, se_catalog=DEFAULT_SE_CATALOG, process: str = "poisson",
                     count: float = DEFAULT_COUNT, exact_erosion: bool = True) -> list[MarkerModel]:
    """Operator templates to concrete operators; ``erode=*`` expands over
    the structuring-element catalog."""
    out = []
    for op in operators:
        if isinstance(op, MarkerModel):
            out.append(op)
        elif "erode=*" in op:
            for se in se_catalog:
                out.append(parse_term(op.replace("erode=*", f"erode={se}"), process, count,
                                      exact_erosion))
        else:
            out.append(parse_term(op, process, count, exact_erosion))
    return out


def enumerate_specs(operators=DEFAULT_OPERATORS, se_catalog=DEFAULT_SE_CATALOG,
                    **kw) -> list[HierarchySpec]:
    """Base, every single operator, every ordered pair; canonical order."""
    ops = expand_operators(operators, se_catalog, **kw)
    specs = [HierarchySpec()]
    specs += [HierarchySpec((a,)) for a in ops]
    specs += [HierarchySpec((a, b)) for a in ops for b in ops]
    return specs


# -- construction -----------------------------------------------------------

def base_hierarchy(img, labels=None, relief=None, gradient_radius: int = 1,
                   dissimilarity: str = "pass") -> IndexedHierarchy:
    """Gradient hierarchy over the fine partition (watershed basins of the
    gradient unless ``labels`` is given)."""
    if relief is None:
        relief = morphological_gradient(img, gradient_radius)
    if labels is None:
        labels = watershed_fine_partition(relief)
    rag = build_rag(img, labels, relief, dissimilarity)
    return hierarchy_from_rag(rag, labels, BASE)


def apply_spec(base: IndexedHierarchy, spec: HierarchySpec) -> IndexedHierarchy:
    h = base
    for m in spec.ops:
        h = sws_reweight(h, m)
    return h


def compose_chain(img, labels, relief, spec: HierarchySpec, **kw) -> IndexedHierarchy:
    return apply_spec(base_hierarchy(img, labels, relief, **kw), spec)


class HierarchyBuilder:
    """Builds the hierarchies of one image, sharing chain prefixes and an
    optional on-disk cache keyed by ``(key, canonical spec)``."""

    def __init__(self, base: IndexedHierarchy, key: str = "", cache_dir=None):
        self.base = base
        self.key = key
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        self._built = {BASE: base}

    def _path(self, spec: HierarchySpec) -> Path:
        slug = re.sub(r"[^A-Za-z0-9.=:_-]+", "_", spec.canonical).replace(":", "-")
        return self.cache_dir / f"{self.key}__{slug}.swsh"

    def get(self, spec: HierarchySpec) -> IndexedHierarchy:
        name = spec.canonical
        if name in self._built:
            return self._built[name]
        from .storage import load_hierarchy, save_hierarchy

        path = self._path(spec) if self.cache_dir is not None else None
        if path is not None and path.exists():
            h = load_hierarchy(path, self.base.leaf_area, self.base.labels)
            if h.provenance != name:
                raise ConfigError(f"cache file {path} holds {h.provenance!r}, expected {name!r}")
        else:
            h = sws_reweight(self.get(spec.prefix), spec.ops[-1])
            if path is not None:
                path.parent.mkdir(parents=True, exist_ok=True)
                save_hierarchy(path, h)
        self._built[name] = h
        return h

    def drop(self):
        """Forget everything but the base hierarchy."""
        self._built = {BASE: self.base}


def normalized_altitudes(h: IndexedHierarchy) -> np.ndarray:
    """Merge altitudes on a [0, 1] scale comparable across images.

    Gradient hierarchies are divided by their maximum altitude; re-weighted
    hierarchies already hold probabilities and are returned as is.
    """
    if h.is_stochastic or len(h.altitude) == 0:
        return h.altitude
    top = h.altitude[-1]
    return h.altitude / top if top > 0 else h.altitude


def cut_normalized(h: IndexedHierarchy, level: float) -> Partition:
    """Threshold cut on the normalized altitude scale."""
    k = int(np.searchsorted(normalized_altitudes(h), level, side="right"))
    lab = relabel_first_occurrence(prefix_roots(h, k))
    return Partition(lab, int(lab.max()) + 1, ("threshold", float(level)))
