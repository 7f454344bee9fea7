"""Exhaustive choice of (hierarchy, cut level) on a training set, per-image
oracle, and model-vs-oracle error statistics on a test set."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .chain import HierarchyBuilder, HierarchySpec, normalized_altitudes
from .errors import ConfigError, PipelineError, SwsError
from .graph import (IndexedHierarchy, Partition, Rag, build_rag, hierarchy_from_rag,
                    prefix_roots)
from .pixel import morphological_gradient, relabel_first_occurrence, watershed_fine_partition
from .scoring import JudgmentSet


@dataclass(eq=False)
class ImageCase:
    """One image with its fine partition, gradient and RAG."""

    id: str
    image: np.ndarray
    labels: np.ndarray
    relief: np.ndarray
    rag: Rag
    judgments: JudgmentSet | None = None
    truth: np.ndarray | None = None

    @classmethod
    def prepare(cls, id, image, labels=None, judgments=None, gradient_radius: int = 1,
                dissimilarity: str = "pass", truth=None) -> "ImageCase":
        try:
            relief = morphological_gradient(image, gradient_radius)
            if labels is None:
                labels = watershed_fine_partition(relief)
            rag = build_rag(image, labels, relief, dissimilarity)
        except SwsError as exc:
            raise PipelineError(f"image {id}: {exc}") from exc
        if judgments is not None:
            judgments.check_inside(labels.shape)
        return cls(id, image, labels, relief, rag, judgments, truth)

    def base(self) -> IndexedHierarchy:
        return hierarchy_from_rag(self.rag, self.labels, "grad")


@dataclass(frozen=True)
class CutGrid:
    """Cut levels shared across images.

    ``threshold``: ``levels`` evenly spaced thresholds on the normalized
    altitude scale [0, 1]. ``count``: fixed region counts (clipped to the
    number of fine regions).
    """

    mode: str = "threshold"
    levels: int = 64
    counts: tuple[int, ...] = ()

    def __post_init__(self):
        if self.mode == "threshold":
            if self.levels < 2:
                raise ConfigError("threshold grid needs at least 2 levels")
        elif self.mode == "count":
            if not self.counts or min(self.counts) < 1:
                raise ConfigError("region-count grid needs counts >= 1")
        else:
            raise ConfigError(f"unknown cut grid mode {self.mode!r}")

    @property
    def values(self) -> list:
        if self.mode == "threshold":
            return [float(x) for x in np.linspace(0.0, 1.0, self.levels)]
        return [int(k) for k in self.counts]

    def __len__(self):
        return self.levels if self.mode == "threshold" else len(self.counts)

    def label(self, value) -> str:
        return f"{value!r}" if self.mode == "threshold" else f"k:{value}"

    def merge_counts(self, h: IndexedHierarchy) -> np.ndarray:
        """Number of merges kept at each grid level."""
        n = h.n_leaves
        if self.mode == "threshold":
            alt = normalized_altitudes(h)
            return np.searchsorted(alt, np.asarray(self.values), side="right")
        return n - np.minimum(np.asarray(self.counts), n)

    def partitions(self, h: IndexedHierarchy):
        """Leaf labellings, one per grid level, sharing work for repeats."""
        out = []
        last_k, last = None, None
        for k in self.merge_counts(h):
            if k != last_k:
                last = relabel_first_occurrence(prefix_roots(h, int(k)))
                last_k = k
            out.append(last)
        return out

    def partition(self, h: IndexedHierarchy, value) -> Partition:
        i = self.values.index(value)
        k = int(self.merge_counts(h)[i])
        lab = relabel_first_occurrence(prefix_roots(h, k))
        return Partition(lab, int(lab.max()) + 1, (self.mode, value))


def score_table(case: ImageCase, specs, grid: CutGrid, score_fn, cache_dir=None) -> np.ndarray:
    """Scores of one image over every (spec, cut): shape (n_specs, n_cuts)."""
    try:
        builder = HierarchyBuilder(case.base(), case.id, cache_dir)
        table = np.empty((len(specs), len(grid)))
        memo = {}
        for i, spec in enumerate(specs):
            h = builder.get(spec)
            row = []
            for lab in grid.partitions(h):
                key = lab.tobytes()
                if key not in memo:
                    memo[key] = score_fn(case, lab)
                row.append(memo[key])
            table[i] = row
        return table
    except SwsError as exc:
        raise PipelineError(f"image {case.id}: {exc}") from exc


def _score_table_args(args):
    return score_table(*args)


def score_tables(cases, specs, grid, score_fn, cache_dir=None, workers: int = 1) -> np.ndarray:
    """Stacked tables, shape (n_images, n_specs, n_cuts), in input order."""
    if not cases:
        raise ConfigError("image set is empty")
    if not specs:
        raise ConfigError("spec set is empty")
    jobs = [(c, specs, grid, score_fn, cache_dir) for c in cases]
    if workers > 1 and len(cases) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            tables = list(ex.map(_score_table_args, jobs))
    else:
        tables = [_score_table_args(j) for j in jobs]
    return np.stack(tables)


def argmin_table(table: np.ndarray) -> tuple[int, int]:
    """First minimum in (spec, cut) order: canonical spec order, then the
    smaller cut."""
    flat = int(np.argmin(table))
    return divmod(flat, table.shape[1])


def train_model(train_images, specs, grid: CutGrid, score_fn, cache_dir=None, workers: int = 1,
                tables=None):
    """(spec, cut) minimizing the score summed over the training images."""
    if tables is None:
        tables = score_tables(train_images, specs, grid, score_fn, cache_dir, workers)
    total = tables.sum(axis=0)
    i, j = argmin_table(total)
    return specs[i], grid.values[j]


def oracle(img: ImageCase, specs, grid: CutGrid, score_fn, cache_dir=None, table=None):
    """Per-image best (spec, cut, score)."""
    if table is None:
        table = score_table(img, specs, grid, score_fn, cache_dir)
    i, j = argmin_table(table)
    return specs[i], grid.values[j], float(table[i, j])


@dataclass
class ImageResult:
    image_id: str
    model_score: float
    oracle_spec: HierarchySpec
    oracle_cut: object
    oracle_score: float

    @property
    def error(self) -> float:
        return self.model_score - self.oracle_score


@dataclass
class ModelResult:
    spec: HierarchySpec
    cut: object
    train_score: float
    grid: CutGrid
    images: list[ImageResult] = field(default_factory=list)

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.error for r in self.images])

    @property
    def mean_error(self) -> float:
        return float(np.mean(self.errors))

    @property
    def std_error(self) -> float:
        # population standard deviation
        return float(np.std(self.errors))

    @property
    def mean_model(self) -> float:
        return float(np.mean([r.model_score for r in self.images]))

    @property
    def mean_oracle(self) -> float:
        return float(np.mean([r.oracle_score for r in self.images]))

    def table_row(self, name: str = "") -> str:
        return (f"{name:<12} mu(oracle)={self.mean_oracle:.3f}  mu(model)={self.mean_model:.3f}  "
                f"mu(error)={self.mean_error:.3f}  sigma(error)={self.std_error:.3f}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        cut = self.grid.label(self.cut)
        for r in self.images:
            w.writerow([r.image_id, self.spec.canonical, cut, _num(r.model_score),
                        r.oracle_spec.canonical, self.grid.label(r.oracle_cut),
                        _num(r.oracle_score), _num(r.error), ""])
        w.writerow(["summary", self.spec.canonical, cut, _num(self.mean_model), "", "",
                    _num(self.mean_oracle), _num(self.mean_error), _num(self.std_error)])
        return buf.getvalue()


CSV_COLUMNS = ["image_id", "model_spec", "model_cut", "model_score", "oracle_spec", "oracle_cut",
               "oracle_score", "error", "error_std"]


def _num(x: float) -> str:
    return repr(float(x))


def evaluate(test_images, model, specs, grid: CutGrid, score_fn, cache_dir=None, workers: int = 1,
             train_score: float = float("nan"), tables=None) -> ModelResult:
    """Model vs oracle on every test image.

    ``model`` is the ``(spec, cut)`` pair from :func:`train_model`; it must be
    part of the search space so that every error is >= 0.
    """
    spec, cut = model
    try:
        si = [s.canonical for s in specs].index(spec.canonical)
        ci = grid.values.index(cut)
    except ValueError as exc:
        raise ConfigError("model (spec, cut) is not in the search space") from exc
    if tables is None:
        tables = score_tables(test_images, specs, grid, score_fn, cache_dir, workers)
    result = ModelResult(spec, cut, train_score, grid)
    for case, table in zip(test_images, tables):
        i, j = argmin_table(table)
        result.images.append(ImageResult(case.id, float(table[si, ci]), specs[i], grid.values[j],
                                         float(table[i, j])))
    return result


def run_split(train, test, specs, grid, score_fn, cache_dir=None, workers: int = 1) -> ModelResult:
    """Train on ``train``, evaluate on ``test``."""
    train_tables = score_tables(train, specs, grid, score_fn, cache_dir, workers)
    spec, cut = train_model(train, specs, grid, score_fn, tables=train_tables)
    j = grid.values.index(cut)
    i = [s.canonical for s in specs].index(spec.canonical)
    return evaluate(test, (spec, cut), specs, grid, score_fn, cache_dir, workers,
                    train_score=float(train_tables.sum(axis=0)[i, j]))
