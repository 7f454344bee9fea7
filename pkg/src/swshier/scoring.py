"""Segmentation scores: Mumford-Shah energy and weighted human disagreement
rate (WHDR) against pairwise darker/equal judgments.

Each score has a pixel-level form taking a label map and a region-level
form taking a leaf labelling of a fine partition (what model selection
evaluates thousands of times).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionError
from .pixel import channels, luminance

DEFAULT_SCALE = 1.168
DEFAULT_DELTA = 0.10
_DARKER = {"1": 1, "2": 2, "E": 0, "e": 0, 1: 1, 2: 2, 0: 0}


@dataclass(frozen=True)
class MsConfig:
    s: float = DEFAULT_SCALE

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("Mumford-Shah scale must be > 0")


def _check_pair(img, seg):
    chans = channels(img)
    seg = np.asarray(seg)
    if seg.shape != chans.shape[:2]:
        raise DimensionError(f"segmentation {seg.shape} does not match image {chans.shape[:2]}")
    return chans, seg


def contour_length(seg) -> int:
    """Number of 4-adjacent pixel pairs carrying different labels."""
    seg = np.asarray(seg)
    return int(np.count_nonzero(seg[:, 1:] != seg[:, :-1]) + np.count_nonzero(seg[1:] != seg[:-1]))


def mumford_shah_terms(img, seg) -> tuple[float, int]:
    """(total within-region variance summed over channels, contour length)."""
    chans, seg = _check_pair(img, seg)
    _, first, lab = np.unique(seg.ravel(), return_index=True, return_inverse=True)
    lab = lab.ravel()
    c = chans.reshape(-1, chans.shape[2])
    area = np.bincount(lab)
    var = 0.0
    for i in range(c.shape[1]):
        # shifting by a pixel of the region keeps constant regions exactly at 0
        d = c[:, i] - c[first, i][lab]
        s1 = np.bincount(lab, weights=d)
        s2 = np.bincount(lab, weights=d * d)
        var += float(np.sum(np.maximum(s2 - s1 * s1 / area, 0.0)))
    return var, contour_length(seg)


def mumford_shah(img, seg, cfg: MsConfig = MsConfig()) -> float:
    var, length = mumford_shah_terms(img, seg)
    return var + cfg.s * length


# -- judgments --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class JudgmentSet:
    """Pairwise judgments in pixel coordinates.

    ``points1``/``points2`` are (k, 2) arrays of (row, col); ``darker`` is 1
    or 2 for the darker point, 0 for "about equal".
    """

    points1: np.ndarray
    points2: np.ndarray
    darker: np.ndarray
    weights: np.ndarray
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise DataError("judgment weights must be > 0")
        if self.delta < 0:
            raise DataError("equality tolerance must be >= 0")

    def __len__(self):
        return len(self.darker)

    def check_inside(self, shape):
        for pts in (self.points1, self.points2):
            if len(pts) and (pts.min() < 0 or np.any(pts.max(axis=0) >= np.asarray(shape[:2]))):
                raise DataError("judgment point outside the image")


def _to_pixel(x_rel, y_rel, shape):
    rows, cols = shape[:2]
    r = min(int(y_rel * rows), rows - 1)
    c = min(int(x_rel * cols), cols - 1)
    return r, c


def judgments_from_dict(data: dict, shape, delta: float = DEFAULT_DELTA) -> JudgmentSet:
    """Build judgments from the JSON layout

    ``{points: [{id, x_rel, y_rel}], comparisons: [{p1, p2, darker, weight}]}``

    IIW-style exports (``intrinsic_points``/``intrinsic_comparisons`` with
    ``x``, ``y``, ``point1``, ``point2``, ``darker_score``, ``opaque``) are
    accepted too; non-opaque points and unusable comparisons are skipped.
    """
    iiw = "intrinsic_points" in data
    points = data["intrinsic_points"] if iiw else data.get("points")
    comps = data["intrinsic_comparisons"] if iiw else data.get("comparisons")
    if points is None or comps is None:
        raise DataError("judgment file needs 'points' and 'comparisons'")
    pos = {}
    for p in points:
        if iiw and not p.get("opaque", True):
            continue
        x = p["x"] if iiw else p["x_rel"]
        y = p["y"] if iiw else p["y_rel"]
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
            raise DataError(f"point {p['id']} has relative coordinates outside [0, 1]")
        pos[p["id"]] = _to_pixel(x, y, shape)
    p1, p2, darker, weight = [], [], [], []
    for c in comps:
        a = c["point1"] if iiw else c["p1"]
        b = c["point2"] if iiw else c["p2"]
        d = c.get("darker")
        w = c.get("darker_score") if iiw else c.get("weight", 1.0)
        if a not in pos or b not in pos:
            if iiw:
                continue
            raise DataError(f"comparison refers to unknown point {a if a not in pos else b}")
        if d not in _DARKER:
            if iiw:
                continue
            raise DataError(f"bad 'darker' value {d!r}")
        if w is None or w <= 0:
            if iiw:
                continue
            raise DataError(f"comparison weight must be > 0, got {w!r}")
        p1.append(pos[a])
        p2.append(pos[b])
        darker.append(_DARKER[d])
        weight.append(float(w))
    return JudgmentSet(np.asarray(p1, dtype=np.int64).reshape(-1, 2),
                       np.asarray(p2, dtype=np.int64).reshape(-1, 2),
                       np.asarray(darker, dtype=np.int64), np.asarray(weight, dtype=float), delta)


def load_judgments(path, shape, delta: float = DEFAULT_DELTA) -> JudgmentSet:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read judgments {path}: {exc}") from exc
    return judgments_from_dict(data, shape, delta)


def judgments_to_dict(j: JudgmentSet, shape) -> dict:
    """Inverse of :func:`judgments_from_dict` (pixel centres as relative coords)."""
    rows, cols = shape[:2]
    points, index = [], {}
    comps = []
    for a, b, d, w in zip(j.points1, j.points2, j.darker, j.weights):
        ids = []
        for r, c in (a, b):
            key = (int(r), int(c))
            if key not in index:
                index[key] = len(points)
                points.append({"id": len(points), "x_rel": (c + 0.5) / cols, "y_rel": (r + 0.5) / rows})
            ids.append(index[key])
        comps.append({"p1": ids[0], "p2": ids[1], "darker": {1: "1", 2: "2", 0: "E"}[int(d)],
                      "weight": float(w)})
    return {"points": points, "comparisons": comps}


def _answers(r1, r2, delta):
    """Algorithm answer per pair: 1/2 for the darker point, 0 for equal.
    A zero mean is darker than any positive one; two zeros are equal."""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        two_darker = np.where(r2 > 0, r1 / r2 > 1.0 + delta, r1 > 0)
        one_darker = np.where(r1 > 0, r2 / r1 > 1.0 + delta, r2 > 0)
    return np.where(two_darker, 2, np.where(one_darker, 1, 0))


def _whdr_from_answers(answers, j: JudgmentSet) -> float:
    total = float(j.weights.sum())
    if len(j) == 0:
        raise DataError("judgment set is empty")
    if not total > 0:
        raise DataError("judgment weights sum to zero")
    return float(j.weights[answers != j.darker].sum()) / total


def whdr(img, seg, j: JudgmentSet) -> float:
    """WHDR of the flat image holding each region's mean luminance."""
    lum = luminance(img)
    _, seg = _check_pair(img, seg)
    j.check_inside(seg.shape)
    _, lab = np.unique(seg, return_inverse=True)
    lab = lab.reshape(seg.shape)
    means = np.bincount(lab.ravel(), weights=lum.ravel()) / np.bincount(lab.ravel())
    r1 = means[lab[j.points1[:, 0], j.points1[:, 1]]]
    r2 = means[lab[j.points2[:, 0], j.points2[:, 1]]]
    return _whdr_from_answers(_answers(r1, r2, j.delta), j)


# -- region-level forms -----------------------------------------------------

class MumfordShahScore:
    """Mumford-Shah energy from leaf statistics of a RAG."""

    name = "ms"

    def __init__(self, s: float = DEFAULT_SCALE):
        self.cfg = MsConfig(s)

    def terms(self, case, leaf_labels) -> tuple[float, float]:
        rag = case.rag
        k = int(leaf_labels.max()) + 1
        area = np.bincount(leaf_labels, weights=rag.area, minlength=k)
        var = 0.0
        for i in range(rag.sums.shape[1]):
            s1 = np.bincount(leaf_labels, weights=rag.sums[:, i], minlength=k)
            s2 = np.bincount(leaf_labels, weights=rag.sumsq[:, i], minlength=k)
            var += float(np.sum(np.maximum(s2 - s1 * s1 / area, 0.0)))
        cross = leaf_labels[rag.edges[:, 0]] != leaf_labels[rag.edges[:, 1]]
        return var, float(rag.boundary[cross].sum())

    def __call__(self, case, leaf_labels) -> float:
        var, length = self.terms(case, leaf_labels)
        return var + self.cfg.s * length


class WhdrScore:
    """WHDR from leaf luminance sums; needs ``case.judgments``."""

    name = "whdr"

    def __call__(self, case, leaf_labels) -> float:
        j = case.judgments
        if j is None:
            raise DataError(f"image {case.id} has no judgments")
        rag = case.rag
        k = int(leaf_labels.max()) + 1
        lum_sum = rag.sums.mean(axis=1)
        means = (np.bincount(leaf_labels, weights=lum_sum, minlength=k)
                 / np.bincount(leaf_labels, weights=rag.area, minlength=k))
        lab = case.labels
        r1 = means[leaf_labels[lab[j.points1[:, 0], j.points1[:, 1]]]]
        r2 = means[leaf_labels[lab[j.points2[:, 0], j.points2[:, 1]]]]
        return _whdr_from_answers(_answers(r1, r2, j.delta), j)
