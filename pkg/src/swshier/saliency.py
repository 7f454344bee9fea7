"""Saliency maps on the doubled inter-pixel grid.

Pixel (y, x) sits at (2y+1, 2x+1) and is always 0. The element between two
horizontally (vertically) adjacent pixels sits between their cells and holds
the altitude at which their fine regions merge, or 0 inside a region.
Points at even/even positions take the max of their incident elements.
Thresholding the map strictly above a level draws the contours of the cut
at that level.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import DimensionError
from .graph import IndexedHierarchy


def render_saliency(h: IndexedHierarchy, fine) -> np.ndarray:
    fine = np.asarray(fine, dtype=np.int64)
    if int(fine.max()) + 1 != h.n_leaves:
        raise DimensionError(f"hierarchy has {h.n_leaves} leaves, label map {int(fine.max()) + 1}")
    hh, ww = fine.shape
    alt = h.node_altitude
    lca = h.lca()
    out = np.zeros((2 * hh + 1, 2 * ww + 1))

    a, b = fine[:, :-1], fine[:, 1:]
    val = np.where(a != b, alt[lca(a.ravel(), b.ravel())].reshape(a.shape), 0.0)
    out[1:-1:2, 2:-1:2] = val
    a, b = fine[:-1, :], fine[1:, :]
    val = np.where(a != b, alt[lca(a.ravel(), b.ravel())].reshape(a.shape), 0.0)
    out[2:-1:2, 1:-1:2] = val

    pad = np.pad(out, 1)
    pts = np.maximum.reduce([pad[1:-1, :-2], pad[1:-1, 2:], pad[:-2, 1:-1], pad[2:, 1:-1]])
    out[0::2, 0::2] = pts[0::2, 0::2]
    return out


def contour_elements(fine, leaf_labels) -> np.ndarray:
    """Doubled-grid mask of the boundary elements separating regions of a
    leaf labelling, with points lit when any incident element is."""
    seg = np.asarray(leaf_labels)[np.asarray(fine)]
    hh, ww = seg.shape
    out = np.zeros((2 * hh + 1, 2 * ww + 1), dtype=bool)
    out[1:-1:2, 2:-1:2] = seg[:, :-1] != seg[:, 1:]
    out[2:-1:2, 1:-1:2] = seg[:-1, :] != seg[1:, :]
    pad = np.pad(out, 1)
    pts = pad[1:-1, :-2] | pad[1:-1, 2:] | pad[:-2, 1:-1] | pad[2:, 1:-1]
    out[0::2, 0::2] = pts[0::2, 0::2]
    return out


def write_saliency_png(path, saliency: np.ndarray) -> float:
    """16-bit PNG after affine scaling; the scale goes to ``<path>.scale.txt``.

    Returns the scale (altitude per grey level)."""
    top = float(saliency.max())
    scale = top / 65535.0 if top > 0 else 1.0
    PILImage.fromarray(np.round(saliency / scale).astype(np.uint16)).save(path)
    Path(str(path) + ".scale.txt").write_text(f"offset 0\nscale {scale!r}\n")
    return scale
