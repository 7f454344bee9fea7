"""Pixel-level primitives: image I/O, gradient, watershed basins, erosion areas.

Images are float arrays in [0, 1] of shape (H, W) or (H, W, 3). Label maps are
int64 arrays of shape (H, W) with contiguous ids starting at 0.
"""
from __future__ import annotations

import heapq
import re
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DataError, DimensionError

# 4-connectivity, (dy, dx)
NEIGHBORS4 = ((-1, 0), (0, -1), (0, 1), (1, 0))


@dataclass(frozen=True)
class StructuringElement:
    """Flat structuring element centred on its origin.

    ``disk`` uses ``size`` as the Euclidean radius; ``hseg``/``vseg`` use it
    as the segment length, with the origin ``size // 2`` pixels from the
    left/top end.
    """

    shape: str
    size: int

    def __post_init__(self):
        if self.shape not in ("disk", "hseg", "vseg"):
            raise ValueError(f"unknown structuring element shape {self.shape!r}")
        if self.shape == "disk" and self.size < 0:
            raise ValueError("disk radius must be >= 0")
        if self.shape != "disk" and self.size < 1:
            raise ValueError("segment length must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "StructuringElement":
        m = re.fullmatch(r"\s*(disk|hseg|vseg)\s*:\s*(\d+)\s*", text)
        if not m:
            raise ValueError(f"cannot parse structuring element {text!r}")
        return cls(m.group(1), int(m.group(2)))

    def __str__(self):
        return f"{self.shape}:{self.size}"

    def offsets(self) -> np.ndarray:
        """(k, 2) array of (dy, dx) offsets relative to the origin."""
        if self.shape == "disk":
            r = self.size
            dy, dx = np.mgrid[-r:r + 1, -r:r + 1]
            keep = dy * dy + dx * dx <= r * r
            return np.stack([dy[keep], dx[keep]], axis=1)
        start = -(self.size // 2)
        line = np.arange(start, start + self.size)
        zeros = np.zeros_like(line)
        if self.shape == "hseg":
            return np.stack([zeros, line], axis=1)
        return np.stack([line, zeros], axis=1)

    def footprint(self) -> np.ndarray:
        off = self.offsets()
        ry, rx = np.abs(off).max(axis=0)
        fp = np.zeros((2 * ry + 1, 2 * rx + 1), dtype=bool)
        fp[off[:, 0] + ry, off[:, 1] + rx] = True
        return fp

    @property
    def is_point(self) -> bool:
        return len(self.offsets()) == 1


def disk(radius: int) -> StructuringElement:
    return StructuringElement("disk", radius)


def hseg(length: int) -> StructuringElement:
    return StructuringElement("hseg", length)


def vseg(length: int) -> StructuringElement:
    return StructuringElement("vseg", length)


# -- image access -----------------------------------------------------------

def _check_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    if img.ndim not in (2, 3) or img.shape[0] < 1 or img.shape[1] < 1:
        raise DimensionError(f"image must be non-empty (H, W[, C]); got shape {img.shape}")
    if img.ndim == 3 and img.shape[2] not in (1, 3):
        raise DimensionError(f"image must have 1 or 3 channels; got {img.shape[2]}")
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[..., 0]
    return img


def luminance(img: np.ndarray) -> np.ndarray:
    """Unweighted channel mean."""
    img = _check_image(img)
    return img if img.ndim == 2 else img.mean(axis=2)


def channels(img: np.ndarray) -> np.ndarray:
    """View of the image as (H, W, C)."""
    img = _check_image(img)
    return img[..., None] if img.ndim == 2 else img


def read_image(path) -> np.ndarray:
    """Read an 8/16-bit PNG, PGM or PPM into floats in [0, 1]."""
    try:
        with PILImage.open(path) as im:
            im.load()
            if im.mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im, dtype=np.float64) / 65535.0
            elif im.mode in ("L", "RGB"):
                arr = np.asarray(im, dtype=np.float64) / 255.0
            elif im.mode in ("LA",):
                arr = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
            else:
                arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    return _check_image(np.clip(arr, 0.0, 1.0))


def write_image(path, img: np.ndarray, bits: int = 8) -> None:
    img = np.clip(_check_image(img), 0.0, 1.0)
    if bits == 16:
        if img.ndim != 2:
            raise ValueError("16-bit output supports single-channel images only")
        PILImage.fromarray(np.round(img * 65535).astype(np.uint16)).save(path)
    else:
        PILImage.fromarray(np.round(img * 255).astype(np.uint8)).save(path)


# -- gradient ---------------------------------------------------------------

def morphological_gradient(img: np.ndarray, radius: int = 1) -> np.ndarray:
    """Dilation minus erosion of the luminance by a Euclidean disk.

    Pixels outside the image are ignored (``nearest`` padding never adds a
    value that the in-image footprint does not already contain).
    """
    if radius < 1:
        raise ValueError("gradient radius must be >= 1")
    lum = luminance(img)
    fp = disk(radius).footprint()
    dil = ndimage.grey_dilation(lum, footprint=fp, mode="nearest")
    ero = ndimage.grey_erosion(lum, footprint=fp, mode="nearest")
    return dil - ero


# -- label maps -------------------------------------------------------------

def _equal_neighbor_components(values: np.ndarray) -> np.ndarray:
    """4-connected components of pixels sharing equal values, labelled in
    raster order of their first pixel."""
    h, w = values.shape
    idx = np.arange(h * w).reshape(h, w)
    rows, cols = [], []
    same = values[:, 1:] == values[:, :-1]
    rows.append(idx[:, :-1][same])
    cols.append(idx[:, 1:][same])
    same = values[1:, :] == values[:-1, :]
    rows.append(idx[:-1, :][same])
    cols.append(idx[1:, :][same])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    g = coo_matrix((np.ones(len(r), dtype=np.int8), (r, c)), shape=(h * w, h * w))
    _, comp = connected_components(g, directed=False)
    return relabel_first_occurrence(comp).reshape(h, w)


def relabel_first_occurrence(ids: np.ndarray) -> np.ndarray:
    """Map arbitrary ids to 0..k-1, numbered by first occurrence."""
    flat = np.asarray(ids).ravel()
    _, first, inv = np.unique(flat, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inv].reshape(np.shape(ids))


def normalize_labels(labels: np.ndarray) -> np.ndarray:
    """Split non-4-connected labels and renumber contiguously from 0."""
    labels = np.asarray(labels)
    if labels.ndim != 2 or labels.size == 0:
        raise DimensionError(f"label map must be a non-empty 2-D array; got {labels.shape}")
    return _equal_neighbor_components(labels)


def import_labels(path, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Load an external label image (e.g. superpixels) as a LabelMap.

    ``shape`` is the companion image's (H, W); a mismatch raises.
    """
    try:
        with PILImage.open(path) as im:
            im.load()
            if im.mode in ("RGB", "RGBA", "P"):
                rgb = np.asarray(im.convert("RGB"), dtype=np.int64)
                arr = (rgb[..., 0] << 16) | (rgb[..., 1] << 8) | rgb[..., 2]
            else:
                arr = np.asarray(im, dtype=np.int64)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read label map {path}: {exc}") from exc
    if arr.ndim != 2:
        raise DataError(f"label map {path} must be single-channel")
    if shape is not None and tuple(arr.shape) != tuple(shape[:2]):
        raise DimensionError(f"label map {path} has shape {arr.shape}, image has {tuple(shape[:2])}")
    return normalize_labels(arr)


def write_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    if labels.max(initial=0) > 65535:
        raise DataError("more than 65536 regions cannot be stored in a 16-bit PNG")
    PILImage.fromarray(labels.astype(np.uint16)).save(path)


# -- watershed --------------------------------------------------------------

def regional_minima(relief: np.ndarray) -> np.ndarray:
    """Label map of regional minima (plateaus with no strictly lower
    neighbour), numbered 1.. in raster order; 0 elsewhere."""
    f = np.asarray(relief, dtype=float)
    h, w = f.shape
    has_lower = np.zeros((h, w), dtype=bool)
    has_lower[:, 1:] |= f[:, :-1] < f[:, 1:]
    has_lower[:, :-1] |= f[:, 1:] < f[:, :-1]
    has_lower[1:, :] |= f[:-1, :] < f[1:, :]
    has_lower[:-1, :] |= f[1:, :] < f[:-1, :]
    plateaus = _equal_neighbor_components(f)
    n_plateaus = plateaus.max() + 1
    not_minimal = np.zeros(n_plateaus, dtype=bool)
    np.logical_or.at(not_minimal, plateaus[has_lower], True)
    minimal = ~not_minimal[plateaus]
    out = np.zeros((h, w), dtype=np.int64)
    out[minimal] = relabel_first_occurrence(plateaus[minimal]) + 1
    return out


def watershed_fine_partition(relief: np.ndarray) -> np.ndarray:
    """Flooding watershed without watershed-line pixels.

    Every regional minimum seeds one basin. Pixels are flooded from a
    priority queue keyed by (relief value, arrival order); a pixel reached by
    several fronts joins the first one popped. Seeds are queued in basin-id
    order, so equal arrivals resolve towards the lowest basin id.
    """
    f = np.asarray(relief, dtype=float)
    if f.ndim != 2 or f.size == 0:
        raise DimensionError(f"relief must be a non-empty 2-D array; got {f.shape}")
    h, w = f.shape
    seeds = regional_minima(f)
    out = (seeds - 1).ravel()
    flat = f.ravel()
    heap = []
    age = 0
    order = np.lexsort((np.arange(h * w), out))
    for p in order[out[order] >= 0]:
        heapq.heappush(heap, (flat[p], age, int(p), int(out[p])))
        age += 1
    while heap:
        _, _, p, lab = heapq.heappop(heap)
        out[p] = lab
        y, x = divmod(p, w)
        for dy, dx in NEIGHBORS4:
            yy, xx = y + dy, x + dx
            if 0 <= yy < h and 0 <= xx < w:
                q = yy * w + xx
                if out[q] == -1:
                    out[q] = -2  # queued; the first front to queue it wins
                    heapq.heappush(heap, (flat[q], age, q, lab))
                    age += 1
    return out.reshape(h, w)


# -- erosion ----------------------------------------------------------------

def _run_lengths(mask: np.ndarray):
    """Per-pixel lengths of the run of True ending at / starting from each
    pixel along axis 1 (inclusive)."""
    w = mask.shape[1]
    idx = np.broadcast_to(np.arange(w), mask.shape)
    last_false = np.maximum.accumulate(np.where(mask, -1, idx), axis=1)
    before = np.where(mask, idx - last_false, 0)
    rev = mask[:, ::-1]
    last_false_r = np.maximum.accumulate(np.where(rev, -1, idx), axis=1)
    after = np.where(rev, idx - last_false_r, 0)[:, ::-1]
    return before, after


def erode(mask: np.ndarray, se: StructuringElement) -> np.ndarray:
    """Binary erosion with outside-the-image treated as background."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2 or mask.size == 0:
        raise DimensionError(f"mask must be a non-empty 2-D array; got {mask.shape}")
    if se.shape == "disk":
        padded = np.pad(mask, 1, constant_values=False)
        # squared distances between grid points are integers
        d2 = ndimage.distance_transform_edt(padded) ** 2
        return (np.rint(d2) > se.size * se.size)[1:-1, 1:-1]
    n = se.size
    back = n // 2
    fwd = n - back
    m = mask if se.shape == "hseg" else mask.T
    before, after = _run_lengths(m)
    out = (before >= back + 1) & (after >= fwd)
    return out if se.shape == "hseg" else out.T


def eroded_area(mask: np.ndarray, se: StructuringElement) -> int:
    """Number of pixels where ``se`` fits entirely inside ``mask``."""
    return int(erode(mask, se).sum())
