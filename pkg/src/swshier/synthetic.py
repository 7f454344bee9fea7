"""Synthetic inputs: noisy-disk images, random graphs and hierarchies, the
small two-cluster graph used for the threshold-cut example, and an
IIW-style image set with pairwise judgments."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .graph import Mst, Rag, build_dendrogram
from .pixel import write_image
from .scoring import JudgmentSet, judgments_to_dict


def noisy_disks(rng: np.random.Generator, size: int = 64, n_disks: int = 3,
                radius=(10, 13), fg=(0.75, 0.9), bg: float = 0.15, noise: float = 0.04,
                margin: int = 2):
    """Non-overlapping bright disks on a dark background plus Gaussian noise.

    Returns ``(image, truth)`` where ``truth`` labels the background 0 and
    disk i as i + 1.
    """
    yy, xx = np.mgrid[:size, :size]
    truth = np.zeros((size, size), dtype=np.int64)
    clean = np.full((size, size), bg)
    placed = []
    attempts = 0
    while len(placed) < n_disks:
        attempts += 1
        if attempts > 10_000:
            raise RuntimeError("cannot place the requested disks")
        r = int(rng.integers(radius[0], radius[1] + 1))
        cy, cx = rng.integers(r + margin, size - r - margin, size=2)
        if any((cy - py) ** 2 + (cx - px) ** 2 < (r + pr + 2 * margin) ** 2 for py, px, pr in placed):
            continue
        placed.append((cy, cx, r))
        inside = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
        truth[inside] = len(placed)
        clean[inside] = rng.uniform(*fg)
    img = np.clip(clean + rng.normal(0.0, noise, clean.shape), 0.0, 1.0)
    # quantize like an 8-bit acquisition so files round-trip exactly
    return np.round(img * 255) / 255, truth


def disk_dataset(n: int, seed: int = 0, **kw):
    rng = np.random.default_rng(seed)
    return [noisy_disks(rng, **kw) for _ in range(n)]


def random_tree_edges(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform random attachment tree on ``n`` nodes."""
    perm = rng.permutation(n)
    edges = [(perm[i], perm[rng.integers(0, i)]) for i in range(1, n)]
    return np.sort(np.asarray(edges, dtype=np.int64).reshape(-1, 2), axis=1)


def random_connected_graph(rng: np.random.Generator, n: int, extra: float = 0.5,
                           distinct: bool = False) -> Rag:
    """Random spanning tree plus each remaining pair with probability ``extra``."""
    tree = {tuple(e) for e in random_tree_edges(rng, n)}
    pairs = sorted(tree | {(i, j) for i in range(n) for j in range(i + 1, n)
                           if (i, j) not in tree and rng.random() < extra})
    if distinct:
        weights = rng.permutation(len(pairs)).astype(float) + 1.0
    else:
        weights = rng.integers(0, 6, size=len(pairs)).astype(float)
    return Rag.from_edges(n, pairs, weights)


def random_hierarchy(rng: np.random.Generator, n: int, max_area: int = 50, distinct: bool = True):
    """Hierarchy on a random tree with random weights and integer leaf areas."""
    edges = random_tree_edges(rng, n)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    edges = edges[order]
    if distinct:
        weights = rng.permutation(n - 1) + rng.random(n - 1)
    else:
        weights = rng.integers(0, 4, size=n - 1).astype(float)
    area = rng.integers(1, max_area + 1, size=n).astype(float)
    mst = Mst(n, edges, weights.astype(float), np.arange(n - 1))
    return build_dendrogram(mst, area, None, "grad")


def threshold_example_graph() -> Rag:
    """Two clusters joined by edges heavier than 6; one kept MST edge weighs
    exactly 6 to exercise the strict inequality."""
    edges = [(0, 1), (1, 2), (0, 2), (2, 3), (1, 3),
             (4, 5), (5, 6), (4, 6), (6, 7), (5, 7),
             (2, 4), (3, 5), (3, 6)]
    weights = [2, 6, 8, 3, 7,
               1, 3, 5, 2, 4,
               7, 9, 8]
    return Rag.from_edges(8, edges, weights)


def striped_grid_hierarchy(rng: np.random.Generator, size: int = 12, block: int = 3):
    """Fine partition of square blocks with random RAG weights; used where a
    hierarchy needs a real label map (erosion measures)."""
    from .graph import hierarchy_from_rag

    nb = size // block
    labels = (np.arange(size)[:, None] // block) * nb + np.arange(size)[None, :] // block
    n = nb * nb
    pairs = sorted({(int(a), int(b)) for a, b in zip(labels[:, :-1].ravel(), labels[:, 1:].ravel()) if a != b}
                   | {(int(a), int(b)) for a, b in zip(labels[:-1].ravel(), labels[1:].ravel()) if a != b})
    rag = Rag.from_edges(n, pairs, rng.random(len(pairs)), area=np.bincount(labels.ravel()))
    return hierarchy_from_rag(rag, labels, "grad")


# -- IIW-style set ----------------------------------------------------------

def iiw_like_image(rng: np.random.Generator, size: int = 48, n_patches: int = 5):
    """Piecewise-constant reflectance times a smooth shading ramp, with
    judgments derived from the true reflectance."""
    yy, xx = np.mgrid[:size, :size]
    refl = np.full((size, size), rng.uniform(0.3, 0.5))
    for _ in range(n_patches):
        y0, x0 = rng.integers(0, size - 12, size=2)
        h, w = rng.integers(8, 20, size=2)
        refl[y0:y0 + h, x0:x0 + w] = rng.uniform(0.1, 0.9)
    shading = 0.7 + 0.3 * (xx / (size - 1))
    img = np.clip(refl * shading + rng.normal(0, 0.01, refl.shape), 0, 1)
    img = np.round(img * 255) / 255
    k = 40
    pts = rng.integers(0, size, size=(2 * k, 2))
    p1, p2 = pts[:k], pts[k:]
    r1 = refl[p1[:, 0], p1[:, 1]]
    r2 = refl[p2[:, 0], p2[:, 1]]
    darker = np.where(r1 / r2 > 1.1, 2, np.where(r2 / r1 > 1.1, 1, 0))
    weights = rng.uniform(0.5, 1.0, size=k)
    return img, JudgmentSet(p1, p2, darker, weights)


def write_dataset(out_dir, kind: str = "disks", n: int = 12, seed: int = 0) -> Path:
    """Write images (and judgments for ``iiw``) plus ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    for i in range(n):
        name = f"img{i:02d}"
        if kind == "disks":
            img, truth = noisy_disks(rng)
            write_image(out / f"{name}.png", img)
            np.save(out / f"{name}_truth.npy", truth)
            entries.append({"id": name, "image": f"{name}.png"})
        elif kind == "iiw":
            img, j = iiw_like_image(rng)
            write_image(out / f"{name}.png", img)
            (out / f"{name}.json").write_text(json.dumps(judgments_to_dict(j, img.shape), indent=1))
            entries.append({"id": name, "image": f"{name}.png", "judgments": f"{name}.json"})
        else:
            raise ValueError(f"unknown dataset kind {kind!r}")
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps(entries, indent=1) + "\n")
    return manifest
