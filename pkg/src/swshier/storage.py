"""Hierarchy persistence: a versioned little-endian binary container and a
text dump for debugging.

Layout (version 1)::

    b"SWSH" | u16 version | u16 reserved
    u32 n_leaves | u32 n_edges
    n_edges x (u32 p, u32 q, f64 weight, u32 mst_index)   # merge order
    n_edges x f64 altitude                                # merge order
    u32 len | provenance (utf-8)

``mst_index`` is the edge's position in the MST edge list; it is kept so a
reloaded tree breaks ties exactly as the original did.
"""
from __future__ import annotations

import io
import struct

import numpy as np

from .errors import DataError
from .graph import IndexedHierarchy, Mst, build_dendrogram

MAGIC = b"SWSH"
VERSION = 1
_EDGE = np.dtype([("p", "<u4"), ("q", "<u4"), ("w", "<f8"), ("idx", "<u4")])


def hierarchy_bytes(h: IndexedHierarchy) -> bytes:
    order = h.merge_edge
    rec = np.zeros(len(order), dtype=_EDGE)
    rec["p"] = h.mst.edges[order, 0]
    rec["q"] = h.mst.edges[order, 1]
    rec["w"] = h.mst.weights[order]
    rec["idx"] = order
    prov = h.provenance.encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<HHII", VERSION, 0, h.n_leaves, len(order)))
    buf.write(rec.tobytes())
    buf.write(np.asarray(h.altitude, dtype="<f8").tobytes())
    buf.write(struct.pack("<I", len(prov)))
    buf.write(prov)
    return buf.getvalue()


def hierarchy_from_bytes(data: bytes, leaf_area=None, labels=None) -> IndexedHierarchy:
    if data[:4] != MAGIC:
        raise DataError("not a hierarchy container (bad magic)")
    try:
        version, _, n, m = struct.unpack_from("<HHII", data, 4)
        if version != VERSION:
            raise DataError(f"unsupported hierarchy container version {version}")
        off = 16
        rec = np.frombuffer(data, dtype=_EDGE, count=m, offset=off)
        off += m * _EDGE.itemsize
        alt = np.frombuffer(data, dtype="<f8", count=m, offset=off)
        off += 8 * m
        (plen,) = struct.unpack_from("<I", data, off)
        off += 4
        prov = data[off:off + plen].decode("utf-8")
        if off + plen != len(data):
            raise DataError("trailing bytes in hierarchy container")
    except (struct.error, ValueError) as exc:
        raise DataError(f"truncated hierarchy container: {exc}") from exc
    if m != max(n - 1, 0):
        raise DataError(f"{n} leaves need {n - 1} edges, container has {m}")
    mst_edges = np.empty((m, 2), dtype=np.int64)
    weights = np.empty(m)
    idx = rec["idx"].astype(np.int64)
    mst_edges[idx, 0] = rec["p"]
    mst_edges[idx, 1] = rec["q"]
    weights[idx] = rec["w"]
    mst = Mst(n, mst_edges, weights, np.arange(m))
    h = build_dendrogram(mst, leaf_area, labels, prov)
    if not np.array_equal(h.merge_edge, idx) or h.altitude.tobytes() != alt.astype(float).tobytes():
        raise DataError("hierarchy container is inconsistent with its merge order")
    return h


def save_hierarchy(path, h: IndexedHierarchy) -> None:
    with open(path, "wb") as fh:
        fh.write(hierarchy_bytes(h))


def load_hierarchy(path, leaf_area=None, labels=None) -> IndexedHierarchy:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read hierarchy {path}: {exc}") from exc
    return hierarchy_from_bytes(data, leaf_area, labels)


def dump_text(h: IndexedHierarchy) -> str:
    """One line per merge: node id, children, MST edge and altitude."""
    n = h.n_leaves
    lines = [f"# hierarchy {h.provenance or '-'}", f"leaves {n}"]
    for k in range(n - 1):
        e = h.merge_edge[k]
        p, q = h.mst.edges[e]
        a, b = h.children[k]
        lines.append(f"node {n + k} = {a} + {b}  edge {e} ({p},{q})  altitude {h.altitude[k]!r}")
    return "\n".join(lines) + "\n"
