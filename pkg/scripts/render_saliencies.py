"""Render saliency maps of one image under several hierarchies, e.g. to
compare the gradient hierarchy with its surface and volume re-weightings.

    python scripts/render_saliencies.py image.png --out runs/sal
"""
import argparse
from pathlib import Path

from swshier.chain import HierarchyBuilder, base_hierarchy, parse_spec
from swshier.pixel import read_image
from swshier.saliency import render_saliency, write_saliency_png

DEFAULT_SPECS = ["grad", "ssurf|grad", "svol|grad", "ssurf(erode=disk:4)|grad",
                 "svol(erode=vseg:15)|grad", "svol|ssurf|grad"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("image")
    ap.add_argument("--spec", action="append", help="repeatable; default: a small panel")
    ap.add_argument("--out", default="runs/saliency")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    builder = HierarchyBuilder(base_hierarchy(read_image(args.image)))
    for text in args.spec or DEFAULT_SPECS:
        spec = parse_spec(text)
        h = builder.get(spec)
        name = "".join(c if c.isalnum() else "_" for c in spec.canonical)
        path = out / f"{Path(args.image).stem}__{name}.png"
        write_saliency_png(path, render_saliency(h, h.labels))
        print(f"{spec.display:<40} -> {path}")


if __name__ == "__main__":
    main()
