"""Command-line entry point.

Exit codes: 0 success, 1 bad config, 2 data error, 3 degenerate measure.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .chain import HierarchyBuilder, cut_normalized, parse_spec
from .config import RunConfig, load_config
from .errors import ConfigError, DataError, SwsError
from .graph import cut_to_k, partition_labelmap
from .pixel import import_labels, read_image, write_labels
from .saliency import render_saliency, write_saliency_png
from .select import CutGrid, ImageCase, evaluate, oracle, score_tables, train_model
from .sws import MarkerModel, edge_probabilities, monte_carlo_cut_frequency
from .synthetic import random_hierarchy, write_dataset


def _parse_cut(text: str):
    if text.startswith("k:"):
        try:
            k = int(text[2:])
        except ValueError:
            raise ConfigError(f"bad region count in --cut {text!r}") from None
        return CutGrid("count", counts=(k,)), k
    try:
        lam = float(text)
    except ValueError:
        raise ConfigError(f"--cut must be a threshold in [0, 1] or k:<count>, got {text!r}") from None
    if not 0.0 <= lam <= 1.0:
        raise ConfigError("threshold cuts are normalized to [0, 1]")
    return CutGrid("threshold", levels=2), lam


def _single_image(args):
    img = read_image(args.image)
    labels = import_labels(args.labels, img.shape) if args.labels else None
    case = ImageCase.prepare(Path(args.image).stem, img, labels, gradient_radius=args.radius)
    spec = parse_spec(args.spec)
    builder = HierarchyBuilder(case.base(), case.id, args.cache_dir)
    return case, builder.get(spec)


def cmd_segment(args):
    grid, value = _parse_cut(args.cut)
    case, h = _single_image(args)
    if grid.mode == "threshold":
        p = cut_normalized(h, value)
    else:
        if value < 1:
            raise ConfigError("region count must be >= 1")
        p = cut_to_k(h, min(value, h.n_leaves))
    seg = partition_labelmap(p, case.labels)
    out = Path(args.out or Path(args.image).with_suffix(".labels.png"))
    write_labels(out, seg)
    print(f"{h.provenance}: {p.n_regions} regions -> {out}")
    if args.saliency:
        write_saliency_png(args.saliency, render_saliency(h, case.labels))
        print(f"saliency -> {args.saliency}")


def cmd_saliency(args):
    case, h = _single_image(args)
    scale = write_saliency_png(args.out, render_saliency(h, case.labels))
    print(f"{h.provenance}: saliency -> {args.out} (scale {scale!r})")


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.cache_dir is not None:
        cfg.cache_dir = Path(args.cache_dir)
    return cfg


def _cases(cfg, entries):
    return [cfg.load_case(e) for e in entries]


def cmd_train(args):
    cfg = _config(args)
    train_entries, _ = cfg.split(cfg.entries())
    specs, grid, score = cfg.spec_list(), cfg.grid, cfg.score_fn()
    cases = _cases(cfg, train_entries)
    tables = score_tables(cases, specs, grid, score, cfg.cache_dir, cfg.workers)
    spec, cut = train_model(cases, specs, grid, score, tables=tables)
    i = [s.canonical for s in specs].index(spec.canonical)
    total = float(tables.sum(axis=0)[i, grid.values.index(cut)])
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    model = {"spec": spec.canonical, "cut": cut, "grid_mode": grid.mode, "train_score": total,
             "train_images": [c.id for c in cases]}
    path = cfg.output_dir / "model.json"
    path.write_text(json.dumps(model, indent=1) + "\n")
    print(f"model {spec.canonical} ({spec.display}) cut {grid.label(cut)} train score {total!r}")
    print(f"-> {path}")


def cmd_oracle(args):
    cfg = _config(args)
    entries = cfg.entries()
    if not args.all:
        entries = cfg.split(entries)[1]
    specs, grid, score = cfg.spec_list(), cfg.grid, cfg.score_fn()
    cases = _cases(cfg, entries)
    tables = score_tables(cases, specs, grid, score, cfg.cache_dir, cfg.workers)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    lines = ["image_id,oracle_spec,oracle_cut,oracle_score"]
    for case, table in zip(cases, tables):
        spec, cut, best = oracle(case, specs, grid, score, table=table)
        lines.append(f"{case.id},{spec.canonical},{grid.label(cut)},{best!r}")
        print(f"{case.id}: {spec.canonical} cut {grid.label(cut)} score {best:.6g}")
    (cfg.output_dir / "oracle.csv").write_text("\n".join(lines) + "\n")


def cmd_evaluate(args):
    cfg = _config(args)
    train_entries, test_entries = cfg.split(cfg.entries())
    specs, grid, score = cfg.spec_list(), cfg.grid, cfg.score_fn()
    t0 = time.perf_counter()
    if args.model:
        model = json.loads(Path(args.model).read_text())
        if model.get("grid_mode", grid.mode) != grid.mode:
            raise ConfigError("model was trained on a different cut grid")
        spec = parse_spec(model["spec"], cfg.marker_process, cfg.marker_count)
        cut, train_score = model["cut"], float(model.get("train_score", "nan"))
    else:
        train = _cases(cfg, train_entries)
        tables = score_tables(train, specs, grid, score, cfg.cache_dir, cfg.workers)
        spec, cut = train_model(train, specs, grid, score, tables=tables)
        i = [s.canonical for s in specs].index(spec.canonical)
        train_score = float(tables.sum(axis=0)[i, grid.values.index(cut)])
    test = _cases(cfg, test_entries)
    result = evaluate(test, (spec, cut), specs, grid, score, cfg.cache_dir, cfg.workers,
                      train_score=train_score)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.output_dir / "results.csv"
    path.write_text(result.to_csv())
    print(f"model {spec.canonical} cut {grid.label(cut)}")
    print(result.table_row(Path(cfg.manifest).parent.name))
    print(f"-> {path} ({time.perf_counter() - t0:.1f} s)")


def cmd_mc_check(args):
    rng = np.random.default_rng(args.seed)
    processes = ["poisson", "uniform"] if args.process == "both" else [args.process]
    worst = 0.0
    for k in range(args.hierarchies):
        h = random_hierarchy(rng, args.leaves)
        for proc in processes:
            model = MarkerModel(process=proc, measure=args.measure, count=args.count)
            p = edge_probabilities(h, model)
            f = monte_carlo_cut_frequency(h, model, args.trials, seed=args.seed + k)
            band = 4 * np.sqrt(p * (1 - p) / args.trials) + 1e-3
            dev = np.abs(p - f)
            ratio = float(np.max(dev / band))
            worst = max(worst, ratio)
            print(f"hierarchy {k} {proc:<8} {args.measure:<7} max|P-freq|={dev.max():.5f} "
                  f"max dev/band={ratio:.3f}")
    ok = worst <= 1.0
    print(f"{'PASS' if ok else 'FAIL'}: worst deviation is {worst:.3f} of the 4-sigma band")
    return 0 if ok else 2


def cmd_synth(args):
    manifest = write_dataset(args.out, args.kind, args.n, args.seed)
    cfg = Path(args.out) / "config.toml"
    score = '[score]\nkind = "ms"\ns = 1.168\n' if args.kind == "disks" else \
        '[score]\nkind = "whdr"\ndelta = 0.10\n'
    cfg.write_text(
        f'manifest = "{manifest.name}"\noutput_dir = "out"\ncache_dir = "cache"\nseed = {args.seed}\n'
        'specs = "all-depth-2"\nse_catalog = ["disk:4", "hseg:4", "vseg:15"]\n\n'
        '[split]\nratio = 0.5\n\n[markers]\nprocess = "poisson"\ncount = 100\n\n'
        f'{score}\n[grid]\nmode = "threshold"\nlevels = 64\n')
    print(f"dataset -> {manifest}\nconfig  -> {cfg}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--workers", type=int, default=None)
    common.add_argument("--cache-dir", default=None)

    parser = argparse.ArgumentParser(prog="swshier", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def image_args(p):
        p.add_argument("image")
        p.add_argument("--spec", default="grad", help="hierarchy grammar, e.g. 'svol|ssurf|grad'")
        p.add_argument("--labels", help="external fine partition (16-bit label PNG)")
        p.add_argument("--radius", type=int, default=1, help="gradient disk radius")

    p = sub.add_parser("segment", parents=[common], help="cut one image's hierarchy")
    image_args(p)
    p.add_argument("--cut", required=True, help="normalized threshold in [0,1] or k:<regions>")
    p.add_argument("--out", help="output label PNG")
    p.add_argument("--saliency", help="also write the saliency map here")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("saliency", parents=[common], help="render a hierarchy's saliency map")
    image_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_saliency)

    for name, func, text in (("train", cmd_train, "learn the model hierarchy and cut"),
                             ("oracle", cmd_oracle, "per-image best hierarchy and cut"),
                             ("evaluate", cmd_evaluate, "model vs oracle on the test split")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--config", required=True)
        p.set_defaults(func=func)
        if name == "evaluate":
            p.add_argument("--model", help="model.json from 'train' (default: train first)")
        if name == "oracle":
            p.add_argument("--all", action="store_true", help="every manifest image, not just test")

    p = sub.add_parser("mc-check", parents=[common], help="closed form vs Monte Carlo cut frequency")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--leaves", type=int, default=30)
    p.add_argument("--hierarchies", type=int, default=1)
    p.add_argument("--process", choices=["poisson", "uniform", "both"], default="both")
    p.add_argument("--measure", choices=["surface", "volume"], default="surface")
    p.add_argument("--count", type=float, default=100)
    p.set_defaults(func=cmd_mc_check)

    p = sub.add_parser("synth", help="write a bundled synthetic dataset and config")
    p.add_argument("out")
    p.add_argument("--kind", choices=["disks", "iiw"], default="disks")
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is None and args.command == "mc-check":
        args.seed = 0
    try:
        return args.func(args) or 0
    except SwsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ConfigError.exit_code if isinstance(exc, KeyError) else DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
