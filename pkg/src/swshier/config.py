"""Run configuration (TOML) and dataset manifests (JSON).

Example config::

    manifest = "data/manifest.json"
    output_dir = "out"
    cache_dir = "out/cache"          # optional
    seed = 0
    workers = 1
    specs = "all-depth-2"            # or a list of grammar strings
    se_catalog = ["disk:4", "hseg:4", "vseg:15"]
    gradient_radius = 1

    [split]
    ratio = 0.5                      # or: train = [...], test = [...]

    [markers]
    process = "poisson"
    count = 100

    [score]
    kind = "ms"                      # or "whdr" with delta = 0.10
    s = 1.168

    [grid]
    mode = "threshold"               # or "count" with counts = [...]
    levels = 64
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .chain import DEFAULT_OPERATORS, DEFAULT_SE_CATALOG, enumerate_specs, parse_spec
from .errors import ConfigError, DataError
from .pixel import StructuringElement, import_labels, read_image
from .scoring import DEFAULT_DELTA, DEFAULT_SCALE, MumfordShahScore, WhdrScore, load_judgments
from .select import CutGrid, ImageCase


@dataclass
class ManifestEntry:
    id: str
    image: Path
    labels: Path | None = None
    judgments: Path | None = None


def load_manifest(path) -> list[ManifestEntry]:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    if not isinstance(raw, list):
        raise ConfigError("manifest must be a JSON list")
    root = path.parent
    out, seen = [], set()
    for item in raw:
        if "image" not in item:
            raise ConfigError("every manifest entry needs an 'image' path")
        image = root / item["image"]
        ident = item.get("id", image.stem)
        if ident in seen:
            raise ConfigError(f"duplicate image id {ident!r} in manifest")
        seen.add(ident)
        opt = {k: root / item[k] for k in ("labels", "judgments") if item.get(k)}
        for p in [image, *opt.values()]:
            if not p.exists():
                raise ConfigError(f"manifest references missing file {p}")
        out.append(ManifestEntry(ident, image, **opt))
    return out


@dataclass
class RunConfig:
    manifest: Path
    output_dir: Path = Path("out")
    cache_dir: Path | None = None
    seed: int = 0
    workers: int = 1
    specs: object = "all-depth-2"
    se_catalog: tuple = DEFAULT_SE_CATALOG
    gradient_radius: int = 1
    train: list = field(default_factory=list)
    test: list = field(default_factory=list)
    ratio: float | None = 0.5
    marker_process: str = "poisson"
    marker_count: float = 100.0
    score_kind: str = "ms"
    scale: float = DEFAULT_SCALE
    delta: float = DEFAULT_DELTA
    grid: CutGrid = field(default_factory=CutGrid)

    def spec_list(self):
        kw = dict(process=self.marker_process, count=self.marker_count)
        if self.specs == "all-depth-2":
            return enumerate_specs(DEFAULT_OPERATORS, self.se_catalog, **kw)
        if isinstance(self.specs, str):
            return [parse_spec(self.specs, **kw)]
        return [parse_spec(s, **kw) for s in self.specs]

    def score_fn(self):
        if self.score_kind == "ms":
            try:
                return MumfordShahScore(self.scale)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        if self.score_kind == "whdr":
            return WhdrScore()
        raise ConfigError(f"unknown score kind {self.score_kind!r}")

    def entries(self) -> list[ManifestEntry]:
        return load_manifest(self.manifest)

    def split(self, entries):
        ids = [e.id for e in entries]
        if self.train or self.test:
            unknown = (set(self.train) | set(self.test)) - set(ids)
            if unknown:
                raise ConfigError(f"split names unknown images: {sorted(unknown)}")
            if set(self.train) & set(self.test):
                raise ConfigError("train and test sets overlap")
            by_id = {e.id: e for e in entries}
            return [by_id[i] for i in self.train], [by_id[i] for i in self.test]
        order = np.random.default_rng(self.seed).permutation(len(entries))
        n_train = int(round(self.ratio * len(entries)))
        if not 0 < n_train < len(entries):
            raise ConfigError("split ratio leaves the train or test set empty")
        return ([entries[i] for i in sorted(order[:n_train])],
                [entries[i] for i in sorted(order[n_train:])])

    def load_case(self, entry: ManifestEntry) -> ImageCase:
        img = read_image(entry.image)
        labels = import_labels(entry.labels, img.shape) if entry.labels else None
        j = load_judgments(entry.judgments, img.shape, self.delta) if entry.judgments else None
        if self.score_kind == "whdr" and j is None:
            raise DataError(f"image {entry.id} has no judgment file but the score is WHDR")
        return ImageCase.prepare(entry.id, img, labels, j, self.gradient_radius)


def _get(table, key, kind, default):
    value = table.get(key, default)
    if value is not default and not isinstance(value, kind):
        raise ConfigError(f"config key {key!r} has the wrong type")
    return value


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(raw, path.parent)


def config_from_dict(raw: dict, root=Path(".")) -> RunConfig:
    root = Path(root)
    if "manifest" not in raw:
        raise ConfigError("config needs a 'manifest' path")
    cfg = RunConfig(manifest=root / raw["manifest"])
    cfg.output_dir = root / _get(raw, "output_dir", str, "out")
    if raw.get("cache_dir"):
        cfg.cache_dir = root / raw["cache_dir"]
    cfg.seed = _get(raw, "seed", int, 0)
    cfg.workers = _get(raw, "workers", int, 1)
    cfg.gradient_radius = _get(raw, "gradient_radius", int, 1)
    cfg.specs = raw.get("specs", "all-depth-2")
    try:
        if "se_catalog" in raw:
            cfg.se_catalog = tuple(StructuringElement.parse(s) for s in raw["se_catalog"])
        split = raw.get("split", {})
        cfg.train = list(split.get("train", []))
        cfg.test = list(split.get("test", []))
        cfg.ratio = float(split.get("ratio", 0.5))
        markers = raw.get("markers", {})
        cfg.marker_process = markers.get("process", "poisson")
        cfg.marker_count = float(markers.get("count", 100))
        score = raw.get("score", {})
        cfg.score_kind = score.get("kind", "ms")
        cfg.scale = float(score.get("s", DEFAULT_SCALE))
        cfg.delta = float(score.get("delta", DEFAULT_DELTA))
        grid = raw.get("grid", {})
        cfg.grid = CutGrid(grid.get("mode", "threshold"), int(grid.get("levels", 64)),
                           tuple(int(k) for k in grid.get("counts", ())))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    cfg.spec_list()  # validate the grammar early
    cfg.score_fn()
    return cfg
