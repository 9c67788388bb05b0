"""Dataset preparation: splits, seeded augmentation plans, execution, statistics.

The augmentation parameters for an entry are drawn from a counter-based
generator keyed on (seed, source path), never from a sequential stream. Plans
are therefore independent of entry order and identical across interpolation
methods by construction; only the pixels of the emitted images depend on the
method. Each train/val source yields three outputs (rotated-then-resized,
zoomed-then-resized, resized original); test sources are resized only.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baselines import bicubic_resample, bilinear_resample
from .core import FsmrParams, resample_to_grid
from .geometry import AffineTransform, forward_map, resize_transform, rotation_about, translation, zoom_about
from .raster import RasterImage, read_image, write_image

logger = logging.getLogger(__name__)

METHODS = ("bilinear", "bicubic", "fsmr")
IMAGE_EXTENSIONS = (".png", ".ppm", ".pgm", ".jpg", ".jpeg", ".bmp")
DEFAULT_ZOOM_RANGE = (0.7, 1.3)
DEFAULT_TARGET_DIMS = (224, 224)


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    class_label: str
    split: str = ""


@dataclass
class DatasetManifest:
    """File/class/split records plus the seed that produced the split."""

    entries: list[ManifestEntry]
    seed: int = 0

    def classes(self) -> list[str]:
        """Class labels in first-appearance order."""
        seen: dict[str, None] = {}
        for e in self.entries:
            seen.setdefault(e.class_label)
        return list(seen)

    def by_split(self, split: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == split]


@dataclass(frozen=True)
class PlanRecord:
    """Seeded transform parameters for one source image."""

    src_path: str
    class_label: str
    split: str
    rotation_angle_deg: float | None
    zoom_factor: float | None
    target_dims: tuple[int, int]


@dataclass
class AugmentationPlan:
    records: list[PlanRecord]
    seed: int
    zoom_range: tuple[float, float]
    target_dims: tuple[int, int]

    def to_json(self) -> str:
        """Canonical serialization; byte-identical for equal plans."""
        payload = {
            "seed": self.seed,
            "zoom_range": list(self.zoom_range),
            "target_dims": list(self.target_dims),
            "records": [
                {**asdict(r), "target_dims": list(r.target_dims)} for r in self.records
            ],
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


@dataclass
class ClassBoxStats:
    """Five-number summary of per-image standard deviation within one class."""

    class_label: str
    min: float
    p25: float
    median: float
    p75: float
    max: float


@dataclass
class OutputManifest:
    """What execute_plan emitted: one record per written image, plus failures."""

    records: list[dict] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)
    path: str | None = None


def _unit_float(seed: int, key: str, counter: int) -> float:
    """Deterministic uniform draw in [0, 1) from a hashed (seed, key, counter)."""
    digest = hashlib.sha256(f"{seed}\x1f{key}\x1f{counter}".encode()).digest()
    return int.from_bytes(digest[:8], "big") / 2.0 ** 64


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_dataset(entries, test_fraction: float, val_fraction: float = 0.0,
                  seed: int = 0) -> DatasetManifest:
    """Assign train/val/test splits per class, driven solely by the seed.

    The per-class test count is round(class_size * test_fraction) (half up);
    likewise for val. The shuffle orders each class by a keyed hash of the
    path, so identical (entries, seed) always reproduce the same manifest.
    """
    if not (0.0 <= test_fraction < 1.0 and 0.0 <= val_fraction < 1.0
            and test_fraction + val_fraction < 1.0):
        raise ValueError("fractions must lie in [0, 1) and sum to less than 1")

    normalized: list[ManifestEntry] = []
    for item in entries:
        if isinstance(item, ManifestEntry):
            normalized.append(item)
        else:
            path, label = item[0], item[1]
            normalized.append(ManifestEntry(str(path), str(label)))
    seen_paths = set()
    for e in normalized:
        if e.path in seen_paths:
            raise ValueError(f"duplicate path in entries: {e.path}")
        seen_paths.add(e.path)

    by_class: dict[str, list[ManifestEntry]] = {}
    for e in normalized:
        by_class.setdefault(e.class_label, []).append(e)

    assignment: dict[str, str] = {}
    for label, members in by_class.items():
        size = len(members)
        n_test = _round_half_up(size * test_fraction)
        n_val = _round_half_up(size * val_fraction)
        if size - n_test - n_val < 1:
            raise ValueError(
                f"class '{label}' has only {size} entries; cannot reserve "
                f"{n_test} test + {n_val} val and still keep a train entry"
            )
        shuffled = sorted(
            members,
            key=lambda e: (hashlib.sha256(f"{seed}\x1f{label}\x1f{e.path}".encode()).digest(), e.path),
        )
        for i, e in enumerate(shuffled):
            if i < n_test:
                assignment[e.path] = "test"
            elif i < n_test + n_val:
                assignment[e.path] = "val"
            else:
                assignment[e.path] = "train"

    out = [ManifestEntry(e.path, e.class_label, assignment[e.path]) for e in normalized]
    return DatasetManifest(out, seed=seed)


def build_plan(manifest: DatasetManifest, seed: int,
               zoom_range: tuple[float, float] = DEFAULT_ZOOM_RANGE,
               target_dims: tuple[int, int] = DEFAULT_TARGET_DIMS) -> AugmentationPlan:
    """Draw one rotation angle and one zoom factor per train/val entry.

    Angles are uniform on [-45, 45] degrees, zoom factors uniform on the given
    range, both keyed on (seed, path) so that entry order and interpolation
    method cannot change them. Test entries get resize-only records.
    """
    lo, hi = zoom_range
    if not (0.0 < lo <= hi):
        raise ValueError(f"invalid zoom range ({lo}, {hi}); need 0 < lo <= hi")
    if min(target_dims) < 1:
        raise ValueError(f"target dims must be positive, got {target_dims}")

    records = []
    for e in manifest.entries:
        if e.split == "test":
            records.append(PlanRecord(e.path, e.class_label, e.split, None, None, tuple(target_dims)))
        else:
            angle = -45.0 + 90.0 * _unit_float(seed, e.path, 0)
            factor = lo + (hi - lo) * _unit_float(seed, e.path, 1)
            records.append(PlanRecord(e.path, e.class_label, e.split, angle, factor, tuple(target_dims)))
    return AugmentationPlan(records, seed, (lo, hi), tuple(target_dims))


def rotation_to_canvas(width: int, height: int, angle_deg: float) -> tuple[AffineTransform, int, int]:
    """Rotation about the image center onto a canvas holding the full rotated extent.

    Returns (transform, canvas_w, canvas_h); the transform maps source pixel
    coordinates into canvas pixel coordinates with the rotated bounding box
    anchored at the canvas edge, so no corner content is lost.
    """
    rot = rotation_about(angle_deg, (width - 1) / 2.0, (height - 1) / 2.0)
    corners_x = np.array([-0.5, width - 0.5, -0.5, width - 0.5])
    corners_y = np.array([-0.5, -0.5, height - 0.5, height - 0.5])
    cx, cy = rot.apply(corners_x, corners_y)
    canvas_w = max(1, math.ceil(float(cx.max() - cx.min())))
    canvas_h = max(1, math.ceil(float(cy.max() - cy.min())))
    shift = translation(-0.5 - float(cx.min()), -0.5 - float(cy.min()))
    return rot.then(shift), canvas_w, canvas_h


def apply_method(image: RasterImage, t: AffineTransform, dst_w: int, dst_h: int,
                 method: str, fsmr_params: FsmrParams | None = None,
                 threads: int | None = None) -> RasterImage:
    """Run one geometric transform with the chosen interpolation method.

    Baselines pull target pixels through the inverse transform; the frequency-
    selective path pushes source pixels forward into a mesh and reconstructs.
    """
    if method == "bilinear":
        return bilinear_resample(image, t, dst_w, dst_h)
    if method == "bicubic":
        return bicubic_resample(image, t, dst_w, dst_h)
    if method == "fsmr":
        params = fsmr_params or FsmrParams()
        cloud = forward_map(image, t, dst_w, dst_h, margin=params.margin)
        return resample_to_grid(cloud, dst_w, dst_h, params, threads=threads)
    raise ValueError(f"unknown method '{method}'; expected one of {METHODS}")


def _entry_ops(record: PlanRecord) -> list[tuple[str, float | None]]:
    if record.split == "test":
        return [("resize", None)]
    return [("rotate", record.rotation_angle_deg),
            ("zoom", record.zoom_factor),
            ("resize", None)]


def _emit_one(image: RasterImage, op: str, value: float | None,
              target_dims: tuple[int, int], method: str,
              fsmr_params: FsmrParams | None) -> RasterImage:
    tw, th = target_dims
    w, h = image.width, image.height
    if op == "rotate":
        t, cw, ch = rotation_to_canvas(w, h, float(value))
        staged = apply_method(image, t, cw, ch, method, fsmr_params, threads=1)
        return apply_method(staged, resize_transform(cw, ch, tw, th), tw, th,
                            method, fsmr_params, threads=1)
    if op == "zoom":
        t = zoom_about(float(value), (w - 1) / 2.0, (h - 1) / 2.0)
        staged = apply_method(image, t, w, h, method, fsmr_params, threads=1)
        return apply_method(staged, resize_transform(w, h, tw, th), tw, th,
                            method, fsmr_params, threads=1)
    if op == "resize":
        return apply_method(image, resize_transform(w, h, tw, th), tw, th,
                            method, fsmr_params, threads=1)
    raise ValueError(f"unknown op '{op}'")


def execute_plan(plan: AugmentationPlan, method: str, output_root: str | os.PathLike,
                 fsmr_params: FsmrParams | None = None,
                 threads: int | None = None) -> OutputManifest:
    """Materialize a plan into an image tree plus a JSONL output manifest.

    Every interpolation step (augmentation and the final resize) uses the one
    chosen method. Unreadable sources are skipped, logged, and recorded in the
    manifest's error list; colliding output paths abort before any write.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method '{method}'; expected one of {METHODS}")
    root = Path(output_root)

    planned: list[tuple[PlanRecord, str, float | None, Path]] = []
    taken: dict[Path, str] = {}
    for record in plan.records:
        stem = Path(record.src_path).stem
        for op, value in _entry_ops(record):
            out_path = root / record.split / record.class_label / f"{stem}__{op}.png"
            if out_path in taken:
                raise ValueError(
                    f"output collision: {out_path} produced by both "
                    f"{taken[out_path]} and {record.src_path}"
                )
            taken[out_path] = record.src_path
            planned.append((record, op, value, out_path))

    manifest = OutputManifest()

    def process(job: tuple[PlanRecord, str, float | None, Path]) -> tuple[dict | None, dict | None]:
        record, op, value, out_path = job
        try:
            image = read_image(record.src_path)
        except Exception as exc:  # unreadable/corrupt source
            return None, {"src_path": record.src_path, "op": op, "error": str(exc)}
        result = _emit_one(image, op, value, record.target_dims, method, fsmr_params)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        write_image(result, out_path)
        return {
            "out_path": str(out_path),
            "src_path": record.src_path,
            "class": record.class_label,
            "split": record.split,
            "op": op,
            "angle_deg": value if op == "rotate" else None,
            "zoom_factor": value if op == "zoom" else None,
            "method": method,
            "target_w": record.target_dims[0],
            "target_h": record.target_dims[1],
        }, None

    workers = (os.cpu_count() or 1) if threads is None else max(1, threads)
    if workers == 1 or len(planned) <= 1:
        results = [process(job) for job in planned]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(process, planned))

    for rec, err in results:
        if rec is not None:
            manifest.records.append(rec)
        if err is not None:
            logger.warning("skipped %s (%s): %s", err["src_path"], err["op"], err["error"])
            manifest.errors.append(err)

    manifest.records.sort(key=lambda r: (r["src_path"], r["op"]))
    manifest.errors.sort(key=lambda r: (r["src_path"], r["op"]))

    root.mkdir(parents=True, exist_ok=True)
    manifest_path = root / "manifest.jsonl"
    tmp = manifest_path.with_suffix(".jsonl.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for rec in manifest.records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        for err in manifest.errors:
            fh.write(json.dumps({"error": err["error"], "src_path": err["src_path"], "op": err["op"]},
                                sort_keys=True) + "\n")
    os.replace(tmp, manifest_path)
    manifest.path = str(manifest_path)
    return manifest


def class_std_stats(source) -> list[ClassBoxStats]:
    """Five-number summaries of per-image luma standard deviation per class.

    `source` is a DatasetManifest, a list of ManifestEntry, or a directory-
    per-class tree root. Per image the population standard deviation over all
    luma pixels is taken; per class the min/p25/median/p75/max use linear
    interpolation between order statistics. Unreadable images are skipped and
    logged. Class order follows the manifest (or sorted directory names).
    """
    if isinstance(source, DatasetManifest):
        entries = source.entries
    elif isinstance(source, (str, os.PathLike)):
        entries = discover_tree(source)
    else:
        entries = list(source)

    by_class: dict[str, list[str]] = {}
    for e in entries:
        by_class.setdefault(e.class_label, []).append(e.path)

    stats = []
    for label, paths in by_class.items():
        stds = []
        for path in paths:
            try:
                image = read_image(path)
            except Exception as exc:
                logger.warning("skipped %s: %s", path, exc)
                continue
            stds.append(float(np.std(image.luma())))
        if not stds:
            raise ValueError(f"class '{label}' has no readable images")
        q = np.percentile(stds, [0.0, 25.0, 50.0, 75.0, 100.0])
        stats.append(ClassBoxStats(label, *map(float, q)))
    return stats


def discover_tree(root: str | os.PathLike) -> list[ManifestEntry]:
    """Collect a directory-per-class tree as manifest entries, sorted."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"not a directory: {root}")
    entries = []
    for class_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for path in sorted(class_dir.iterdir()):
            if path.suffix.lower() in IMAGE_EXTENSIONS and path.is_file():
                entries.append(ManifestEntry(str(path), class_dir.name))
    if not entries:
        raise ValueError(f"no images found under {root}")
    return entries


def read_manifest_csv(path: str | os.PathLike) -> DatasetManifest:
    """Read a `path,class,split` CSV (split column optional)."""
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "path" not in reader.fieldnames or "class" not in reader.fieldnames:
            raise ValueError(f"manifest needs a 'path,class[,split]' header, got {reader.fieldnames}")
        for row in reader:
            entries.append(ManifestEntry(row["path"], row["class"], (row.get("split") or "").strip()))
    seed = 0
    meta = Path(os.fspath(path) + ".meta.json")
    if meta.exists():
        with open(meta, encoding="utf-8") as fh:
            seed = int(json.load(fh).get("seed", 0))
    return DatasetManifest(entries, seed=seed)


def write_manifest_csv(manifest: DatasetManifest, path: str | os.PathLike) -> None:
    """Write the `path,class,split` CSV plus a sidecar recording the seed."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "class", "split"])
        for e in manifest.entries:
            writer.writerow([e.path, e.class_label, e.split])
    os.replace(tmp, path)
    with open(path + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump({"seed": manifest.seed}, fh)
