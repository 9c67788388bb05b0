"""Command-line entry point.

Subcommands: resample, compare, split, augment, stats, bench.

Exit codes: 0 success, 1 unreadable input / IO failure, 2 invalid arguments,
3 numerical failure (empty sample cloud). Output files are written atomically
(temp file, then rename), so failures never leave partial outputs behind.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import statistics
import sys
import time

import numpy as np

from . import pipeline
from .core import FsmrParams, NoSamplesError
from .geometry import AffineTransform, resize_transform, zoom_about
from .metrics import quality_report
from .patterns import make_pattern
from .pipeline import apply_method, rotation_to_canvas
from .raster import RasterImage, read_image, write_image

EXIT_OK = 0
EXIT_IO = 1
EXIT_ARGS = 2
EXIT_NUMERIC = 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _parse_dims(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        w, h = int(w), int(h)
    except ValueError:
        raise CliError(f"expected WxH, got '{text}'", EXIT_ARGS)
    if w < 1 or h < 1:
        raise CliError(f"dimensions must be positive, got '{text}'", EXIT_ARGS)
    return w, h


def _parse_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = text.split(":")
        lo, hi = float(lo), float(hi)
    except ValueError:
        raise CliError(f"expected lo:hi, got '{text}'", EXIT_ARGS)
    if not 0.0 < lo <= hi:
        raise CliError(f"need 0 < lo <= hi, got '{text}'", EXIT_ARGS)
    return lo, hi


def _threads(args) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("FSMR_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError(f"FSMR_THREADS must be an integer, got '{env}'", EXIT_ARGS)
    return None


def _load_config_file(path: str) -> dict:
    """Parse a JSON or key=value parameter file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}", EXIT_IO)
    stripped = text.strip()
    if not stripped:
        return {}
    if stripped.startswith("{"):
        try:
            return dict(json.loads(stripped))
        except json.JSONDecodeError as exc:
            raise CliError(f"bad JSON config: {exc}", EXIT_ARGS)
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"bad config line {lineno}: '{line}' (expected key=value)", EXIT_ARGS)
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _fsmr_params(args) -> FsmrParams:
    """Config file values merged under explicit --fsmr-set overrides; flags win."""
    merged: dict = {}
    if args.fsmr_config:
        merged.update(_load_config_file(args.fsmr_config))
    for item in args.fsmr_set or []:
        if "=" not in item:
            raise CliError(f"--fsmr-set expects key=value, got '{item}'", EXIT_ARGS)
        key, value = item.split("=", 1)
        merged[key.strip()] = value.strip()
    try:
        return FsmrParams.from_mapping(merged)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_ARGS)


def _read_input(path: str) -> RasterImage:
    try:
        return read_image(path)
    except Exception as exc:
        raise CliError(f"cannot read input image '{path}': {exc}", EXIT_IO)


def _transform_for(args, image_w: int, image_h: int) -> tuple[AffineTransform, int, int, str]:
    """Resolve the single requested transform into (t, out_w, out_h, label)."""
    chosen = [name for name, val in
              (("rotate", args.rotate), ("zoom", args.zoom), ("resize", args.resize))
              if val is not None]
    if len(chosen) != 1:
        raise CliError("exactly one transform required (--rotate | --zoom | --resize)", EXIT_ARGS)
    kind = chosen[0]
    if kind == "rotate":
        t, cw, ch = rotation_to_canvas(image_w, image_h, args.rotate)
        return t, cw, ch, f"rotate {args.rotate:g} deg"
    if kind == "zoom":
        if args.zoom <= 0:
            raise CliError("zoom factor must be positive", EXIT_ARGS)
        t = zoom_about(args.zoom, (image_w - 1) / 2.0, (image_h - 1) / 2.0)
        return t, image_w, image_h, f"zoom {args.zoom:g}"
    w, h = _parse_dims(args.resize)
    return resize_transform(image_w, image_h, w, h), w, h, f"resize {w}x{h}"


def cmd_resample(args) -> int:
    image = _read_input(args.input)
    params = _fsmr_params(args)
    t, out_w, out_h, label = _transform_for(args, image.width, image.height)
    try:
        result = apply_method(image, t, out_w, out_h, args.method, params, threads=_threads(args))
    except NoSamplesError as exc:
        raise CliError(f"numerical failure: {exc}", EXIT_NUMERIC)
    write_image(result, args.output)
    print(f"{args.input} -> {args.output}  method={args.method}  transform={label}  "
          f"size={out_w}x{out_h}")
    if args.method == "fsmr":
        print(f"fsmr params: block_size={params.block_size} margin={params.margin} "
              f"max_iterations={params.max_iterations} gamma={params.gamma} "
              f"rho_spatial={params.rho_spatial} rho_freq={params.rho_freq} "
              f"energy_epsilon={params.energy_epsilon}")
    return EXIT_OK


def _print_report(rows: list[dict], fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(rows, indent=2, sort_keys=True))
        return
    print(f"{'method':<10} {'psnr_db':>10} {'ssim':>8}")
    for row in rows:
        print(f"{row['method']:<10} {row['psnr_db']:>10.4f} {row['ssim']:>8.5f}")


def cmd_compare(args) -> int:
    params = _fsmr_params(args)
    threads = _threads(args)
    mode = args.eval or ("roundtrip" if args.input else "synthetic")

    if mode == "synthetic":
        size_w, size_h = _parse_dims(args.size)
        pattern = make_pattern(args.seed)
        image = pattern.render(size_w, size_h)
    else:
        if not args.input:
            raise CliError("round-trip evaluation needs an input image", EXIT_ARGS)
        image = _read_input(args.input)

    t, out_w, out_h, label = _transform_for(args, image.width, image.height)
    rows = []
    for method in ("bilinear", "bicubic", "fsmr"):
        try:
            produced = apply_method(image, t, out_w, out_h, method, params, threads=threads)
            if mode == "synthetic":
                inv = t.inverse()
                gx, gy = np.meshgrid(np.arange(out_w, dtype=float), np.arange(out_h, dtype=float))
                sx, sy = inv.apply(gx, gy)
                reference = RasterImage(pattern.evaluate(sx, sy))
                test = produced
            else:
                back = apply_method(produced, t.inverse(), image.width, image.height,
                                    method, params, threads=threads)
                reference, test = image, back
        except NoSamplesError as exc:
            raise CliError(f"numerical failure ({method}): {exc}", EXIT_NUMERIC)
        if not args.float_metrics:
            reference, test = reference.quantized(), test.quantized()
        report = quality_report(reference, test, peak=255.0, luma_only=args.luma)
        rows.append({"method": method, "psnr_db": report.psnr_db, "ssim": report.ssim})
        if args.outdir:
            os.makedirs(args.outdir, exist_ok=True)
            write_image(produced, os.path.join(args.outdir, f"compare_{method}.png"))

    print(f"transform={label}  mode={mode}", file=sys.stderr)
    _print_report(rows, args.report)
    return EXIT_OK


def cmd_split(args) -> int:
    try:
        if os.path.isdir(args.input):
            entries = pipeline.discover_tree(args.input)
        else:
            entries = pipeline.read_manifest_csv(args.input).entries
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot load entries: {exc}", EXIT_IO)
    try:
        manifest = pipeline.split_dataset(entries, args.test_fraction, args.val_fraction, args.seed)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_ARGS)
    pipeline.write_manifest_csv(manifest, args.output)
    for label in manifest.classes():
        members = [e for e in manifest.entries if e.class_label == label]
        counts = {s: sum(1 for e in members if e.split == s) for s in ("train", "val", "test")}
        print(f"{label}: train={counts['train']} val={counts['val']} test={counts['test']}")
    print(f"manifest written to {args.output} (seed={manifest.seed})")
    return EXIT_OK


def cmd_augment(args) -> int:
    try:
        manifest = pipeline.read_manifest_csv(args.input)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot load manifest: {exc}", EXIT_IO)
    params = _fsmr_params(args)
    zoom_range = _parse_range(args.zoom_range)
    target = _parse_dims(args.resize) if args.resize else pipeline.DEFAULT_TARGET_DIMS
    try:
        plan = pipeline.build_plan(manifest, args.seed, zoom_range, target)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_ARGS)
    if args.plan_out:
        tmp = args.plan_out + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(plan.to_json())
        os.replace(tmp, args.plan_out)
    try:
        out = pipeline.execute_plan(plan, args.method, args.output_root, params,
                                    threads=_threads(args))
    except ValueError as exc:
        raise CliError(str(exc), EXIT_ARGS)
    print(f"emitted {len(out.records)} images to {args.output_root} "
          f"({len(out.errors)} errors), manifest: {out.path}")
    return EXIT_OK


def cmd_stats(args) -> int:
    try:
        if os.path.isdir(args.input):
            source = args.input
        else:
            source = pipeline.read_manifest_csv(args.input)
        stats = pipeline.class_std_stats(source)
    except (OSError, ValueError, FileNotFoundError) as exc:
        raise CliError(f"stats failed: {exc}", EXIT_IO)
    lines = ["class,min,p25,median,p75,max"]
    for s in stats:
        lines.append(f"{s.class_label},{s.min:.6f},{s.p25:.6f},{s.median:.6f},{s.p75:.6f},{s.max:.6f}")
    text = "\n".join(lines) + "\n"
    if args.output:
        tmp = args.output + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, args.output)
        print(f"stats written to {args.output}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    image = _read_input(args.input)
    params = _fsmr_params(args)
    threads = _threads(args)
    # Fixed benchmark task: rotation by 30 degrees onto the bbox canvas.
    t, out_w, out_h = rotation_to_canvas(image.width, image.height, 30.0)
    megapixels = (out_w * out_h) / 1e6
    rows = []
    for method in ("bilinear", "bicubic", "fsmr"):
        times_ms = []
        for _ in range(args.reps):
            start = time.perf_counter()
            apply_method(image, t, out_w, out_h, method, params, threads=threads)
            times_ms.append((time.perf_counter() - start) * 1e3)
        rows.append({
            "method": method,
            "reps": args.reps,
            "mean_ms_per_mp": statistics.fmean(times_ms) / megapixels,
            "median_ms_per_mp": statistics.median(times_ms) / megapixels,
        })
    if args.report == "json":
        print(json.dumps(rows, indent=2, sort_keys=True))
    else:
        print(f"{'method':<10} {'reps':>5} {'mean_ms_per_mp':>15} {'median_ms_per_mp':>17}")
        for row in rows:
            print(f"{row['method']:<10} {row['reps']:>5} {row['mean_ms_per_mp']:>15.2f} "
                  f"{row['median_ms_per_mp']:>17.2f}")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser, *, transform: bool = False) -> None:
    p.add_argument("--method", choices=["bilinear", "bicubic", "fsmr"], default="fsmr")
    p.add_argument("--seed", type=int, default=0, help="seed for anything randomized")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: all cores; env FSMR_THREADS)")
    p.add_argument("--report", choices=["text", "json"], default="text")
    p.add_argument("--fsmr-config", default=None,
                   help="JSON or key=value file with fsmr parameters")
    p.add_argument("--fsmr-set", action="append", metavar="KEY=VALUE",
                   help="override one fsmr parameter (repeatable; wins over the config file)")
    if transform:
        p.add_argument("--rotate", type=float, default=None, metavar="DEG")
        p.add_argument("--zoom", type=float, default=None, metavar="FACTOR")
        p.add_argument("--resize", default=None, metavar="WxH")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsmr",
        description="Frequency-selective mesh-to-grid resampling toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("resample", help="transform one image with one method")
    _add_common(p, transform=True)
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_resample)

    p = sub.add_parser("compare", help="run all three methods and report PSNR/SSIM")
    _add_common(p, transform=True)
    p.add_argument("input", nargs="?", default=None,
                   help="input image (omit for synthetic mode)")
    p.add_argument("--eval", choices=["synthetic", "roundtrip"], default=None,
                   help="reference: analytic band-limited pattern, or transform+inverse round trip")
    p.add_argument("--size", default="96x96", metavar="WxH",
                   help="synthetic pattern size (default 96x96)")
    p.add_argument("--outdir", default=None, help="also write the three outputs here")
    p.add_argument("--luma", action="store_true", help="metrics on luma only")
    p.add_argument("--float-metrics", action="store_true",
                   help="skip 8-bit quantization before metrics")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("split", help="assign train/val/test splits")
    _add_common(p)
    p.add_argument("input", help="directory-per-class tree or path,class CSV")
    p.add_argument("--test-fraction", type=float, default=0.1)
    p.add_argument("--val-fraction", type=float, default=0.0)
    p.add_argument("--output", default="manifest.csv")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("augment", help="execute the seeded augmentation workflow")
    _add_common(p)
    p.add_argument("input", help="manifest CSV with split column")
    p.add_argument("--zoom-range", default="0.7:1.3", metavar="LO:HI")
    p.add_argument("--resize", default=None, metavar="WxH",
                   help="target dims (default 224x224)")
    p.add_argument("--output-root", default="augmented")
    p.add_argument("--plan-out", default=None, help="also dump the plan JSON here")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("stats", help="per-class image standard-deviation box stats")
    _add_common(p)
    p.add_argument("input", help="manifest CSV or directory-per-class tree")
    p.add_argument("--output", default=None, help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("bench", help="time all three methods on one image")
    _add_common(p)
    p.add_argument("input")
    p.add_argument("--reps", type=int, default=3)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ARGS if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except BrokenPipeError:
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
