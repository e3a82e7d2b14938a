"""Batch command line: scalemap | detect-classic | fuse | augment | eval | synth.

Every subcommand is a thin dispatch onto the library, so outputs are
byte-identical to direct calls.  Exit codes: 0 success, 1 usage error,
2 data error (unreadable/invalid inputs).
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import fileio
from .augment import AugmentationRanges, augment as augment_one
from .classiccv import detect_obstacles
from .evaluation import DEFAULT_THRESHOLDS, evaluate
from .frames import fuse, split
from .geometry import ground_to_pixel
from .scalemap import build_scale_map, sample_dense, to_channel
from .synth import read_scene, render

_DATA_ERRORS = (
    OSError,
    ValueError,
    fileio.MalformedHeader,
    fileio.TruncatedData,
    fileio.BadMagic,
    fileio.SizeMismatch,
    fileio.ParseError,
    fileio.ConfigError,
)


def _draw_segment(image, p0, p1, color):
    n = int(max(abs(p1[0] - p0[0]), abs(p1[1] - p0[1]))) + 1
    us = np.rint(np.linspace(p0[0], p1[0], n)).astype(int)
    vs = np.rint(np.linspace(p0[1], p1[1], n)).astype(int)
    h, w = image.shape[:2]
    ok = (us >= 0) & (us < w) & (vs >= 0) & (vs < h)
    image[vs[ok], us[ok]] = color


def _draw_dot(image, center, radius, color):
    h, w = image.shape[:2]
    u0, v0 = int(round(center[0])), int(round(center[1]))
    for v in range(max(0, v0 - radius), min(h, v0 + radius + 1)):
        for u in range(max(0, u0 - radius), min(w, u0 + radius + 1)):
            if (u - u0) ** 2 + (v - v0) ** 2 <= radius * radius:
                image[v, u] = color


def _cmd_scalemap(args):
    cfg = fileio.read_config(args.config)
    stride = args.stride if args.stride is not None else cfg.stride
    t0 = time.perf_counter()
    smap = build_scale_map(cfg.rig, stride)
    elapsed = time.perf_counter() - t0
    fileio.write_pgm(args.out, to_channel(smap, cfg.encoding))
    if args.float_dump:
        fileio.write_float_dump(args.float_dump, sample_dense(smap).astype(np.float32))
    print(f"scalemap: stride {stride}, grid {smap.grid.shape[1]}x{smap.grid.shape[0]}, built in {elapsed * 1e3:.2f} ms")
    return 0


def _cmd_detect_classic(args):
    cfg = fileio.read_config(args.config)
    image = fileio.read_ppm(args.image)
    if image.shape[:2] != (cfg.rig.intrinsics.height, cfg.rig.intrinsics.width):
        raise ValueError(
            f"image {image.shape[1]}x{image.shape[0]} does not match the "
            f"configured sensor {cfg.rig.intrinsics.width}x{cfg.rig.intrinsics.height}"
        )
    result = detect_obstacles(
        image,
        cfg.rig,
        cfg.thresholds,
        kernel_radius=cfg.kernel_radius,
        iterations=cfg.iterations,
        line_width_m=cfg.line_width_m,
        margin=cfg.margin,
        query=cfg.query,
        max_range_m=cfg.max_range_m,
    )
    fileio.write_labels(args.out_labels, result.boxes, with_confidence=True)
    print(f"detect-classic: {len(result.boxes)} obstacle boxes, {len(result.obstacle_points)} contour points in range")

    if args.viz_dir:
        viz = Path(args.viz_dir)
        viz.mkdir(parents=True, exist_ok=True)
        stem = Path(args.image).stem
        fileio.write_pgm(viz / f"{stem}_mask.pgm", (result.opened_mask * 255).astype(np.uint8))
        dmap = result.distance_map
        finite = np.isfinite(dmap)
        top = dmap[finite].max() if finite.any() and dmap[finite].max() > 0 else 1.0
        fileio.write_pgm(viz / f"{stem}_dt.pgm", np.where(finite, dmap / top * 255.0, 255.0).astype(np.uint8))

        walkable = image.copy()
        free = ~result.core
        walkable[free] = (walkable[free] * 0.4 + np.array([0, 255, 0]) * 0.6).astype(np.uint8)
        fileio.write_ppm(viz / f"{stem}_walkable.ppm", walkable)

        overlay = image.copy()
        try:
            qpx = ground_to_pixel(cfg.rig, cfg.query)
        except Exception:
            qpx = None
        if qpx is not None:
            for pt in result.obstacle_points:
                _draw_segment(overlay, qpx, pt.px, (255, 0, 0))
        for contour in result.contours:
            overlay[contour[:, 1], contour[:, 0]] = (255, 255, 0)
        if qpx is not None:
            _draw_dot(overlay, qpx, 4, (255, 0, 255))
        fileio.write_ppm(viz / f"{stem}_obstacles.ppm", overlay)
    return 0


def _cmd_fuse(args):
    if args.split:
        frame = fileio.read_frame(args.split)
        rgb, s = split(frame)
        fileio.write_ppm(args.out_rgb, rgb)
        fileio.write_pgm(args.out_s, s)
        print(f"split: {frame.width}x{frame.height} -> {args.out_rgb}, {args.out_s}")
        return 0
    rgb = fileio.read_ppm(args.rgb)
    s = fileio.read_pgm(args.s)
    frame = fuse(rgb, s)
    fileio.write_frame(args.out, frame)
    print(f"fuse: {frame.width}x{frame.height} -> {args.out}")
    return 0


def _augment_one_replica(frame, boxes, ranges, seed, out_dir, stem):
    new_frame, new_boxes, params = augment_one(frame, boxes, ranges, seed)
    fileio.write_frame(out_dir / f"{stem}_aug{seed:06d}.frm", new_frame)
    fileio.write_labels(out_dir / f"{stem}_aug{seed:06d}.txt", new_boxes)
    return seed, len(new_boxes), params.hflip


def _cmd_augment(args):
    frame = fileio.read_frame(args.frame)
    boxes = fileio.read_labels(args.labels)
    ranges = AugmentationRanges(
        translate_frac=args.translate,
        rotate_deg=args.rotate,
        shear_deg=args.shear,
        scale_frac=args.scale,
        hflip_prob=args.hflip_prob,
        sat_frac=args.sat,
        val_frac=args.val,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.frame).stem
    seeds = [args.seed + i for i in range(args.n)]
    jobs = max(1, args.jobs)
    if jobs == 1:
        results = [_augment_one_replica(frame, boxes, ranges, s, out_dir, stem) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(
                pool.map(lambda s: _augment_one_replica(frame, boxes, ranges, s, out_dir, stem), seeds)
            )
    for seed, n_boxes, _ in sorted(results):
        print(f"augment: seed {seed} -> {n_boxes} boxes")
    return 0


def _cmd_eval(args):
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    gt_files = sorted(gt_dir.glob("*.txt"))
    if not gt_files:
        raise ValueError(f"no .txt label files under {gt_dir}")
    jobs = max(1, args.jobs)

    def load(pair):
        name, gt_path = pair
        pred_path = pred_dir / gt_path.name
        preds = fileio.read_labels(pred_path) if pred_path.exists() else []
        return name, preds, fileio.read_labels(gt_path)

    pairs = [(p.stem, p) for p in gt_files]
    if jobs == 1:
        loaded = [load(p) for p in pairs]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            loaded = list(pool.map(load, pairs))
    preds_by_image = {name: preds for name, preds, _ in loaded}
    gts_by_image = {name: gts for name, _, gts in loaded}
    table = evaluate(preds_by_image, gts_by_image, DEFAULT_THRESHOLDS)
    print(table.to_text())
    if args.csv:
        fileio._atomic_write(args.csv, table.to_csv().encode())
    return 0


def _cmd_synth(args):
    spec = read_scene(args.scene)
    result = render(spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.scene).stem
    fileio.write_ppm(out_dir / f"{stem}.ppm", result.image)
    fileio.write_labels(out_dir / f"{stem}.txt", result.boxes)
    smap = build_scale_map(spec.rig, args.stride)
    fileio.write_frame(out_dir / f"{stem}.frm", fuse(result.image, to_channel(smap)))
    fileio.write_float_dump(out_dir / f"{stem}_s.f32", result.scale.astype(np.float32))
    print(f"synth: {stem} -> image, {len(result.boxes)} GT boxes, frame, scale dump")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fieldscale",
        description="Ground-plane scale channels and classic obstacle detection for tilted monocular cameras.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scalemap", help="encode the per-pixel scale field as an 8-bit PGM")
    p.add_argument("--config", required=True, help="rig/pipeline key-value config")
    p.add_argument("--stride", type=int, default=None, help="grid stride in pixels (default: config value)")
    p.add_argument("--out", required=True, help="output PGM path")
    p.add_argument("--float-dump", default=None, help="optional raw float32 dump of the dense field")
    p.set_defaults(func=_cmd_scalemap)

    p = sub.add_parser("detect-classic", help="run the green-filter/distance-transform detector")
    p.add_argument("--image", required=True, help="input PPM image")
    p.add_argument("--config", required=True, help="rig/pipeline key-value config")
    p.add_argument("--out-labels", required=True, help="output prediction label file")
    p.add_argument("--viz-dir", default=None, help="directory for annotated visualizations")
    p.set_defaults(func=_cmd_detect_classic)

    p = sub.add_parser("fuse", help="fuse a PPM + scale PGM into an FRM1 frame (or split one)")
    p.add_argument("--rgb", help="input PPM")
    p.add_argument("--s", help="input scale-plane PGM")
    p.add_argument("--out", help="output FRM1 path")
    p.add_argument("--split", help="FRM1 to split instead of fusing")
    p.add_argument("--out-rgb", help="output PPM when splitting")
    p.add_argument("--out-s", help="output PGM when splitting")
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("augment", help="write seeded augmented replicas of a frame + labels")
    p.add_argument("--frame", required=True, help="input FRM1 frame")
    p.add_argument("--labels", required=True, help="input label file")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0, help="seed of the first replica; replica i uses seed+i")
    p.add_argument("--n", type=int, default=1, help="number of replicas")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p.add_argument("--translate", type=float, default=0.10, help="translation range, fraction of size")
    p.add_argument("--rotate", type=float, default=5.0, help="rotation range, degrees")
    p.add_argument("--shear", type=float, default=2.0, help="shear range, degrees")
    p.add_argument("--scale", type=float, default=0.10, help="scale range, fraction")
    p.add_argument("--hflip-prob", type=float, default=0.5)
    p.add_argument("--sat", type=float, default=0.50, help="saturation range, fraction")
    p.add_argument("--val", type=float, default=0.50, help="value range, fraction")
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("eval", help="score prediction labels against ground truth")
    p.add_argument("--pred", required=True, help="directory of prediction label files")
    p.add_argument("--gt", required=True, help="directory of ground-truth label files")
    p.add_argument("--csv", default=None, help="optional CSV output path")
    p.add_argument("--jobs", type=int, default=1, help="parallel label loading")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="render a synthetic scene with exact ground truth")
    p.add_argument("--scene", required=True, help="scene key-value file")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--stride", type=int, default=32, help="stride for the frame's scale plane")
    p.add_argument("--seed", type=int, default=0, help="accepted for symmetry; rendering is deterministic")
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if args.command == "fuse":
        if args.split:
            if not (args.out_rgb and args.out_s):
                print("fuse --split requires --out-rgb and --out-s", file=sys.stderr)
                return 1
        elif not (args.rgb and args.s and args.out):
            print("fuse requires --rgb, --s and --out (or --split)", file=sys.stderr)
            return 1
    try:
        return args.func(args)
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
