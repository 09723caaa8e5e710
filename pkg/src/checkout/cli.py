"""Command-line entry point.

Subcommands mirror the pipeline stages: roi, filter, track, count, run,
score, simulate, prep. Exit codes: 0 success, 1 input error, 2 stage
failure.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import background, counting, detections, evaluation, media, pipeline, prep, simulator, tracking
from .config import ConfigError, parse_config_text

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_STAGE = 2


class InputError(Exception):
    pass


def _load_pipeline_config(args) -> pipeline.PipelineConfig:
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise InputError(f"missing config file {path}")
        config = pipeline.load_config(path)
    else:
        config = pipeline.PipelineConfig()
    overrides = {
        name: getattr(args, name)
        for name in (
            "video_id", "fraction", "seed", "k1", "k2", "open_radius", "close_radius",
            "invert", "nms_threshold", "roi_filter", "min_overlap", "track_scope",
            "n_init", "max_age", "merge_window_s",
        )
        if hasattr(args, name)
    }
    return pipeline.apply_overrides(config, overrides)


def _add_config_flags(p: argparse.ArgumentParser, *names: str) -> None:
    specs = {
        "video_id": dict(type=int),
        "fraction": dict(type=float),
        "seed": dict(type=int),
        "k1": dict(type=float),
        "k2": dict(type=float),
        "open_radius": dict(type=int),
        "close_radius": dict(type=int),
        "invert": dict(action="store_true", default=None),
        "nms_threshold": dict(type=float),
        "roi_filter": dict(choices=[pipeline.ROI_CENTER, pipeline.ROI_OVERLAP]),
        "min_overlap": dict(type=float),
        "track_scope": dict(choices=[pipeline.SCOPE_ROI, pipeline.SCOPE_GLOBAL]),
        "n_init": dict(type=int),
        "max_age": dict(type=int),
        "merge_window_s": dict(type=int),
    }
    for name in names:
        flag = "--" + name.replace("_", "-")
        spec = dict(specs[name])
        spec.setdefault("default", None)
        p.add_argument(flag, dest=name, **spec)


def cmd_roi(args) -> int:
    config = _load_pipeline_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    roi = pipeline.compute_roi_stage(args.seq, config, out)
    x, y, w, h = roi.bbox
    print(f"roi: bbox={x},{y},{w},{h} area={roi.area}")
    return EXIT_OK


def cmd_filter(args) -> int:
    config = _load_pipeline_config(args)
    dets_path = Path(args.dets)
    if not dets_path.is_file():
        raise InputError(f"missing detection file {dets_path}")
    roi = background.read_roi(args.roi)
    dets = detections.parse_detections(dets_path)
    filtered = pipeline.filter_stage(dets, roi, config)
    detections.write_detections(args.out, filtered)
    print(f"filter: {len(dets.records)} -> {len(filtered.records)} detections")
    return EXIT_OK


def _frame_count_and_fps(args) -> tuple[int, Fraction]:
    if getattr(args, "seq", None):
        meta = media.read_meta(Path(args.seq))
        return meta.frame_count, meta.fps
    if getattr(args, "frames", None):
        return args.frames, Fraction(args.fps)
    raise InputError("need --seq DIR or --frames N")


def cmd_track(args) -> int:
    config = _load_pipeline_config(args)
    dets_path = Path(args.dets)
    if not dets_path.is_file():
        raise InputError(f"missing detection file {dets_path}")
    dets = detections.parse_detections(dets_path)
    frame_count, _ = _frame_count_and_fps(args)
    tracker = tracking.Tracker(config.tracker_config())
    grouped = dets.by_frame()
    lines: list[str] = []
    for frame in range(frame_count):
        views = tracker.step(grouped.get(frame, []), frame)
        lines.extend(tracking.format_track_line(frame, v) for v in views)
    Path(args.out).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    print(f"track: {frame_count} frames, {tracker._next_id - 1} tracks")
    return EXIT_OK


def cmd_count(args) -> int:
    config = _load_pipeline_config(args)
    dets_path = Path(args.dets)
    if not dets_path.is_file():
        raise InputError(f"missing detection file {dets_path}")
    dets = detections.parse_detections(dets_path)
    roi = background.read_roi(args.roi)
    frame_count, fps = _frame_count_and_fps(args)
    events, _ = pipeline.track_count_stage(dets, roi, config, frame_count, fps)
    Path(args.out).write_text(evaluation.write_submission(events), encoding="utf-8")
    print(f"count: {len(events)} events")
    return EXIT_OK


def cmd_run(args) -> int:
    config = _load_pipeline_config(args)
    result = pipeline.run_pipeline(
        config,
        seq_dir=args.seq,
        dets_path=args.dets,
        out_dir=args.out,
        roi_dir=args.roi,
    )
    for report in result.reports:
        print(report.throughput_line())
    print(f"run: {len(result.events)} events -> {result.out_dir / 'submission.txt'}")
    return EXIT_OK


def cmd_score(args) -> int:
    sub_path, truth_path = Path(args.submission), Path(args.truth)
    for p in (sub_path, truth_path):
        if not p.is_file():
            raise InputError(f"missing file {p}")
    records = evaluation.read_submission(sub_path)
    intervals = evaluation.read_truth(truth_path)
    if args.per_video:
        videos = sorted({r.video_id for r in records} | {i.video_id for i in intervals})
        for v in videos:
            tally = evaluation.match(
                [r for r in records if r.video_id == v],
                [i for i in intervals if i.video_id == v],
            )
            print(f"video {v}: {tally.tp} {tally.fp} {tally.fn} {evaluation.f1(tally):.4f}")
    tally = evaluation.match(records, intervals)
    print(f"{tally.tp} {tally.fp} {tally.fn} {evaluation.f1(tally):.4f}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise InputError(f"missing config file {path}")
        config = simulator.config_from_mapping(
            parse_config_text(path.read_text(encoding="utf-8"))
        )
    else:
        config = simulator.ScenarioConfig()
    truth = simulator.write_scenario(
        config, args.out, video_id=args.video_id, render=args.render
    )
    print(f"simulate: {len(truth.objects)} objects -> {args.out}")
    return EXIT_OK


_AUGS = ("mosaic", "cutmix", "blur", "geo")


def _load_prep_inputs(images_dir: Path, masks_dir: Path) -> list[tuple[str, prep.LabeledImage]]:
    label_map = {}
    map_path = masks_dir / "label_map.txt"
    if map_path.is_file():
        label_map = prep.read_label_map(map_path)
    items: list[tuple[str, prep.LabeledImage]] = []
    for img_path in sorted(images_dir.iterdir()):
        if img_path.suffix not in (".pgm", ".ppm"):
            continue
        mask_path = masks_dir / (img_path.stem + ".pgm")
        if not mask_path.is_file():
            raise InputError(f"no mask for {img_path.name}")
        pixels = media.read_pnm(img_path)
        mask = media.read_pnm(mask_path)
        boxes = [
            (label_map.get(label, label), box)
            for label, box in prep.mask_to_bboxes(mask)
        ]
        items.append((img_path.stem, prep.LabeledImage(pixels=pixels, boxes=boxes)))
    if not items:
        raise InputError(f"no images found in {images_dir}")
    return items


def _write_labeled(out_dir: Path, name: str, img: prep.LabeledImage) -> None:
    ext = ".pgm" if img.pixels.ndim == 2 else ".ppm"
    media.write_pnm(out_dir / (name + ext), img.pixels)
    prep.write_labels(out_dir / (name + ".txt"), img.boxes)


def cmd_prep(args) -> int:
    images_dir, masks_dir = Path(args.images), Path(args.masks)
    for d in (images_dir, masks_dir):
        if not d.is_dir():
            raise InputError(f"missing directory {d}")
    augs = [a.strip() for a in args.aug.split(",") if a.strip()]
    unknown = [a for a in augs if a not in _AUGS]
    if unknown:
        raise InputError(f"unknown augmentations {unknown}; choose from {','.join(_AUGS)}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    items = _load_prep_inputs(images_dir, masks_dir)
    produced = 0
    for stem, img in items:
        prep.write_labels(out_dir / (stem + ".txt"), img.boxes)
    if "blur" in augs:
        for stem, img in items:
            blurred = prep.LabeledImage(
                pixels=prep.blur(img.pixels, args.blur_kernel), boxes=list(img.boxes)
            )
            _write_labeled(out_dir, f"{stem}_blur", blurred)
            produced += 1
    if "geo" in augs:
        for i, (stem, img) in enumerate(items):
            params = prep.random_distort_params(args.seed + i)
            _write_labeled(out_dir, f"{stem}_geo", prep.geometric_distort(img, params))
            produced += 1
    if "mosaic" in augs:
        for g in range(len(items) // 4):
            group = [img for _, img in items[4 * g : 4 * g + 4]]
            out = prep.mosaic(group, args.mosaic_size, args.seed + g)
            _write_labeled(out_dir, f"mosaic_{g:04d}", out)
            produced += 1
    if "cutmix" in augs:
        rng = np.random.default_rng(args.seed)
        for g in range(len(items) // 2):
            a, b = items[2 * g][1], items[2 * g + 1][1]
            lam = float(rng.uniform(0.3, 0.7))
            out = prep.cutmix(a, b, lam, args.seed + g)
            _write_labeled(out_dir, f"cutmix_{g:04d}", out)
            produced += 1
    print(f"prep: {len(items)} inputs, {produced} augmented outputs -> {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="checkout",
        description="Region-based retail checkout counting pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("roi", help="estimate background and extract the tray ROI")
    p.add_argument("--seq", required=True, help="frame sequence directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", default=None, help="flat key=value config file")
    _add_config_flags(p, "fraction", "seed", "k1", "k2", "open_radius", "close_radius", "invert")
    p.set_defaults(func=cmd_roi)

    p = sub.add_parser("filter", help="apply NMS and ROI filtering to detections")
    p.add_argument("--dets", required=True)
    p.add_argument("--roi", required=True, help="ROI directory (roi.pgm + roi.meta)")
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--nms", dest="nms_threshold", type=float, default=None)
    _add_config_flags(p, "roi_filter", "min_overlap", "track_scope")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("track", help="run the tracker and dump per-frame track state")
    p.add_argument("--dets", required=True)
    p.add_argument("--seq", default=None)
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--fps", type=int, default=30)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    _add_config_flags(p, "n_init", "max_age")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("count", help="track detections and emit a submission file")
    p.add_argument("--dets", required=True)
    p.add_argument("--roi", required=True)
    p.add_argument("--seq", default=None)
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--fps", type=int, default=30)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    _add_config_flags(p, "video_id", "n_init", "max_age", "merge_window_s")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("run", help="full pipeline: ROI, filter, track, count")
    p.add_argument("--seq", required=True)
    p.add_argument("--dets", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--roi", default=None, help="precomputed ROI directory (skips background)")
    p.add_argument("--config", default=None)
    _add_config_flags(
        p, "video_id", "fraction", "seed", "k1", "k2", "open_radius", "close_radius",
        "invert", "nms_threshold", "roi_filter", "min_overlap", "track_scope",
        "n_init", "max_age", "merge_window_s",
    )
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("score", help="score a submission against ground truth")
    p.add_argument("--submission", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--per-video", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("simulate", help="generate a synthetic scenario")
    p.add_argument("--config", default=None, help="scenario key=value file")
    p.add_argument("--out", required=True)
    p.add_argument("--video-id", type=int, default=1)
    p.add_argument("--render", action="store_true", help="also write flat-rendered frames")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("prep", help="extract boxes from masks and augment")
    p.add_argument("--images", required=True)
    p.add_argument("--masks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--aug", default="mosaic,cutmix,blur,geo")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--blur-kernel", type=int, default=5)
    p.add_argument("--mosaic-size", type=int, default=640)
    p.set_defaults(func=cmd_prep)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, media.MediaError, detections.DetectionError,
            evaluation.EvaluationError, simulator.SimulatorError, prep.PrepError,
            background.RoiError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except pipeline.PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        # config validation happens before any stage runs
        return EXIT_INPUT if exc.stage == "config" else EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
