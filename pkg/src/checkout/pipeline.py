"""End-to-end orchestration: background -> ROI -> filter -> track -> count
-> submission, with per-stage artifacts persisted into a run directory.

Every stage output is a pure function of (inputs, config); rerunning a
pipeline over the same inputs produces byte-identical artifacts. The run
directory keeps a manifest of content hashes for reproducibility checks.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

from . import background, counting, detections, media, tracking
from .config import parse_config_text
from .evaluation import write_submission

ROI_CENTER = "center"
ROI_OVERLAP = "overlap"
SCOPE_ROI = "roi"
SCOPE_GLOBAL = "global"


class PipelineError(Exception):
    """A stage failure, labeled with the stage that raised it."""

    def __init__(self, stage: str, cause: Exception | str):
        self.stage = stage
        super().__init__(f"stage {stage}: {cause}")


@dataclass(frozen=True)
class PipelineConfig:
    video_id: int = 1
    fraction: float = 0.10
    seed: int = 0
    k1: float = 1.0
    k2: float = 2.0
    open_radius: int = 2
    close_radius: int = 4
    invert: bool = False
    nms_threshold: float = 0.5
    roi_filter: str = ROI_CENTER  # center | overlap
    min_overlap: float = 0.25
    track_scope: str = SCOPE_ROI  # roi: track filtered dets; global: filter at count time
    n_init: int = 3
    max_age: int = 30
    gallery_budget: int = 100
    max_appearance_cost: float = 0.4
    max_iou_cost: float = 0.7
    gate: float = tracking.CHI2_GATE_4DOF
    merge_window_s: int = 0

    def __post_init__(self):
        if self.video_id < 1:
            raise PipelineError("config", f"video_id must be >= 1, got {self.video_id}")
        if not 0.0 < self.fraction <= 1.0:
            raise PipelineError("config", f"fraction must be in (0,1], got {self.fraction}")
        if self.k1 <= 0 or self.k2 <= 0:
            raise PipelineError("config", "k1 and k2 must be positive")
        if self.roi_filter not in (ROI_CENTER, ROI_OVERLAP):
            raise PipelineError("config", f"unknown roi_filter {self.roi_filter!r}")
        if self.track_scope not in (SCOPE_ROI, SCOPE_GLOBAL):
            raise PipelineError("config", f"unknown track_scope {self.track_scope!r}")
        if self.n_init < 1 or self.max_age < 0 or self.gallery_budget < 1:
            raise PipelineError("config", "invalid tracker lifecycle settings")
        if not 0.0 <= self.nms_threshold <= 1.0:
            raise PipelineError("config", f"nms_threshold must be in [0,1]")

    def tracker_config(self) -> tracking.TrackerConfig:
        return tracking.TrackerConfig(
            n_init=self.n_init,
            max_age=self.max_age,
            gallery_budget=self.gallery_budget,
            max_appearance_cost=self.max_appearance_cost,
            max_iou_cost=self.max_iou_cost,
            gate=self.gate,
        )

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"


_BOOL_VALUES = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def config_from_mapping(mapping: dict[str, str]) -> PipelineConfig:
    kwargs = {}
    by_name = {f.name: f for f in fields(PipelineConfig)}
    for key, raw in mapping.items():
        f = by_name.get(key)
        if f is None:
            raise PipelineError("config", f"unknown config key {key!r}")
        if f.type == "bool":
            flag = _BOOL_VALUES.get(raw.strip().lower())
            if flag is None:
                raise PipelineError("config", f"bad boolean for {key}: {raw!r}")
            kwargs[key] = flag
        elif f.type == "int":
            try:
                kwargs[key] = int(raw)
            except ValueError:
                raise PipelineError("config", f"bad integer for {key}: {raw!r}") from None
        elif f.type == "float":
            try:
                kwargs[key] = float(raw)
            except ValueError:
                raise PipelineError("config", f"bad number for {key}: {raw!r}") from None
        else:
            kwargs[key] = raw
    return PipelineConfig(**kwargs)


def load_config(path) -> PipelineConfig:
    return config_from_mapping(parse_config_text(Path(path).read_text(encoding="utf-8")))


def apply_overrides(config: PipelineConfig, overrides: dict[str, object]) -> PipelineConfig:
    set_values = {k: v for k, v in overrides.items() if v is not None}
    return replace(config, **set_values) if set_values else config


@dataclass
class StageReport:
    name: str
    seconds: float
    frames: int = 0

    def throughput_line(self) -> str:
        rate = self.frames / self.seconds if self.seconds > 0 and self.frames else 0.0
        if self.frames:
            return f"stage {self.name}: {self.frames} frames in {self.seconds:.3f} s ({rate:.1f} frames/s)"
        return f"stage {self.name}: {self.seconds:.3f} s"


@dataclass
class RunResult:
    submission_text: str
    events: list[counting.CountEvent]
    reports: list[StageReport]
    out_dir: Path


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def compute_roi_stage(
    seq_dir, config: PipelineConfig, out_dir: Path
) -> background.RoiMask:
    try:
        seq = media.open_sequence(seq_dir)
        bg = background.estimate_background(seq, config.fraction, config.seed)
        media.write_pnm(out_dir / "background.pgm", bg.pixels)
        roi = background.roi_from_background(
            bg,
            k1=config.k1,
            k2=config.k2,
            open_radius=config.open_radius,
            close_radius=config.close_radius,
            invert=config.invert,
        )
        background.write_roi(out_dir / "roi", roi)
        return roi
    except (media.MediaError, background.RoiError) as exc:
        raise PipelineError("roi", exc) from exc


def filter_stage(
    dets: detections.DetectionSet, roi: background.RoiMask, config: PipelineConfig
) -> detections.DetectionSet:
    try:
        after_nms = detections.run_nms(dets, config.nms_threshold)
        if config.track_scope == SCOPE_GLOBAL:
            return after_nms
        if config.roi_filter == ROI_OVERLAP:
            return detections.filter_roi_overlap(after_nms, roi.bits, config.min_overlap)
        return detections.filter_roi(after_nms, roi.bits)
    except detections.DetectionError as exc:
        raise PipelineError("filter", exc) from exc


def track_count_stage(
    dets: detections.DetectionSet,
    roi: background.RoiMask,
    config: PipelineConfig,
    frame_count: int,
    fps,
    dump_path: Path | None = None,
) -> tuple[list[counting.CountEvent], int]:
    """Run the tracker over every frame index and collect count events.

    Returns (events, frames processed). The tracker sees every frame, with
    or without detections, so coasting and deletion advance in real time.
    """
    try:
        tracker = tracking.Tracker(config.tracker_config())
        counter = counting.Counter(roi.bits)
        grouped = dets.by_frame()
        if grouped:
            last_det_frame = max(grouped)
            if last_det_frame >= frame_count:
                raise PipelineError(
                    "track", f"detection at frame {last_det_frame} beyond frame_count {frame_count}"
                )
        dump_lines: list[str] = []
        for frame in range(frame_count):
            views = tracker.step(grouped.get(frame, []), frame)
            counter.observe(views, frame)
            if dump_path is not None:
                dump_lines.extend(tracking.format_track_line(frame, v) for v in views)
        if dump_path is not None:
            dump_path.write_text("".join(line + "\n" for line in dump_lines), encoding="utf-8")
        events = counting.merge_events(
            counter.finalize(config.video_id, fps), config.merge_window_s
        )
        return events, frame_count
    except (tracking.TrackingError, counting.CountingError) as exc:
        raise PipelineError("track", exc) from exc


def run_pipeline(
    config: PipelineConfig,
    seq_dir,
    dets_path,
    out_dir,
    roi_dir=None,
    dump_tracks: bool = True,
) -> RunResult:
    """Full pipeline. With roi_dir given, background estimation is skipped
    and only the sequence sidecar (fps, frame count) is read from seq_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports: list[StageReport] = []

    t0 = time.perf_counter()
    if roi_dir is not None:
        try:
            roi = background.read_roi(roi_dir)
            meta = media.read_meta(Path(seq_dir))
        except (background.RoiError, media.MediaError) as exc:
            raise PipelineError("roi", exc) from exc
    else:
        roi = compute_roi_stage(seq_dir, config, out)
        meta = media.read_meta(Path(seq_dir))
    reports.append(StageReport("roi", time.perf_counter() - t0))

    t0 = time.perf_counter()
    dets_path = Path(dets_path)
    if not dets_path.is_file():
        raise PipelineError("detect", f"missing detection file {dets_path}")
    try:
        dets = detections.parse_detections(dets_path)
    except detections.DetectionError as exc:
        raise PipelineError("detect", exc) from exc
    filtered = filter_stage(dets, roi, config)
    detections.write_detections(out / "filtered.txt", filtered)
    reports.append(StageReport("filter", time.perf_counter() - t0, meta.frame_count))

    t0 = time.perf_counter()
    dump = out / "tracks.txt" if dump_tracks else None
    events, processed = track_count_stage(
        filtered, roi, config, meta.frame_count, meta.fps, dump
    )
    reports.append(StageReport("track", time.perf_counter() - t0, processed))

    t0 = time.perf_counter()
    (out / "events.csv").write_text(
        "video_id,class_id,timestamp_s,track_id,first_frame\n"
        + "".join(
            f"{e.video_id},{e.class_id},{e.timestamp_s},{e.track_id},{e.first_frame}\n"
            for e in events
        ),
        encoding="utf-8",
    )
    submission = write_submission(events)
    (out / "submission.txt").write_text(submission, encoding="utf-8")
    reports.append(StageReport("count", time.perf_counter() - t0))

    manifest = [f"config_sha256={hashlib.sha256(config.to_text().encode()).hexdigest()}"]
    for name in ("background.pgm", "roi/roi.pgm", "roi/roi.meta", "filtered.txt", "tracks.txt", "events.csv", "submission.txt"):
        p = out / name
        if p.is_file():
            manifest.append(f"{name}={_sha256(p)}")
    (out / "manifest.txt").write_text("\n".join(manifest) + "\n", encoding="utf-8")

    return RunResult(submission_text=submission, events=events, reports=reports, out_dir=out)
