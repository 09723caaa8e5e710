"""Synthetic checkout scenarios with exact geometric ground truth.

Objects follow linear trajectories that cross a tray rectangle. Centers
start on the half-integer pixel grid and velocities are integer-valued, so
in the noiseless setting every coordinate is an exact dyadic float, the
center is never closer than half a pixel to a pixel boundary, and the
first/last in-tray frames are exact integers. Each object becomes
detectable several frames before entering the tray, giving a tracker time
to confirm it by the entry frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterator

import numpy as np

from .background import ROI_MASK_NAME, ROI_META_NAME, RoiMask
from .detections import BBox, Detection, DetectionSet
from .media import SequenceMeta, write_pnm, write_sequence


class SimulatorError(Exception):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    fps: int = 30
    duration_s: int = 60
    width: int = 640
    height: int = 360
    tray: tuple[int, int, int, int] = (220, 120, 200, 120)  # x, y, w, h
    n_objects: int = 8
    class_pool: tuple[int, ...] = tuple(range(1, 21))
    speed_min: float = 2.0
    speed_max: float = 6.0
    size_min: int = 24
    size_max: int = 80
    noise_sigma: float = 0.0
    drop_prob: float = 0.0
    fp_rate: float = 0.0
    embedding_noise: float = 0.05
    embedding_dim: int = 0
    num_classes: int = 116
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.duration_s <= 60:
            raise SimulatorError(f"duration_s must be in (0, 60], got {self.duration_s}")
        for name in ("drop_prob", "fp_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SimulatorError(f"{name} must be in [0,1], got {v}")
        tx, ty, tw, th = self.tray
        if tx < 0 or ty < 0 or tw < 1 or th < 1 or tx + tw > self.width or ty + th > self.height:
            raise SimulatorError(f"tray {self.tray} not inside {self.width}x{self.height} frame")
        if not self.class_pool:
            raise SimulatorError("class_pool must be non-empty")
        if max(self.class_pool) > self.num_classes or min(self.class_pool) < 1:
            raise SimulatorError("class_pool outside [1, num_classes]")
        if not 0 < self.speed_min <= self.speed_max:
            raise SimulatorError("need 0 < speed_min <= speed_max")
        if not 2 <= self.size_min <= self.size_max:
            raise SimulatorError("need 2 <= size_min <= size_max")

    @property
    def frame_count(self) -> int:
        return self.fps * self.duration_s


@dataclass(frozen=True)
class ObjectTruth:
    class_id: int
    anchor: tuple[float, float]  # center position at anchor_frame
    velocity: tuple[int, int]  # px per frame
    size: tuple[int, int]  # bbox w, h
    anchor_frame: int
    first_frame: int  # first detectable frame
    last_frame: int  # last detectable frame
    enter_frame: int  # first center-in-tray frame
    exit_frame: int  # last center-in-tray frame

    def center(self, frame: int) -> tuple[float, float]:
        dt = frame - self.anchor_frame
        return (
            self.anchor[0] + dt * self.velocity[0],
            self.anchor[1] + dt * self.velocity[1],
        )


@dataclass(frozen=True)
class ScenarioTruth:
    video_id: int
    fps: Fraction
    objects: list[ObjectTruth] = field(default_factory=list)

    def intervals(self) -> list[tuple[int, int, float, float]]:
        """(video_id, class_id, t_enter, t_exit) rows in object order."""
        fps = float(self.fps)
        return [
            (self.video_id, o.class_id, o.enter_frame / fps, o.exit_frame / fps)
            for o in self.objects
        ]


_INT_KEYS = (
    "fps", "duration_s", "width", "height", "n_objects",
    "embedding_dim", "num_classes", "seed", "size_min", "size_max",
)
_FLOAT_KEYS = ("speed_min", "speed_max", "noise_sigma", "drop_prob", "fp_rate", "embedding_noise")


def _parse_pool(text: str) -> tuple[int, ...]:
    """Class pool syntax: comma-separated ids and inclusive ranges, e.g.
    `1-5,9,12`."""
    out: list[int] = []
    for piece in text.split(","):
        piece = piece.strip()
        if "-" in piece[1:]:
            lo, hi = piece.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(piece))
    return tuple(out)


def config_from_mapping(mapping: dict[str, str]) -> ScenarioConfig:
    kwargs: dict[str, object] = {}
    for key, raw in mapping.items():
        if key in _INT_KEYS:
            kwargs[key] = int(raw)
        elif key in _FLOAT_KEYS:
            kwargs[key] = float(raw)
        elif key == "tray":
            parts = [int(v) for v in raw.split(",")]
            if len(parts) != 4:
                raise SimulatorError(f"tray needs x,y,w,h, got {raw!r}")
            kwargs[key] = tuple(parts)
        elif key == "class_pool":
            kwargs[key] = _parse_pool(raw)
        else:
            raise SimulatorError(f"unknown scenario key {key!r}")
    try:
        return ScenarioConfig(**kwargs)
    except TypeError as exc:
        raise SimulatorError(f"bad scenario config: {exc}") from exc


def center_in_tray(cx: float, cy: float, tray: tuple[int, int, int, int]) -> bool:
    """Same membership rule the counting stage applies to the tray mask:
    the center's containing pixel must be a tray pixel."""
    tx, ty, tw, th = tray
    return tx <= math.floor(cx) < tx + tw and ty <= math.floor(cy) < ty + th


def tray_mask(config: ScenarioConfig) -> RoiMask:
    bits = np.zeros((config.height, config.width), dtype=np.uint8)
    tx, ty, tw, th = config.tray
    bits[ty : ty + th, tx : tx + tw] = 1
    return RoiMask(bits=bits, bbox=(tx, ty, tw, th), area=tw * th)


def _sample_object(
    rng: np.random.Generator, config: ScenarioConfig, frames: int
) -> ObjectTruth:
    tx, ty, tw, th = config.tray
    for _ in range(1000):
        vx = int(rng.integers(-int(config.speed_max), int(config.speed_max) + 1))
        vy = int(rng.integers(-int(config.speed_max), int(config.speed_max) + 1))
        speed = math.hypot(vx, vy)
        if not config.speed_min <= speed <= config.speed_max:
            continue
        ax = float(rng.integers(tx + tw // 4, tx + (3 * tw) // 4)) + 0.5
        ay = float(rng.integers(ty + th // 4, ty + (3 * th) // 4)) + 0.5
        fa = int(rng.integers(frames // 8, frames - frames // 8))
        # walk the contiguous in-tray run containing the anchor frame
        enter = fa
        while enter - 1 >= 0 and center_in_tray(
            ax + (enter - 1 - fa) * vx, ay + (enter - 1 - fa) * vy, config.tray
        ):
            enter -= 1
        exit_ = fa
        while exit_ + 1 < frames and center_in_tray(
            ax + (exit_ + 1 - fa) * vx, ay + (exit_ + 1 - fa) * vy, config.tray
        ):
            exit_ += 1
        if exit_ - enter < 4:
            continue
        lead = int(rng.integers(10, 21))
        tail = int(rng.integers(3, 11))
        first = enter - lead
        last = min(frames - 1, exit_ + tail)
        if first < 0 or exit_ > frames - 4:
            continue
        w = 2 * int(rng.integers(config.size_min // 2, config.size_max // 2 + 1))
        h = 2 * int(rng.integers(config.size_min // 2, config.size_max // 2 + 1))
        return ObjectTruth(
            class_id=int(rng.choice(config.class_pool)),
            anchor=(ax, ay),
            velocity=(vx, vy),
            size=(w, h),
            anchor_frame=fa,
            first_frame=first,
            last_frame=last,
            enter_frame=enter,
            exit_frame=exit_,
        )
    raise SimulatorError("could not place an object crossing the tray; widen the config")


def _unit(vec: np.ndarray) -> np.ndarray:
    return vec / np.linalg.norm(vec)


def generate(
    config: ScenarioConfig, video_id: int = 1
) -> tuple[DetectionSet, SequenceMeta, ScenarioTruth]:
    """Deterministic scenario: detections, sequence metadata, exact truth."""
    rng = np.random.default_rng(config.seed)
    frames = config.frame_count
    objects = [_sample_object(rng, config, frames) for _ in range(config.n_objects)]
    identities = {
        i: _unit(rng.standard_normal(config.embedding_dim))
        for i in range(len(objects))
        if config.embedding_dim
    }
    records: list[Detection] = []
    for i, obj in enumerate(objects):
        for frame in range(obj.first_frame, obj.last_frame + 1):
            cx, cy = obj.center(frame)
            if not (0 <= cx < config.width and 0 <= cy < config.height):
                continue
            if config.drop_prob and rng.random() < config.drop_prob:
                continue
            if config.noise_sigma:
                cx += float(rng.normal(0, config.noise_sigma))
                cy += float(rng.normal(0, config.noise_sigma))
            w, h = obj.size
            embedding = None
            if config.embedding_dim:
                noisy = identities[i] + config.embedding_noise * rng.standard_normal(
                    config.embedding_dim
                )
                embedding = _unit(noisy)
            records.append(
                Detection(
                    frame=frame,
                    class_id=obj.class_id,
                    confidence=round(float(rng.uniform(0.6, 0.99)), 4),
                    bbox=BBox(x=cx - w / 2, y=cy - h / 2, w=float(w), h=float(h)),
                    embedding=embedding,
                )
            )
    if config.fp_rate:
        for frame in range(frames):
            if rng.random() >= config.fp_rate:
                continue
            w = 2 * int(rng.integers(config.size_min // 2, config.size_max // 2 + 1))
            h = 2 * int(rng.integers(config.size_min // 2, config.size_max // 2 + 1))
            cx = float(rng.uniform(w / 2, config.width - w / 2))
            cy = float(rng.uniform(h / 2, config.height - h / 2))
            embedding = None
            if config.embedding_dim:
                embedding = _unit(rng.standard_normal(config.embedding_dim))
            records.append(
                Detection(
                    frame=frame,
                    class_id=int(rng.choice(config.class_pool)),
                    confidence=round(float(rng.uniform(0.6, 0.99)), 4),
                    bbox=BBox(x=cx - w / 2, y=cy - h / 2, w=float(w), h=float(h)),
                    embedding=embedding,
                )
            )
    dets = DetectionSet(
        num_classes=config.num_classes,
        embedding_dim=config.embedding_dim,
        records=records,
    )
    meta = SequenceMeta(
        fps=Fraction(config.fps),
        width=config.width,
        height=config.height,
        frame_count=frames,
        channels=1,
    )
    truth = ScenarioTruth(video_id=video_id, fps=Fraction(config.fps), objects=objects)
    return dets, meta, truth


def write_truth(truth: ScenarioTruth) -> str:
    """Ground-truth lines `video_id class_id t_enter t_exit`; repr floats
    so parsing returns the exact same values."""
    return "".join(
        f"{v} {c} {t0!r} {t1!r}\n" for v, c, t0, t1 in truth.intervals()
    )


# Flat rendering: intensity levels chosen so the temporal median recovers
# the static scene and the tray is the brighter of the two modes.
BACKGROUND_LEVEL = 40
TRAY_LEVEL = 200
OBJECT_LEVEL = 110


def render_frames(config: ScenarioConfig, truth: ScenarioTruth) -> Iterator[np.ndarray]:
    """Flat grayscale rendering of the scene, one frame at a time."""
    tx, ty, tw, th = config.tray
    base = np.full((config.height, config.width), BACKGROUND_LEVEL, dtype=np.uint8)
    base[ty : ty + th, tx : tx + tw] = TRAY_LEVEL
    for frame in range(config.frame_count):
        img = base.copy()
        for obj in truth.objects:
            if not obj.first_frame <= frame <= obj.last_frame:
                continue
            cx, cy = obj.center(frame)
            w, h = obj.size
            x0 = max(0, int(math.floor(cx - w / 2)))
            y0 = max(0, int(math.floor(cy - h / 2)))
            x1 = min(config.width, int(math.floor(cx + w / 2)))
            y1 = min(config.height, int(math.floor(cy + h / 2)))
            if x1 > x0 and y1 > y0:
                img[y0:y1, x0:x1] = OBJECT_LEVEL
        yield img


def write_scenario(
    config: ScenarioConfig,
    out_dir,
    video_id: int = 1,
    render: bool = False,
) -> ScenarioTruth:
    """Materialize a scenario: dets.txt, truth.txt, roi/ (exact tray mask),
    sequence.meta, and optionally frames/ with flat-rendered pixels."""
    from .background import write_roi
    from .detections import write_detections
    from .media import write_meta

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dets, meta, truth = generate(config, video_id)
    write_detections(out / "dets.txt", dets)
    (out / "truth.txt").write_text(write_truth(truth), encoding="utf-8")
    write_roi(out / "roi", tray_mask(config))
    if render:
        write_sequence(out / "frames", meta, render_frames(config, truth))
    else:
        (out / "frames").mkdir(exist_ok=True)
        write_meta(out / "frames", meta)
    return truth
