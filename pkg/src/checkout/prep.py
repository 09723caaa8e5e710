"""Training-data preparation: bounding boxes from segmentation masks and
four label-preserving augmentations (mosaic, cutmix, blur, geometric
distortion). All randomness flows through an explicit seed."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .detections import BBox

# a transformed box survives only if at least this fraction of its area
# stays visible
MIN_BOX_VISIBILITY = 0.25


class PrepError(Exception):
    pass


@dataclass
class LabeledImage:
    pixels: np.ndarray  # uint8 RGB (h, w, 3) or grayscale (h, w)
    boxes: list[tuple[int, BBox]] = field(default_factory=list)

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])


def mask_to_bboxes(mask: np.ndarray) -> list[tuple[int, BBox]]:
    """Tight bbox per nonzero label value, ascending label order."""
    mask = np.asarray(mask)
    out: list[tuple[int, BBox]] = []
    for value in np.unique(mask):
        v = int(value)
        if v == 0:
            continue
        ys, xs = np.nonzero(mask == value)
        x0, y0 = int(xs.min()), int(ys.min())
        out.append(
            (v, BBox(x=x0, y=y0, w=int(xs.max()) - x0 + 1, h=int(ys.max()) - y0 + 1))
        )
    return out


def _nn_resize(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbor resize; identity when sizes match."""
    in_h, in_w = pixels.shape[:2]
    rows = (np.arange(out_h) * in_h) // out_h
    cols = (np.arange(out_w) * in_w) // out_w
    return pixels[rows][:, cols]


def _clip_box(
    class_id: int, box: BBox, width: int, height: int
) -> tuple[int, BBox] | None:
    """Clip to the canvas; drop when the visible part falls under the
    visibility threshold of the original area."""
    x0 = max(box.x, 0.0)
    y0 = max(box.y, 0.0)
    x1 = min(box.x + box.w, float(width))
    y1 = min(box.y + box.h, float(height))
    if x1 - x0 <= 0 or y1 - y0 <= 0:
        return None
    if (x1 - x0) * (y1 - y0) < MIN_BOX_VISIBILITY * box.w * box.h:
        return None
    return class_id, BBox(x=x0, y=y0, w=x1 - x0, h=y1 - y0)


def mosaic(imgs: Sequence[LabeledImage], out_size: int, seed: int) -> LabeledImage:
    """Tile four images into one canvas split at a seeded random center.

    Each input is nearest-neighbor scaled to exactly fill its quadrant
    (order: top-left, top-right, bottom-left, bottom-right), and its boxes
    follow the same scale and offset.
    """
    if len(imgs) != 4:
        raise PrepError(f"mosaic needs exactly 4 images, got {len(imgs)}")
    if out_size < 4:
        raise PrepError(f"out_size too small: {out_size}")
    rng = np.random.default_rng(seed)
    quarter = out_size // 4
    cx = int(rng.integers(quarter, out_size - quarter + 1))
    cy = int(rng.integers(quarter, out_size - quarter + 1))
    sample = imgs[0].pixels
    shape = (out_size, out_size) + sample.shape[2:]
    canvas = np.zeros(shape, dtype=np.uint8)
    quadrants = [
        (0, 0, cx, cy),
        (cx, 0, out_size - cx, cy),
        (0, cy, cx, out_size - cy),
        (cx, cy, out_size - cx, out_size - cy),
    ]
    boxes: list[tuple[int, BBox]] = []
    for img, (qx, qy, qw, qh) in zip(imgs, quadrants):
        canvas[qy : qy + qh, qx : qx + qw] = _nn_resize(img.pixels, qh, qw)
        sx = qw / img.width
        sy = qh / img.height
        for class_id, b in img.boxes:
            moved = BBox(x=b.x * sx + qx, y=b.y * sy + qy, w=b.w * sx, h=b.h * sy)
            kept = _clip_box(class_id, moved, out_size, out_size)
            if kept is not None:
                boxes.append(kept)
    return LabeledImage(pixels=canvas, boxes=boxes)


def cutmix(a: LabeledImage, b: LabeledImage, lam: float, seed: int) -> LabeledImage:
    """Replace a seeded rectangle of area ratio (1 - lam) in a with b's
    pixels at the same coordinates.

    a's boxes keep their geometry but are dropped when the hole hides more
    than the visibility threshold allows; b's boxes are clipped to the hole.
    """
    if a.pixels.shape != b.pixels.shape:
        raise PrepError(f"shape mismatch: {a.pixels.shape} vs {b.pixels.shape}")
    if not 0.0 < lam <= 1.0:
        raise PrepError(f"lam must be in (0, 1], got {lam}")
    h, w = a.pixels.shape[:2]
    rng = np.random.default_rng(seed)
    cut = math.sqrt(1.0 - lam)
    rw = int(round(w * cut))
    rh = int(round(h * cut))
    if rw == 0 or rh == 0:
        return LabeledImage(pixels=a.pixels.copy(), boxes=list(a.boxes))
    x0 = int(rng.integers(0, w - rw + 1))
    y0 = int(rng.integers(0, h - rh + 1))
    pixels = a.pixels.copy()
    pixels[y0 : y0 + rh, x0 : x0 + rw] = b.pixels[y0 : y0 + rh, x0 : x0 + rw]
    boxes: list[tuple[int, BBox]] = []
    for class_id, box in a.boxes:
        ix = max(0.0, min(box.x + box.w, x0 + rw) - max(box.x, x0))
        iy = max(0.0, min(box.y + box.h, y0 + rh) - max(box.y, y0))
        visible = box.w * box.h - ix * iy
        if visible >= MIN_BOX_VISIBILITY * box.w * box.h:
            boxes.append((class_id, box))
    for class_id, box in b.boxes:
        nx0 = max(box.x, float(x0))
        ny0 = max(box.y, float(y0))
        nx1 = min(box.x + box.w, float(x0 + rw))
        ny1 = min(box.y + box.h, float(y0 + rh))
        if nx1 - nx0 <= 0 or ny1 - ny0 <= 0:
            continue
        if (nx1 - nx0) * (ny1 - ny0) < MIN_BOX_VISIBILITY * box.w * box.h:
            continue
        boxes.append((class_id, BBox(x=nx0, y=ny0, w=nx1 - nx0, h=ny1 - ny0)))
    return LabeledImage(pixels=pixels, boxes=boxes)


def blur(pixels: np.ndarray, kernel: int) -> np.ndarray:
    """k x k box filter with reflect padding (edge pixel included), rounded
    to nearest integer, ties up. Grayscale or per-channel RGB."""
    return kernels.box_blur(pixels, kernel)


@dataclass(frozen=True)
class DistortParams:
    scale: float = 1.0
    crop: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)  # unit-square x,y,w,h
    hflip: bool = False
    rotations: int = 0  # number of 90-degree counterclockwise turns

    def __post_init__(self):
        if not 0.5 <= self.scale <= 2.0:
            raise PrepError(f"scale must be in [0.5, 2.0], got {self.scale}")
        x, y, w, h = self.crop
        if not (0 <= x and 0 <= y and w > 0 and h > 0 and x + w <= 1 and y + h <= 1):
            raise PrepError(f"crop must lie inside the unit square: {self.crop}")


def random_distort_params(seed: int) -> DistortParams:
    rng = np.random.default_rng(seed)
    scale = float(rng.uniform(0.5, 2.0))
    cw = float(rng.uniform(0.5, 1.0))
    ch = float(rng.uniform(0.5, 1.0))
    cx = float(rng.uniform(0.0, 1.0 - cw))
    cy = float(rng.uniform(0.0, 1.0 - ch))
    return DistortParams(
        scale=scale,
        crop=(cx, cy, cw, ch),
        hflip=bool(rng.integers(0, 2)),
        rotations=int(rng.integers(0, 4)),
    )


def geometric_distort(img: LabeledImage, params: DistortParams) -> LabeledImage:
    """Crop, then nearest-neighbor scale, then horizontal flip, then rotate
    by 90-degree steps; boxes follow the composite mapping."""
    h, w = img.height, img.width
    fx, fy, fw, fh = params.crop
    x0 = int(math.floor(fx * w))
    y0 = int(math.floor(fy * h))
    cw = max(1, int(round(fw * w)))
    ch = max(1, int(round(fh * h)))
    if x0 + cw > w or y0 + ch > h:
        raise PrepError(f"crop {params.crop} exceeds image {w}x{h}")
    pixels = img.pixels[y0 : y0 + ch, x0 : x0 + cw]
    boxes: list[tuple[int, BBox]] = []
    for class_id, b in img.boxes:
        kept = _clip_box(class_id, BBox(b.x - x0, b.y - y0, b.w, b.h), cw, ch)
        if kept is not None:
            boxes.append(kept)

    out_h = max(1, int(round(ch * params.scale)))
    out_w = max(1, int(round(cw * params.scale)))
    if (out_h, out_w) != (ch, cw):
        pixels = _nn_resize(pixels, out_h, out_w)
        sx, sy = out_w / cw, out_h / ch
        boxes = [(c, BBox(b.x * sx, b.y * sy, b.w * sx, b.h * sy)) for c, b in boxes]

    if params.hflip:
        pixels = pixels[:, ::-1]
        boxes = [(c, BBox(out_w - b.x - b.w, b.y, b.w, b.h)) for c, b in boxes]

    for _ in range(params.rotations % 4):
        pixels = np.rot90(pixels)
        cur_w = out_w
        boxes = [(c, BBox(b.y, cur_w - b.x - b.w, b.h, b.w)) for c, b in boxes]
        out_h, out_w = out_w, out_h

    return LabeledImage(pixels=np.ascontiguousarray(pixels), boxes=boxes)


def write_labels(path, boxes: Sequence[tuple[int, BBox]]) -> None:
    """Per-image label sidecar: one `class_id x y w h` line per box."""
    lines = [f"{c} {b.x:.2f} {b.y:.2f} {b.w:.2f} {b.h:.2f}" for c, b in boxes]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def read_label_map(path) -> dict[int, int]:
    """Optional sidecar mapping mask label values to class ids, one
    `label=class_id` line per entry."""
    mapping: dict[int, int] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise PrepError(f"line {lineno}: expected label=class_id, got {line!r}")
        try:
            mapping[int(key.strip())] = int(value.strip())
        except ValueError as exc:
            raise PrepError(f"line {lineno}: {exc}") from exc
    return mapping
