"""Detection interchange format, IoU, non-maximal suppression, ROI filtering.

Interchange file (UTF-8): two header comments declaring `# num_classes=N`
and `# embedding_dim=D`, then one whitespace-separated data line per
detection: `frame class_id confidence x y w h [e1 ... eD]`. Canonical
formatting is confidence to 4 decimals, bbox to 2, embeddings to 6, records
sorted by (frame, descending confidence). parse and serialize are mutually
inverse on canonical streams.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels


class DetectionError(Exception):
    """Raised for malformed interchange streams or invalid detections."""


@dataclass(frozen=True)
class BBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.w, self.h)):
            raise DetectionError(f"bbox coordinates must be finite: {self}")
        if self.w <= 0 or self.h <= 0:
            raise DetectionError(f"bbox sides must be positive: {self}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h], dtype=np.float64)


@dataclass(frozen=True)
class Detection:
    frame: int
    class_id: int
    confidence: float
    bbox: BBox
    embedding: np.ndarray | None = None

    def __post_init__(self):
        if self.frame < 0:
            raise DetectionError(f"frame must be >= 0, got {self.frame}")
        if self.class_id < 1:
            raise DetectionError(f"class_id must be >= 1, got {self.class_id}")
        if not 0.0 <= self.confidence <= 1.0:
            raise DetectionError(f"confidence out of [0,1]: {self.confidence}")


def _norm_tolerance(dim: int) -> float:
    # Serialized embeddings are quantized to 6 decimals; a unit vector of
    # dimension D can drift in norm by up to sqrt(D) * 5e-7 under that
    # rounding, so the acceptance band scales with the dimension.
    return 1e-6 + 6e-7 * math.sqrt(dim)


def check_embedding(vec: np.ndarray, dim: int) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (dim,):
        raise DetectionError(f"embedding dimension {vec.shape} != ({dim},)")
    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > _norm_tolerance(dim):
        raise DetectionError(f"embedding norm {norm} not unit within tolerance")
    return vec


@dataclass
class DetectionSet:
    num_classes: int
    embedding_dim: int = 0  # 0 = appearance-free stream
    records: list[Detection] = field(default_factory=list)

    def __post_init__(self):
        if self.num_classes < 1:
            raise DetectionError(f"num_classes must be >= 1, got {self.num_classes}")
        if self.embedding_dim < 0:
            raise DetectionError("embedding_dim must be >= 0")
        self.validate()

    def validate(self) -> None:
        for det in self.records:
            if det.class_id > self.num_classes:
                raise DetectionError(
                    f"class_id {det.class_id} exceeds num_classes {self.num_classes}"
                )
            if self.embedding_dim == 0:
                if det.embedding is not None:
                    raise DetectionError("embedding present in an embedding-free stream")
            else:
                if det.embedding is None:
                    raise DetectionError("missing embedding in an embedding-carrying stream")
                check_embedding(det.embedding, self.embedding_dim)
        self.records.sort(key=lambda d: (d.frame, -d.confidence))

    def by_frame(self) -> dict[int, list[Detection]]:
        grouped: dict[int, list[Detection]] = {}
        for det in self.records:
            grouped.setdefault(det.frame, []).append(det)
        return grouped


def parse_detections(stream) -> DetectionSet:
    """Parse the interchange format from a text stream, file path, or string."""
    if isinstance(stream, (str, Path)) and "\n" not in str(stream):
        text = Path(stream).read_text(encoding="utf-8")
    elif isinstance(stream, str):
        text = stream
    else:
        text = stream.read()
    num_classes: int | None = None
    embedding_dim: int | None = None
    records: list[Detection] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            key, sep, value = body.partition("=")
            key = key.strip()
            if sep and key in ("num_classes", "embedding_dim"):
                try:
                    parsed = int(value.strip())
                except ValueError as exc:
                    raise DetectionError(f"line {lineno}: bad header value {value!r}") from exc
                if key == "num_classes":
                    num_classes = parsed
                else:
                    embedding_dim = parsed
            continue
        if num_classes is None or embedding_dim is None:
            raise DetectionError(f"line {lineno}: data before num_classes/embedding_dim headers")
        parts = line.split()
        expected = 7 + embedding_dim
        if len(parts) != expected:
            raise DetectionError(
                f"line {lineno}: expected {expected} fields, got {len(parts)}"
            )
        try:
            frame = int(parts[0])
            class_id = int(parts[1])
            confidence = float(parts[2])
            bbox = BBox(*(float(v) for v in parts[3:7]))
            embedding = None
            if embedding_dim:
                embedding = np.array([float(v) for v in parts[7:]], dtype=np.float64)
        except DetectionError as exc:
            raise DetectionError(f"line {lineno}: {exc}") from exc
        except ValueError as exc:
            raise DetectionError(f"line {lineno}: malformed field: {exc}") from exc
        try:
            records.append(
                Detection(
                    frame=frame,
                    class_id=class_id,
                    confidence=confidence,
                    bbox=bbox,
                    embedding=embedding,
                )
            )
        except DetectionError as exc:
            raise DetectionError(f"line {lineno}: {exc}") from exc
    if num_classes is None or embedding_dim is None:
        raise DetectionError("stream missing num_classes/embedding_dim headers")
    try:
        return DetectionSet(num_classes=num_classes, embedding_dim=embedding_dim, records=records)
    except DetectionError as exc:
        raise DetectionError(f"invalid stream: {exc}") from exc


def serialize_detections(dets: DetectionSet) -> str:
    """Canonical text form; parse(serialize(s)) == s byte for byte."""
    dets.validate()
    out = io.StringIO()
    out.write(f"# num_classes={dets.num_classes}\n")
    out.write(f"# embedding_dim={dets.embedding_dim}\n")
    for det in dets.records:
        b = det.bbox
        fields = [
            str(det.frame),
            str(det.class_id),
            f"{det.confidence:.4f}",
            f"{b.x:.2f}",
            f"{b.y:.2f}",
            f"{b.w:.2f}",
            f"{b.h:.2f}",
        ]
        if dets.embedding_dim:
            fields.extend(f"{v:.6f}" for v in det.embedding)
        out.write(" ".join(fields) + "\n")
    return out.getvalue()


def write_detections(path, dets: DetectionSet) -> None:
    Path(path).write_text(serialize_detections(dets), encoding="utf-8")


def iou(a: BBox, b: BBox) -> float:
    ix = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.w * a.h + b.w * b.h - inter
    return inter / union if union > 0 else 0.0


def nms(dets: Sequence[Detection], iou_threshold: float = 0.5) -> list[Detection]:
    """Greedy per-class suppression within one frame.

    Keeps the highest-confidence remaining detection and discards
    same-class detections overlapping it above the threshold. Output is
    descending confidence, input order breaking ties.
    """
    if not dets:
        return []
    frames = {d.frame for d in dets}
    if len(frames) > 1:
        raise DetectionError(f"nms input spans frames {sorted(frames)}")
    boxes = np.stack([d.bbox.as_array() for d in dets])
    classes = np.array([d.class_id for d in dets], dtype=np.int64)
    scores = np.array([d.confidence for d in dets], dtype=np.float64)
    keep = kernels.nms_keep(boxes, scores, classes, iou_threshold)
    return [dets[i] for i in keep]


def filter_roi(dets: DetectionSet, roi_bits: np.ndarray) -> DetectionSet:
    """Keep detections whose bbox center pixel lies on a set ROI bit.

    The center pixel is (floor(x + w/2), floor(y + h/2)), clipped into the
    grid so boxes hanging past the frame edge are still testable.
    """
    bits = np.ascontiguousarray(roi_bits, dtype=np.uint8)
    h, w = bits.shape
    kept: list[Detection] = []
    for det in dets.records:
        cx, cy = det.bbox.center
        px = min(max(int(math.floor(cx)), 0), w - 1)
        py = min(max(int(math.floor(cy)), 0), h - 1)
        if bits[py, px]:
            kept.append(det)
    return DetectionSet(
        num_classes=dets.num_classes, embedding_dim=dets.embedding_dim, records=kept
    )


def filter_roi_overlap(dets: DetectionSet, roi_bits: np.ndarray, min_overlap: float) -> DetectionSet:
    """Area-ratio alternative: keep a detection when at least min_overlap of
    its (clipped) bbox area lies on set ROI bits."""
    bits = np.ascontiguousarray(roi_bits, dtype=np.uint8)
    h, w = bits.shape
    integral = np.zeros((h + 1, w + 1), dtype=np.int64)
    integral[1:, 1:] = np.cumsum(np.cumsum(bits.astype(np.int64), axis=0), axis=1)
    kept: list[Detection] = []
    for det in dets.records:
        b = det.bbox
        x0 = min(max(int(math.floor(b.x)), 0), w)
        y0 = min(max(int(math.floor(b.y)), 0), h)
        x1 = min(max(int(math.ceil(b.x + b.w)), 0), w)
        y1 = min(max(int(math.ceil(b.y + b.h)), 0), h)
        area = (x1 - x0) * (y1 - y0)
        if area <= 0:
            continue
        inside = int(
            integral[y1, x1] - integral[y0, x1] - integral[y1, x0] + integral[y0, x0]
        )
        if inside / area >= min_overlap:
            kept.append(det)
    return DetectionSet(
        num_classes=dets.num_classes, embedding_dim=dets.embedding_dim, records=kept
    )


def run_nms(dets: DetectionSet, iou_threshold: float = 0.5) -> DetectionSet:
    """Apply per-frame NMS across a whole detection set."""
    kept: list[Detection] = []
    for _, frame_dets in sorted(dets.by_frame().items()):
        kept.extend(nms(frame_dets, iou_threshold))
    return DetectionSet(
        num_classes=dets.num_classes, embedding_dim=dets.embedding_dim, records=kept
    )


def generate_random(
    rng: np.random.Generator,
    n: int,
    num_classes: int = 116,
    embedding_dim: int = 0,
    frame_range: int = 100,
    width: int = 1920,
    height: int = 1080,
) -> DetectionSet:
    """Random but valid detections; handy for property tests and benchmarks."""
    records = []
    for _ in range(n):
        w = float(rng.uniform(4, width / 4))
        h = float(rng.uniform(4, height / 4))
        x = float(rng.uniform(0, width - w))
        y = float(rng.uniform(0, height - h))
        embedding = None
        if embedding_dim:
            vec = rng.standard_normal(embedding_dim)
            embedding = vec / np.linalg.norm(vec)
        records.append(
            Detection(
                frame=int(rng.integers(0, frame_range)),
                class_id=int(rng.integers(1, num_classes + 1)),
                confidence=round(float(rng.uniform(0, 1)), 4),
                bbox=BBox(round(x, 2), round(y, 2), round(w, 2), round(h, 2)),
                embedding=embedding,
            )
        )
    return DetectionSet(num_classes=num_classes, embedding_dim=embedding_dim, records=records)
