"""Static background estimation and region-of-interest extraction.

The background of a fixed-camera checkout video is the per-pixel temporal
median over a uniform random sample of frames. The ROI (the tray area) is
cut from that single background image by an intensity band derived from its
mean and standard deviation, then cleaned up morphologically.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels, media


class RoiError(Exception):
    """Raised when no usable ROI can be extracted."""


@dataclass(frozen=True)
class BackgroundImage:
    pixels: np.ndarray  # uint8, shape (h, w)

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])


@dataclass(frozen=True)
class ThresholdParams:
    mu: float
    sigma: float
    k1: float = 1.0
    k2: float = 2.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("k1 and k2 must be positive")


@dataclass(frozen=True)
class RoiMask:
    bits: np.ndarray  # uint8 0/1, shape (h, w)
    bbox: tuple[int, int, int, int]  # x, y, w, h tight over set bits
    area: int


def estimate_background(
    seq: media.FrameSequence, fraction: float = 0.10, seed: int = 0
) -> BackgroundImage:
    """Per-pixel temporal median over ceil(fraction * frame_count) sampled
    frames. RGB sequences are converted to grayscale first. Even sample
    counts take the lower of the two middle values, so the result stays in
    the original 8-bit domain."""
    indices = media.sample_indices(seq.meta.frame_count, fraction, seed)
    stack = np.empty((len(indices), seq.meta.height, seq.meta.width), dtype=np.uint8)
    for row, idx in enumerate(indices):
        stack[row] = media.rgb_to_gray(media.read_frame(seq, int(idx)).pixels)
    return BackgroundImage(pixels=kernels.median_stack(stack))


def background_stats(bg: BackgroundImage) -> tuple[float, float]:
    """Mean and population standard deviation of the background intensities."""
    p = bg.pixels.astype(np.float64)
    return float(p.mean()), float(p.std())


def compute_threshold_bounds(params: ThresholdParams) -> tuple[float, float]:
    """Intensity band selecting the ROI from the background image.

    lower = (mu - k1*sigma) / k2 and upper = (mu + k1*sigma) / (k1 + k2),
    exactly as stated, unclamped. The denominators differ, so for many
    parameter choices lower exceeds upper; binarize treats that as an
    empty band."""
    lower = (params.mu - params.k1 * params.sigma) / params.k2
    upper = (params.mu + params.k1 * params.sigma) / (params.k1 + params.k2)
    return lower, upper


def binarize(bg: BackgroundImage, lower: float, upper: float) -> np.ndarray:
    """Bit set iff lower <= pixel <= upper; empty interval gives all zeros."""
    if lower > upper:
        return np.zeros_like(bg.pixels, dtype=np.uint8)
    p = bg.pixels.astype(np.float64)
    return ((p >= lower) & (p <= upper)).astype(np.uint8)


def extract_roi(mask: np.ndarray, open_radius: int = 2, close_radius: int = 4) -> RoiMask:
    """Morphological open then close, keep the largest 4-connected
    component, fill its interior holes. Raises RoiError when nothing
    survives cleanup."""
    mask = np.ascontiguousarray(mask, dtype=np.uint8)
    if mask.size == 0:
        raise RoiError("no ROI found: empty grid")
    cleaned = kernels.dilate(kernels.erode(mask, open_radius), open_radius)
    cleaned = kernels.erode(kernels.dilate(cleaned, close_radius), close_radius)
    labels, count = kernels.label_components(cleaned)
    if count == 0:
        raise RoiError("no ROI found")
    areas = np.bincount(labels.ravel(), minlength=count + 1)[1:]
    best = int(np.argmax(areas)) + 1  # first label wins area ties
    component = (labels == best).astype(np.uint8)
    filled = kernels.fill_holes(component)
    ys, xs = np.nonzero(filled)
    x0, y0 = int(xs.min()), int(ys.min())
    bbox = (x0, y0, int(xs.max()) - x0 + 1, int(ys.max()) - y0 + 1)
    return RoiMask(bits=filled, bbox=bbox, area=int(filled.sum()))


def roi_from_background(
    bg: BackgroundImage,
    k1: float = 1.0,
    k2: float = 2.0,
    open_radius: int = 2,
    close_radius: int = 4,
    invert: bool = False,
) -> RoiMask:
    """Full band-threshold ROI path from an estimated background image.

    invert selects the complement of the intensity band before cleanup,
    for scenes where the tray is the mode the band excludes."""
    mu, sigma = background_stats(bg)
    lower, upper = compute_threshold_bounds(ThresholdParams(mu=mu, sigma=sigma, k1=k1, k2=k2))
    mask = binarize(bg, lower, upper)
    if invert:
        mask = (1 - mask).astype(np.uint8)
    return extract_roi(mask, open_radius=open_radius, close_radius=close_radius)


ROI_MASK_NAME = "roi.pgm"
ROI_META_NAME = "roi.meta"


def write_roi(path, roi: RoiMask) -> None:
    """Serialize as a 0/255 P5 PGM plus a key=value sidecar."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    media.write_pnm(path / ROI_MASK_NAME, (roi.bits * 255).astype(np.uint8))
    x, y, w, h = roi.bbox
    lines = [f"bbox={x},{y},{w},{h}", f"area={roi.area}"]
    (path / ROI_META_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_roi(path) -> RoiMask:
    path = Path(path)
    pgm = path / ROI_MASK_NAME
    if not pgm.is_file():
        raise RoiError(f"missing {pgm}")
    bits = (media.read_pnm(pgm) > 0).astype(np.uint8)
    fields: dict[str, str] = {}
    meta_path = path / ROI_META_NAME
    if meta_path.is_file():
        for raw in meta_path.read_text(encoding="utf-8").splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    ys, xs = np.nonzero(bits)
    if xs.size == 0:
        raise RoiError(f"empty ROI mask in {path}")
    x0, y0 = int(xs.min()), int(ys.min())
    bbox = (x0, y0, int(xs.max()) - x0 + 1, int(ys.max()) - y0 + 1)
    area = int(bits.sum())
    if "bbox" in fields:
        stated = tuple(int(v) for v in fields["bbox"].split(","))
        if stated != bbox:
            raise RoiError(f"roi.meta bbox {stated} does not match mask bbox {bbox}")
    if "area" in fields and int(fields["area"]) != area:
        raise RoiError(f"roi.meta area {fields['area']} does not match mask area {area}")
    return RoiMask(bits=bits, bbox=bbox, area=area)
