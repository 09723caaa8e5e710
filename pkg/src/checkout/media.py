"""Frame sequences stored as numbered PGM/PPM files plus a text sidecar.

A sequence directory holds `sequence.meta` (one key=value per line: fps,
width, height, frame_count, channels) and frames named `frame_000000.pgm`
(grayscale, P5) or `.ppm` (RGB, P6), maxval 255. fps is kept as an exact
rational `num/den` so rates like 30000/1001 survive round trips.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable

import numpy as np

META_NAME = "sequence.meta"

# Integer luma weights: gray = (299 R + 587 G + 114 B + 500) // 1000
_LUMA = (299, 587, 114)


class MediaError(Exception):
    """Raised for malformed sequences, sidecars, or frame files."""


@dataclass(frozen=True)
class SequenceMeta:
    fps: Fraction
    width: int
    height: int
    frame_count: int
    channels: int

    def __post_init__(self):
        if self.fps <= 0:
            raise MediaError(f"fps must be positive, got {self.fps}")
        if self.width < 1 or self.height < 1 or self.frame_count < 1:
            raise MediaError("width, height and frame_count must be >= 1")
        if self.channels not in (1, 3):
            raise MediaError(f"channels must be 1 or 3, got {self.channels}")

    @property
    def frame_shape(self) -> tuple[int, ...]:
        if self.channels == 1:
            return (self.height, self.width)
        return (self.height, self.width, 3)


@dataclass(frozen=True)
class Frame:
    index: int
    pixels: np.ndarray


class FrameSequence:
    """Immutable handle on an opened sequence directory."""

    def __init__(self, path: Path, meta: SequenceMeta):
        self.path = Path(path)
        self.meta = meta

    def __len__(self) -> int:
        return self.meta.frame_count

    def frame_path(self, index: int) -> Path:
        ext = "pgm" if self.meta.channels == 1 else "ppm"
        return self.path / f"frame_{index:06d}.{ext}"


def parse_fps(text: str) -> Fraction:
    text = text.strip()
    try:
        if "/" in text:
            num, den = text.split("/", 1)
            return Fraction(int(num), int(den))
        return Fraction(int(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise MediaError(f"bad fps value {text!r}") from exc


def format_fps(fps: Fraction) -> str:
    return f"{fps.numerator}/{fps.denominator}"


def read_meta(path: Path) -> SequenceMeta:
    meta_path = Path(path) / META_NAME
    if not meta_path.is_file():
        raise MediaError(f"missing sidecar {meta_path}")
    fields: dict[str, str] = {}
    for raw in meta_path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    try:
        return SequenceMeta(
            fps=parse_fps(fields["fps"]),
            width=int(fields["width"]),
            height=int(fields["height"]),
            frame_count=int(fields["frame_count"]),
            channels=int(fields["channels"]),
        )
    except KeyError as exc:
        raise MediaError(f"sidecar missing key {exc.args[0]}") from exc
    except ValueError as exc:
        raise MediaError(f"bad sidecar value: {exc}") from exc


def write_meta(path: Path, meta: SequenceMeta) -> None:
    lines = [
        f"fps={format_fps(meta.fps)}",
        f"width={meta.width}",
        f"height={meta.height}",
        f"frame_count={meta.frame_count}",
        f"channels={meta.channels}",
    ]
    (Path(path) / META_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_pnm_header(data: bytes, path) -> tuple[bytes, int, int, int]:
    """Parse a P5/P6 header; returns (magic, width, height, payload offset)."""
    pos = 0

    def token() -> bytes:
        nonlocal pos
        while pos < len(data):
            c = data[pos : pos + 1]
            if c == b"#":
                while pos < len(data) and data[pos : pos + 1] != b"\n":
                    pos += 1
            elif c.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MediaError(f"malformed frame header in {path}")
        return data[start:pos]

    magic = token()
    if magic not in (b"P5", b"P6"):
        raise MediaError(f"malformed frame header in {path}: magic {magic!r}")
    width = int(token())
    height = int(token())
    maxval = int(token())
    if maxval != 255:
        raise MediaError(f"unsupported maxval {maxval} in {path}")
    pos += 1  # single whitespace byte before the binary payload
    return magic, width, height, pos


def read_pnm(path) -> np.ndarray:
    """Read a binary PGM (P5) or PPM (P6) file as uint8 pixels."""
    data = Path(path).read_bytes()
    magic, width, height, offset = _read_pnm_header(data, path)
    channels = 1 if magic == b"P5" else 3
    expected = width * height * channels
    payload = data[offset : offset + expected]
    if len(payload) != expected:
        raise MediaError(f"corrupt frame file {path}: expected {expected} pixel bytes")
    arr = np.frombuffer(payload, dtype=np.uint8)
    if channels == 1:
        return arr.reshape(height, width).copy()
    return arr.reshape(height, width, 3).copy()


def write_pnm(path, pixels: np.ndarray) -> None:
    pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
    if pixels.ndim == 2:
        magic = b"P5"
        height, width = pixels.shape
    elif pixels.ndim == 3 and pixels.shape[2] == 3:
        magic = b"P6"
        height, width = pixels.shape[:2]
    else:
        raise MediaError(f"cannot write pixel grid of shape {pixels.shape}")
    header = b"%s\n%d %d\n255\n" % (magic, width, height)
    Path(path).write_bytes(header + pixels.tobytes())


def open_sequence(path) -> FrameSequence:
    """Open a sequence directory, validating the sidecar against the files present."""
    path = Path(path)
    meta = read_meta(path)
    seq = FrameSequence(path, meta)
    ext = "pgm" if meta.channels == 1 else "ppm"
    present = len([p for p in path.iterdir() if p.name.startswith("frame_") and p.suffix == f".{ext}"])
    if present != meta.frame_count:
        raise MediaError(
            f"frame-count mismatch in {path}: sidecar says {meta.frame_count}, found {present}"
        )
    return seq


def read_frame(seq: FrameSequence, index: int) -> Frame:
    if not 0 <= index < seq.meta.frame_count:
        raise MediaError(f"frame index {index} out of range [0, {seq.meta.frame_count})")
    pixels = read_pnm(seq.frame_path(index))
    if pixels.shape != seq.meta.frame_shape:
        raise MediaError(
            f"frame {index} has shape {pixels.shape}, sidecar says {seq.meta.frame_shape}"
        )
    return Frame(index=index, pixels=pixels)


def write_sequence(path, meta: SequenceMeta, frames: Iterable[np.ndarray]) -> FrameSequence:
    """Write frames plus sidecar; the inverse of open_sequence on pixel data."""
    path = Path(path)
    os.makedirs(path, exist_ok=True)
    ext = "pgm" if meta.channels == 1 else "ppm"
    count = 0
    for i, pixels in enumerate(frames):
        if pixels.shape != meta.frame_shape:
            raise MediaError(f"frame {i} has shape {pixels.shape}, meta says {meta.frame_shape}")
        write_pnm(path / f"frame_{i:06d}.{ext}", pixels)
        count += 1
    if count != meta.frame_count:
        raise MediaError(f"wrote {count} frames, meta says {meta.frame_count}")
    write_meta(path, meta)
    return FrameSequence(path, meta)


def sample_indices(frame_count: int, fraction: float, seed: int) -> np.ndarray:
    """ceil(fraction * frame_count) distinct indices, uniform without
    replacement, sorted ascending. Deterministic per seed."""
    if frame_count < 1:
        raise MediaError("frame_count must be >= 1")
    if not 0.0 < fraction <= 1.0:
        raise MediaError(f"fraction must be in (0, 1], got {fraction}")
    k = math.ceil(fraction * frame_count)
    rng = np.random.default_rng(seed)
    picks = rng.choice(frame_count, size=k, replace=False)
    return np.sort(picks).astype(np.int64)


def rgb_to_gray(pixels: np.ndarray) -> np.ndarray:
    """RGB to 8-bit luma with integer weights 0.299/0.587/0.114."""
    if pixels.ndim == 2:
        return pixels
    p = pixels.astype(np.uint32)
    gray = (_LUMA[0] * p[:, :, 0] + _LUMA[1] * p[:, :, 1] + _LUMA[2] * p[:, :, 2] + 500) // 1000
    return gray.astype(np.uint8)
