"""First-appearance counting: one event per confirmed track's first frame
inside the ROI, timestamped as floor(frame / fps) whole seconds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .tracking import CONFIRMED, TrackView


class CountingError(Exception):
    pass


@dataclass(frozen=True)
class CountEvent:
    video_id: int
    class_id: int
    timestamp_s: int
    track_id: int
    first_frame: int


def timestamp_of(frame: int, fps: Fraction | int) -> int:
    """floor(frame / fps), exact for rational fps (no float division)."""
    if frame < 0:
        raise CountingError(f"frame must be >= 0, got {frame}")
    fps = Fraction(fps)
    if fps <= 0:
        raise CountingError(f"fps must be positive, got {fps}")
    return (frame * fps.denominator) // fps.numerator


class Counter:
    """Accumulates first-ROI-appearance frames per confirmed track.

    Keeps its own records so events survive later track deletion.
    """

    def __init__(self, roi_bits: np.ndarray):
        self.roi_bits = np.ascontiguousarray(roi_bits, dtype=np.uint8)
        self._first_frame: dict[int, tuple[int, int]] = {}  # id -> (class, frame)
        self._last_frame: int | None = None

    def observe(self, updates: list[TrackView], frame: int) -> None:
        if self._last_frame is not None and frame <= self._last_frame:
            raise CountingError(
                f"frames must be strictly increasing: {frame} after {self._last_frame}"
            )
        self._last_frame = frame
        h, w = self.roi_bits.shape
        for view in updates:
            if view.status != CONFIRMED or view.id in self._first_frame:
                continue
            cx, cy = view.bbox.center
            px = min(max(int(math.floor(cx)), 0), w - 1)
            py = min(max(int(math.floor(cy)), 0), h - 1)
            if self.roi_bits[py, px]:
                self._first_frame[view.id] = (view.class_id, frame)

    def finalize(self, video_id: int, fps: Fraction | int) -> list[CountEvent]:
        events = [
            CountEvent(
                video_id=video_id,
                class_id=class_id,
                timestamp_s=timestamp_of(first, fps),
                track_id=track_id,
                first_frame=first,
            )
            for track_id, (class_id, first) in self._first_frame.items()
        ]
        events.sort(key=lambda e: (e.timestamp_s, e.class_id, e.track_id))
        return events


def merge_events(events: list[CountEvent], window_s: int) -> list[CountEvent]:
    """Fragmentation mitigation, off by default: suppress an event when a
    kept event of the same class is at most window_s seconds older."""
    if window_s <= 0:
        return list(events)
    kept: list[CountEvent] = []
    last_kept: dict[int, int] = {}
    for e in sorted(events, key=lambda e: (e.timestamp_s, e.class_id, e.track_id)):
        prev = last_kept.get(e.class_id)
        if prev is not None and e.timestamp_s - prev <= window_s:
            continue
        kept.append(e)
        last_kept[e.class_id] = e.timestamp_s
    return kept
