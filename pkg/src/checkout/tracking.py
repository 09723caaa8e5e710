"""Multi-object tracking over per-frame detections.

Constant-velocity Kalman prediction in (cx, cy, aspect, height) space,
Mahalanobis gating, appearance-cosine matching cascade over confirmed
tracks in ascending-age groups, an IoU fallback stage for everything else
(tentative tracks included), Hungarian assignment throughout, and track
lifecycle management (Tentative -> Confirmed -> Deleted).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from . import kernels
from .detections import BBox, Detection

# chi-square 0.95 quantile, 4 degrees of freedom: gate on the squared
# Mahalanobis distance in measurement space
CHI2_GATE_4DOF = 9.4877

TENTATIVE = "Tentative"
CONFIRMED = "Confirmed"
DELETED = "Deleted"


class TrackingError(Exception):
    pass


@dataclass(frozen=True)
class TrackerConfig:
    n_init: int = 3
    max_age: int = 30
    gallery_budget: int = 100
    max_appearance_cost: float = 0.4
    max_iou_cost: float = 0.7
    gate: float = CHI2_GATE_4DOF
    std_weight_position: float = 1.0 / 20
    std_weight_velocity: float = 1.0 / 160


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray  # (8,): cx, cy, a, h, and their per-frame velocities
    covariance: np.ndarray  # (8, 8)


def _motion_matrix() -> np.ndarray:
    f = np.eye(8)
    for i in range(4):
        f[i, i + 4] = 1.0
    return f


_F = _motion_matrix()
_H = np.eye(4, 8)


def bbox_to_measurement(bbox: BBox) -> np.ndarray:
    """(x, y, w, h) -> (cx, cy, a=w/h, h)."""
    return np.array(
        [bbox.x + bbox.w / 2.0, bbox.y + bbox.h / 2.0, bbox.w / bbox.h, bbox.h],
        dtype=np.float64,
    )


def measurement_to_bbox(z: np.ndarray) -> BBox:
    cx, cy, a, h = (float(v) for v in z[:4])
    # a coasting track can drift to a degenerate size; floor it so the box
    # stays representable (IoU against it is ~0 anyway)
    h = max(h, 1e-6)
    w = max(a * h, 1e-6)
    return BBox(x=cx - w / 2.0, y=cy - h / 2.0, w=w, h=h)


def kalman_init(
    bbox: BBox, wp: float = 1.0 / 20, wv: float = 1.0 / 160
) -> KalmanState:
    """Positions from the measurement, velocities zero, diagonal covariance
    scaled by the measured height."""
    z = bbox_to_measurement(bbox)
    mean = np.zeros(8)
    mean[:4] = z
    h = z[3]
    std = np.array(
        [2 * wp * h, 2 * wp * h, 1e-2, 2 * wp * h,
         10 * wv * h, 10 * wv * h, 1e-5, 10 * wv * h]
    )
    return KalmanState(mean=mean, covariance=np.diag(std * std))


def kalman_predict(
    state: KalmanState, wp: float = 1.0 / 20, wv: float = 1.0 / 160
) -> KalmanState:
    h = state.mean[3]
    std = np.array(
        [wp * h, wp * h, 1e-2, wp * h, wv * h, wv * h, 1e-5, wv * h]
    )
    mean = _F @ state.mean
    cov = _F @ state.covariance @ _F.T + np.diag(std * std)
    cov = (cov + cov.T) / 2.0
    return KalmanState(mean=mean, covariance=cov)


def _project(state: KalmanState, wp: float) -> tuple[np.ndarray, np.ndarray]:
    h = state.mean[3]
    std = np.array([wp * h, wp * h, 1e-1, wp * h])
    mean = _H @ state.mean
    cov = _H @ state.covariance @ _H.T + np.diag(std * std)
    return mean, cov


def kalman_update(
    state: KalmanState,
    measurement: np.ndarray,
    wp: float = 1.0 / 20,
) -> KalmanState:
    z = np.asarray(measurement, dtype=np.float64)
    proj_mean, proj_cov = _project(state, wp)
    try:
        chol = scipy.linalg.cho_factor(proj_cov, lower=True, check_finite=False)
        gain = scipy.linalg.cho_solve(
            chol, (state.covariance @ _H.T).T, check_finite=False
        ).T
    except scipy.linalg.LinAlgError as exc:
        raise TrackingError(f"singular innovation covariance: {exc}") from exc
    innovation = z - proj_mean
    mean = state.mean + gain @ innovation
    cov = state.covariance - gain @ proj_cov @ gain.T
    cov = (cov + cov.T) / 2.0
    return KalmanState(mean=mean, covariance=cov)


def gating_distances(
    state: KalmanState, measurements: np.ndarray, wp: float = 1.0 / 20
) -> np.ndarray:
    """Squared Mahalanobis distance of each (n, 4) measurement row from the
    state's projection into measurement space."""
    z = np.atleast_2d(np.asarray(measurements, dtype=np.float64))
    proj_mean, proj_cov = _project(state, wp)
    try:
        chol = np.linalg.cholesky(proj_cov)
    except np.linalg.LinAlgError as exc:
        raise TrackingError(f"singular projected covariance: {exc}") from exc
    diff = z - proj_mean
    solved = scipy.linalg.solve_triangular(
        chol, diff.T, lower=True, check_finite=False
    )
    return np.sum(solved * solved, axis=0)


def gating_distance(state: KalmanState, det: Detection, wp: float = 1.0 / 20) -> float:
    return float(gating_distances(state, bbox_to_measurement(det.bbox)[None, :], wp)[0])


def appearance_cost(gallery: Sequence[np.ndarray], emb: np.ndarray) -> float:
    """min over the gallery of (1 - cosine similarity); 1.0 when the gallery
    is empty (neutral)."""
    if len(gallery) == 0:
        return 1.0
    emb = np.asarray(emb, dtype=np.float64)
    sims = [float(np.dot(g, emb)) for g in gallery]
    return 1.0 - max(sims)


def hungarian(
    cost: np.ndarray, forbidden: np.ndarray | None = None
) -> list[tuple[int, int]]:
    """Minimum-cost one-to-one assignment over allowed pairs.

    Forbidden pairs are set to a large finite sentinel so the solver stays
    total, then stripped from the result. Ties broken lexicographically by
    (row, col).
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.size == 0:
        return []
    if forbidden is not None:
        forbidden = np.asarray(forbidden, dtype=bool)
        if forbidden.all():
            return []
        finite_max = float(np.abs(cost[~forbidden]).max()) if (~forbidden).any() else 1.0
        sentinel = 1e6 * max(1.0, finite_max)
        cost = cost.copy()
        cost[forbidden] = sentinel
    rows, cols = kernels.solve_assignment(cost)
    pairs = list(zip(rows.tolist(), cols.tolist()))
    if forbidden is not None:
        pairs = [(r, c) for r, c in pairs if not forbidden[r, c]]
    return pairs


@dataclass
class Track:
    id: int
    class_id: int
    state: KalmanState
    status: str = TENTATIVE
    hits: int = 1
    age: int = 0
    gallery: list[np.ndarray] = field(default_factory=list)
    first_roi_frame: int | None = None

    def bbox(self) -> BBox:
        return measurement_to_bbox(self.state.mean)


@dataclass(frozen=True)
class TrackView:
    """Per-frame snapshot row returned by Tracker.step."""

    id: int
    class_id: int
    status: str
    bbox: BBox
    hits: int
    age: int


@dataclass(frozen=True)
class MatchResult:
    matches: list[tuple[int, int]]  # (track index, detection index)
    unmatched_tracks: list[int]
    unmatched_dets: list[int]


def _appearance_stage(
    tracks: list[Track],
    track_indices: list[int],
    dets: Sequence[Detection],
    det_indices: list[int],
    config: TrackerConfig,
) -> tuple[list[tuple[int, int]], list[int], list[int]]:
    n, m = len(track_indices), len(det_indices)
    cost = np.zeros((n, m))
    forbidden = np.zeros((n, m), dtype=bool)
    measurements = np.stack([bbox_to_measurement(dets[j].bbox) for j in det_indices])
    for i, ti in enumerate(track_indices):
        track = tracks[ti]
        gates = gating_distances(track.state, measurements, config.std_weight_position)
        for j, dj in enumerate(det_indices):
            det = dets[dj]
            if det.class_id != track.class_id or gates[j] > config.gate:
                forbidden[i, j] = True
                continue
            c = appearance_cost(track.gallery, det.embedding) if det.embedding is not None else 1.0
            cost[i, j] = c
            if c > config.max_appearance_cost:
                forbidden[i, j] = True
    pairs = hungarian(cost, forbidden)
    matched_t = {track_indices[r] for r, _ in pairs}
    matched_d = {det_indices[c] for _, c in pairs}
    return (
        [(track_indices[r], det_indices[c]) for r, c in pairs],
        [t for t in track_indices if t not in matched_t],
        [d for d in det_indices if d not in matched_d],
    )


def _iou_stage(
    tracks: list[Track],
    track_indices: list[int],
    dets: Sequence[Detection],
    det_indices: list[int],
    config: TrackerConfig,
) -> tuple[list[tuple[int, int]], list[int], list[int]]:
    n, m = len(track_indices), len(det_indices)
    cost = np.zeros((n, m))
    forbidden = np.zeros((n, m), dtype=bool)
    track_boxes = np.stack([tracks[t].bbox().as_array() for t in track_indices])
    det_boxes = np.stack([dets[d].bbox.as_array() for d in det_indices])
    ious = kernels.iou_matrix(track_boxes, det_boxes)
    for i, ti in enumerate(track_indices):
        for j, dj in enumerate(det_indices):
            c = 1.0 - float(ious[i, j])
            cost[i, j] = c
            if dets[dj].class_id != tracks[ti].class_id or c > config.max_iou_cost:
                forbidden[i, j] = True
    pairs = hungarian(cost, forbidden)
    matched_t = {track_indices[r] for r, _ in pairs}
    matched_d = {det_indices[c] for _, c in pairs}
    return (
        [(track_indices[r], det_indices[c]) for r, c in pairs],
        [t for t in track_indices if t not in matched_t],
        [d for d in det_indices if d not in matched_d],
    )


def match_cascade(
    tracks: list[Track], dets: Sequence[Detection], config: TrackerConfig
) -> MatchResult:
    """Two-stage association for one frame.

    Stage 1 matches confirmed tracks by appearance cost, oldest-miss last:
    tracks are grouped by age ascending, each group solved against the
    still-unmatched detections (Mahalanobis gate and class identity as hard
    filters). Stage 2 matches every remaining track, tentative ones
    included, by IoU cost. Detections all belong to one frame.
    """
    matches: list[tuple[int, int]] = []
    det_pool = list(range(len(dets)))
    confirmed = [i for i, t in enumerate(tracks) if t.status == CONFIRMED]
    leftovers: list[int] = []
    for age in sorted({tracks[i].age for i in confirmed}):
        group = [i for i in confirmed if tracks[i].age == age]
        if not det_pool:
            leftovers.extend(group)
            continue
        got, unmatched_t, det_pool = _appearance_stage(tracks, group, dets, det_pool, config)
        matches.extend(got)
        leftovers.extend(unmatched_t)
    iou_candidates = sorted(leftovers + [i for i, t in enumerate(tracks) if t.status == TENTATIVE])
    if iou_candidates and det_pool:
        got, unmatched_t, det_pool = _iou_stage(tracks, iou_candidates, dets, det_pool, config)
        matches.extend(got)
        iou_candidates = unmatched_t
    return MatchResult(
        matches=sorted(matches),
        unmatched_tracks=sorted(iou_candidates),
        unmatched_dets=det_pool,
    )


class Tracker:
    """Stateful per-video tracker; call step once per frame, in order."""

    def __init__(self, config: TrackerConfig | None = None):
        self.config = config or TrackerConfig()
        self.tracks: list[Track] = []
        self._next_id = 1
        self._last_frame: int | None = None

    def step(self, dets: Sequence[Detection], frame: int) -> list[TrackView]:
        """Advance one frame: predict, associate, update, manage lifecycle.

        Returns the post-update snapshot, including tracks deleted on this
        very frame (status Deleted); those are dropped from internal state.
        """
        cfg = self.config
        if self._last_frame is not None and frame <= self._last_frame:
            raise TrackingError(
                f"frames must be strictly increasing: {frame} after {self._last_frame}"
            )
        self._last_frame = frame
        bad = [d for d in dets if d.frame != frame]
        if bad:
            raise TrackingError(f"detection for frame {bad[0].frame} fed to step({frame})")

        for track in self.tracks:
            track.state = kalman_predict(
                track.state, cfg.std_weight_position, cfg.std_weight_velocity
            )

        result = match_cascade(self.tracks, dets, cfg)

        for ti, dj in result.matches:
            track = self.tracks[ti]
            det = dets[dj]
            track.state = kalman_update(
                track.state, bbox_to_measurement(det.bbox), cfg.std_weight_position
            )
            if det.embedding is not None:
                track.gallery.append(np.asarray(det.embedding, dtype=np.float64))
                if len(track.gallery) > cfg.gallery_budget:
                    del track.gallery[: len(track.gallery) - cfg.gallery_budget]
            track.hits += 1
            track.age = 0
            if track.status == TENTATIVE and track.hits >= cfg.n_init:
                track.status = CONFIRMED

        for ti in result.unmatched_tracks:
            track = self.tracks[ti]
            track.age += 1
            track.hits = 0
            if track.age > cfg.max_age:
                track.status = DELETED

        for dj in result.unmatched_dets:
            det = dets[dj]
            track = Track(
                id=self._next_id,
                class_id=det.class_id,
                state=kalman_init(
                    det.bbox, cfg.std_weight_position, cfg.std_weight_velocity
                ),
                status=CONFIRMED if cfg.n_init <= 1 else TENTATIVE,
            )
            if det.embedding is not None:
                track.gallery.append(np.asarray(det.embedding, dtype=np.float64))
            self._next_id += 1
            self.tracks.append(track)

        snapshot = [
            TrackView(
                id=t.id,
                class_id=t.class_id,
                status=t.status,
                bbox=t.bbox(),
                hits=t.hits,
                age=t.age,
            )
            for t in self.tracks
        ]
        self.tracks = [t for t in self.tracks if t.status != DELETED]
        return snapshot


def format_track_line(frame: int, view: TrackView) -> str:
    b = view.bbox
    return (
        f"{frame} {view.id} {view.class_id} {view.status} "
        f"{b.x:.2f} {b.y:.2f} {b.w:.2f} {b.h:.2f}"
    )
