"""Kalman filtering, association cascade, and track lifecycle."""

from __future__ import annotations

import numpy as np
import pytest

from checkout import tracking
from checkout.detections import BBox, Detection
from checkout.tracking import (
    CONFIRMED,
    DELETED,
    TENTATIVE,
    KalmanState,
    Track,
    Tracker,
    TrackerConfig,
)


def det(frame=0, cls=1, conf=0.9, box=(100, 100, 40, 80), emb=None):
    return Detection(
        frame=frame, class_id=cls, confidence=conf, bbox=BBox(*map(float, box)), embedding=emb
    )


def unit(*values):
    v = np.asarray(values, dtype=np.float64)
    return v / np.linalg.norm(v)


def textbook_update(state: KalmanState, z: np.ndarray, wp: float) -> KalmanState:
    """Reference update with explicit inverse and Joseph-form covariance."""
    H = np.eye(4, 8)
    h = state.mean[3]
    R = np.diag(np.array([wp * h, wp * h, 1e-1, wp * h]) ** 2)
    S = H @ state.covariance @ H.T + R
    K = state.covariance @ H.T @ np.linalg.inv(S)
    mean = state.mean + K @ (z - H @ state.mean)
    I_KH = np.eye(8) - K @ H
    cov = I_KH @ state.covariance @ I_KH.T + K @ R @ K.T
    return KalmanState(mean=mean, covariance=(cov + cov.T) / 2.0)


class TestMeasurementSpace:
    def test_bbox_round_trip(self):
        box = BBox(10.0, 20.0, 40.0, 80.0)
        z = tracking.bbox_to_measurement(box)
        assert z.tolist() == [30.0, 60.0, 0.5, 80.0]
        back = tracking.measurement_to_bbox(z)
        assert back == box

    def test_degenerate_state_still_representable(self):
        box = tracking.measurement_to_bbox(np.array([5.0, 5.0, -1.0, 0.0]))
        assert box.w > 0 and box.h > 0


class TestKalman:
    def test_init_layout(self):
        state = tracking.kalman_init(BBox(0.0, 0.0, 80.0, 160.0))
        assert state.mean[:4].tolist() == [40.0, 80.0, 0.5, 160.0]
        assert not state.mean[4:].any()
        wp, wv = 1 / 20, 1 / 160
        want = np.array(
            [2 * wp * 160, 2 * wp * 160, 1e-2, 2 * wp * 160,
             10 * wv * 160, 10 * wv * 160, 1e-5, 10 * wv * 160]
        ) ** 2
        assert np.allclose(np.diag(state.covariance), want)
        assert np.array_equal(state.covariance, np.diag(np.diag(state.covariance)))

    def test_predict_advances_by_velocity(self):
        state = tracking.kalman_init(BBox(0.0, 0.0, 40.0, 80.0))
        mean = state.mean.copy()
        mean[4] = 3.0  # vx
        state = KalmanState(mean=mean, covariance=state.covariance)
        out = tracking.kalman_predict(state)
        assert out.mean[0] == pytest.approx(state.mean[0] + 3.0)
        assert out.mean[1] == pytest.approx(state.mean[1])

    def test_predict_inflates_uncertainty(self):
        state = tracking.kalman_init(BBox(0.0, 0.0, 40.0, 80.0))
        out = tracking.kalman_predict(state)
        assert np.all(np.diag(out.covariance) >= np.diag(state.covariance))

    def test_update_matches_textbook_form(self):
        rng = np.random.default_rng(0)
        wp = 1 / 20
        for _ in range(50):
            state = tracking.kalman_init(
                BBox(rng.uniform(0, 500), rng.uniform(0, 500), rng.uniform(10, 100), rng.uniform(10, 100))
            )
            for _ in range(int(rng.integers(0, 4))):
                state = tracking.kalman_predict(state)
            z = state.mean[:4] + rng.normal(0, 2, 4)
            z[2] = abs(z[2]) + 0.1
            z[3] = abs(z[3]) + 1.0
            got = tracking.kalman_update(state, z, wp)
            want = textbook_update(state, z, wp)
            assert np.allclose(got.mean, want.mean, atol=1e-9)
            assert np.allclose(got.covariance, want.covariance, atol=1e-9)

    def test_update_pulls_toward_measurement(self):
        state = tracking.kalman_init(BBox(0.0, 0.0, 40.0, 80.0))
        state = tracking.kalman_predict(state)
        z = state.mean[:4].copy()
        z[0] += 10.0
        out = tracking.kalman_update(state, z)
        assert state.mean[0] < out.mean[0] <= z[0]

    def test_repeated_updates_converge(self):
        state = tracking.kalman_init(BBox(0.0, 0.0, 40.0, 80.0))
        z = np.array([200.0, 150.0, 0.5, 80.0])
        errors = []
        for _ in range(60):
            state = tracking.kalman_predict(state)
            state = tracking.kalman_update(state, z)
            errors.append(float(np.abs(state.mean[:4] - z).max()))
        assert np.allclose(state.mean[:4], z, atol=1e-2)
        assert np.allclose(state.mean[4:], 0.0, atol=1e-2)
        assert errors[-1] < errors[9] / 100  # geometric decay, not a plateau

    def test_covariance_stays_symmetric_psd(self):
        rng = np.random.default_rng(1)
        state = tracking.kalman_init(BBox(50.0, 50.0, 30.0, 60.0))
        for _ in range(200):
            state = tracking.kalman_predict(state)
            assert np.array_equal(state.covariance, state.covariance.T)
            if rng.random() < 0.7:
                z = state.mean[:4] + rng.normal(0, 3, 4)
                z[3] = max(z[3], 5.0)
                z[2] = max(z[2], 0.05)
                state = tracking.kalman_update(state, z)
                assert np.array_equal(state.covariance, state.covariance.T)
            assert np.linalg.eigvalsh(state.covariance).min() > -1e-9


class TestGating:
    def test_distance_zero_at_projection(self):
        state = tracking.kalman_init(BBox(10.0, 10.0, 40.0, 80.0))
        z = state.mean[:4]
        assert tracking.gating_distances(state, z[None, :])[0] == pytest.approx(0.0)

    def test_matches_explicit_quadratic_form(self):
        rng = np.random.default_rng(2)
        wp = 1 / 20
        state = tracking.kalman_init(BBox(10.0, 10.0, 40.0, 80.0))
        for _ in range(3):
            state = tracking.kalman_predict(state)
        H = np.eye(4, 8)
        h = state.mean[3]
        S = H @ state.covariance @ H.T + np.diag(np.array([wp * h, wp * h, 1e-1, wp * h]) ** 2)
        zs = state.mean[:4] + rng.normal(0, 5, (6, 4))
        got = tracking.gating_distances(state, zs, wp)
        for row, g in zip(zs, got):
            diff = row - state.mean[:4]
            assert g == pytest.approx(float(diff @ np.linalg.inv(S) @ diff), rel=1e-9)

    def test_scalar_helper_agrees(self):
        state = tracking.kalman_init(BBox(10.0, 10.0, 40.0, 80.0))
        d = det(box=(12, 14, 40, 80))
        z = tracking.bbox_to_measurement(d.bbox)
        assert tracking.gating_distance(state, d) == pytest.approx(
            float(tracking.gating_distances(state, z[None, :])[0])
        )

    def test_gate_constant(self):
        assert tracking.CHI2_GATE_4DOF == 9.4877


class TestAppearance:
    def test_empty_gallery_neutral(self):
        assert tracking.appearance_cost([], unit(1, 0)) == 1.0

    def test_identical_vector_zero_cost(self):
        assert tracking.appearance_cost([unit(3, 4)], unit(3, 4)) == pytest.approx(0.0)

    def test_orthogonal_costs_one(self):
        assert tracking.appearance_cost([unit(1, 0)], unit(0, 1)) == pytest.approx(1.0)

    def test_min_over_gallery(self):
        gallery = [unit(1, 0), unit(1, 1)]
        cost = tracking.appearance_cost(gallery, unit(0, 1))
        assert cost == pytest.approx(1.0 - np.cos(np.pi / 4))


class TestHungarian:
    def test_basic(self):
        assert tracking.hungarian(np.array([[1.0, 2.0], [2.0, 1.0]])) == [(0, 0), (1, 1)]

    def test_forbidden_redirects(self):
        cost = np.array([[0.1, 0.2], [0.15, 0.3]])
        forbidden = np.array([[True, False], [False, False]])
        assert tracking.hungarian(cost, forbidden) == [(0, 1), (1, 0)]

    def test_forbidden_pairs_stripped(self):
        cost = np.array([[0.1, 0.2], [0.15, 0.3]])
        forbidden = np.array([[False, True], [True, True]])
        assert tracking.hungarian(cost, forbidden) == [(0, 0)]

    def test_all_forbidden(self):
        assert tracking.hungarian(np.ones((2, 2)), np.ones((2, 2), dtype=bool)) == []

    def test_empty(self):
        assert tracking.hungarian(np.zeros((0, 4))) == []

    def test_rectangular(self):
        cost = np.array([[5.0, 1.0, 9.0]])
        assert tracking.hungarian(cost) == [(0, 1)]


def make_track(tid, cls=1, box=(100, 100, 40, 80), status=CONFIRMED, age=0, gallery=()):
    return Track(
        id=tid,
        class_id=cls,
        state=tracking.kalman_init(BBox(*map(float, box))),
        status=status,
        age=age,
        gallery=list(gallery),
    )


class TestCascade:
    def config(self):
        return TrackerConfig()

    def test_appearance_match(self):
        e = unit(1, 2, 3)
        tracks = [make_track(1, gallery=[e])]
        result = tracking.match_cascade(tracks, [det(emb=e)], self.config())
        assert result.matches == [(0, 0)]
        assert result.unmatched_tracks == []
        assert result.unmatched_dets == []

    def test_class_identity_is_hard(self):
        e = unit(1, 0)
        tracks = [make_track(1, cls=1, gallery=[e])]
        result = tracking.match_cascade(tracks, [det(cls=2, emb=e)], self.config())
        assert result.matches == []

    def test_recently_seen_track_has_priority(self):
        e_det = unit(1, 0, 0)
        near = unit(4, 1, 0)  # cost ~0.03, within the appearance limit
        young = make_track(1, age=0, gallery=[near])
        old = make_track(2, age=2, gallery=[e_det])  # perfect match but older
        result = tracking.match_cascade([young, old], [det(emb=e_det)], self.config())
        assert (0, 0) in result.matches  # age 0 group is solved first
        assert result.unmatched_tracks == [1]

    def test_costly_appearance_falls_through_to_iou(self):
        # embedding disagrees (cost 1 > 0.4) but the boxes coincide, so the
        # IoU stage still recovers the match
        tracks = [make_track(1, gallery=[unit(1, 0)])]
        result = tracking.match_cascade(tracks, [det(emb=unit(0, 1))], self.config())
        assert result.matches == [(0, 0)]

    def test_tentative_matched_by_iou_only(self):
        e = unit(1, 1)
        tracks = [make_track(1, status=TENTATIVE, gallery=[e])]
        result = tracking.match_cascade(tracks, [det(emb=e)], self.config())
        assert result.matches == [(0, 0)]

    def test_distant_detection_unmatched(self):
        tracks = [make_track(1, box=(0, 0, 40, 80))]
        result = tracking.match_cascade(tracks, [det(box=(500, 500, 40, 80))], self.config())
        assert result.matches == []
        assert result.unmatched_tracks == [0]
        assert result.unmatched_dets == [0]

    def test_no_detections(self):
        result = tracking.match_cascade([make_track(1)], [], self.config())
        assert result.matches == []
        assert result.unmatched_tracks == [0]


class TestTrackerLifecycle:
    def test_spawn_is_tentative(self):
        tracker = Tracker()
        views = tracker.step([det(frame=0)], 0)
        assert len(views) == 1
        assert views[0].status == TENTATIVE
        assert views[0].id == 1
        assert views[0].hits == 1

    def test_confirm_after_n_init_hits(self):
        tracker = Tracker(TrackerConfig(n_init=3))
        statuses = []
        for f in range(4):
            views = tracker.step([det(frame=f)], f)
            statuses.append(views[0].status)
        assert statuses == [TENTATIVE, TENTATIVE, CONFIRMED, CONFIRMED]

    def test_n_init_one_spawns_confirmed(self):
        tracker = Tracker(TrackerConfig(n_init=1))
        assert tracker.step([det(frame=0)], 0)[0].status == CONFIRMED

    def test_miss_ages_and_resets_hits(self):
        tracker = Tracker(TrackerConfig(n_init=1))
        tracker.step([det(frame=0)], 0)
        views = tracker.step([], 1)
        assert views[0].age == 1
        assert views[0].hits == 0
        views = tracker.step([], 2)
        assert views[0].age == 2

    def test_tentative_survives_misses_until_max_age(self):
        tracker = Tracker(TrackerConfig(n_init=5, max_age=3))
        tracker.step([det(frame=0)], 0)
        for f in (1, 2, 3):
            views = tracker.step([], f)
            assert views[0].status == TENTATIVE
        views = tracker.step([], 4)  # age 4 > max_age 3
        assert views[0].status == DELETED

    def test_deleted_row_shown_once_then_dropped(self):
        tracker = Tracker(TrackerConfig(n_init=1, max_age=1))
        tracker.step([det(frame=0)], 0)
        tracker.step([], 1)
        views = tracker.step([], 2)
        assert [v.status for v in views] == [DELETED]
        assert tracker.step([], 3) == []

    def test_new_track_after_deletion_gets_fresh_id(self):
        tracker = Tracker(TrackerConfig(n_init=1, max_age=0))
        assert tracker.step([det(frame=0)], 0)[0].id == 1
        tracker.step([], 1)  # deletes track 1
        assert tracker.step([det(frame=2)], 2)[0].id == 2

    def test_frames_strictly_increasing(self):
        tracker = Tracker()
        tracker.step([], 5)
        with pytest.raises(tracking.TrackingError, match="strictly increasing"):
            tracker.step([], 5)

    def test_detection_frame_must_match(self):
        tracker = Tracker()
        with pytest.raises(tracking.TrackingError, match="fed to step"):
            tracker.step([det(frame=3)], 4)

    def test_gallery_budget_trimmed(self):
        tracker = Tracker(TrackerConfig(n_init=1, gallery_budget=3))
        for f in range(6):
            tracker.step([det(frame=f, emb=unit(1, f + 1))], f)
        assert len(tracker.tracks[0].gallery) == 3

    def test_two_objects_two_tracks(self):
        tracker = Tracker()
        views = tracker.step([det(frame=0, box=(0, 0, 40, 80)), det(frame=0, box=(400, 300, 40, 80))], 0)
        assert sorted(v.id for v in views) == [1, 2]


class TestTrackerScenarios:
    def test_follows_constant_velocity(self):
        tracker = Tracker()
        last = None
        for f in range(20):
            x = 10.0 + 5.0 * f
            views = tracker.step([det(frame=f, box=(x, 50, 40, 80))], f)
            last = views[0]
        assert last.status == CONFIRMED
        assert last.bbox.x == pytest.approx(10.0 + 5.0 * 19, abs=0.5)

    def test_identity_kept_across_gap_with_embedding(self):
        e = unit(2, 1, 1)
        tracker = Tracker(TrackerConfig(n_init=2, max_age=10))
        for f in range(4):
            tracker.step([det(frame=f, emb=e)], f)
        for f in range(4, 8):  # occlusion
            tracker.step([], f)
        views = tracker.step([det(frame=8, emb=e)], 8)
        assert [v.id for v in views] == [1]
        assert views[0].status == CONFIRMED
        assert views[0].age == 0

    def test_identity_kept_across_gap_without_embedding(self):
        tracker = Tracker(TrackerConfig(n_init=2, max_age=10))
        for f in range(4):
            tracker.step([det(frame=f)], f)
        for f in range(4, 7):
            tracker.step([], f)
        views = tracker.step([det(frame=7)], 7)
        assert [v.id for v in views] == [1]

    def test_crossing_objects_keep_ids_by_appearance(self):
        ea, eb = unit(1, 0, 0), unit(0, 1, 0)
        tracker = Tracker(TrackerConfig(n_init=2))
        id_a = id_b = None
        for f in range(30):
            xa = 50.0 + 10.0 * f  # moving right
            xb = 340.0 - 10.0 * f  # moving left, crosses around frame 14
            views = tracker.step(
                [
                    det(frame=f, box=(xa, 100, 30, 60), emb=ea),
                    det(frame=f, box=(xb, 100, 30, 60), emb=eb),
                ],
                f,
            )
            if f == 2:
                by_x = sorted(views, key=lambda v: v.bbox.x)
                id_a, id_b = by_x[0].id, by_x[1].id
        by_x = sorted(views, key=lambda v: v.bbox.x)
        # a started left and ends right; identities must have swapped sides
        assert by_x[1].id == id_a
        assert by_x[0].id == id_b

    def test_format_track_line(self):
        view = tracking.TrackView(
            id=7, class_id=3, status=CONFIRMED, bbox=BBox(1.5, 2.0, 30.0, 40.25), hits=5, age=0
        )
        assert (
            tracking.format_track_line(12, view)
            == "12 7 3 Confirmed 1.50 2.00 30.00 40.25"
        )
