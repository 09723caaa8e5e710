"""Scenario generation: exact geometry, noise knobs, artifact layout."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from checkout import background, evaluation, media, simulator
from checkout.detections import serialize_detections
from checkout.simulator import ScenarioConfig, center_in_tray


def small_config(**kw):
    base = dict(
        fps=30,
        duration_s=20,
        width=640,
        height=360,
        tray=(220, 120, 200, 120),
        n_objects=5,
        seed=0,
    )
    base.update(kw)
    return ScenarioConfig(**base)


class TestConfig:
    def test_duration_cap(self):
        with pytest.raises(simulator.SimulatorError, match="duration"):
            small_config(duration_s=61)

    def test_tray_must_fit(self):
        with pytest.raises(simulator.SimulatorError, match="tray"):
            small_config(tray=(600, 120, 200, 120))

    def test_class_pool_bounds(self):
        with pytest.raises(simulator.SimulatorError, match="class_pool"):
            small_config(class_pool=(0, 1), num_classes=10)
        with pytest.raises(simulator.SimulatorError, match="class_pool"):
            small_config(class_pool=(5, 11), num_classes=10)

    def test_speed_and_size_bounds(self):
        with pytest.raises(simulator.SimulatorError):
            small_config(speed_min=5.0, speed_max=2.0)
        with pytest.raises(simulator.SimulatorError):
            small_config(size_min=1)

    def test_frame_count(self):
        assert small_config(fps=25, duration_s=4).frame_count == 100

    def test_mapping_parses_types(self):
        config = simulator.config_from_mapping(
            {
                "fps": "25",
                "duration_s": "10",
                "tray": "100,50,200,100",
                "class_pool": "1-3,7",
                "noise_sigma": "1.5",
                "seed": "4",
            }
        )
        assert config.fps == 25
        assert config.tray == (100, 50, 200, 100)
        assert config.class_pool == (1, 2, 3, 7)
        assert config.noise_sigma == 1.5

    def test_mapping_rejects_unknown_key(self):
        with pytest.raises(simulator.SimulatorError, match="unknown"):
            simulator.config_from_mapping({"fpz": "25"})

    def test_mapping_rejects_bad_tray(self):
        with pytest.raises(simulator.SimulatorError, match="tray"):
            simulator.config_from_mapping({"tray": "1,2,3"})


class TestTrayMembership:
    TRAY = (100, 50, 200, 100)

    def test_edges(self):
        assert center_in_tray(100.0, 60.0, self.TRAY)
        assert not center_in_tray(99.9, 60.0, self.TRAY)
        assert center_in_tray(299.9, 60.0, self.TRAY)
        assert not center_in_tray(300.0, 60.0, self.TRAY)

    def test_matches_mask_lookup(self):
        config = small_config()
        mask = simulator.tray_mask(config)
        rng = np.random.default_rng(1)
        for _ in range(300):
            cx = float(rng.uniform(0, config.width - 0.01))
            cy = float(rng.uniform(0, config.height - 0.01))
            via_mask = bool(mask.bits[int(math.floor(cy)), int(math.floor(cx))])
            assert center_in_tray(cx, cy, config.tray) == via_mask

    def test_mask_shape(self):
        mask = simulator.tray_mask(small_config())
        assert mask.bbox == (220, 120, 200, 120)
        assert mask.area == 200 * 120
        assert mask.bits.sum() == mask.area


class TestTruthGeometry:
    def test_invariants_over_seeds(self):
        for seed in range(12):
            config = small_config(seed=seed)
            _, _, truth = simulator.generate(config)
            assert len(truth.objects) == config.n_objects
            for obj in truth.objects:
                # integer velocity, half-integer anchor: every noiseless
                # center sits exactly half a pixel off the integer grid
                assert obj.velocity == (int(obj.velocity[0]), int(obj.velocity[1]))
                assert obj.anchor[0] % 1 == 0.5 and obj.anchor[1] % 1 == 0.5
                speed = math.hypot(*obj.velocity)
                assert config.speed_min <= speed <= config.speed_max
                # entry/exit frames delimit the contiguous in-tray run
                for f in range(obj.enter_frame, obj.exit_frame + 1):
                    assert center_in_tray(*obj.center(f), config.tray)
                assert not center_in_tray(*obj.center(obj.enter_frame - 1), config.tray)
                assert not center_in_tray(*obj.center(obj.exit_frame + 1), config.tray)
                # detectability lead-in before tray entry
                assert 10 <= obj.enter_frame - obj.first_frame <= 20
                assert obj.first_frame >= 0
                assert obj.last_frame <= config.frame_count - 1
                assert obj.exit_frame - obj.enter_frame >= 4
                assert config.size_min - 1 <= obj.size[0] <= config.size_max
                assert config.size_min - 1 <= obj.size[1] <= config.size_max

    def test_intervals_rows(self):
        config = small_config()
        _, _, truth = simulator.generate(config, video_id=7)
        rows = truth.intervals()
        for (video, cls, t_enter, t_exit), obj in zip(rows, truth.objects):
            assert video == 7
            assert cls == obj.class_id
            assert t_enter == obj.enter_frame / 30.0
            assert t_exit == obj.exit_frame / 30.0

    def test_truth_text_round_trips_exactly(self):
        config = small_config(seed=3)
        _, _, truth = simulator.generate(config, video_id=2)
        text = simulator.write_truth(truth)
        parsed = evaluation.parse_truth(text)
        for interval, (video, cls, t0, t1) in zip(parsed, truth.intervals()):
            assert interval.video_id == video
            assert interval.class_id == cls
            assert interval.t_enter == t0  # repr floats parse back exactly
            assert interval.t_exit == t1


class TestDetections:
    def test_deterministic(self):
        a, _, _ = simulator.generate(small_config(seed=5))
        b, _, _ = simulator.generate(small_config(seed=5))
        assert serialize_detections(a) == serialize_detections(b)

    def test_noiseless_centers_exact(self):
        config = small_config()
        dets, _, truth = simulator.generate(config)
        by_frame = dets.by_frame()
        for obj in truth.objects:
            for f in range(obj.first_frame, obj.last_frame + 1):
                cx, cy = obj.center(f)
                if not (0 <= cx < config.width and 0 <= cy < config.height):
                    continue
                hits = [
                    d
                    for d in by_frame.get(f, [])
                    if d.class_id == obj.class_id and d.bbox.center == (cx, cy)
                ]
                assert hits, f"no exact detection at frame {f}"

    def test_drop_prob_thins_stream(self):
        full, _, _ = simulator.generate(small_config())
        thinned, _, _ = simulator.generate(small_config(drop_prob=0.5))
        assert len(thinned.records) < 0.7 * len(full.records)

    def test_noise_perturbs_but_preserves_size(self):
        config = small_config(noise_sigma=2.0)
        dets, _, truth = simulator.generate(config)
        sizes = {obj.size for obj in truth.objects}
        for d in dets.records:
            assert (d.bbox.w, d.bbox.h) in sizes
        offsets = [d.bbox.center[0] % 1 for d in dets.records]
        assert any(abs(o - 0.5) > 1e-6 for o in offsets)  # no longer on the half grid

    def test_false_positives_added(self):
        clean, _, _ = simulator.generate(small_config())
        noisy, _, _ = simulator.generate(small_config(fp_rate=0.5))
        extra = len(noisy.records) - len(clean.records)
        assert extra > 0.3 * small_config().frame_count

    def test_embeddings_unit_and_stable_per_object(self):
        config = small_config(embedding_dim=16, embedding_noise=0.05)
        dets, _, _ = simulator.generate(config)
        for d in dets.records:
            assert np.linalg.norm(d.embedding) == pytest.approx(1.0, abs=1e-9)
        # same-object embeddings cluster: cosine to another frame of the same
        # class is high
        by_class: dict[int, list[np.ndarray]] = {}
        for d in dets.records:
            by_class.setdefault(d.class_id, []).append(d.embedding)
        for vecs in by_class.values():
            if len(vecs) > 1:
                assert float(np.dot(vecs[0], vecs[-1])) > 0.8

    def test_metadata(self):
        config = small_config(embedding_dim=8)
        dets, meta, _ = simulator.generate(config)
        assert dets.num_classes == config.num_classes
        assert dets.embedding_dim == 8
        assert meta.fps == Fraction(30)
        assert meta.frame_count == config.frame_count
        assert meta.channels == 1


class TestRendering:
    def render_config(self):
        return small_config(
            fps=10,
            duration_s=4,
            width=160,
            height=120,
            tray=(40, 30, 80, 60),
            n_objects=1,
            size_min=10,
            size_max=16,
        )

    def test_levels_and_layout(self):
        config = self.render_config()
        _, _, truth = simulator.generate(config)
        first = next(simulator.render_frames(config, truth))
        assert first[0, 0] == simulator.BACKGROUND_LEVEL
        assert first[60, 80] in (simulator.TRAY_LEVEL, simulator.OBJECT_LEVEL)
        tx, ty, tw, th = config.tray
        outside = first[ty - 5, tx - 5]
        assert outside == simulator.BACKGROUND_LEVEL

    def test_object_rect_painted(self):
        config = self.render_config()
        _, _, truth = simulator.generate(config)
        obj = truth.objects[0]
        frames = list(simulator.render_frames(config, truth))
        img = frames[obj.anchor_frame]
        cx, cy = obj.center(obj.anchor_frame)
        assert img[int(cy), int(cx)] == simulator.OBJECT_LEVEL

    def test_object_absent_outside_lifetime(self):
        config = self.render_config()
        _, _, truth = simulator.generate(config)
        obj = truth.objects[0]
        frames = list(simulator.render_frames(config, truth))
        if obj.first_frame > 0:
            assert not (frames[obj.first_frame - 1] == simulator.OBJECT_LEVEL).any()


class TestWriteScenario:
    def test_layout_without_rendering(self, tmp_path):
        config = small_config(duration_s=5)
        simulator.write_scenario(config, tmp_path / "s", video_id=3)
        assert (tmp_path / "s" / "dets.txt").is_file()
        assert (tmp_path / "s" / "truth.txt").is_file()
        assert (tmp_path / "s" / "roi" / background.ROI_MASK_NAME).is_file()
        assert (tmp_path / "s" / "frames" / media.META_NAME).is_file()
        assert not list((tmp_path / "s" / "frames").glob("*.pgm"))

    def test_roi_artifact_is_tray(self, tmp_path):
        config = small_config(duration_s=5)
        simulator.write_scenario(config, tmp_path / "s")
        roi = background.read_roi(tmp_path / "s" / "roi")
        assert roi.bbox == config.tray

    def test_truth_file_scores_against_itself(self, tmp_path):
        config = small_config(duration_s=10)
        truth = simulator.write_scenario(config, tmp_path / "s", video_id=1)
        intervals = evaluation.read_truth(tmp_path / "s" / "truth.txt")
        records = [
            evaluation.SubmissionRecord(video_id=1, class_id=obj.class_id,
                                        timestamp_s=obj.enter_frame // 30)
            for obj in truth.objects
        ]
        tally = evaluation.match(records, intervals)
        assert tally.fn == 0 and tally.fp == 0

    def test_rendered_frames_when_asked(self, tmp_path):
        config = small_config(
            fps=10, duration_s=3, width=160, height=120, tray=(40, 30, 80, 60),
            n_objects=1, size_min=10, size_max=16,
        )
        simulator.write_scenario(config, tmp_path / "s", render=True)
        seq = media.open_sequence(tmp_path / "s" / "frames")
        assert len(seq) == 30
        assert media.read_frame(seq, 0).pixels.shape == (120, 160)
