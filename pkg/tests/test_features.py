import numpy as np
import pytest

from gazecontrol import features, scene
from gazecontrol.features import (
    Dataset, EmptyInput, GazeSample, LabeledFrame, NOISE, TooFewSituations,
    TooShort, encode_frame, features_from_flat, plan_folds, resample_eyelink,
    resample_vr, resolve_label, window_dataset,
)
from gazecontrol.scene import (
    CharacterState2D, CharacterState3D, Characteristic3D, Movement2D, SceneFrame,
)


def frame_2d(*states, pad=True):
    chars = list(states)
    while pad and len(chars) < 4:
        chars.append(CharacterState2D(False))
    return SceneFrame(scene.TWO_D, 0, tuple(chars), box_present=True)


def frame_3d(*states, pad=True):
    chars = list(states)
    while pad and len(chars) < 3:
        chars.append(CharacterState3D(False))
    return SceneFrame(scene.THREE_D, 0, tuple(chars))


class TestEncodeFrame:
    def test_absent_character_zero_row(self):
        feats = encode_frame(frame_2d(CharacterState2D(False)), normalize=False)
        assert np.array_equal(feats.matrix[0], np.zeros(7))
        feats_n = encode_frame(frame_2d(CharacterState2D(False)), normalize=True)
        assert np.array_equal(feats_n.matrix[0], np.zeros(7))

    def test_2d_raw_row_ordering(self):
        state = CharacterState2D(True, 1.5, waving=True, pointing=False,
                                 talking=True, angle_deg=-30.0,
                                 movement=Movement2D.STANDING)
        feats = encode_frame(frame_2d(state), normalize=False)
        assert np.array_equal(feats.matrix[0], [1, 1.5, 1, 0, 1, -30, 0])

    def test_3d_raw_row_ordering(self):
        state = CharacterState3D(True, 3.0, Characteristic3D.POINTING,
                                 talking=False, pointed_at_count=1, angle_deg=45.0)
        feats = encode_frame(frame_3d(state), normalize=False)
        assert np.array_equal(feats.matrix[0], [1, 3.0, 8, 0, 1, 45])

    def test_shapes_and_widths(self, timeline_2d, timeline_3d):
        f2 = encode_frame(timeline_2d.frames[0])
        f3 = encode_frame(timeline_3d.frames[0])
        assert f2.matrix.shape == (4, 7) and f2.flat.shape == (28,)
        assert f3.matrix.shape == (3, 6) and f3.flat.shape == (18,)

    def test_normalized_values_in_unit_interval(self, timeline_2d, timeline_3d):
        for tl in (timeline_2d, timeline_3d):
            for f in tl.frames[::37]:
                flat = encode_frame(f, normalize=True).flat
                assert flat.min() >= 0.0 and flat.max() <= 1.0

    def test_flatten_round_trip(self, timeline_2d):
        feats = encode_frame(timeline_2d.frames[1000])
        back = features_from_flat(feats.flat, scene.TWO_D)
        assert np.array_equal(back.matrix, feats.matrix)

    def test_normalization_invertible(self):
        state = CharacterState2D(True, 2.25, waving=True, talking=True,
                                 angle_deg=-52.5, movement=Movement2D.LEAVING_FAST)
        flat = encode_frame(frame_2d(state), normalize=True).flat
        dec = features.decode_rows(flat, scene.TWO_D, normalized=True)
        assert dec["present"][0]
        assert abs(dec["distance_m"][0] - 2.25) < 1e-9
        assert abs(dec["angle_deg"][0] + 52.5) < 1e-9
        assert dec["movement"][0] == 4
        assert dec["waving"][0] and dec["talking"][0] and not dec["pointing"][0]
        assert dec["leaving"][0] and not dec["entering"][0]

    def test_normalization_monotone_in_distance(self):
        vals = []
        for d in (0.5, 1.5, 3.0, 5.0):
            state = CharacterState2D(True, d, angle_deg=-30.0)
            vals.append(encode_frame(frame_2d(state)).matrix[0][1])
        assert vals == sorted(vals)


class TestResampleEyelink:
    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            resample_eyelink([])

    def test_constant_signal(self):
        samples = [GazeSample(i / 1000, point=(7.0, 3.0)) for i in range(125)]
        out = resample_eyelink(samples)
        assert len(out) == 3
        for s in out:
            assert s.point == (7.0, 3.0) and s.valid

    def test_group_means_42_42_41(self):
        # x = 0..124: group means 20.5, 62.5, 104.0 (mean of 0..41, 42..83, 84..124)
        samples = [GazeSample(i / 1000, point=(float(i), 0.0)) for i in range(125)]
        out = resample_eyelink(samples)
        xs = [s.point[0] for s in out]
        assert abs(xs[0] - 20.5) < 1e-12
        assert abs(xs[1] - 62.5) < 1e-12
        assert abs(xs[2] - 104.0) < 1e-12

    def test_one_second_gives_24_frames(self):
        samples = [GazeSample(i / 1000, point=(0.0, 0.0)) for i in range(1000)]
        assert len(resample_eyelink(samples)) == 24

    def test_output_length_law(self):
        for n in (125, 250, 999, 1300):
            samples = [GazeSample(i / 1000, point=(0.0, 0.0)) for i in range(n)]
            assert len(resample_eyelink(samples)) == 3 * (n // 125)

    def test_invalid_majority_propagates(self):
        samples = [GazeSample(i / 1000, point=(1.0, 1.0), valid=i >= 22)
                   for i in range(125)]
        out = resample_eyelink(samples)
        assert not out[0].valid          # 22 of 42 invalid (> half)
        assert out[1].valid and out[2].valid

    def test_invalid_minority_skipped_in_mean(self):
        pts = [GazeSample(i / 1000, point=(float(i), 0.0), valid=i >= 10)
               for i in range(125)]
        out = resample_eyelink(pts)
        assert out[0].valid
        assert abs(out[0].point[0] - np.mean(np.arange(10, 42))) < 1e-12


class TestResampleVr:
    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            resample_vr([])

    def test_on_grid_unchanged(self):
        samples = [GazeSample(i * 0.04, yaw=float(i)) for i in range(5)]
        out = resample_vr(samples)
        assert len(out) == 5
        assert all(abs(a.yaw - b.yaw) < 1e-12 for a, b in zip(out, samples))

    def test_midpoint_interpolation(self):
        samples = [GazeSample(0.0, yaw=0.0), GazeSample(0.08, yaw=10.0)]
        out = resample_vr(samples)
        assert abs(out[1].yaw - 5.0) < 1e-12

    def test_ten_seconds_gives_250_ticks(self):
        # a 10 s recording at 100 Hz spans [0, 9.99]
        samples = [GazeSample(i / 100, yaw=0.0) for i in range(1000)]
        assert len(resample_vr(samples)) == 250

    def test_outside_coverage_invalid(self):
        samples = [GazeSample(0.0, yaw=1.0, valid=False),
                   GazeSample(0.04, yaw=2.0), GazeSample(0.08, yaw=3.0)]
        out = resample_vr(samples)
        assert not out[0].valid and out[1].valid and out[2].valid


class TestResolveLabel:
    def test_center_hit(self):
        state = CharacterState2D(True, 1.5, angle_deg=-30.0)
        sample = GazeSample(0.0, point=(features.angle_to_px(-30.0), 540.0))
        assert resolve_label(sample, frame_2d(state)) == 0

    def test_box_hit(self):
        state = CharacterState2D(True, 1.5, angle_deg=-30.0)
        sample = GazeSample(0.0, point=(features.angle_to_px(1.0), 540.0))
        assert resolve_label(sample, frame_2d(state)) == scene.BOX_LABEL_INDEX

    def test_outside_all_tolerances_is_noise(self):
        state3 = CharacterState3D(True, 1.5, angle_deg=-45.0)
        f = frame_3d(state3, CharacterState3D(True, 1.5, angle_deg=0.0),
                     CharacterState3D(True, 1.5, angle_deg=45.0))
        assert resolve_label(GazeSample(0.0, yaw=90.0), f) == NOISE

    def test_nearest_angle_wins_3d(self):
        f = frame_3d(CharacterState3D(True, 1.5, angle_deg=0.0),
                     CharacterState3D(True, 1.5, angle_deg=45.0))
        assert resolve_label(GazeSample(0.0, yaw=40.0), f) == 1

    def test_invalid_sample_is_noise(self):
        f = frame_3d(CharacterState3D(True, 1.5, angle_deg=0.0))
        assert resolve_label(GazeSample(0.0, yaw=0.0, valid=False), f) == NOISE

    def test_absent_character_not_a_target(self):
        f = frame_3d(CharacterState3D(False),
                     CharacterState3D(True, 1.5, angle_deg=45.0))
        assert resolve_label(GazeSample(0.0, yaw=0.0), f) == NOISE

    def test_offscreen_point_is_noise(self):
        f = frame_2d(CharacterState2D(True, 1.5, angle_deg=-30.0))
        assert resolve_label(GazeSample(0.0, point=(-5.0, 540.0)), f) == NOISE
        assert resolve_label(GazeSample(0.0, point=(500.0, 2000.0)), f) == NOISE


def make_labeled(n, m_variant=scene.TWO_D, label=1, situation=0):
    frames = []
    state = CharacterState2D(True, 1.5, angle_deg=-30.0)
    feats = encode_frame(frame_2d(state))
    for t in range(n):
        frames.append(LabeledFrame(tick=t, features=feats, label=label,
                                   situation_id=situation, valid=True))
    return frames


class TestWindowDataset:
    def test_count_100_frames_m24(self):
        ds = window_dataset(make_labeled(100), m=24)
        assert len(ds) == 76

    def test_m_equals_frame_count_gives_zero(self):
        ds = window_dataset(make_labeled(25), m=24)
        assert len(ds) == 1
        with pytest.raises(TooShort):
            window_dataset(make_labeled(24), m=24)

    def test_noise_label_drops_only_its_example(self):
        frames = make_labeled(100)
        frames[50].label = NOISE  # feature frame stays valid
        ds = window_dataset(frames, m=24)
        assert len(ds) == 75

    def test_invalid_frame_drops_overlapping_windows(self):
        frames = make_labeled(100)
        frames[50].valid = False
        ds = window_dataset(frames, m=24)
        # windows covering tick 50 and the example labeled at 50 all vanish
        assert len(ds) == 76 - 24 - 1

    def test_window_shape_and_label_source(self):
        frames = make_labeled(30)
        frames[29].label = 3
        frames[29].situation_id = 9
        ds = window_dataset(frames, m=24)
        assert ds.windows.shape == (6, 24, 28)
        assert ds.labels[-1] == 3 and ds.situation_ids[-1] == 9

    def test_step(self):
        ds = window_dataset(make_labeled(100), m=24, step=5)
        assert len(ds) == len(range(23, 99, 5))


class TestFolds:
    def make_dataset(self, n_situations, per=5):
        n = n_situations * per
        return Dataset(scene.TWO_D, 4, 28,
                       np.zeros((n, 4, 28), dtype=np.float32),
                       np.zeros(n, dtype=np.int64),
                       np.repeat(np.arange(n_situations), per),
                       scene.LABELS[scene.TWO_D])

    def test_round_robin_sizes(self):
        ds = self.make_dataset(120)
        plan = plan_folds(ds, k=10, seed=0)
        assert all(len(s) == 12 for s in plan.test_situations)

    def test_partition_property(self):
        ds = self.make_dataset(37)
        plan = plan_folds(ds, k=10, seed=4)
        all_ids = set()
        for i, s in enumerate(plan.test_situations):
            for j, s2 in enumerate(plan.test_situations):
                if i != j:
                    assert not (s & s2)
            all_ids |= s
        assert all_ids == set(range(37))

    def test_deterministic(self):
        ds = self.make_dataset(50)
        assert plan_folds(ds, k=10, seed=7) == plan_folds(ds, k=10, seed=7)
        assert plan_folds(ds, k=10, seed=7) != plan_folds(ds, k=10, seed=8)

    def test_too_few_situations(self):
        with pytest.raises(TooFewSituations):
            plan_folds(self.make_dataset(9), k=10, seed=0)

    def test_each_example_in_exactly_one_test_fold(self):
        ds = self.make_dataset(23, per=3)
        plan = plan_folds(ds, k=10, seed=2)
        seen = np.zeros(len(ds), dtype=int)
        for i in range(plan.k):
            _, test_idx = features.fold_split(ds, plan, i)
            seen[test_idx] += 1
        assert (seen == 1).all()


class TestDatasetFiles:
    def test_round_trip(self, tiny_dataset, tmp_path):
        path = tmp_path / "ds.jsonl"
        features.write_dataset_jsonl(tiny_dataset, path)
        assert features.validate_dataset_jsonl(path) == []
        back = features.read_dataset_jsonl(path)
        assert back.variant == tiny_dataset.variant
        assert back.m == tiny_dataset.m and back.L == tiny_dataset.L
        assert np.array_equal(back.labels, tiny_dataset.labels)
        assert np.array_equal(back.situation_ids, tiny_dataset.situation_ids)
        assert np.allclose(back.windows, tiny_dataset.windows, atol=1e-6)

    def test_validate_flags_bad_window_width(self, tiny_dataset, tmp_path):
        path = tmp_path / "bad.jsonl"
        features.write_dataset_jsonl(tiny_dataset, path)
        lines = path.read_text().splitlines()
        import json
        rec = json.loads(lines[3])
        rec["window"][0] = rec["window"][0][:-1]
        lines[3] = json.dumps(rec)
        path.write_text("\n".join(lines) + "\n")
        errors = features.validate_dataset_jsonl(path)
        assert errors and "line 4" in errors[0]

    def test_validate_flags_bad_label(self, tiny_dataset, tmp_path):
        path = tmp_path / "bad2.jsonl"
        features.write_dataset_jsonl(tiny_dataset, path)
        lines = path.read_text().splitlines()
        import json
        rec = json.loads(lines[1])
        rec["label"] = 99
        lines[1] = json.dumps(rec)
        path.write_text("\n".join(lines) + "\n")
        errors = features.validate_dataset_jsonl(path)
        assert errors and "line 2" in errors[0] and "label" in errors[0]

    def test_validate_flags_out_of_range_values(self, tiny_dataset, tmp_path):
        path = tmp_path / "bad3.jsonl"
        features.write_dataset_jsonl(tiny_dataset, path)
        lines = path.read_text().splitlines()
        import json
        rec = json.loads(lines[1])
        rec["window"][0][0] = 7.5
        lines[1] = json.dumps(rec)
        path.write_text("\n".join(lines) + "\n")
        errors = features.validate_dataset_jsonl(path)
        assert errors and "[0, 1]" in errors[0]

    def test_validate_flags_header_mismatch(self, tmp_path):
        path = tmp_path / "bad4.jsonl"
        path.write_text('{"schema_version": 1, "variant": "2d", "m": 4, "L": 5, '
                        '"labels": ["a"], "normalization": {"normalized": false}}\n')
        errors = features.validate_dataset_jsonl(path)
        assert errors and "L=5" in errors[0]
