import io
import json

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from fatigue import ingest
from fatigue.embed import ConstantEmbeddingProvider
from fatigue.errors import FormatError, InputError, ShapeError


def record(clip='c1', frame=0, detected=True, label='normal', points=None, **extra):
    if points is None:
        points = [[100.0 + i, 200.0 + i, 0.9] for i in range(68)]
    payload = {'clip': clip, 'frame': frame, 'detected': detected, 'label': label, 'points': points}
    payload.update(extra)
    return json.dumps(payload)


def make_frame(clip='c', index=0, detected=True, value=2.0, label='normal'):
    return ingest.LandmarkFrame(clip, index, detected, np.full((68, 3), value), label)


class ParseLandmarkStreamTests(SimpleTestCase):

    def test_valid_record(self):
        frames = ingest.parse_landmark_stream([record()])
        self.assertEqual(len(frames), 1)
        self.assertTrue(frames[0].detected)
        self.assertEqual(frames[0].points.shape, (68, 3))
        self.assertEqual(frames[0].label, 'normal')

    def test_label_is_optional(self):
        payload = json.loads(record())
        del payload['label']
        frames = ingest.parse_landmark_stream([json.dumps(payload)])
        self.assertIsNone(frames[0].label)

    def test_wrong_point_count_names_the_line(self):
        bad = record(frame=1, points=[[1.0, 2.0, 0.5]] * 67)
        with self.assertRaisesMessage(FormatError, 'line 2'):
            ingest.parse_landmark_stream([record(), bad])

    def test_non_numeric_coordinate(self):
        points = [[1.0, 2.0, 0.5]] * 68
        points[10] = [1.0, 'x', 0.5]
        with self.assertRaises(FormatError):
            ingest.parse_landmark_stream([record(points=points)])

    def test_frame_must_be_a_json_integer(self):
        for frame in ('3', 3.0, True, -1, None):
            with self.subTest(frame=frame), self.assertRaisesMessage(FormatError, 'frame'):
                ingest.parse_landmark_stream([record(frame=frame)])

    def test_detected_must_be_a_json_boolean(self):
        for detected in ('yes', 'true', 1, 0, None):
            with self.subTest(detected=detected), self.assertRaisesMessage(FormatError, 'detected'):
                ingest.parse_landmark_stream([record(detected=detected)])

    def test_invalid_json(self):
        with self.assertRaisesMessage(FormatError, 'line 1'):
            ingest.parse_landmark_stream(['{not json'])

    def test_unknown_field_rejected(self):
        with self.assertRaises(FormatError):
            ingest.parse_landmark_stream([record(speed=3)])

    def test_duplicate_frame(self):
        with self.assertRaisesMessage(FormatError, 'duplicate'):
            ingest.parse_landmark_stream([record(frame=3), record(frame=3)])

    def test_blank_lines_are_ignored(self):
        frames = ingest.parse_landmark_stream(io.StringIO(record() + '\n\n' + record(frame=1) + '\n'))
        self.assertEqual(len(frames), 2)

    def test_interleaved_clips_come_back_ordered(self):
        lines = [record(clip=f'clip{c}', frame=f) for f in reversed(range(40)) for c in (2, 0, 1)]
        frames = ingest.parse_landmark_stream(lines)
        self.assertEqual(len(frames), 120)
        keys = [(f.clip_id, f.frame_index) for f in frames]
        self.assertEqual(keys, sorted(keys))

    def test_undetected_frames_become_all_ones(self):
        frames = ingest.parse_landmark_stream([record(detected=False)])
        assert_array_equal(frames[0].points, np.ones((68, 3)))

    def test_serialize_round_trip(self):
        clips = ingest.synth_clips(seed=3, clips_per_class=3, M=2, S=4)
        frames = [f for clip in clips.values() for f in clip]
        text = ingest.serialize_landmark_stream(frames)
        again = ingest.parse_landmark_stream(io.StringIO(text))
        expected = sorted((ingest.apply_missing_face_fallback(f) for f in frames),
                          key=lambda f: (f.clip_id, f.frame_index))
        self.assertEqual(len(again), len(expected))
        self.assertTrue(all(a.same_as(b) for a, b in zip(again, expected)))


class FallbackTests(SimpleTestCase):

    def test_undetected_frame(self):
        out = ingest.apply_missing_face_fallback(make_frame(detected=False, value=7.0))
        assert_array_equal(out.points, np.ones((68, 3)))

    def test_detected_frame_passes_through(self):
        frame = make_frame()
        self.assertIs(ingest.apply_missing_face_fallback(frame), frame)

    def test_idempotent(self):
        once = ingest.apply_missing_face_fallback(make_frame(detected=False))
        twice = ingest.apply_missing_face_fallback(once)
        self.assertTrue(once.same_as(twice))


def face_frame(xy, clip='c', index=0, confidence=0.95):
    points = np.hstack([xy, np.full((68, 1), confidence)])
    return ingest.LandmarkFrame(clip, index, True, points, 'normal')


class AlignFaceTests(SimpleTestCase):

    def test_neutral_face_maps_to_zero_anywhere_in_the_image(self):
        for centre, scale in (((320.0, 240.0), 1.0), ((12.0, 400.0), 0.5), ((900.0, -30.0), 2.5)):
            aligned = ingest.align_face(face_frame(ingest.canonical_face() * scale + centre))
            assert_allclose(aligned.points[:, :2], 0.0, atol=1e-12)
            assert_array_equal(aligned.points[:, 2], 0.95)

    def test_position_and_size_are_removed(self):
        frame = ingest.synth_clip('y', 'yawning', 1, np.random.default_rng(0), miss_rate=0.0)[0]
        moved = face_frame(frame.points[:, :2] * 1.7 + np.array([-80.0, 35.0]), confidence=0.5)
        assert_allclose(ingest.align_face(moved).points[:, :2], ingest.align_face(frame).points[:, :2], atol=1e-12)

    def test_reference_shape_is_read_only(self):
        with self.assertRaises(ValueError):
            ingest.reference_shape()[0, 0] = 1.0

    def test_undetected_frame_keeps_fallback(self):
        fallback = ingest.apply_missing_face_fallback(make_frame(detected=False))
        assert_array_equal(ingest.align_face(fallback).points, np.ones((68, 3)))
        assert_array_equal(ingest.prepare_frame(make_frame(detected=False, value=7.0)).points, np.ones((68, 3)))

    def test_degenerate_face_becomes_fallback(self):
        prepared = ingest.prepare_frame(make_frame(value=2.0))
        self.assertFalse(prepared.detected)
        assert_array_equal(prepared.points, np.ones((68, 3)))

    def test_needs_the_68_point_scheme(self):
        with self.assertRaises(ShapeError):
            ingest.align_face(ingest.LandmarkFrame('c', 0, True, np.ones((5, 3))))

    def test_lower_face_residual_separates_the_classes(self):
        rng = np.random.default_rng(3)
        lower = list(ingest.LOWER_FACE)

        def mean_residual(class_name):
            frames = ingest.synth_clip('c', class_name, 24, rng, miss_rate=0.0)
            return np.mean([ingest.prepare_frame(f).points[lower, 1].mean() for f in frames])

        for _ in range(10):
            self.assertLess(abs(mean_residual('normal')), 0.05)
            self.assertTrue(0.1 < mean_residual('talking') < 0.35)
            self.assertGreater(mean_residual('yawning'), 0.45)


class SelectKeyFramesTests(SimpleTestCase):

    def indices(self, length, S):
        frames = [make_frame(index=i) for i in range(length)]
        return [f.frame_index for f in ingest.select_key_frames(frames, S)]

    def test_identity_when_lengths_match(self):
        self.assertEqual(self.indices(16, 16), list(range(16)))

    def test_uniform_subsampling(self):
        self.assertEqual(self.indices(31, 16), list(range(0, 31, 2)))

    def test_padding_repeats_last_frame(self):
        self.assertEqual(self.indices(5, 16), [0, 1, 2, 3, 4] + [4] * 11)

    def test_half_rounds_up(self):
        # 1 * 3 / 2 is exactly 1.5
        self.assertEqual(self.indices(4, 3), [0, 2, 3])

    def test_single_frame_sample(self):
        self.assertEqual(self.indices(9, 1), [0])

    def test_empty_clip(self):
        with self.assertRaises(InputError):
            ingest.select_key_frames([], 4)


class AssembleSamplesTests(SimpleTestCase):

    def test_builds_fixed_length_samples(self):
        clips = {'a': [make_frame('a', i, label='yawning') for i in range(3)],
                 'b': [make_frame('b', i) for i in range(20)]}
        samples = ingest.assemble_samples(clips, ConstantEmbeddingProvider(4), 8, ('normal', 'yawning'))
        self.assertEqual([s.clip_id for s in samples], ['a', 'b'])
        self.assertEqual([s.label for s in samples], [1, 0])
        for sample in samples:
            self.assertEqual(sample.S, 8)
            self.assertEqual(sample.embeddings.shape, (8, 4))
            self.assertEqual(sample.points.shape, (8, 68, 3))

    def test_missing_label(self):
        clips = {'a': [make_frame('a', 0, label=None)]}
        with self.assertRaises(InputError):
            ingest.assemble_samples(clips, ConstantEmbeddingProvider(4), 4, ('normal',))

    def test_conflicting_frame_labels(self):
        frames = [make_frame('a', i, label='normal') for i in range(10)] + [make_frame('a', 10, label='yawning')]
        with self.assertRaisesMessage(InputError, 'conflicting frame labels'):
            ingest.assemble_samples({'a': frames}, ConstantEmbeddingProvider(4), 4, ('normal', 'yawning'))

    def test_partly_unlabelled_clip_is_rejected(self):
        frames = [make_frame('a', 0, label=None), make_frame('a', 1, label='yawning')]
        with self.assertRaises(InputError):
            ingest.assemble_samples({'a': frames}, ConstantEmbeddingProvider(4), 2, ('normal', 'yawning'))

    def test_samples_are_face_aligned(self):
        frames = ingest.synth_clip('a', 'normal', 6, np.random.default_rng(1), miss_rate=0.0)
        sample, = ingest.assemble_samples({'a': frames}, ConstantEmbeddingProvider(4), 6, ('normal',))
        for raw, prepared in zip(frames, sample.frames):
            self.assertTrue(prepared.same_as(ingest.align_face(raw)))

    def test_unknown_label(self):
        clips = {'a': [make_frame('a', 0, label='sleeping')]}
        with self.assertRaises(InputError):
            ingest.assemble_samples(clips, ConstantEmbeddingProvider(4), 4, ('normal', 'yawning'))

    def test_clip_sample_rejects_backwards_frames(self):
        frames = (make_frame('a', 2), make_frame('a', 1))
        with self.assertRaises(InputError):
            ingest.ClipSample('a', frames, np.zeros((2, 3)), 0)


class SynthDatasetTests(SimpleTestCase):

    def test_split_sizes(self):
        data = ingest.synth_dataset(seed=1, clips_per_class=10, M=3, S=8, D=8)
        self.assertEqual(len(data), 30)
        self.assertEqual((len(data.train), len(data.validation), len(data.test)), (21, 4, 5))
        ids = [s.clip_id for split in (data.train, data.validation, data.test) for s in split]
        self.assertEqual(len(set(ids)), 30)
        self.assertEqual(data.class_names, ('normal', 'yawning', 'talking'))

    def test_deterministic(self):
        first = ingest.synth_dataset(seed=4, clips_per_class=3, M=2, S=6, D=5)
        second = ingest.synth_dataset(seed=4, clips_per_class=3, M=2, S=6, D=5)
        for a, b in zip(first.train + first.test, second.train + second.test):
            self.assertEqual(a.clip_id, b.clip_id)
            assert_array_equal(a.points, b.points)
            assert_array_equal(a.embeddings, b.embeddings)

    def test_every_sample_has_S_frames(self):
        data = ingest.synth_dataset(seed=2, clips_per_class=3, M=3, S=12, D=4)
        for sample in data.train + data.validation + data.test:
            self.assertEqual(sample.S, 12)

    def test_yawning_mouth_spread_varies_more_than_normal(self):
        clips = ingest.synth_clips(seed=7, clips_per_class=8, M=3, S=16)

        def mean_variance(class_name):
            variances = []
            for clip_id, frames in clips.items():
                if not clip_id.startswith(class_name):
                    continue
                spreads = [ingest.mouth_spread(f.points) for f in frames if f.detected]
                variances.append(np.var(spreads))
            return np.mean(variances)

        self.assertGreater(mean_variance('yawning'), mean_variance('normal'))

    def test_mouth_spread_of_fallback_frame(self):
        self.assertEqual(ingest.mouth_spread(np.ones((68, 3))), 0.0)

    def test_rejects_unsupported_class_count(self):
        with self.assertRaises(InputError):
            ingest.synth_clips(seed=0, clips_per_class=3, M=4)
        with self.assertRaises(InputError):
            ingest.synth_clips(seed=0, clips_per_class=2, M=3)

    def test_split_clip_ids(self):
        train, validation, test = ingest.split_clip_ids([f'c{i:02d}' for i in range(20)], seed=5)
        self.assertEqual((len(train), len(validation), len(test)), (14, 3, 3))
        self.assertEqual(ingest.split_clip_ids([f'c{i:02d}' for i in range(20)], seed=5), (train, validation, test))
