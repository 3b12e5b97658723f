import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_array_equal

from fatigue import embed
from fatigue.config import EmbeddingSpec
from fatigue.errors import EmbeddingLookupError, FormatError, InputError
from fatigue.ingest import LandmarkFrame, apply_missing_face_fallback


def frame(clip='c', index=0, detected=True, seed=0):
    points = np.random.default_rng(seed).uniform(0.0, 1.0, size=(68, 3))
    return LandmarkFrame(clip, index, detected, points)


class EmbeddingFileTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write_lines(self, records):
        path = self.dir / 'embeddings.jsonl'
        path.write_text(''.join(json.dumps(r) + '\n' for r in records), encoding='utf-8')
        return path

    def test_load_ten_records(self):
        rng = np.random.default_rng(0)
        path = self.write_lines([{'clip': 'c', 'frame': i, 'vec': rng.standard_normal(64).tolist()} for i in range(10)])
        provider = embed.load_embedding_file(path)
        self.assertEqual(len(provider), 10)
        self.assertEqual(provider.dim, 64)

    def test_inconsistent_dimension(self):
        path = self.write_lines([{'clip': 'c', 'frame': 0, 'vec': [0.0] * 64},
                                 {'clip': 'c', 'frame': 1, 'vec': [0.0] * 32}])
        with self.assertRaises(FormatError):
            embed.load_embedding_file(path)

    def test_duplicate_key(self):
        path = self.write_lines([{'clip': 'c', 'frame': 0, 'vec': [0.0]}, {'clip': 'c', 'frame': 0, 'vec': [1.0]}])
        with self.assertRaises(FormatError):
            embed.load_embedding_file(path)

    def test_frame_must_be_a_json_integer(self):
        for index in ('0', 0.0, False):
            with self.subTest(frame=index):
                path = self.write_lines([{'clip': 'c', 'frame': index, 'vec': [1.0]}])
                with self.assertRaises(FormatError):
                    embed.load_embedding_file(path)

    def test_empty_file(self):
        path = self.write_lines([])
        with self.assertRaises(FormatError):
            embed.load_embedding_file(path)

    def test_missing_key_names_the_frame(self):
        path = self.write_lines([{'clip': 'c', 'frame': 0, 'vec': [1.0, 2.0]}])
        provider = embed.load_embedding_file(path)
        with self.assertRaisesMessage(EmbeddingLookupError, "clip 'c' frame 5"):
            provider.lookup('c', 5)

    def test_write_then_read_is_exact(self):
        rng = np.random.default_rng(1)
        items = [embed.FrameEmbedding('clip', i, rng.standard_normal(16)) for i in range(5)]
        path = self.dir / 'out.jsonl'
        embed.write_embedding_file(path, items)
        provider = embed.load_embedding_file(path)
        for item in items:
            assert_array_equal(provider.lookup(item.clip_id, item.frame_index), item.vec)

    def test_build_provider_reads_dataset_file(self):
        self.write_lines([{'clip': 'c', 'frame': 0, 'vec': [1.0, 2.0]}])
        provider = embed.build_provider(EmbeddingSpec(kind='file'), 2, data_dir=self.dir)
        assert_array_equal(provider.vector_for(frame()), [1.0, 2.0])

    def test_build_provider_dimension_mismatch(self):
        self.write_lines([{'clip': 'c', 'frame': 0, 'vec': [1.0, 2.0]}])
        with self.assertRaises(FormatError):
            embed.build_provider(EmbeddingSpec(kind='file'), 3, data_dir=self.dir)

    def test_build_provider_missing_file(self):
        with self.assertRaises(InputError):
            embed.build_provider(EmbeddingSpec(kind='file', path=str(self.dir / 'nope.jsonl')), 2)


class SyntheticEmbeddingTests(SimpleTestCase):

    def test_deterministic(self):
        a = embed.synthetic_embedding(frame(), 32, seed=3)
        b = embed.synthetic_embedding(frame(), 32, seed=3)
        assert_array_equal(a.vec, b.vec)
        self.assertEqual(a.key, ('c', 0))

    def test_seed_changes_the_projection(self):
        a = embed.synthetic_embedding(frame(), 32, seed=3)
        b = embed.synthetic_embedding(frame(), 32, seed=4)
        self.assertFalse(np.array_equal(a.vec, b.vec))

    def test_range(self):
        vec = embed.synthetic_embedding(frame(seed=9), 128, seed=1).vec
        self.assertTrue(np.all(np.abs(vec) < 1.0))

    def test_fallback_frames_share_one_vector(self):
        provider = embed.SyntheticEmbeddingProvider(16, seed=2)
        first = provider.vector_for(apply_missing_face_fallback(frame('a', 0, detected=False, seed=1)))
        second = provider.vector_for(apply_missing_face_fallback(frame('b', 7, detected=False, seed=2)))
        assert_array_equal(first, second)
        assert_array_equal(first, provider.fallback_vector())

    def test_small_perturbation_small_change(self):
        base = frame(seed=4)
        moved = LandmarkFrame('c', 0, True, base.points + 1e-6)
        delta = embed.synthetic_embedding(moved, 64, 0).vec - embed.synthetic_embedding(base, 64, 0).vec
        self.assertLess(np.max(np.abs(delta)), 1e-3)

    def test_dimension_must_be_positive(self):
        with self.assertRaises(InputError):
            embed.synthetic_embedding(frame(), 0, seed=0)


class ConstantProviderTests(SimpleTestCase):

    def test_same_vector_everywhere(self):
        provider = embed.build_provider(EmbeddingSpec(kind='constant', value=0.25), 3)
        assert_array_equal(provider.vector_for(frame()), [0.25, 0.25, 0.25])
        assert_array_equal(provider.fallback_vector(), [0.25, 0.25, 0.25])
