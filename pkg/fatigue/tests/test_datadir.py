import json
import tempfile
from pathlib import Path

from django.test import SimpleTestCase
from numpy.testing import assert_array_equal

from fatigue import datadir
from fatigue.errors import FormatError, InputError
from fatigue.ingest import synth_dataset


class DatasetDirectoryTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name) / 'data'

    def tearDown(self):
        self.tmp.cleanup()

    def test_written_directory_matches_in_memory_dataset(self):
        manifest = datadir.write_synthetic_dataset(self.dir, seed=5, clips_per_class=4, M=3, S=6, D=8)
        self.assertEqual(manifest['class_names'], ['normal', 'yawning', 'talking'])
        run = datadir.run_config_for(self.dir)
        self.assertEqual((run.model.M, run.model.S, run.model.D), (3, 6, 8))
        self.assertEqual(run.data.path, str(self.dir))

        loaded = datadir.load_dataset_dir(self.dir, run)
        expected = synth_dataset(seed=5, clips_per_class=4, M=3, S=6, D=8)
        for split in ('train', 'validation', 'test'):
            ours, theirs = getattr(loaded, split), getattr(expected, split)
            self.assertEqual([s.clip_id for s in ours], [s.clip_id for s in theirs])
            for a, b in zip(ours, theirs):
                self.assertEqual(a.label, b.label)
                assert_array_equal(a.points, b.points)
                assert_array_equal(a.embeddings, b.embeddings)

    def test_config_overrides_manifest(self):
        datadir.write_synthetic_dataset(self.dir, seed=1, clips_per_class=3, M=2, S=4, D=4)
        run = datadir.run_config_for(self.dir, overrides={'model.R': '5', 'embedding.kind': 'synthetic'})
        self.assertEqual(run.model.R, 5)
        self.assertEqual(run.model.M, 2)
        self.assertEqual(run.data.class_names, ('normal', 'yawning'))

    def test_without_manifest_split_comes_from_seed(self):
        datadir.write_synthetic_dataset(self.dir, seed=1, clips_per_class=4, M=2, S=4, D=4)
        run = datadir.run_config_for(self.dir)
        (self.dir / datadir.MANIFEST_FILE).unlink()
        loaded = datadir.load_dataset_dir(self.dir, run)
        self.assertEqual((len(loaded.train), len(loaded.validation), len(loaded.test)), (5, 1, 2))

    def test_missing_directory_is_named(self):
        with self.assertRaisesMessage(InputError, str(self.dir)):
            datadir.load_dataset_dir(self.dir, datadir.run_config_for())

    def test_empty_directory(self):
        self.dir.mkdir()
        with self.assertRaisesMessage(InputError, datadir.LANDMARKS_FILE):
            datadir.load_dataset_dir(self.dir, datadir.run_config_for(self.dir))

    def test_bad_manifest(self):
        self.dir.mkdir()
        (self.dir / datadir.MANIFEST_FILE).write_text(json.dumps({'class_names': ['a']}), encoding='utf-8')
        with self.assertRaises(FormatError):
            datadir.read_manifest(self.dir)

    def test_class_count_must_match(self):
        datadir.write_synthetic_dataset(self.dir, seed=1, clips_per_class=3, M=2, S=4, D=4)
        run = datadir.run_config_for(self.dir, overrides={'data.class_names': 'a,b,c'})
        with self.assertRaises(InputError):
            datadir.load_dataset_dir(self.dir, run)
