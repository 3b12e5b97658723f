import struct
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_array_equal

from fatigue import checkpoint, network
from fatigue.bench import dummy_sample
from fatigue.config import DataConfig, EmbeddingSpec, ModelConfig, RunConfig, TrainConfig, dump_run_config
from fatigue.errors import FormatError, ShapeError


class CheckpointTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / 'model.lfat'
        self.run = RunConfig(
            train=TrainConfig(learning_rate=3e-4, seed=9),
            embedding=EmbeddingSpec(kind='synthetic', seed=4),
            data=DataConfig(path='data', class_names=('normal', 'yawning', 'talking')),
        )
        self.params = network.init_params(self.run.model, 1)

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip_is_bit_exact(self):
        checkpoint.checkpoint_save(self.params, self.run, self.path)
        params, run = checkpoint.checkpoint_load(self.path)
        self.assertEqual(run, self.run)
        self.assertEqual(params.names(), self.params.names())
        for name in params:
            self.assertEqual(params[name].tobytes(), self.params[name].tobytes())

    def test_round_trip_of_ablated_model(self):
        run = replace(self.run, model=ModelConfig(use_gcn=False, use_embedding=False, dilations=(1, 3)))
        params = network.init_params(run.model, 2)
        checkpoint.checkpoint_save(params, run, self.path)
        loaded, loaded_run = checkpoint.checkpoint_load(self.path)
        self.assertEqual(loaded_run.model, run.model)
        assert_array_equal(loaded['input.W'], params['input.W'])

    def test_same_input_same_bytes(self):
        self.assertEqual(checkpoint.encode_checkpoint(self.params, self.run),
                         checkpoint.encode_checkpoint(self.params.copy(), self.run))

    def test_corrupt_magic(self):
        blob = bytearray(checkpoint.encode_checkpoint(self.params, self.run))
        blob[0] ^= 0xFF
        with self.assertRaisesMessage(FormatError, 'magic'):
            checkpoint.decode_checkpoint(bytes(blob))

    def test_unknown_version(self):
        blob = bytearray(checkpoint.encode_checkpoint(self.params, self.run))
        blob[4] = 2
        with self.assertRaisesMessage(FormatError, 'version'):
            checkpoint.decode_checkpoint(bytes(blob))

    def test_truncated(self):
        blob = checkpoint.encode_checkpoint(self.params, self.run)
        for cut in (3, 10, len(blob) // 2, len(blob) - 1):
            with self.assertRaises(FormatError):
                checkpoint.decode_checkpoint(blob[:cut])

    def test_trailing_bytes(self):
        blob = checkpoint.encode_checkpoint(self.params, self.run)
        with self.assertRaisesMessage(FormatError, 'trailing'):
            checkpoint.decode_checkpoint(blob + b'\0')

    def test_tensors_must_match_embedded_config(self):
        small = network.init_params(replace(self.run.model, R=8), 0)
        with self.assertRaises(FormatError):
            checkpoint.decode_checkpoint(checkpoint.encode_checkpoint(small, self.run))

    def test_node_mismatch_surfaces_at_forward(self):
        run = replace(self.run, model=replace(self.run.model, N=10))
        checkpoint.checkpoint_save(network.init_params(run.model, 0), run, self.path)
        params, loaded = checkpoint.checkpoint_load(self.path)
        sample = dummy_sample(self.run.model, np.random.default_rng(0))
        with self.assertRaises(ShapeError):
            network.model_forward(sample, params, loaded.model)

    def test_dims_larger_than_the_file(self):
        config_text = dump_run_config(self.run).encode('utf-8')
        name = b'fusion.w'
        for dims in ((2 ** 32, 2 ** 32, 2 ** 32), (2 ** 61,), (2 ** 63, 2)):
            with self.subTest(dims=dims):
                blob = b''.join([
                    checkpoint.MAGIC, struct.pack('<I', checkpoint.FORMAT_VERSION),
                    struct.pack('<I', len(config_text)), config_text,
                    struct.pack('<I', 1), struct.pack('<I', len(name)), name,
                    struct.pack('<I', len(dims)), *(struct.pack('<Q', d) for d in dims),
                    np.zeros(3).tobytes(),
                ])
                with self.assertRaisesMessage(FormatError, 'more than the file holds'):
                    checkpoint.decode_checkpoint(blob)

    def test_empty_tensor_with_huge_dims(self):
        blob = checkpoint.encode_checkpoint(self.params, self.run)
        name = b'fusion.w'
        start = blob.index(name) + len(name)
        patched = blob[:start] + struct.pack('<IQQ', 2, 0, 2 ** 63 - 1) + blob[start + 4 + 8 + 3 * 8:]
        with self.assertRaises(FormatError):
            checkpoint.decode_checkpoint(patched)
