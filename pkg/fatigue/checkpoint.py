"""
Checkpoints
===========
Binary, little-endian container for trained parameters and their run
configuration.

Layout:
-------
- magic ``b'LFAT'``
- u32 format version
- u32 length + UTF-8 run configuration (key-value text, see :mod:`fatigue.config`)
- u32 tensor count
- per tensor: u32 length + UTF-8 name, u32 rank, u64 x rank dims, float64 data

Loading checks the file fully before returning, so a bad file never yields
a partial model. Whether the tensors fit the data is only checked at the
first forward pass.
"""

import logging
import math
import struct

import numpy as np

from .config import dump_run_config, run_config_from_text
from .errors import ConfigError, FormatError
from .network import ModelParams, parameter_shapes

logger = logging.getLogger(__name__)

MAGIC = b'LFAT'
FORMAT_VERSION = 1

_U32 = struct.Struct('<I')
_U64 = struct.Struct('<Q')


def encode_checkpoint(params, run_config):
    config_text = dump_run_config(run_config).encode('utf-8')
    chunks = [MAGIC, _U32.pack(FORMAT_VERSION), _U32.pack(len(config_text)), config_text,
              _U32.pack(len(params.tensors))]
    for name, tensor in params.tensors.items():
        encoded = name.encode('utf-8')
        chunks.append(_U32.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(_U32.pack(tensor.ndim))
        chunks.extend(_U64.pack(dim) for dim in tensor.shape)
        chunks.append(np.ascontiguousarray(tensor, dtype='<f8').tobytes())
    return b''.join(chunks)


class _Reader:
    def __init__(self, blob):
        self.blob = blob
        self.offset = 0

    def take(self, size, what):
        end = self.offset + size
        if end > len(self.blob):
            raise FormatError(f'checkpoint truncated while reading {what}')
        chunk = self.blob[self.offset:end]
        self.offset = end
        return chunk

    def u32(self, what):
        return _U32.unpack(self.take(4, what))[0]

    def u64(self, what):
        return _U64.unpack(self.take(8, what))[0]

    def text(self, what):
        size = self.u32(what)
        try:
            return self.take(size, what).decode('utf-8')
        except UnicodeDecodeError as exc:
            raise FormatError(f'checkpoint {what} is not UTF-8') from exc


def decode_checkpoint(blob):
    """
    Parse checkpoint bytes.

    Returns:
    --------
    tuple: (ModelParams, RunConfig)

    Raises:
    -------
    FormatError: bad magic or version, truncation, trailing bytes, an invalid
        embedded configuration or tensors that do not match it.
    """
    reader = _Reader(blob)
    if reader.take(4, 'magic') != MAGIC:
        raise FormatError('not a LiteFat checkpoint (bad magic)')
    version = reader.u32('version')
    if version != FORMAT_VERSION:
        raise FormatError(f'unsupported checkpoint version {version} (expected {FORMAT_VERSION})')
    try:
        run_config = run_config_from_text(reader.text('configuration'), source='checkpoint')
    except ConfigError as exc:
        raise FormatError(f'checkpoint configuration is invalid: {exc}') from exc

    tensors = {}
    for _ in range(reader.u32('tensor count')):
        name = reader.text('tensor name')
        rank = reader.u32(f'rank of {name}')
        shape = tuple(reader.u64(f'dims of {name}') for _ in range(rank))
        count = math.prod(shape)
        if 8 * count > len(blob) - reader.offset:
            raise FormatError(f'checkpoint tensor {name} declares {count} values, more than the file holds')
        data = reader.take(8 * count, f'data of {name}')
        if name in tensors:
            raise FormatError(f'checkpoint repeats tensor {name}')
        try:
            tensors[name] = np.frombuffer(data, dtype='<f8').astype(np.float64).reshape(shape)
        except (ValueError, OverflowError) as exc:
            raise FormatError(f'checkpoint tensor {name} has unusable dims {shape}') from exc
    if reader.offset != len(blob):
        raise FormatError(f'checkpoint has {len(blob) - reader.offset} trailing bytes')

    expected = parameter_shapes(run_config.model)
    if list(expected) != list(tensors) or any(tensors[n].shape != s for n, s in expected.items()):
        raise FormatError('checkpoint tensors do not match its model configuration')
    return ModelParams(tensors), run_config


def checkpoint_save(params, run_config, path):
    blob = encode_checkpoint(params, run_config)
    with open(path, 'wb') as handle:
        handle.write(blob)
    logger.debug('saved checkpoint path=%s bytes=%d tensors=%d', path, len(blob), len(params.tensors))


def checkpoint_load(path):
    """Read a checkpoint file; see :func:`decode_checkpoint`."""
    with open(path, 'rb') as handle:
        blob = handle.read()
    return decode_checkpoint(blob)
