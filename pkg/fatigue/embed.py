"""
Frame Embeddings
================
Per-frame D-dimensional appearance vectors fused with the landmark matrix.

The CNN feature extractor is not part of this project. Instead an
``EmbeddingProvider`` supplies the vector:

- ``file``: precomputed vectors read from a JSONL file
- ``synthetic``: a seeded random projection of the landmark matrix, squashed by tanh
- ``constant``: the same vector for every frame
"""

import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .errors import EmbeddingLookupError, FormatError, InputError
from .ingest import LANDMARK_COUNT, LANDMARK_FEATURES

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FrameEmbedding:
    clip_id: str
    frame_index: int
    vec: NDArray[np.float64]

    @property
    def key(self):
        return (self.clip_id, self.frame_index)


class EmbeddingProvider(ABC):
    """Returns a D-vector for every frame it is asked about, or raises."""

    kind = ''

    def __init__(self, dim):
        if dim < 1:
            raise InputError(f'embedding dimension must be >= 1, got {dim}')
        self.dim = dim

    @abstractmethod
    def vector_for(self, frame):
        """D-vector for a (prepared) LandmarkFrame."""

    @abstractmethod
    def fallback_vector(self):
        """Vector used for padding slots that hold no real frame."""


class FileEmbeddingProvider(EmbeddingProvider):
    """Lookup table keyed by (clip_id, frame_index)."""

    kind = 'file'

    def __init__(self, embeddings, dim):
        super().__init__(dim)
        self._index = dict(embeddings)

    def __len__(self):
        return len(self._index)

    def __contains__(self, key):
        return key in self._index

    def lookup(self, clip_id, frame_index):
        try:
            return self._index[(clip_id, frame_index)]
        except KeyError:
            raise EmbeddingLookupError(
                f'no embedding for clip {clip_id!r} frame {frame_index}') from None

    def vector_for(self, frame):
        return self.lookup(frame.clip_id, frame.frame_index)

    def fallback_vector(self):
        return np.ones(self.dim)


class SyntheticEmbeddingProvider(EmbeddingProvider):
    kind = 'synthetic'

    def __init__(self, dim, seed):
        super().__init__(dim)
        self.seed = seed

    def vector_for(self, frame):
        return synthetic_embedding(frame, self.dim, self.seed).vec

    def fallback_vector(self):
        ones = np.ones((LANDMARK_COUNT, LANDMARK_FEATURES))
        return np.tanh(_projection(self.dim, self.seed) @ ones.reshape(-1))


class ConstantEmbeddingProvider(EmbeddingProvider):
    kind = 'constant'

    def __init__(self, dim, value=1.0):
        super().__init__(dim)
        self._vec = np.full(dim, float(value))
        self._vec.setflags(write=False)

    def vector_for(self, frame):
        return self._vec

    def fallback_vector(self):
        return self._vec


@lru_cache(maxsize=16)
def _projection(dim, seed, inputs=LANDMARK_COUNT * LANDMARK_FEATURES):
    rng = np.random.default_rng(seed)
    matrix = rng.normal(0.0, 1.0 / np.sqrt(inputs), size=(dim, inputs))
    matrix.setflags(write=False)
    return matrix


def synthetic_embedding(frame, D, seed):
    """
    Deterministic stand-in for a CNN frame embedding.

    ``tanh(P @ vec(points))`` with ``P`` a seeded ``D x (nodes*3)`` Gaussian
    matrix scaled by ``1/sqrt(nodes*3)``. Depends only on the points, so every
    fallback frame maps to the same vector.
    """
    if D < 1:
        raise InputError(f'embedding dimension must be >= 1, got {D}')
    flat = frame.points.reshape(-1)
    vec = np.tanh(_projection(D, seed, flat.size) @ flat)
    return FrameEmbedding(clip_id=frame.clip_id, frame_index=frame.frame_index, vec=vec)


def load_embedding_file(path):
    """
    Read a JSONL embedding file into a :class:`FileEmbeddingProvider`.

    Raises:
    -------
    FormatError: bad JSON, bad record, a repeated key or records of different D.
    """
    from .serializers import EmbeddingRecordSerializer

    index = {}
    dim = None
    with open(path, encoding='utf-8') as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f'{path}:{lineno}: not valid JSON ({exc.msg})') from exc
            if not isinstance(payload, dict):
                raise FormatError(f'{path}:{lineno}: expected a JSON object')
            serializer = EmbeddingRecordSerializer(data=payload)
            if not serializer.is_valid():
                raise FormatError(f'{path}:{lineno}: {serializer.errors}')
            data = serializer.validated_data
            vec = data['vec']
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise FormatError(f'{path}:{lineno}: embedding has D={vec.size}, expected D={dim}')
            key = (data['clip'], data['frame'])
            if key in index:
                raise FormatError(f'{path}:{lineno}: duplicate embedding for clip {key[0]!r} frame {key[1]}')
            vec.setflags(write=False)
            index[key] = vec
    if dim is None:
        raise FormatError(f'{path}: no embedding records')
    logger.debug('loaded embeddings=%d dim=%d path=%s', len(index), dim, path)
    return FileEmbeddingProvider(index, dim)


def write_embedding_file(path, embeddings):
    """Write FrameEmbedding objects as JSONL; floats use shortest round-trip repr."""
    with open(path, 'w', encoding='utf-8') as handle:
        for item in embeddings:
            handle.write(json.dumps({'clip': item.clip_id, 'frame': item.frame_index, 'vec': item.vec.tolist()}))
            handle.write('\n')


def build_provider(spec, dim, data_dir=None):
    """
    Build the provider named by an :class:`fatigue.config.EmbeddingSpec`.

    A ``file`` spec without a path reads ``<data_dir>/embeddings.jsonl``.
    """
    if spec.kind == 'synthetic':
        return SyntheticEmbeddingProvider(dim, spec.seed)
    if spec.kind == 'constant':
        return ConstantEmbeddingProvider(dim, spec.value)
    path = spec.path
    if not path:
        if data_dir is None:
            raise InputError('file embeddings need embedding.path or a dataset directory')
        from .datadir import EMBEDDINGS_FILE

        path = str(Path(data_dir) / EMBEDDINGS_FILE)
    try:
        provider = load_embedding_file(path)
    except FileNotFoundError as exc:
        raise InputError(f'embedding file not found: {path}') from exc
    if provider.dim != dim:
        raise FormatError(f'{path}: embeddings have D={provider.dim} but the model expects D={dim}')
    return provider
