"""
Dataset Directories
===================
On-disk layout shared by ``synth``, ``train``, ``eval`` and ``ablate``::

    <dir>/landmarks.jsonl    one landmark record per frame (pixel coordinates)
    <dir>/embeddings.jsonl   one embedding record per frame
    <dir>/manifest.json      class names, S, D, seed and the clip split

Only ``landmarks.jsonl`` is required. Without a manifest the split is drawn
from ``train.seed`` and the class names come from the configuration.
"""

import json
import logging
from pathlib import Path

from . import ingest
from .config import default_run_config, load_run_config, run_config_from_values
from .embed import build_provider, synthetic_embedding, write_embedding_file
from .errors import FormatError, InputError

logger = logging.getLogger(__name__)

LANDMARKS_FILE = 'landmarks.jsonl'
EMBEDDINGS_FILE = 'embeddings.jsonl'
MANIFEST_FILE = 'manifest.json'


def write_synthetic_dataset(out_dir, seed, clips_per_class, M, S=16, D=64, embedding_seed=None):
    """
    Generate a synthetic dataset directory.

    Every frame gets the synthetic embedding of its prepared (face-aligned,
    fallback-applied) landmarks, so loading the directory with the ``file``
    provider reproduces :func:`fatigue.ingest.synth_dataset` exactly.

    Returns:
    --------
    dict: the manifest written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    embedding_seed = seed if embedding_seed is None else embedding_seed
    clips = ingest.synth_clips(seed, clips_per_class, M, S)

    frames = [frame for clip_id in sorted(clips) for frame in clips[clip_id]]
    embeddings = []
    for frame in frames:
        embeddings.append(synthetic_embedding(ingest.prepare_frame(frame), D, embedding_seed))

    train, validation, test = ingest.split_clip_ids(clips, seed)
    manifest = {
        'class_names': list(ingest.CLASS_NAMES[M]),
        'frames_per_sample': S,
        'embedding_dim': D,
        'seed': embedding_seed,
        'splits': {'train': train, 'validation': validation, 'test': test},
    }
    (out / LANDMARKS_FILE).write_text(ingest.serialize_landmark_stream(frames), encoding='utf-8')
    write_embedding_file(out / EMBEDDINGS_FILE, embeddings)
    (out / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2) + '\n', encoding='utf-8')
    logger.info('synth out=%s clips=%d frames=%d classes=%d', out, len(clips), len(frames), M)
    return manifest


def read_manifest(data_dir):
    """Validated manifest dict, or None when the directory has none."""
    from .serializers import DatasetManifestSerializer

    path = Path(data_dir) / MANIFEST_FILE
    if not path.exists():
        return None
    try:
        payload = json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as exc:
        raise FormatError(f'{path}: not valid JSON ({exc.msg})') from exc
    serializer = DatasetManifestSerializer(data=payload)
    if not serializer.is_valid():
        raise FormatError(f'{path}: {serializer.errors}')
    return serializer.validated_data


def run_config_for(data_dir=None, config_path=None, overrides=None):
    """
    Layer configuration: settings defaults, dataset manifest, file, overrides.

    The manifest contributes ``model.M``, ``model.S``, ``model.D``, the class
    names and the embedding seed.
    """
    run = default_run_config()
    manifest = read_manifest(data_dir) if data_dir else None
    if manifest:
        run = run_config_from_values({
            'model.M': str(len(manifest['class_names'])),
            'model.S': str(manifest['frames_per_sample']),
            'model.D': str(manifest['embedding_dim']),
            'embedding.seed': str(manifest['seed']),
            'data.class_names': ','.join(manifest['class_names']),
        }, run)
    if data_dir:
        run = run_config_from_values({'data.path': str(data_dir)}, run)
    return load_run_config(config_path, overrides, base=run)


def _landmarks_path(data_dir):
    directory = Path(data_dir)
    if not directory.is_dir():
        raise InputError(f'dataset directory not found: {directory}')
    path = directory / LANDMARKS_FILE
    if not path.is_file():
        raise InputError(f'no {LANDMARKS_FILE} in dataset directory {directory}')
    return path


def load_dataset_dir(data_dir, run):
    """
    Read a dataset directory into a DatasetSplit.

    Raises:
    -------
    InputError: missing directory or landmarks, no frames, or a manifest split
        naming clips absent from the landmarks.
    FormatError: malformed landmark, embedding or manifest content.
    """
    path = _landmarks_path(data_dir)
    with open(path, encoding='utf-8') as handle:
        frames = ingest.parse_landmark_stream(handle)
    if not frames:
        raise InputError(f'no landmark frames in {path}')
    clips = ingest.group_by_clip(frames)
    class_names = _class_names(run)
    provider = build_provider(run.embedding, run.model.D, data_dir)
    samples = {s.clip_id: s for s in ingest.assemble_samples(clips, provider, run.model.S, class_names)}

    manifest = read_manifest(data_dir)
    if manifest:
        splits = manifest['splits']
        missing = sorted(set().union(*map(set, splits.values())) - set(samples))
        if missing:
            raise InputError(f'manifest names clips with no landmarks: {", ".join(missing[:5])}')
        train, validation, test = splits['train'], splits['validation'], splits['test']
    else:
        train, validation, test = ingest.split_clip_ids(samples, run.train.seed)
    logger.info('loaded data=%s clips=%d train=%d validation=%d test=%d',
                data_dir, len(samples), len(train), len(validation), len(test))
    return ingest.DatasetSplit(
        train=[samples[c] for c in train],
        validation=[samples[c] for c in validation],
        test=[samples[c] for c in test],
        class_names=class_names,
    )


def _class_names(run):
    if run.data.class_names:
        names = tuple(run.data.class_names)
    elif run.model.M in ingest.CLASS_NAMES:
        names = ingest.CLASS_NAMES[run.model.M]
    else:
        raise InputError(f'no class names configured for M={run.model.M}; set data.class_names')
    if len(names) != run.model.M:
        raise InputError(f'{len(names)} class names configured but model.M = {run.model.M}')
    return names
