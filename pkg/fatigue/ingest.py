"""
Landmark Ingestion
==================
Turns newline-delimited landmark records into fixed-length clip samples.

Workflow:
---------
1. ``parse_landmark_stream`` validates every line (DRF serializer), applies
   the missing-face fallback and orders frames by (clip, frame).
2. ``select_key_frames`` reduces each clip to exactly S frames.
3. ``prepare_frame`` aligns each selected frame to the driver's own face
   (position and size removed, neutral shape subtracted).
4. ``assemble_samples`` pairs frames with embeddings into ``ClipSample``s.

``synth_dataset`` generates a deterministic three-class (or binary) dataset
with the same shape as real data so the whole pipeline runs without video.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache

import numpy as np
from numpy.typing import NDArray

from .errors import FormatError, InputError, ShapeError

logger = logging.getLogger(__name__)

LANDMARK_COUNT = 68
LANDMARK_FEATURES = 3

# 68-point scheme: jaw 0-16, brows 17-26, nose 27-35, eyes 36-47, mouth 48-67
UPPER_FACE = tuple(range(17, 48))
EYE_CORNERS = (36, 45)
MOUTH_CORNERS = (48, 54)
INNER_LIP_PAIRS = ((61, 67), (62, 66), (63, 65))
LOWER_FACE = tuple(range(5, 12)) + tuple(range(55, 60)) + (65, 66, 67)

CLASS_NAMES = {
    2: ('normal', 'yawning'),
    3: ('normal', 'yawning', 'talking'),
}

# camera frame the synthetic faces are placed in
SYNTH_FRAME_SIZE = (640.0, 480.0)


@dataclass(frozen=True)
class LandmarkFrame:
    """
    One video frame reduced to its landmarks.

    Fields:
    -------
    - clip_id: clip the frame belongs to
    - frame_index: position within the clip
    - detected: whether the landmark detector found a face
    - points: ``(nodes, 3)`` matrix of (X, Y, confidence)
    - label: class name of the clip, if known

    Streams always carry 68 points; in-memory frames may carry any node count
    so small graphs can be built for checks and benchmarks.
    """

    clip_id: str
    frame_index: int
    detected: bool
    points: NDArray[np.float64]
    label: str | None = None

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != LANDMARK_FEATURES or points.shape[0] < 1:
            raise ShapeError(f'frame points must be nodes x 3, got shape {points.shape}')
        object.__setattr__(self, 'points', points)

    def same_as(self, other):
        """Structural equality, comparing points bit for bit."""
        return (
            self.clip_id == other.clip_id
            and self.frame_index == other.frame_index
            and self.detected == other.detected
            and self.label == other.label
            and np.array_equal(self.points, other.points)
        )


@dataclass(frozen=True)
class ClipSample:
    """
    A fixed-length window of S frames with their embeddings and the clip label.

    Frame indices never decrease; they repeat only where a short clip was
    padded by repeating its last frame.
    """

    clip_id: str
    frames: tuple
    embeddings: NDArray[np.float64]
    label: int

    def __post_init__(self):
        frames = tuple(self.frames)
        embeddings = np.asarray(self.embeddings, dtype=np.float64)
        if not frames:
            raise InputError(f'clip {self.clip_id!r} has no frames')
        if embeddings.ndim != 2 or embeddings.shape[0] != len(frames):
            raise ShapeError(
                f'clip {self.clip_id!r}: {len(frames)} frames but embeddings of shape {embeddings.shape}')
        if any(f.clip_id != self.clip_id for f in frames):
            raise InputError(f'clip {self.clip_id!r} mixes frames from other clips')
        indices = [f.frame_index for f in frames]
        if any(b < a for a, b in zip(indices, indices[1:])):
            raise InputError(f'clip {self.clip_id!r}: frame indices go backwards')
        object.__setattr__(self, 'frames', frames)
        object.__setattr__(self, 'embeddings', embeddings)

    @property
    def S(self):
        return len(self.frames)

    @cached_property
    def points(self):
        """Stacked landmark matrices, ``(S, nodes, 3)``."""
        return np.stack([f.points for f in self.frames])


@dataclass(frozen=True)
class DatasetSplit:
    train: list = field(default_factory=list)
    validation: list = field(default_factory=list)
    test: list = field(default_factory=list)
    class_names: tuple = ()

    def __post_init__(self):
        seen = {}
        for split in ('train', 'validation', 'test'):
            for sample in getattr(self, split):
                other = seen.setdefault(sample.clip_id, split)
                if other != split:
                    raise InputError(f'clip {sample.clip_id!r} appears in both {other} and {split}')

    def __len__(self):
        return len(self.train) + len(self.validation) + len(self.test)


# ============================================================================
# STREAM PARSING
# ============================================================================

def iter_landmark_stream(lines):
    """
    Validate landmark records one line at a time, in input order.

    Blank lines are ignored. The missing-face fallback is applied to every
    undetected frame.

    Raises:
    -------
    FormatError: a line is not JSON or fails record validation; the message
        names the line number.
    """
    from .serializers import LandmarkRecordSerializer

    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f'line {lineno}: not valid JSON ({exc.msg})') from exc
        if not isinstance(payload, dict):
            raise FormatError(f'line {lineno}: expected a JSON object')
        serializer = LandmarkRecordSerializer(data=payload)
        if not serializer.is_valid():
            raise FormatError(f'line {lineno}: {_describe_errors(serializer.errors)}')
        data = serializer.validated_data
        frame = LandmarkFrame(
            clip_id=data['clip'],
            frame_index=data['frame'],
            detected=data['detected'],
            points=data['points'],
            label=data['label'],
        )
        yield lineno, apply_missing_face_fallback(frame)


def parse_landmark_stream(lines):
    """
    Parse a whole landmark stream.

    Parameters:
    -----------
    lines : iterable of str
        An open text file or any iterable of JSONL lines.

    Returns:
    --------
    list: LandmarkFrame objects sorted by (clip_id, frame_index).

    Raises:
    -------
    FormatError: malformed line, or a repeated (clip, frame) pair.
    """
    frames = []
    seen = {}
    for lineno, frame in iter_landmark_stream(lines):
        key = (frame.clip_id, frame.frame_index)
        if key in seen:
            raise FormatError(
                f'line {lineno}: duplicate frame {frame.frame_index} of clip {frame.clip_id!r} '
                f'(first seen on line {seen[key]})')
        seen[key] = lineno
        frames.append(frame)
    frames.sort(key=lambda f: (f.clip_id, f.frame_index))
    logger.debug('parsed frames=%d clips=%d', len(frames), len({f.clip_id for f in frames}))
    return frames


def serialize_landmark_stream(frames):
    """Render frames as JSONL text that :func:`parse_landmark_stream` reads back."""
    lines = []
    for frame in frames:
        lines.append(json.dumps({
            'clip': frame.clip_id,
            'frame': frame.frame_index,
            'detected': frame.detected,
            'label': frame.label,
            'points': frame.points.tolist(),
        }))
    return ''.join(line + '\n' for line in lines)


def group_by_clip(frames):
    """Group ordered frames into ``{clip_id: [frames...]}`` preserving order."""
    clips = {}
    for frame in frames:
        clips.setdefault(frame.clip_id, []).append(frame)
    return clips


def _describe_errors(errors):
    parts = []
    for name, messages in errors.items():
        if isinstance(messages, (list, tuple)):
            text = ' '.join(str(m) for m in messages)
        else:
            text = str(messages)
        parts.append(text if name == 'non_field_errors' else f'{name}: {text}')
    return '; '.join(parts)


# ============================================================================
# FRAME PREPARATION
# ============================================================================

def apply_missing_face_fallback(frame):
    """Replace an undetected frame's points by the all-ones matrix; detected frames pass through."""
    if frame.detected:
        return frame
    return replace(frame, points=np.ones_like(frame.points))


def _face_frame(xy):
    """Upper-face centroid and outer-eye-corner distance of a 68 x 2 pixel array."""
    centre = xy[list(UPPER_FACE)].mean(axis=0)
    left, right = EYE_CORNERS
    return centre, float(np.hypot(*(xy[right] - xy[left])))


@lru_cache(maxsize=1)
def reference_shape():
    """The neutral template in face-relative units (read-only)."""
    xy = canonical_face()
    centre, scale = _face_frame(xy)
    shape = (xy - centre) / scale
    shape.setflags(write=False)
    return shape


def align_face(frame):
    """
    Express a detected frame relative to the driver's own face.

    X and Y are translated by the upper-face centroid (brows, nose, eyes),
    divided by the outer-eye-corner distance, and the neutral reference
    shape is subtracted, so a still neutral face maps to about zero wherever
    it sits in the image and whatever its size. Confidence is untouched.

    Undetected frames pass through. A detected frame whose eye corners
    coincide carries no usable geometry and is returned as undetected.

    Raises:
    -------
    ShapeError: the frame does not carry the 68-point scheme.
    """
    if frame.points.shape[0] != LANDMARK_COUNT:
        raise ShapeError(f'face alignment needs {LANDMARK_COUNT} landmarks, got {frame.points.shape[0]}')
    if not frame.detected:
        return frame
    centre, scale = _face_frame(frame.points[:, :2])
    if scale <= 1e-9:
        logger.debug('degenerate face clip=%s frame=%d', frame.clip_id, frame.frame_index)
        return replace(frame, detected=False, points=np.ones_like(frame.points))
    points = frame.points.copy()
    points[:, :2] = (points[:, :2] - centre) / scale - reference_shape()
    return replace(frame, points=points)


def prepare_frame(frame):
    """Alignment followed by the missing-face fallback: what the network sees of one frame."""
    return apply_missing_face_fallback(align_face(frame))


def select_key_frames(frames, S):
    """
    Reduce one clip to exactly ``S`` frames.

    Uniform subsampling picks indices ``round(i * (L - 1) / (S - 1))`` (halves
    round up) when the clip has at least ``S`` frames; shorter clips are
    padded by repeating their last frame.

    Raises:
    -------
    InputError: empty clip or ``S < 1``.
    """
    frames = list(frames)
    if not frames:
        raise InputError('cannot select key frames from an empty clip')
    if S < 1:
        raise InputError(f'S must be >= 1, got {S}')
    length = len(frames)
    if length < S:
        return frames + [frames[-1]] * (S - length)
    if S == 1:
        return [frames[0]]
    # integer form of floor(i*(L-1)/(S-1) + 1/2)
    return [frames[(2 * i * (length - 1) + (S - 1)) // (2 * (S - 1))] for i in range(S)]


def mouth_spread(points):
    """
    Mouth aspect ratio: mean inner-lip opening over mouth width.

    Returns 0.0 for a degenerate (zero-width) mouth such as the fallback frame.
    """
    points = np.asarray(points, dtype=np.float64)
    left, right = MOUTH_CORNERS
    width = float(np.hypot(*(points[right, :2] - points[left, :2])))
    if width <= 1e-12:
        return 0.0
    opening = np.mean([abs(points[lower, 1] - points[upper, 1]) for upper, lower in INNER_LIP_PAIRS])
    return float(opening / width)


def _clip_label(clip_id, frames):
    labels = {f.label for f in frames}
    if len(labels) > 1:
        shown = sorted(str(label) for label in labels)
        raise InputError(f'clip {clip_id!r} has conflicting frame labels {shown}')
    label = labels.pop()
    if label is None:
        raise InputError(f'clip {clip_id!r} has no label')
    return label


def assemble_samples(clips, provider, S, class_names):
    """
    Build one ClipSample per clip.

    Parameters:
    -----------
    clips : dict
        ``{clip_id: [LandmarkFrame, ...]}`` in frame order.
    provider : EmbeddingProvider
        Supplies the D-vector of every selected frame.
    S : int
        Frames per sample.
    class_names : sequence of str
        Position in this sequence is the class index.

    Raises:
    -------
    InputError: a clip has no label, frames of one clip disagree on the
        label, or the label is not in ``class_names``.
    EmbeddingLookupError: the provider has no vector for a selected frame.
    """
    index_of = {name: i for i, name in enumerate(class_names)}
    samples = []
    for clip_id in sorted(clips):
        selected = select_key_frames(clips[clip_id], S)
        label = _clip_label(clip_id, clips[clip_id])
        if label not in index_of:
            raise InputError(f'clip {clip_id!r} has unknown label {label!r}; expected one of {list(class_names)}')
        prepared = [prepare_frame(f) for f in selected]
        embeddings = np.stack([provider.vector_for(f) for f in prepared])
        samples.append(ClipSample(clip_id=clip_id, frames=tuple(prepared), embeddings=embeddings, label=index_of[label]))
    return samples


def split_clip_ids(clip_ids, seed):
    """
    Seeded 70/15/15 split by clip.

    Returns:
    --------
    tuple: (train, validation, test) lists of clip ids; sizes are
    ``floor(0.7 n)``, ``floor(0.15 n)`` and the remainder.
    """
    ordered = sorted(clip_ids)
    order = np.random.default_rng(seed).permutation(len(ordered))
    shuffled = [ordered[i] for i in order]
    n_train = (7 * len(ordered)) // 10
    n_val = (15 * len(ordered)) // 100
    return (
        sorted(shuffled[:n_train]),
        sorted(shuffled[n_train:n_train + n_val]),
        sorted(shuffled[n_train + n_val:]),
    )


# ============================================================================
# SYNTHETIC DATA
# ============================================================================

def canonical_face():
    """A frontal 68-point face template in pixels, centred on the origin."""
    pts = np.zeros((LANDMARK_COUNT, 2))
    phi = np.pi * np.arange(17) / 16
    pts[0:17] = np.column_stack([-100 * np.cos(phi), -10 + 120 * np.sin(phi)])
    brow = np.linspace(0.0, 1.0, 5)
    pts[17:22] = np.column_stack([-80 + 60 * brow, -60 - 10 * np.sin(np.pi * brow)])
    pts[22:27] = np.column_stack([20 + 60 * brow, -60 - 10 * np.sin(np.pi * brow)])
    pts[27:31] = np.column_stack([np.zeros(4), np.linspace(-40, 0, 4)])
    pts[31:36] = np.column_stack([np.linspace(-20, 20, 5), np.full(5, 10.0)])
    eye = np.pi - np.arange(6) * np.pi / 3
    for start, cx in ((36, -45.0), (42, 45.0)):
        pts[start:start + 6] = np.column_stack([cx + 18 * np.cos(eye), -30 - 7 * np.sin(eye)])
    outer = np.pi - np.arange(12) * np.pi / 6
    pts[48:60] = np.column_stack([35 * np.cos(outer), 50 - 12 * np.sin(outer)])
    inner = np.pi - np.arange(8) * np.pi / 4
    pts[60:68] = np.column_stack([22 * np.cos(inner), 50 - 3 * np.sin(inner)])
    return pts


def _mouth_opening(class_name, steps, rng):
    """Per-frame extra mouth opening (pixels) carrying the class signature."""
    phase = rng.uniform(0.0, 2 * np.pi)
    if class_name == 'yawning':
        base = rng.uniform(75.0, 85.0)
        amplitude = rng.uniform(10.0, 15.0)
        period = rng.uniform(0.8, 1.2) * max(len(steps), 2)
    elif class_name == 'talking':
        base = rng.uniform(22.0, 28.0)
        amplitude = rng.uniform(12.0, 16.0)
        period = rng.uniform(2.5, 4.0)
    else:
        return np.zeros(len(steps))
    return base + amplitude * np.sin(2 * np.pi * steps / period + phase)


def synth_clip(clip_id, class_name, length, rng, frame_size=SYNTH_FRAME_SIZE, miss_rate=0.01):
    """
    Generate one clip of raw (pixel-space) landmark frames.

    Signatures:
    -----------
    - normal: small jitter around the template
    - yawning: a wide, slowly varying opening of the mouth and jaw
    - talking: a moderate, fast mouth oscillation with the lip corners drawn
      in, plus horizontal head drift
    """
    template = canonical_face()
    width, height = frame_size
    centre = np.array([width / 2, height / 2]) + rng.normal(0.0, 10.0, size=2)
    scale = rng.uniform(0.9, 1.1)
    steps = np.arange(length, dtype=np.float64)
    opening = _mouth_opening(class_name, steps, rng)
    drift = np.zeros(length)
    if class_name == 'talking':
        drift = rng.choice([-1.0, 1.0]) * rng.uniform(1.5, 3.0) * steps
    left, right = MOUTH_CORNERS
    frames = []
    for t in range(length):
        xy = template.copy()
        xy[list(LOWER_FACE), 1] += opening[t]
        if class_name == 'talking':
            xy[left, 0] += 0.3 * opening[t]
            xy[right, 0] -= 0.3 * opening[t]
        xy = xy * scale + centre + np.array([drift[t], 0.0])
        xy += rng.normal(0.0, 0.8, size=xy.shape)
        confidence = rng.uniform(0.9, 1.0, size=(LANDMARK_COUNT, 1))
        detected = bool(rng.random() >= miss_rate)
        points = np.hstack([xy, confidence]) if detected else np.zeros((LANDMARK_COUNT, LANDMARK_FEATURES))
        frames.append(LandmarkFrame(clip_id=clip_id, frame_index=t, detected=detected, points=points, label=class_name))
    return frames


def synth_clips(seed, clips_per_class, M, S=16):
    """
    Generate raw clips for every class.

    Returns:
    --------
    dict: ``{clip_id: [LandmarkFrame, ...]}`` with clip ids ``<class>-NNN``;
    clip lengths vary between S and 2S frames.

    Raises:
    -------
    InputError: ``M`` not in {2, 3} or fewer than 3 clips per class.
    """
    if M not in CLASS_NAMES:
        raise InputError(f'synthetic data supports 2 or 3 classes, got {M}')
    if clips_per_class < 3:
        raise InputError(f'need at least 3 clips per class, got {clips_per_class}')
    rng = np.random.default_rng(seed)
    clips = {}
    for class_name in CLASS_NAMES[M]:
        for n in range(clips_per_class):
            clip_id = f'{class_name}-{n:03d}'
            length = int(rng.integers(S, 2 * S + 1))
            clips[clip_id] = synth_clip(clip_id, class_name, length, rng)
    return clips


def synth_dataset(seed, clips_per_class, M, S=16, D=64, embedding_seed=None):
    """
    Deterministic synthetic DatasetSplit with synthetic embeddings.

    Parameters:
    -----------
    seed : int
        Drives landmark generation and the clip split.
    embedding_seed : int, optional
        Seed of the synthetic embedding projection (defaults to ``seed``).
    """
    from .embed import SyntheticEmbeddingProvider

    clips = synth_clips(seed, clips_per_class, M, S)
    provider = SyntheticEmbeddingProvider(D, seed if embedding_seed is None else embedding_seed)
    class_names = CLASS_NAMES[M]
    samples = {s.clip_id: s for s in assemble_samples(clips, provider, S, class_names)}
    train, validation, test = split_clip_ids(samples, seed)
    return DatasetSplit(
        train=[samples[c] for c in train],
        validation=[samples[c] for c in validation],
        test=[samples[c] for c in test],
        class_names=class_names,
    )
