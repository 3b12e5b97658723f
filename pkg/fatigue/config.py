"""
Run Configuration
=================
Typed configuration objects and the flat key-value text format they are
stored in.

A configuration document looks like::

    # model shape
    model.D = 64
    model.dilations = 1, 2, 4, 8
    train.learning_rate = 1e-4
    embedding.kind = synthetic

Layering (later wins): ``settings.LITEFAT`` defaults, dataset manifest,
configuration file, command-line flags. Values are validated by the DRF
serializers in :mod:`fatigue.serializers`.
"""

from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError

SECTIONS = ('model', 'train', 'embedding', 'data')
EMBEDDING_KINDS = ('file', 'synthetic', 'constant')


@dataclass(frozen=True)
class ModelConfig:
    """
    Network shape and ablation switches.

    Fields:
    -------
    - N: graph nodes (facial landmarks)
    - F: landmark features per node (X, Y, confidence)
    - D: fused feature width (embedding dimension)
    - c: adjacency embedding width
    - R: residual channels
    - k: convolution taps
    - dilations: one dilation per ST layer (so ``L == len(dilations)``)
    - H: GCN hidden width
    - M: classes
    - S: frames per sample
    - use_tcn / use_gcn / use_embedding: ablation switches
    """

    N: int = 68
    F: int = 3
    D: int = 64
    c: int = 10
    R: int = 32
    k: int = 2
    dilations: tuple = (1, 2, 4, 8)
    H: int = 32
    M: int = 3
    S: int = 16
    use_tcn: bool = True
    use_gcn: bool = True
    use_embedding: bool = True

    def __post_init__(self):
        for name in ('N', 'F', 'D', 'c', 'R', 'k', 'H', 'S'):
            if getattr(self, name) < 1:
                raise ConfigError(f'model.{name} must be >= 1, got {getattr(self, name)}')
        if self.M < 2:
            raise ConfigError(f'model.M must be >= 2, got {self.M}')
        if not self.dilations or any(d < 1 for d in self.dilations):
            raise ConfigError(f'model.dilations must be a non-empty list of values >= 1, got {self.dilations}')
        object.__setattr__(self, 'dilations', tuple(int(d) for d in self.dilations))

    @property
    def L(self):
        return len(self.dilations)

    @property
    def fused_width(self):
        """Width of the fused node features; 1 when the embedding is ablated."""
        return self.D if self.use_embedding else 1


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 100
    patience: int = 3
    learning_rate: float = 1e-4
    min_delta: float = 1e-6
    batch_size: int = 1
    seed: int = 0


@dataclass(frozen=True)
class EmbeddingSpec:
    """
    Which embedding provider feeds the fusion step.

    ``kind=file`` with no ``path`` means the dataset directory's own
    ``embeddings.jsonl``.
    """

    kind: str = 'file'
    path: str = ''
    seed: int = 0
    value: float = 1.0


@dataclass(frozen=True)
class DataConfig:
    path: str = ''
    class_names: tuple = ()


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    embedding: EmbeddingSpec = field(default_factory=EmbeddingSpec)
    data: DataConfig = field(default_factory=DataConfig)

    def class_names(self):
        """Configured class names, or ``class0..`` placeholders."""
        if self.data.class_names:
            return tuple(self.data.class_names)
        return tuple(f'class{i}' for i in range(self.model.M))


def parse_key_values(text, source='<config>'):
    """
    Parse a flat ``section.key = value`` document into an ordered dict.

    Raises:
    -------
    ConfigError: a line is not ``key = value``, a key is undotted or repeated.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        key, sep, value = line.partition('=')
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f'{source}:{lineno}: expected "key = value", got {raw!r}')
        if '.' not in key:
            raise ConfigError(f'{source}:{lineno}: key {key!r} must be "section.name"')
        if key in values:
            raise ConfigError(f'{source}:{lineno}: duplicate key {key!r}')
        values[key] = value.strip()
    return values


def _format_value(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, tuple):
        return ', '.join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_run_config(run):
    """Render a RunConfig as key-value text that :func:`run_config_from_text` reads back exactly."""
    lines = []
    for section in SECTIONS:
        block = getattr(run, section)
        for item in fields(block):
            lines.append(f'{section}.{item.name} = {_format_value(getattr(block, item.name))}')
        if section == 'model':
            lines.append(f'model.L = {run.model.L}')
    return '\n'.join(lines) + '\n'


def run_config_from_values(values, base=None):
    """
    Apply a dict of ``section.key -> text`` overrides on top of ``base``.

    Every section touched is re-validated as a whole, so cross-field rules
    (``model.L`` against ``model.dilations``) see the merged values.
    """
    from .serializers import SECTION_SERIALIZERS

    base = base or RunConfig()
    grouped = {}
    for key, value in values.items():
        section, _, name = key.partition('.')
        if section not in SECTIONS:
            raise ConfigError(f'unknown configuration section {section!r} in key {key!r}')
        grouped.setdefault(section, {})[name] = value

    updates = {}
    for section, overrides in grouped.items():
        serializer_class = SECTION_SERIALIZERS[section]
        current = serializer_class(getattr(base, section)).data
        if section == 'model' and 'dilations' not in overrides and 'L' in overrides:
            # L alone resets the schedule to 1, 2, 4, ...
            current.pop('dilations', None)
        current.pop('L', None)
        merged = {**current, **overrides}
        serializer = serializer_class(data=merged)
        if not serializer.is_valid():
            raise ConfigError(f'invalid {section} configuration: {_flatten_errors(serializer.errors)}')
        updates[section] = serializer.save()
    return replace(base, **updates)


def run_config_from_text(text, base=None, source='<config>'):
    return run_config_from_values(parse_key_values(text, source), base)


def load_run_config(path=None, overrides=None, base=None):
    """
    Build a RunConfig from project defaults, an optional file and overrides.

    Parameters:
    -----------
    path : str or Path, optional
        Key-value configuration file.
    overrides : dict, optional
        ``section.key -> value`` pairs applied last (command-line flags).
    base : RunConfig, optional
        Starting point; defaults to :func:`default_run_config`.
    """
    run = base or default_run_config()
    if path:
        try:
            with open(path, encoding='utf-8') as handle:
                text = handle.read()
        except OSError as exc:
            raise ConfigError(f'cannot read configuration file {path}: {exc.strerror}') from exc
        run = run_config_from_text(text, run, source=str(path))
    if overrides:
        run = run_config_from_values({k: str(v) for k, v in overrides.items()}, run)
    return run


def default_run_config():
    """RunConfig seeded from ``settings.LITEFAT``."""
    from django.conf import settings

    defaults = settings.LITEFAT
    return RunConfig(
        train=TrainConfig(
            max_epochs=defaults['MAX_EPOCHS'],
            patience=defaults['PATIENCE'],
            learning_rate=defaults['LEARNING_RATE'],
            min_delta=defaults['MIN_DELTA'],
            batch_size=defaults['BATCH_SIZE'],
            seed=defaults['SEED'],
        ),
    )


def _flatten_errors(errors):
    parts = []
    for name, messages in errors.items():
        if isinstance(messages, (list, tuple)):
            text = '; '.join(str(m) for m in messages)
        else:
            text = str(messages)
        parts.append(f'{name}: {text}')
    return ', '.join(parts)
