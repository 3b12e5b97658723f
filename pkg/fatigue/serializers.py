"""
Fatigue Serializers
===================
DRF serializers are the validation layer between text (JSONL records,
key-value configuration, JSON reports) and the app's typed objects.

They play the same role here as in an API: ``is_valid()`` checks every field,
``validate_<field>`` and ``validate`` add cross-field rules, and ``save()``
builds the domain object through ``create()``.
"""

import math
from numbers import Real

import numpy as np
from rest_framework import serializers  # type: ignore

from . import config as cfg
from .ingest import LANDMARK_COUNT, LANDMARK_FEATURES


class RejectUnknownFieldsMixin:
    """Fail validation when the payload carries keys the serializer does not declare."""

    def validate(self, data):
        unknown = sorted(set(getattr(self, 'initial_data', {})) - set(self.fields))
        if unknown:
            raise serializers.ValidationError(f'unknown fields: {", ".join(unknown)}')
        return super().validate(data)


class StrictFloatField(serializers.FloatField):
    """FloatField that refuses booleans and non-finite values."""

    def to_internal_value(self, data):
        if isinstance(data, bool):
            self.fail('invalid')
        value = super().to_internal_value(data)
        if not math.isfinite(value):
            self.fail('invalid')
        return value


class StrictIntegerField(serializers.IntegerField):
    """IntegerField for JSON records: only a JSON integer is accepted, never ``"3"``, ``3.0`` or ``true``."""

    def to_internal_value(self, data):
        if isinstance(data, bool) or not isinstance(data, int):
            self.fail('invalid')
        return super().to_internal_value(data)


class StrictBooleanField(serializers.BooleanField):
    """BooleanField for JSON records: only ``true`` or ``false``."""

    def to_internal_value(self, data):
        if not isinstance(data, bool):
            self.fail('invalid')
        return data


class PointsField(serializers.Field):
    """
    A 68x3 landmark matrix given as nested JSON arrays.

    Validated with numpy in one pass rather than one DRF field per number.
    """

    default_error_messages = {
        'not_a_list': 'Expected a list of [x, y, c] triples.',
        'count': 'Expected {expected} points, got {count}.',
        'triple': 'Point {index} must have exactly 3 values.',
        'number': 'Point {index} holds a non-numeric or non-finite value.',
    }

    def __init__(self, expected=LANDMARK_COUNT, **kwargs):
        self.expected = expected
        super().__init__(**kwargs)

    def to_internal_value(self, data):
        if not isinstance(data, list):
            self.fail('not_a_list')
        if len(data) != self.expected:
            self.fail('count', expected=self.expected, count=len(data))
        for index, point in enumerate(data):
            if not isinstance(point, list) or len(point) != LANDMARK_FEATURES:
                self.fail('triple', index=index)
            if any(isinstance(v, bool) or not isinstance(v, Real) for v in point):
                self.fail('number', index=index)
        points = np.array(data, dtype=np.float64)
        if not np.all(np.isfinite(points)):
            bad = int(np.argwhere(~np.isfinite(points))[0][0])
            self.fail('number', index=bad)
        return points

    def to_representation(self, value):
        return np.asarray(value, dtype=np.float64).tolist()


class VectorField(serializers.Field):
    """A non-empty JSON array of finite numbers, as a float64 vector."""

    default_error_messages = {
        'invalid': 'Expected a non-empty list of finite numbers.',
    }

    def to_internal_value(self, data):
        if not isinstance(data, list) or not data:
            self.fail('invalid')
        if any(isinstance(v, bool) or not isinstance(v, Real) for v in data):
            self.fail('invalid')
        vec = np.array(data, dtype=np.float64)
        if not np.all(np.isfinite(vec)):
            self.fail('invalid')
        return vec

    def to_representation(self, value):
        return np.asarray(value, dtype=np.float64).tolist()


class DelimitedListField(serializers.ListField):
    """ListField that also accepts a comma-separated string (key-value config values)."""

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = [part.strip() for part in data.split(',') if part.strip()]
        return super().to_internal_value(data)


# ============================================================================
# STREAM RECORDS
# ============================================================================

class LandmarkRecordSerializer(RejectUnknownFieldsMixin, serializers.Serializer):
    """
    One line of a landmark stream.

    ``{"clip": str, "frame": int, "detected": bool, "label": str|null, "points": [[x, y, c] x 68]}``
    """

    clip = serializers.CharField(allow_blank=False, trim_whitespace=False)
    frame = StrictIntegerField(min_value=0)
    detected = StrictBooleanField()
    label = serializers.CharField(allow_null=True, required=False, default=None)
    points = PointsField()


class EmbeddingRecordSerializer(RejectUnknownFieldsMixin, serializers.Serializer):
    """One line of an embedding file: ``{"clip": str, "frame": int, "vec": [float x D]}``."""

    clip = serializers.CharField(allow_blank=False, trim_whitespace=False)
    frame = StrictIntegerField(min_value=0)
    vec = VectorField()


class DatasetManifestSerializer(RejectUnknownFieldsMixin, serializers.Serializer):
    """``manifest.json`` of a dataset directory."""

    class_names = serializers.ListField(child=serializers.CharField(), min_length=2)
    frames_per_sample = serializers.IntegerField(min_value=1)
    embedding_dim = serializers.IntegerField(min_value=1)
    seed = serializers.IntegerField(min_value=0)
    splits = serializers.DictField(child=serializers.ListField(child=serializers.CharField()))

    def validate_class_names(self, value):
        if len(set(value)) != len(value):
            raise serializers.ValidationError('Class names must be unique.')
        return value

    def validate_splits(self, value):
        expected = {'train', 'validation', 'test'}
        if set(value) != expected:
            raise serializers.ValidationError('Splits must be exactly train, validation and test.')
        return value


class PredictionRecordSerializer(serializers.Serializer):
    """One line of ``predict`` output."""

    clip = serializers.CharField()
    frame = serializers.IntegerField()
    probs = VectorField()
    label = serializers.CharField()
    warning = serializers.CharField()


# ============================================================================
# CONFIGURATION SECTIONS
# ============================================================================

class ModelConfigSerializer(RejectUnknownFieldsMixin, serializers.Serializer):
    """
    Validates ``model.*`` keys and builds a :class:`fatigue.config.ModelConfig`.

    ``L`` is accepted as input only. When it is given without ``dilations``
    the schedule defaults to ``1, 2, 4, ...``.
    """

    N = serializers.IntegerField(min_value=1)
    F = serializers.IntegerField(min_value=1)
    D = serializers.IntegerField(min_value=1)
    c = serializers.IntegerField(min_value=1)
    R = serializers.IntegerField(min_value=1)
    k = serializers.IntegerField(min_value=1)
    L = serializers.IntegerField(min_value=1, required=False, write_only=True)
    dilations = DelimitedListField(child=serializers.IntegerField(min_value=1), required=False, allow_empty=False)
    H = serializers.IntegerField(min_value=1)
    M = serializers.IntegerField(min_value=2)
    S = serializers.IntegerField(min_value=1)
    use_tcn = serializers.BooleanField()
    use_gcn = serializers.BooleanField()
    use_embedding = serializers.BooleanField()

    def validate(self, data):
        data = super().validate(data)
        layers = data.pop('L', None)
        dilations = data.get('dilations')
        if dilations is None:
            data['dilations'] = [2 ** i for i in range(layers or 4)]
        elif layers is not None and layers != len(dilations):
            raise serializers.ValidationError(
                f'L = {layers} but {len(dilations)} dilations were given')
        return data

    def create(self, validated_data):
        return cfg.ModelConfig(**{**validated_data, 'dilations': tuple(validated_data['dilations'])})


class TrainConfigSerializer(RejectUnknownFieldsMixin, serializers.Serializer):
    max_epochs = serializers.IntegerField(min_value=1)
    patience = serializers.IntegerField(min_value=1)
    learning_rate = StrictFloatField(min_value=0.0)
    min_delta = StrictFloatField(min_value=0.0)
    batch_size = serializers.IntegerField(min_value=1)
    seed = serializers.IntegerField(min_value=0)

    def validate_learning_rate(self, value):
        if value <= 0.0:
            raise serializers.ValidationError('Learning rate must be positive.')
        return value

    def create(self, validated_data):
        return cfg.TrainConfig(**validated_data)


class EmbeddingSpecSerializer(RejectUnknownFieldsMixin, serializers.Serializer):
    kind = serializers.ChoiceField(choices=cfg.EMBEDDING_KINDS)
    path = serializers.CharField(allow_blank=True)
    seed = serializers.IntegerField(min_value=0)
    value = StrictFloatField()

    def create(self, validated_data):
        return cfg.EmbeddingSpec(**validated_data)


class DataConfigSerializer(RejectUnknownFieldsMixin, serializers.Serializer):
    path = serializers.CharField(allow_blank=True)
    class_names = DelimitedListField(child=serializers.CharField(), allow_empty=True)

    def validate_class_names(self, value):
        if len(set(value)) != len(value):
            raise serializers.ValidationError('Class names must be unique.')
        return value

    def create(self, validated_data):
        return cfg.DataConfig(path=validated_data['path'], class_names=tuple(validated_data['class_names']))


SECTION_SERIALIZERS = {
    'model': ModelConfigSerializer,
    'train': TrainConfigSerializer,
    'embedding': EmbeddingSpecSerializer,
    'data': DataConfigSerializer,
}


# ============================================================================
# BENCHMARK REPORTS
# ============================================================================

class BenchReportSerializer(RejectUnknownFieldsMixin, serializers.Serializer):
    """
    Stable-order JSON form of a :class:`fatigue.bench.BenchReport`.

    Absent memory is written as ``null``.
    """

    config = ModelConfigSerializer()
    param_count = serializers.IntegerField(min_value=0)
    forward_sec_per_batch = StrictFloatField()
    backward_sec_per_batch = StrictFloatField()
    throughput_samples_per_sec = StrictFloatField()
    peak_memory_mb = StrictFloatField(allow_null=True)
    batch_size = serializers.IntegerField(min_value=1)
    iterations = serializers.IntegerField(min_value=1)
    warmup = serializers.IntegerField(min_value=0)

    def create(self, validated_data):
        from .bench import BenchReport

        model = ModelConfigSerializer().create(validated_data.pop('config'))
        return BenchReport(config=model, **validated_data)
