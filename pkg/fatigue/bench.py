"""
Efficiency Benchmark
====================
Parameter count, per-batch forward and backward wall time, throughput and
best-effort peak memory for any model configuration.

Protocol: build a seeded dummy batch, run ``warmup`` untimed forward +
backward iterations, then time ``iterations`` iterations and report the
median per-batch times. Throughput is ``batch_size / forward time``.
"""

import json
import logging
import statistics
import time
from dataclasses import dataclass

import numpy as np
import psutil
from rest_framework.renderers import JSONRenderer  # type: ignore

from . import network
from .errors import FormatError, InputError
from .ingest import LANDMARK_FEATURES, ClipSample, LandmarkFrame
from .serializers import BenchReportSerializer

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ('#para.', 'forw.', 'back.', 'thr.', 'mem.')


@dataclass(frozen=True)
class BenchReport:
    config: object
    param_count: int
    forward_sec_per_batch: float
    backward_sec_per_batch: float
    throughput_samples_per_sec: float
    peak_memory_mb: float | None
    batch_size: int
    iterations: int
    warmup: int


def dummy_sample(config, rng, clip_id='dummy'):
    """
    One random clip shaped for ``config``: points uniform in [0, 1), a
    standard-normal embedding per frame and a random label.
    """
    points = rng.uniform(0.0, 1.0, size=(config.S, config.N, LANDMARK_FEATURES))
    frames = tuple(
        LandmarkFrame(clip_id=clip_id, frame_index=t, detected=True, points=points[t])
        for t in range(config.S)
    )
    embeddings = rng.standard_normal((config.S, config.D))
    label = int(rng.integers(config.M))
    return ClipSample(clip_id=clip_id, frames=frames, embeddings=embeddings, label=label)


def dummy_batch(config, batch_size, seed):
    rng = np.random.default_rng(seed)
    return [dummy_sample(config, rng, clip_id=f'dummy-{i:03d}') for i in range(batch_size)]


def _resident_mb():
    try:
        return psutil.Process().memory_info().rss / (1024 * 1024)
    except (psutil.Error, OSError):
        return None


def run_benchmark(config, batch_size=1, iterations=10, warmup=3, seed=0, delay=0.0):
    """
    Time forward and backward passes of a fresh model on a dummy batch.

    Parameters:
    -----------
    config : ModelConfig
    batch_size : int
        Clips per batch.
    iterations : int
        Timed iterations (>= 1).
    warmup : int
        Untimed iterations run first.
    seed : int
        Seeds parameters and the dummy batch.
    delay : float
        Seconds slept inside every timed forward section (test hook).

    Returns:
    --------
    BenchReport
    """
    if iterations < 1:
        raise InputError(f'iterations must be >= 1, got {iterations}')
    if batch_size < 1:
        raise InputError(f'batch size must be >= 1, got {batch_size}')
    if warmup < 0:
        raise InputError(f'warmup must be >= 0, got {warmup}')
    params = network.init_params(config, seed)
    batch = dummy_batch(config, batch_size, seed)

    forward_times, backward_times = [], []
    peak = _resident_mb()
    for step in range(warmup + iterations):
        start = time.perf_counter()
        traces = [network.model_forward(sample, params, config)[1] for sample in batch]
        if delay:
            time.sleep(delay)
        middle = time.perf_counter()
        params.zero_grad()
        for sample, trace in zip(batch, traces):
            network.backward_pass(trace, sample.label, accumulate=True, weight=1.0 / batch_size)
        end = time.perf_counter()
        resident = _resident_mb()
        if resident is not None:
            peak = resident if peak is None else max(peak, resident)
        if step >= warmup:
            forward_times.append(middle - start)
            backward_times.append(end - middle)

    forward = statistics.median(forward_times)
    backward = statistics.median(backward_times)
    report = BenchReport(
        config=config,
        param_count=network.count_parameters(config),
        forward_sec_per_batch=forward,
        backward_sec_per_batch=backward,
        throughput_samples_per_sec=batch_size / forward,
        peak_memory_mb=peak,
        batch_size=batch_size,
        iterations=iterations,
        warmup=warmup,
    )
    logger.info('bench params=%d forward=%.6fs backward=%.6fs throughput=%.3f/s',
                report.param_count, forward, backward, report.throughput_samples_per_sec)
    return report


def render_report(report, fmt='json'):
    """Render a report as a single JSON object or as an aligned text table."""
    if fmt == 'json':
        return JSONRenderer().render(BenchReportSerializer(report).data).decode('utf-8') + '\n'
    if fmt != 'table':
        raise InputError(f'unknown report format {fmt!r}; expected json or table')
    memory = '-' if report.peak_memory_mb is None else f'{report.peak_memory_mb:.1f}'
    values = (
        f'{report.param_count:.2E}',
        f'{report.forward_sec_per_batch:.4g}',
        f'{report.backward_sec_per_batch:.4g}',
        f'{report.throughput_samples_per_sec:.4g}',
        memory,
    )
    widths = [max(len(h), len(v)) for h, v in zip(TABLE_COLUMNS, values)]
    header = '  '.join(h.rjust(w) for h, w in zip(TABLE_COLUMNS, widths))
    row = '  '.join(v.rjust(w) for v, w in zip(values, widths))
    footer = (f'batch={report.batch_size} iterations={report.iterations} warmup={report.warmup} '
              f'params={report.param_count}')
    return f'{header}\n{row}\n{footer}\n'


def parse_report(text):
    """
    Read back a JSON report.

    Raises:
    -------
    FormatError: not JSON or not a valid report.
    """
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f'report is not valid JSON ({exc.msg})') from exc
    serializer = BenchReportSerializer(data=payload)
    if not serializer.is_valid():
        raise FormatError(f'invalid report: {serializer.errors}')
    return serializer.save()
