"""
Streaming Prediction
====================
Per-frame predictions over a landmark stream, one output per input frame.

Each clip keeps a rolling window of its most recent S frames. Before S
frames have arrived the window is padded in front with the all-ones
fallback frame and the provider's fallback vector. The prediction for a
frame is the last row of the window's probabilities, so it depends only on
frames at or before it.
"""

import logging
from collections import deque

import numpy as np

from . import network
from .ingest import LANDMARK_FEATURES, ClipSample, LandmarkFrame, prepare_frame

logger = logging.getLogger(__name__)

WARNING_LEVELS = {
    'normal': 'none',
    'yawning': 'fatigue',
    'talking': 'distraction',
}

PADDING_INDEX = -1


def warning_for(class_name):
    """Warning level of a predicted class; unknown classes raise none."""
    return WARNING_LEVELS.get(class_name, 'none')


class StreamingPredictor:
    """
    Rolling-window predictor over interleaved clips.

    Parameters:
    -----------
    params : ModelParams
    run_config : RunConfig
        Supplies the model shape and class names.
    provider : EmbeddingProvider
    """

    def __init__(self, params, run_config, provider):
        self.params = params
        self.config = run_config.model
        self.class_names = run_config.class_names()
        self.provider = provider
        self._windows = {}

    def _window(self, clip_id):
        window = self._windows.get(clip_id)
        if window is None:
            pad_frame = LandmarkFrame(
                clip_id=clip_id, frame_index=PADDING_INDEX, detected=False,
                points=np.ones((self.config.N, LANDMARK_FEATURES)),
            )
            pad_vec = np.asarray(self.provider.fallback_vector(), dtype=np.float64)
            window = deque([(pad_frame, pad_vec)] * self.config.S, maxlen=self.config.S)
            self._windows[clip_id] = window
        return window

    def push(self, frame):
        """
        Add one frame and predict it.

        Returns:
        --------
        dict: ``clip``, ``frame``, ``probs`` (length M), ``label`` and ``warning``.
        """
        prepared = prepare_frame(frame)
        vec = np.asarray(self.provider.vector_for(prepared), dtype=np.float64)
        window = self._window(frame.clip_id)
        window.append((prepared, vec))
        sample = ClipSample(
            clip_id=frame.clip_id,
            frames=tuple(f for f, _ in window),
            embeddings=np.stack([v for _, v in window]),
            label=0,
        )
        probs, _ = network.model_forward(sample, self.params, self.config)
        last = probs[-1]
        label = self.class_names[int(np.argmax(last))]
        return {
            'clip': frame.clip_id,
            'frame': frame.frame_index,
            'probs': last,
            'label': label,
            'warning': warning_for(label),
        }

    def run(self, frames):
        """Yield one prediction per frame, in input order."""
        count = 0
        for frame in frames:
            count += 1
            yield self.push(frame)
        logger.info('predicted frames=%d clips=%d', count, len(self._windows))
