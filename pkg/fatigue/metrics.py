"""Clip-level classification metrics (scikit-learn)."""

import logging

import numpy as np
from sklearn.metrics import accuracy_score, precision_recall_fscore_support, roc_auc_score

from .errors import InputError
from .network import predict_clip

logger = logging.getLogger(__name__)


def clip_predictions(clip_probs):
    """Argmax per row; ties go to the lowest class index."""
    return np.argmax(np.asarray(clip_probs, dtype=np.float64), axis=1)


def classification_metrics(clip_probs, labels, M):
    """
    Accuracy, precision, recall, F1 and AUC over clips.

    Parameters:
    -----------
    clip_probs : array-like
        ``n x M`` frame-mean probability vectors, one row per clip.
    labels : sequence of int
        True class per clip.
    M : int
        Class count. With ``M == 2`` precision/recall/F1 are those of
        class 1; otherwise they are macro averages.

    Returns:
    --------
    dict: ``accuracy``, ``precision``, ``recall``, ``f1`` and ``auc``. ``auc``
    is the macro one-vs-rest ROC area over the classes present with both
    outcomes, or None when no class qualifies.

    Raises:
    -------
    InputError: empty input, or probabilities and labels of different length.
    """
    probs = np.asarray(clip_probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or probs.shape[1] != M:
        raise InputError(f'expected an n x {M} probability matrix, got shape {probs.shape}')
    if len(probs) != len(labels):
        raise InputError(f'{len(probs)} predictions but {len(labels)} labels')
    if len(labels) == 0:
        raise InputError('no predictions to score')

    predicted = clip_predictions(probs)
    if M == 2:
        precision, recall, f1, _ = precision_recall_fscore_support(
            labels, predicted, average='binary', pos_label=1, zero_division=0)
    else:
        precision, recall, f1, _ = precision_recall_fscore_support(
            labels, predicted, labels=list(range(M)), average='macro', zero_division=0)
    return {
        'accuracy': float(accuracy_score(labels, predicted)),
        'precision': float(precision),
        'recall': float(recall),
        'f1': float(f1),
        'auc': _macro_auc(probs, labels, M),
    }


def _macro_auc(probs, labels, M):
    areas = []
    for cls in range(M):
        truth = labels == cls
        if truth.all() or not truth.any():
            continue
        areas.append(roc_auc_score(truth.astype(np.int64), probs[:, cls]))
        if M == 2:
            break  # both one-vs-rest curves of a binary task have the same area
    if not areas:
        logger.debug('auc undefined: every clip has the same label')
        return None
    return float(np.mean(areas))


def evaluate_samples(samples, params, config):
    """
    Score a model on a list of ClipSamples.

    Returns:
    --------
    dict: :func:`classification_metrics` plus ``clips``.
    """
    if not samples:
        raise InputError('no clips to evaluate')
    clip_probs = np.stack([predict_clip(s, params, config)[0].mean(axis=0) for s in samples])
    labels = [s.label for s in samples]
    result = classification_metrics(clip_probs, labels, config.M)
    result['clips'] = len(samples)
    return result
