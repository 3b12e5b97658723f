"""
Training
========
Adam optimisation of :mod:`fatigue.network` parameters with early stopping
on the mean training loss.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import network
from .errors import InputError, NumericError, ShapeError

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """Per-tensor first/second moments, the step counter and the hyperparameters."""

    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, tensors, learning_rate=1e-4):
        return cls(
            learning_rate=learning_rate,
            m={name: np.zeros_like(t) for name, t in tensors.items()},
            v={name: np.zeros_like(t) for name, t in tensors.items()},
        )


def adam_step(tensors, grads, state):
    """
    One bias-corrected Adam update, in place.

    ``theta -= lr * m_hat / (sqrt(v_hat) + eps)`` with
    ``m_hat = m / (1 - beta1^t)`` and ``v_hat = v / (1 - beta2^t)``.

    Raises:
    -------
    ShapeError: a gradient or moment does not match its tensor.
    NumericError: the update leaves a non-finite value.
    """
    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for name, theta in tensors.items():
        grad = grads[name]
        m = state.m.setdefault(name, np.zeros_like(theta))
        v = state.v.setdefault(name, np.zeros_like(theta))
        if grad.shape != theta.shape or m.shape != theta.shape:
            raise ShapeError(f'{name}: gradient {grad.shape} or moment {m.shape} does not match {theta.shape}')
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        theta -= state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        if not np.all(np.isfinite(theta)):
            raise NumericError(f'parameter {name} became non-finite at step {state.step}')
    return tensors


class EarlyStopping:
    """
    Stop when the loss has not improved for ``patience`` consecutive epochs.

    An epoch improves when ``best - loss > min_delta``. The first loss seen
    always counts as an improvement.
    """

    def __init__(self, patience=3, min_delta=1e-6):
        self.patience = patience
        self.min_delta = min_delta
        self.best_loss = None
        self.counter = 0
        self.early_stop = False

    def __call__(self, loss):
        """Record one epoch's loss; returns True when it is a new best."""
        if self.best_loss is None or self.best_loss - loss > self.min_delta:
            self.best_loss = loss
            self.counter = 0
            return True
        self.counter += 1
        if self.counter >= self.patience:
            self.early_stop = True
        return False


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_accuracy: float | None
    improved: bool


@dataclass
class TrainResult:
    params: network.ModelParams
    history: list
    best_epoch: int
    stopped_early: bool

    @property
    def losses(self):
        return [record.train_loss for record in self.history]


def _run_epoch(samples, params, config, state, batch_size, rng):
    """One shuffled pass; returns the mean per-sample training loss."""
    order = rng.permutation(len(samples))
    losses = []
    for start in range(0, len(order), batch_size):
        batch = [samples[i] for i in order[start:start + batch_size]]
        params.zero_grad()
        weight = 1.0 / len(batch)
        for sample in batch:
            _, trace = network.model_forward(sample, params, config)
            loss = network.backward_pass(trace, sample.label, accumulate=True, weight=weight)
            if not np.isfinite(loss):
                raise NumericError(f'non-finite loss on clip {sample.clip_id!r}')
            losses.append(loss)
        adam_step(params.tensors, params.grads, state)
    return float(np.mean(losses))


def validation_accuracy(samples, params, config):
    if not samples:
        return None
    correct = sum(network.predict_clip(s, params, config)[1] == s.label for s in samples)
    return correct / len(samples)


def train_loop(data, model_config, train_config, seed=None):
    """
    Train a fresh model on ``data.train``.

    Parameters:
    -----------
    data : DatasetSplit
        Training clips plus an optional validation split (reported only).
    model_config : ModelConfig
    train_config : TrainConfig
        Epoch cap, patience, learning rate, min_delta and batch size.
    seed : int, optional
        Drives initialisation and shuffling; defaults to ``train_config.seed``.

    Returns:
    --------
    TrainResult: the parameters of the best-loss epoch and the per-epoch history.

    Raises:
    -------
    InputError: the train split is empty.
    NumericError: a loss or parameter becomes non-finite.
    """
    if not data.train:
        raise InputError('training split is empty')
    seed = train_config.seed if seed is None else seed
    params = network.init_params(model_config, seed)
    state = AdamState.for_params(params.tensors, train_config.learning_rate)
    rng = np.random.default_rng(seed)
    stopper = EarlyStopping(train_config.patience, train_config.min_delta)

    history = []
    best = params.copy()
    best_epoch = 0
    logger.info(
        'training clips=%d params=%d max_epochs=%d lr=%g batch_size=%d seed=%d',
        len(data.train), params.size(), train_config.max_epochs,
        train_config.learning_rate, train_config.batch_size, seed,
    )
    for epoch in range(1, train_config.max_epochs + 1):
        loss = _run_epoch(data.train, params, model_config, state, train_config.batch_size, rng)
        improved = stopper(loss)
        if improved:
            best = params.copy()
            best_epoch = epoch
        accuracy = validation_accuracy(data.validation, params, model_config)
        history.append(EpochRecord(epoch=epoch, train_loss=loss, val_accuracy=accuracy, improved=improved))
        logger.info('epoch=%d train_loss=%.6f val_accuracy=%s improved=%s',
                    epoch, loss, 'n/a' if accuracy is None else f'{accuracy:.4f}', improved)
        if stopper.early_stop:
            logger.info('early stop epoch=%d best_epoch=%d best_loss=%.6f', epoch, best_epoch, stopper.best_loss)
            break
    return TrainResult(params=best, history=history, best_epoch=best_epoch, stopped_early=stopper.early_stop)
