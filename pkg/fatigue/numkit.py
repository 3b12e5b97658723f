"""
Numeric Kernels
===============
Dense float64 kernels the network is built from: matrix product, pointwise
activations, row softmax, dilated causal 1-D convolution (and its two
adjoints), plus a central finite-difference gradient used to check the
hand-derived backward pass.

Array conventions
-----------------
- DenseMatrix: 2-D ``float64`` array, ``rows x cols``.
- SeqTensor:   3-D ``float64`` array indexed ``[node][channel][step]``.
- ConvFilter:  weights ``[out][in][tap]``, bias ``[out]``, a dilation.

All functions are pure: they never modify their inputs.
"""

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import NumericError, ShapeError, describe_shape

DenseMatrix = NDArray[np.float64]
SeqTensor = NDArray[np.float64]

ACTIVATIONS = ('relu', 'tanh', 'sigmoid', 'identity')


@dataclass(frozen=True)
class ConvFilter:
    """
    Dilated causal convolution filter.

    Fields:
    -------
    - weights: ``(out_channels, in_channels, taps)``; tap ``s`` reads step ``t - dilation*s``
    - bias: ``(out_channels,)``
    - dilation: spacing between taps (>= 1)
    """

    weights: NDArray[np.float64]
    bias: NDArray[np.float64]
    dilation: int = 1

    def __post_init__(self):
        if self.weights.ndim != 3 or self.weights.shape[2] < 1:
            raise ShapeError(f'filter weights must be out x in x taps, got {describe_shape(self.weights)}')
        if self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(
                f'filter bias {describe_shape(self.bias)} does not match '
                f'{self.weights.shape[0]} output channels')
        if self.dilation < 1:
            raise ShapeError(f'dilation must be >= 1, got {self.dilation}')

    @property
    def out_channels(self):
        return self.weights.shape[0]

    @property
    def in_channels(self):
        return self.weights.shape[1]

    @property
    def taps(self):
        return self.weights.shape[2]


def matmul(a, b):
    """Matrix product ``a @ b`` of two DenseMatrix values."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f'cannot multiply {describe_shape(a)} by {describe_shape(b)}')
    return a @ b


def pointwise_activation(kind, x):
    """
    Apply an activation element-wise; shape is preserved.

    Parameters:
    -----------
    kind : str
        One of ``relu``, ``tanh``, ``sigmoid``, ``identity``.
    x : ndarray
        DenseMatrix or SeqTensor.
    """
    if kind == 'relu':
        return np.maximum(x, 0.0)
    if kind == 'tanh':
        return np.tanh(x)
    if kind == 'sigmoid':
        return sigmoid(x)
    if kind == 'identity':
        return np.array(x, dtype=np.float64, copy=True)
    raise ValueError(f'unknown activation {kind!r}; expected one of {", ".join(ACTIVATIONS)}')


def sigmoid(x):
    # tanh form stays finite for large |x|
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def softmax_rows(x):
    """Row-wise softmax with per-row max subtraction."""
    shifted = x - np.max(x, axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / np.sum(exps, axis=-1, keepdims=True)


def softmax_rows_backward(probs, grad_probs):
    """Gradient w.r.t. softmax logits given the softmax output and upstream gradient."""
    inner = np.sum(grad_probs * probs, axis=-1, keepdims=True)
    return probs * (grad_probs - inner)


def _shift_right(x, offset):
    """Delay a SeqTensor by ``offset`` steps, filling the history with zeros."""
    if offset == 0:
        return x
    shifted = np.zeros_like(x)
    if offset < x.shape[2]:
        shifted[:, :, offset:] = x[:, :, :-offset]
    return shifted


def _shift_left(x, offset):
    """Advance a SeqTensor by ``offset`` steps, filling the tail with zeros."""
    if offset == 0:
        return x
    shifted = np.zeros_like(x)
    if offset < x.shape[2]:
        shifted[:, :, :-offset] = x[:, :, offset:]
    return shifted


def dilated_causal_conv(x, f):
    """
    Dilated causal convolution over the step axis.

    ``y[n, o, t] = bias[o] + sum_s sum_i w[o, i, s] * x[n, i, t - d*s]`` where
    steps before 0 read as zero, so the output keeps all ``T`` steps and step
    ``t`` never sees a later step.

    Raises:
    -------
    ShapeError: ``x`` channels differ from the filter's input channels.
    """
    if x.ndim != 3 or x.shape[1] != f.in_channels:
        raise ShapeError(
            f'sequence {describe_shape(x)} does not match filter with '
            f'{f.in_channels} input channels')
    out = np.zeros((x.shape[0], f.out_channels, x.shape[2]), dtype=np.float64)
    for tap in range(f.taps):
        out += np.matmul(f.weights[:, :, tap], _shift_right(x, f.dilation * tap))
    out += f.bias[None, :, None]
    return out


def dilated_causal_conv_backward(x, f, grad_out):
    """
    Adjoint of :func:`dilated_causal_conv`.

    Returns:
    --------
    tuple: (grad_x, grad_weights, grad_bias)
    """
    grad_weights = np.empty_like(f.weights)
    grad_x = np.zeros_like(x)
    for tap in range(f.taps):
        offset = f.dilation * tap
        grad_weights[:, :, tap] = np.tensordot(grad_out, _shift_right(x, offset), axes=([0, 2], [0, 2]))
        grad_x += np.matmul(f.weights[:, :, tap].T, _shift_left(grad_out, offset))
    grad_bias = grad_out.sum(axis=(0, 2))
    return grad_x, grad_weights, grad_bias


def finite_difference_grad(loss_fn, params, h=1e-5):
    """
    Central finite-difference gradient of a scalar function.

    Parameters:
    -----------
    loss_fn : callable
        Pure function of a float64 array returning a scalar.
    params : array-like
        Point to differentiate at; left unmodified.
    h : float
        Step size (> 0).

    Returns:
    --------
    ndarray: ``(loss(p + h e_i) - loss(p - h e_i)) / 2h`` per coordinate, same shape as ``params``.

    Raises:
    -------
    NumericError: the loss is not finite at an evaluated point.
    """
    if h <= 0:
        raise ValueError(f'step must be positive, got {h}')
    shape = np.shape(params)
    flat = np.array(params, dtype=np.float64).reshape(-1).copy()
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        upper = float(loss_fn(flat.reshape(shape)))
        flat[i] = original - h
        lower = float(loss_fn(flat.reshape(shape)))
        flat[i] = original
        if not (np.isfinite(upper) and np.isfinite(lower)):
            raise NumericError(f'loss is not finite around coordinate {i}')
        grad[i] = (upper - lower) / (2.0 * h)
    return grad.reshape(shape)
