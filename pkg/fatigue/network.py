"""
LiteFat Network
===============
The spatio-temporal graph classifier, forward and backward, on plain numpy.

Forward pipeline for one clip of S frames:
-----------------------------------------
1. Fusion: per frame ``X_t = (C_t w) d_t^T`` (N x D, rank one).
2. 1x1 input projection to R channels, giving a SeqTensor ``[N, R, S]``.
3. L stacked ST layers, each:
   gated TCN ``tanh(conv_a(h) + b) * sigmoid(conv_b(h) + c)`` (dilated, causal)
   -> GCN ``A relu(A Z W0) W1`` at every step with the shared adaptive adjacency
   ``A = softmax_rows(relu(E1 E2^T))`` -> residual add, skip projection summed.
4. relu(skip) -> 1x1 output projection to M -> mean over nodes -> per-frame
   logits -> row softmax -> S x M probabilities.

Loss is the frame-averaged cross entropy against the clip label. The backward
pass is derived by hand and checked against central finite differences.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import numkit
from .errors import InputError, ShapeError, StateError, describe_shape

logger = logging.getLogger(__name__)

PROBABILITY_FLOOR = 1e-12


# ============================================================================
# PARAMETERS
# ============================================================================

def parameter_shapes(config):
    """
    Ordered ``{name: shape}`` of every tensor the config needs.

    Disabled blocks own no tensors: without the GCN there is no adjacency,
    without the TCN each layer has a plain 1x1 projection instead of the two
    gated filters, without the embedding the fused width is 1.
    """
    N, F, R, H, M, k, c = config.N, config.F, config.R, config.H, config.M, config.k, config.c
    shapes = {'fusion.w': (F,)}
    if config.use_gcn:
        shapes['adjacency.E1'] = (N, c)
        shapes['adjacency.E2'] = (N, c)
    shapes['input.W'] = (R, config.fused_width)
    shapes['input.b'] = (R,)
    for layer in range(config.L):
        prefix = f'layers.{layer}'
        if config.use_tcn:
            shapes[f'{prefix}.tcn.theta1'] = (R, R, k)
            shapes[f'{prefix}.tcn.b'] = (R,)
            shapes[f'{prefix}.tcn.theta2'] = (R, R, k)
            shapes[f'{prefix}.tcn.c'] = (R,)
        else:
            shapes[f'{prefix}.linear.W'] = (R, R)
            shapes[f'{prefix}.linear.b'] = (R,)
        if config.use_gcn:
            shapes[f'{prefix}.gcn.W0'] = (R, H)
            shapes[f'{prefix}.gcn.W1'] = (H, R)
        shapes[f'{prefix}.skip.W'] = (R, R)
        shapes[f'{prefix}.skip.b'] = (R,)
    shapes['output.W'] = (M, R)
    shapes['output.b'] = (M,)
    return shapes


def count_parameters(config):
    """
    Closed-form parameter count.

    ``F + [2Nc] + R(D' + 1) + L(T + [2RH] + R^2 + R) + M(R + 1)`` where
    ``D'`` is D (or 1 without embedding), ``T`` is ``2(R^2 k + R)`` with the
    gated TCN or ``R^2 + R`` without it, and bracketed terms need the GCN.
    """
    N, F, R, H, M, k, c = config.N, config.F, config.R, config.H, config.M, config.k, config.c
    temporal = 2 * (R * R * k + R) if config.use_tcn else R * R + R
    spatial = 2 * R * H if config.use_gcn else 0
    adjacency = 2 * N * c if config.use_gcn else 0
    per_layer = temporal + spatial + R * R + R
    return F + adjacency + R * (config.fused_width + 1) + config.L * per_layer + M * (R + 1)


def _fan_in(name, shape):
    if name.endswith('theta1') or name.endswith('theta2'):
        return shape[1] * shape[2]
    if name == 'fusion.w':
        return shape[0]
    if len(shape) == 2:
        # W0 is R x H and W1 is H x R; both act on their row dimension
        return shape[0] if '.gcn.' in name else shape[1]
    return None


@dataclass
class ModelParams:
    """
    Named parameter tensors with same-shape gradient buffers.

    ``tensors`` and ``grads`` share key order; ``grads`` is created zeroed
    when not given.
    """

    tensors: dict
    grads: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, tensor in self.tensors.items():
            self.grads.setdefault(name, np.zeros_like(tensor))

    def __getitem__(self, name):
        return self.tensors[name]

    def __contains__(self, name):
        return name in self.tensors

    def __iter__(self):
        return iter(self.tensors)

    def names(self):
        return list(self.tensors)

    def size(self):
        return int(sum(t.size for t in self.tensors.values()))

    def zero_grad(self):
        for grad in self.grads.values():
            grad.fill(0.0)

    def copy(self):
        return ModelParams({name: t.copy() for name, t in self.tensors.items()})

    def all_finite(self):
        return all(np.all(np.isfinite(t)) for t in self.tensors.values())

    def check_against(self, config):
        """Raise ShapeError when the tensor set does not match ``config``."""
        expected = parameter_shapes(config)
        if list(expected) != list(self.tensors):
            missing = sorted(set(expected) - set(self.tensors))
            extra = sorted(set(self.tensors) - set(expected))
            raise ShapeError(f'parameters do not match config (missing {missing}, unexpected {extra})')
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise ShapeError(f'{name}: expected {shape}, got {self.tensors[name].shape}')


def init_params(config, seed):
    """
    Seeded initial parameters.

    Weights and biases are uniform in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``
    where fan_in is that of the weight they belong to; adjacency factors are
    standard normal scaled by 0.1.
    """
    rng = np.random.default_rng(seed)
    shapes = parameter_shapes(config)
    tensors = {}
    last_fan_in = 1
    for name, shape in shapes.items():
        if name.startswith('adjacency.'):
            tensors[name] = rng.standard_normal(shape) * 0.1
            continue
        fan_in = _fan_in(name, shape)
        if fan_in is None:
            fan_in = last_fan_in  # bias follows its weight
        else:
            last_fan_in = fan_in
        bound = 1.0 / np.sqrt(fan_in)
        tensors[name] = rng.uniform(-bound, bound, size=shape)
    return ModelParams(tensors)


# ============================================================================
# BLOCKS
# ============================================================================

def fuse_features(C, w, d):
    """
    Multimodal fusion ``X = (C w) d^T``.

    Parameters:
    -----------
    C : ndarray
        ``N x F`` landmark matrix.
    w : ndarray
        Length-F fusion weights.
    d : ndarray
        Length-D frame embedding.

    Returns:
    --------
    ndarray: ``N x D`` matrix of rank at most one.
    """
    C, w, d = np.asarray(C), np.asarray(w), np.asarray(d)
    if C.ndim != 2 or w.ndim != 1 or d.ndim != 1 or C.shape[1] != w.shape[0]:
        raise ShapeError(
            f'cannot fuse landmarks {describe_shape(C)} with weights {describe_shape(w)} '
            f'and embedding {describe_shape(d)}')
    return np.outer(C @ w, d)


def adaptive_adjacency(E1, E2):
    """Self-adaptive adjacency ``softmax_rows(relu(E1 E2^T))``; rows sum to one."""
    if E1.ndim != 2 or E2.ndim != 2 or E1.shape != E2.shape:
        raise ShapeError(f'adjacency factors must share shape, got {describe_shape(E1)} and {describe_shape(E2)}')
    return numkit.softmax_rows(numkit.pointwise_activation('relu', numkit.matmul(E1, E2.T)))


def gcn_block(X, A, W0, W1, final=False, with_cache=False):
    """
    Graph convolution ``s(A relu(A X W0) W1)``.

    ``X`` is one ``N x R`` feature matrix or a stack ``S x N x R`` sharing
    the adjacency. ``s`` is the row softmax when ``final`` (classifier head)
    and the identity for stacked interior layers.

    With ``with_cache`` the result is ``(out, cache)`` where the cache feeds
    :func:`gcn_block_backward`; the softmax head has no cached form.
    """
    X = np.asarray(X)
    if X.ndim not in (2, 3) or A.shape != (X.shape[-2], X.shape[-2]):
        raise ShapeError(f'adjacency {describe_shape(A)} does not match features {describe_shape(X)}')
    if W0.ndim != 2 or W0.shape[0] != X.shape[-1] or W1.ndim != 2 or W1.shape[0] != W0.shape[1]:
        raise ShapeError(
            f'GCN weights {describe_shape(W0)} and {describe_shape(W1)} do not chain '
            f'from width {X.shape[-1]}')
    if final and with_cache:
        raise ValueError('the softmax GCN head cannot be cached for a backward pass')
    P = np.matmul(A, X)
    Q = np.matmul(P, W0)
    V = np.matmul(A, np.maximum(Q, 0.0))
    out = np.matmul(V, W1)
    if with_cache:
        return out, (X, P, Q, V)
    return numkit.softmax_rows(out) if final else out


def gcn_block_backward(grad_out, A, W0, W1, cache):
    """
    Adjoint of a cached :func:`gcn_block` call.

    Returns:
    --------
    tuple: (grad_X, grad_A, grad_W0, grad_W1); ``grad_A`` is summed over steps.
    """
    X, P, Q, V = cache
    single = X.ndim == 2
    if single:
        grad_out, X, P, Q, V = (a[None] for a in (grad_out, X, P, Q, V))
    grad_W1 = np.tensordot(V, grad_out, axes=([0, 1], [0, 1]))
    grad_V = np.matmul(grad_out, W1.T)
    grad_A = np.tensordot(grad_V, np.maximum(Q, 0.0), axes=([0, 2], [0, 2]))
    grad_Q = np.matmul(A.T, grad_V) * (Q > 0)
    grad_W0 = np.tensordot(P, grad_Q, axes=([0, 1], [0, 1]))
    grad_P = np.matmul(grad_Q, W0.T)
    grad_A += np.tensordot(grad_P, X, axes=([0, 2], [0, 2]))
    grad_X = np.matmul(A.T, grad_P)
    return (grad_X[0] if single else grad_X), grad_A, grad_W0, grad_W1


def gated_tcn(x, theta1, theta2, with_cache=False):
    """
    Gated temporal convolution ``tanh(theta1 * x + b) . sigmoid(theta2 * x + c)``.

    ``b`` and ``c`` are the biases of ``theta1`` and ``theta2``; both filters
    must share channels and dilation. With ``with_cache`` the result is
    ``(out, (content, gate))``.
    """
    if (theta1.weights.shape != theta2.weights.shape) or theta1.dilation != theta2.dilation:
        raise ShapeError('gated TCN filters must share channels, taps and dilation')
    content = np.tanh(numkit.dilated_causal_conv(x, theta1))
    gate = numkit.sigmoid(numkit.dilated_causal_conv(x, theta2))
    out = content * gate
    return (out, (content, gate)) if with_cache else out


def gated_tcn_backward(x, theta1, theta2, cache, grad_out):
    """
    Adjoint of a cached :func:`gated_tcn` call.

    Returns:
    --------
    tuple: (grad_x, (grad_theta1, grad_b), (grad_theta2, grad_c))
    """
    content, gate = cache
    grad_a = grad_out * gate * (1.0 - content ** 2)
    grad_b = grad_out * content * gate * (1.0 - gate)
    dx_a, dtheta1, db = numkit.dilated_causal_conv_backward(x, theta1, grad_a)
    dx_b, dtheta2, dc = numkit.dilated_causal_conv_backward(x, theta2, grad_b)
    return dx_a + dx_b, (dtheta1, db), (dtheta2, dc)


def _project(W, b, x):
    """1x1 convolution over the channel axis of a SeqTensor."""
    return np.matmul(W, x) + b[None, :, None]


# ============================================================================
# FORWARD
# ============================================================================

@dataclass
class ForwardTrace:
    """Activations of one forward call; consumed by exactly one backward call."""

    config: object
    params: ModelParams
    points: np.ndarray
    embeddings: np.ndarray
    u: np.ndarray
    x: np.ndarray
    adjacency: np.ndarray | None
    adjacency_logits: np.ndarray | None
    layers: list
    skip: np.ndarray
    rectified: np.ndarray
    probs: np.ndarray
    consumed: bool = False


def _sample_arrays(sample, config):
    points = sample.points
    if points.shape != (config.S, config.N, config.F):
        raise ShapeError(
            f'sample {sample.clip_id!r} has landmarks {describe_shape(points)}, '
            f'model expects {config.S}x{config.N}x{config.F}')
    if not config.use_embedding:
        return points, np.ones((config.S, 1))
    embeddings = sample.embeddings
    if embeddings.shape != (config.S, config.D):
        raise ShapeError(
            f'sample {sample.clip_id!r} has embeddings {describe_shape(embeddings)}, '
            f'model expects {config.S}x{config.D}')
    return points, embeddings


def model_forward(sample, params, config):
    """
    Per-frame class probabilities for one clip.

    Returns:
    --------
    tuple: (``S x M`` probabilities, ForwardTrace)

    Raises:
    -------
    ShapeError: sample or parameters do not match the config.
    """
    points, embeddings = _sample_arrays(sample, config)
    u = points @ params['fusion.w']                                   # S x N
    x = (u[:, :, None] * embeddings[:, None, :]).transpose(1, 2, 0)   # N x D' x S
    if params['input.W'].shape != (config.R, x.shape[1]):
        raise ShapeError(f'input.W is {describe_shape(params["input.W"])}, config needs {config.R}x{x.shape[1]}')
    h = _project(params['input.W'], params['input.b'], x)

    adjacency = logits_adj = None
    if config.use_gcn:
        logits_adj = params['adjacency.E1'] @ params['adjacency.E2'].T
        adjacency = adaptive_adjacency(params['adjacency.E1'], params['adjacency.E2'])

    skip = np.zeros_like(h)
    layers = []
    for layer, dilation in enumerate(config.dilations):
        prefix = f'layers.{layer}'
        cache = {'h': h}
        if config.use_tcn:
            fa = numkit.ConvFilter(params[f'{prefix}.tcn.theta1'], params[f'{prefix}.tcn.b'], dilation)
            fb = numkit.ConvFilter(params[f'{prefix}.tcn.theta2'], params[f'{prefix}.tcn.c'], dilation)
            z, cache['tcn'] = gated_tcn(h, fa, fb, with_cache=True)
            cache['filters'] = (fa, fb)
        else:
            z = _project(params[f'{prefix}.linear.W'], params[f'{prefix}.linear.b'], h)
        if config.use_gcn:
            # steps lead so one adjacency product covers the clip
            out, gcn_cache = gcn_block(
                z.transpose(2, 0, 1), adjacency, params[f'{prefix}.gcn.W0'], params[f'{prefix}.gcn.W1'],
                with_cache=True)
            g = out.transpose(1, 2, 0)
            cache['gcn'] = gcn_cache
        else:
            g = z
        cache['g'] = g
        skip = skip + _project(params[f'{prefix}.skip.W'], params[f'{prefix}.skip.b'], g)
        h = g + h
        layers.append(cache)

    rectified = np.maximum(skip, 0.0)
    node_logits = _project(params['output.W'], params['output.b'], rectified)   # N x M x S
    logits = node_logits.mean(axis=0).T                                          # S x M
    probs = numkit.softmax_rows(logits)
    trace = ForwardTrace(
        config=config, params=params, points=points, embeddings=embeddings, u=u, x=x,
        adjacency=adjacency, adjacency_logits=logits_adj, layers=layers, skip=skip,
        rectified=rectified, probs=probs,
    )
    return probs, trace


def cross_entropy_loss(probs, label):
    """
    Frame-averaged cross entropy ``-(1/S) sum_t log p[t, label]``.

    Probabilities below 1e-12 are clamped inside the log.

    Raises:
    -------
    InputError: label outside ``0..M-1``.
    """
    probs = np.asarray(probs)
    if not 0 <= label < probs.shape[1]:
        raise InputError(f'label {label} out of range for {probs.shape[1]} classes')
    return float(-np.mean(np.log(np.maximum(probs[:, label], PROBABILITY_FLOOR))))


# ============================================================================
# BACKWARD
# ============================================================================

def _acc(params, name, value, weight):
    params.grads[name] += weight * value


def backward_pass(trace, label, accumulate=False, weight=1.0):
    """
    Exact gradients of ``cross_entropy_loss(model_forward(...))``.

    Parameters:
    -----------
    trace : ForwardTrace
        Fresh trace from :func:`model_forward`.
    label : int
        Clip class index.
    accumulate : bool
        Add into the gradient buffers instead of overwriting them (batching).
    weight : float
        Scale applied to this sample's gradient (``1/batch`` for a mean).

    Returns:
    --------
    float: the loss of this trace.

    Raises:
    -------
    StateError: the trace was already used for a backward pass.
    """
    if trace.consumed:
        raise StateError('forward trace already consumed by a backward pass')
    loss = cross_entropy_loss(trace.probs, label)
    trace.consumed = True

    config, params = trace.config, trace.params
    if not accumulate:
        params.zero_grad()
    S, N = trace.probs.shape[0], trace.x.shape[0]

    # softmax + cross entropy; clamped frames contribute no gradient
    grad_logits = trace.probs.copy()
    grad_logits[:, label] -= 1.0
    grad_logits[trace.probs[:, label] < PROBABILITY_FLOOR] = 0.0
    grad_logits /= S
    grad_nodes = np.broadcast_to(grad_logits.T[None, :, :] / N, (N,) + grad_logits.T.shape)

    _acc(params, 'output.W', np.tensordot(grad_nodes, trace.rectified, axes=([0, 2], [0, 2])), weight)
    _acc(params, 'output.b', grad_nodes.sum(axis=(0, 2)), weight)
    grad_skip = np.matmul(params['output.W'].T, grad_nodes) * (trace.skip > 0)

    grad_h = np.zeros_like(trace.skip)
    grad_adj = np.zeros_like(trace.adjacency) if config.use_gcn else None
    for layer in reversed(range(config.L)):
        prefix = f'layers.{layer}'
        cache = trace.layers[layer]
        g = cache['g']
        _acc(params, f'{prefix}.skip.W', np.tensordot(grad_skip, g, axes=([0, 2], [0, 2])), weight)
        _acc(params, f'{prefix}.skip.b', grad_skip.sum(axis=(0, 2)), weight)
        grad_g = grad_h + np.matmul(params[f'{prefix}.skip.W'].T, grad_skip)
        grad_in = grad_h.copy()   # residual path

        if config.use_gcn:
            grad_steps, grad_A, grad_W0, grad_W1 = gcn_block_backward(
                grad_g.transpose(2, 0, 1), trace.adjacency,
                params[f'{prefix}.gcn.W0'], params[f'{prefix}.gcn.W1'], cache['gcn'])
            _acc(params, f'{prefix}.gcn.W0', grad_W0, weight)
            _acc(params, f'{prefix}.gcn.W1', grad_W1, weight)
            grad_adj += grad_A
            grad_z = grad_steps.transpose(1, 2, 0)
        else:
            grad_z = grad_g

        h = cache['h']
        if config.use_tcn:
            fa, fb = cache['filters']
            dh, (dtheta1, db), (dtheta2, dc) = gated_tcn_backward(h, fa, fb, cache['tcn'], grad_z)
            _acc(params, f'{prefix}.tcn.theta1', dtheta1, weight)
            _acc(params, f'{prefix}.tcn.b', db, weight)
            _acc(params, f'{prefix}.tcn.theta2', dtheta2, weight)
            _acc(params, f'{prefix}.tcn.c', dc, weight)
            grad_in += dh
        else:
            W = params[f'{prefix}.linear.W']
            _acc(params, f'{prefix}.linear.W', np.tensordot(grad_z, h, axes=([0, 2], [0, 2])), weight)
            _acc(params, f'{prefix}.linear.b', grad_z.sum(axis=(0, 2)), weight)
            grad_in += np.matmul(W.T, grad_z)
        grad_h = grad_in

    _acc(params, 'input.W', np.tensordot(grad_h, trace.x, axes=([0, 2], [0, 2])), weight)
    _acc(params, 'input.b', grad_h.sum(axis=(0, 2)), weight)
    grad_x = np.matmul(params['input.W'].T, grad_h)                              # N x D' x S
    grad_u = np.einsum('njs,sj->sn', grad_x, trace.embeddings)                    # S x N
    _acc(params, 'fusion.w', np.tensordot(grad_u, trace.points, axes=([0, 1], [0, 1])), weight)

    if config.use_gcn:
        grad_relu = numkit.softmax_rows_backward(trace.adjacency, grad_adj)
        grad_logits_adj = grad_relu * (trace.adjacency_logits > 0)
        _acc(params, 'adjacency.E1', grad_logits_adj @ params['adjacency.E2'], weight)
        _acc(params, 'adjacency.E2', grad_logits_adj.T @ params['adjacency.E1'], weight)
    return loss


# ============================================================================
# INFERENCE HELPERS
# ============================================================================

def predict_clip(sample, params, config):
    """
    Frame probabilities and the clip class.

    The clip class is the argmax of the frame-mean probability vector; ties
    go to the lowest class index.
    """
    probs, _ = model_forward(sample, params, config)
    mean = probs.mean(axis=0)
    return probs, int(np.argmax(mean))


def gradient_check(config, seed=0, h=1e-5, label=None):
    """
    Compare analytic gradients with central finite differences on a random sample.

    Returns:
    --------
    dict: ``{tensor name: relative error}`` where the error is
    ``||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-8)``.
    """
    from .bench import dummy_sample

    rng = np.random.default_rng(seed)
    params = init_params(config, seed)
    sample = dummy_sample(config, rng, clip_id='gradcheck')
    label = sample.label if label is None else label

    _, trace = model_forward(sample, params, config)
    backward_pass(trace, label)
    errors = {}
    for name in params.names():
        analytic = params.grads[name].copy()
        original = params.tensors[name]

        def loss_at(values, name=name):
            params.tensors[name] = values
            try:
                probs, _ = model_forward(sample, params, config)
            finally:
                params.tensors[name] = original
            return cross_entropy_loss(probs, label)

        numeric = numkit.finite_difference_grad(loss_at, original, h)
        scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-8)
        errors[name] = float(np.linalg.norm(analytic - numeric) / scale)
        logger.debug('gradcheck tensor=%s rel_error=%.3e', name, errors[name])
    return errors
