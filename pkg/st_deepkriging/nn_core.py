"""
Minimal dense-network engine.

Networks are stacks of :py:class:`DenseLayer` (``y = act(W x + b)`` with W of
shape M_l x M_{l-1}), evaluated on row batches in float64. Gradients are exact
reverse-mode derivatives; training is plain minibatch SGD with optional L1/L2
penalties on selected layers.

:py:func:`run_training` is the shared epoch loop (shuffling, divergence
detection, early stopping) also used by the recurrent forecasters.
"""

import logging
import time
from typing import Callable, List, Optional, Sequence

import numpy as np
from attr import attrs, attrib, validators
from scipy.special import expit

from . import quantile
from .checkpoint import decode_array, encode_array
from .exceptions import ConfigurationError, ContractViolationError, ShapeError, TrainingDivergedError
from .telemetry import get_telemetry

logger = logging.getLogger(__name__)

ACTIVATIONS = ('relu', 'sigmoid', 'tanh', 'identity', 'psi')


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def init_weights(shape, seed):
    """
    Normal initialisation with standard deviation sqrt(2 / fan_in), fan_in = shape[1].
    ``seed`` may be an int or a numpy Generator.
    """
    fan_in = shape[1] if len(shape) > 1 else shape[0]
    return _as_rng(seed).normal(0.0, np.sqrt(2.0 / fan_in), size=tuple(shape))


@attrs
class DenseLayer(object):
    #: Weight matrix, shape (M_l, M_{l-1}).
    W = attrib()
    #: Bias vector, shape (M_l,).
    b = attrib()
    activation = attrib(type=str, default='relu', validator=validators.in_(ACTIVATIONS))
    #: Quantile level and lambda of a ``psi`` output layer.
    tau = attrib(type=float, default=0.5)
    lam = attrib(type=float, default=1.0)

    @property
    def in_dim(self):
        return self.W.shape[1]

    @property
    def out_dim(self):
        return self.W.shape[0]


class DenseNetwork(object):
    """
    A feed-forward stack of dense layers. ``version`` is bumped by every
    parameter update so that forward caches can be checked for staleness.
    """

    def __init__(self, layers: Sequence[DenseLayer]):
        layers = list(layers)
        if not layers:
            raise ShapeError('a network needs at least one layer')
        for i in range(1, len(layers)):
            if layers[i].in_dim != layers[i - 1].out_dim:
                raise ShapeError('layer {} expects {} inputs but layer {} emits {}'.format(
                    i, layers[i].in_dim, i - 1, layers[i - 1].out_dim))
        self.layers = layers
        self.version = 0

    @classmethod
    def build(cls, input_dim, sizes, seed=0, hidden_activation='relu', output_activation='identity',
              tau=0.5, lam=1.0):
        rng = _as_rng(seed)
        dims = [int(input_dim)] + [int(s) for s in sizes]
        layers = []
        for i in range(1, len(dims)):
            last = i == len(dims) - 1
            layers.append(DenseLayer(W=init_weights((dims[i], dims[i - 1]), rng),
                                     b=np.zeros(dims[i]),
                                     activation=output_activation if last else hidden_activation,
                                     tau=tau, lam=lam))
        return cls(layers)

    @property
    def input_dim(self):
        return self.layers[0].in_dim

    @property
    def output_dim(self):
        return self.layers[-1].out_dim

    def parameters(self):
        out = []
        for layer in self.layers:
            out.extend([layer.W, layer.b])
        return out

    def get_state(self):
        return [p.copy() for p in self.parameters()]

    def set_state(self, state):
        for i, layer in enumerate(self.layers):
            layer.W = state[2 * i].copy()
            layer.b = state[2 * i + 1].copy()
        self.version += 1

    def to_dict(self):
        return {'layers': [{'shape': list(l.W.shape), 'activation': l.activation, 'tau': l.tau, 'lam': l.lam,
                            'W': encode_array(l.W), 'b': encode_array(l.b)} for l in self.layers]}

    @classmethod
    def from_dict(cls, d):
        layers = []
        for item in d['layers']:
            W = decode_array(item['W'])
            if list(W.shape) != list(item['shape']):
                raise ShapeError('checkpoint layer shape {} does not match its weights {}'.format(item['shape'], W.shape))
            layers.append(DenseLayer(W=W, b=decode_array(item['b']), activation=item['activation'],
                                     tau=float(item.get('tau', 0.5)), lam=float(item.get('lam', 1.0))))
        return cls(layers)


@attrs
class ForwardCache(object):
    network_id = attrib()
    version = attrib()
    inputs = attrib(factory=list)
    preacts = attrib(factory=list)
    f_constant = attrib(default=None)
    squeezed = attrib(default=False)


@attrs
class Gradients(object):
    weights = attrib(factory=list)
    biases = attrib(factory=list)
    #: Gradient with respect to the network input, same shape as the forward input.
    inputs = attrib(default=None)

    def as_list(self):
        out = []
        for dW, db in zip(self.weights, self.biases):
            out.extend([dW, db])
        return out


def _activate(layer, z, f_constant):
    act = layer.activation
    if act == 'relu':
        return np.maximum(z, 0.0)
    if act == 'sigmoid':
        return expit(z)
    if act == 'tanh':
        return np.tanh(z)
    if act == 'identity':
        return z
    if layer.tau != quantile.MEDIAN and f_constant is None:
        raise ShapeError('a psi output layer needs per-point f_constant values')
    return quantile.psi(layer.tau, z, f_constant, layer.lam)


def _activation_grad(layer, z):
    act = layer.activation
    if act == 'relu':
        return (z > 0).astype(float)
    if act == 'sigmoid':
        s = expit(z)
        return s * (1.0 - s)
    if act == 'tanh':
        return 1.0 - np.tanh(z) ** 2
    if act == 'identity':
        return np.ones_like(z)
    return quantile.psi_derivative(layer.tau, z, layer.lam)


def forward(net: DenseNetwork, x, f_constant=None):
    """
    Evaluate the network on a vector or a row batch.

    :returns: ``(output, cache)``; a 1-D input gives a 1-D output.
    :raises ShapeError: if the input width does not match the first layer.
    """
    x = np.asarray(x, dtype=float)
    squeezed = x.ndim == 1
    a = x.reshape(1, -1) if squeezed else x
    if a.shape[1] != net.input_dim:
        raise ShapeError('network expects {} inputs, got {}'.format(net.input_dim, a.shape[1]))
    if f_constant is not None:
        f_constant = np.asarray(f_constant, dtype=float).reshape(a.shape[0], -1)
    cache = ForwardCache(network_id=id(net), version=net.version, f_constant=f_constant, squeezed=squeezed)
    for layer in net.layers:
        cache.inputs.append(a)
        z = a @ layer.W.T + layer.b
        cache.preacts.append(z)
        a = _activate(layer, z, f_constant)
    return (a[0] if squeezed else a), cache


def backward(net: DenseNetwork, cache: ForwardCache, grad_output):
    """
    Reverse-mode gradients of a scalar loss given dLoss/dOutput.

    :raises ContractViolationError: if the cache was produced for another network
        or before the last parameter update.
    """
    if cache.network_id != id(net) or cache.version != net.version:
        raise ContractViolationError('forward cache is stale: parameters changed since the forward pass')
    delta = np.asarray(grad_output, dtype=float)
    if cache.squeezed:
        delta = delta.reshape(1, -1)
    grads = Gradients()
    for i in reversed(range(len(net.layers))):
        layer = net.layers[i]
        dz = delta * _activation_grad(layer, cache.preacts[i])
        grads.weights.append(dz.T @ cache.inputs[i])
        grads.biases.append(dz.sum(axis=0))
        delta = dz @ layer.W
    grads.weights.reverse()
    grads.biases.reverse()
    grads.inputs = delta[0] if cache.squeezed else delta
    return grads


@attrs(frozen=True)
class TrainConfig(object):
    learning_rate = attrib(type=float, default=0.001)
    batch_size = attrib(type=int, default=64)
    epochs = attrib(type=int, default=200)
    #: L1 and L2 penalty weights on the weights of ``l1l2_layers``.
    l1 = attrib(type=float, default=1e-2)
    l2 = attrib(type=float, default=1e-2)
    #: Indices of the layers that carry the L1/L2 penalty.
    l1l2_layers = attrib(default=(0, 1), converter=lambda v: tuple(sorted(int(i) for i in v)))
    seed = attrib(type=int, default=0)
    #: Fraction held out for early stopping (ignored below 10 samples).
    validation_fraction = attrib(type=float, default=0.1)
    patience = attrib(type=int, default=20)
    log_every = attrib(type=int, default=10)

    @learning_rate.validator
    def _lr(self, attribute, value):
        if not value > 0:
            raise ValueError('learning_rate must be > 0, got {!r}'.format(value))

    @batch_size.validator
    @epochs.validator
    @patience.validator
    def _positive_int(self, attribute, value):
        if int(value) < 1:
            raise ValueError('{} must be a positive integer, got {!r}'.format(attribute.name, value))

    @l1.validator
    @l2.validator
    def _nonnegative(self, attribute, value):
        if value < 0:
            raise ValueError('{} must be >= 0, got {!r}'.format(attribute.name, value))

    @validation_fraction.validator
    def _fraction(self, attribute, value):
        if not 0.0 <= value < 1.0:
            raise ValueError('validation_fraction must lie in [0, 1), got {!r}'.format(value))

    def to_dict(self):
        return {'learning_rate': self.learning_rate, 'batch_size': self.batch_size, 'epochs': self.epochs,
                'l1': self.l1, 'l2': self.l2, 'l1l2_layers': list(self.l1l2_layers), 'seed': self.seed,
                'validation_fraction': self.validation_fraction, 'patience': self.patience,
                'log_every': self.log_every}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def apply_sgd(params, grads, learning_rate, l1=0.0, l2=0.0, regularized=None):
    """
    In-place update ``p -= lr * (g + 2 l2 p + l1 sign(p))`` on regularized
    parameters and ``p -= lr * g`` elsewhere.
    """
    if len(params) != len(grads):
        raise ShapeError('got {} gradients for {} parameters'.format(len(grads), len(params)))
    regularized = regularized if regularized is not None else [False] * len(params)
    for p, g, reg in zip(params, grads, regularized):
        if p.shape != np.shape(g):
            raise ShapeError('gradient shape {} does not match parameter shape {}'.format(np.shape(g), p.shape))
        step = g
        if reg and (l1 or l2):
            step = g + 2.0 * l2 * p + l1 * np.sign(p)
        p -= learning_rate * step


def sgd_step(net: DenseNetwork, gradients: Gradients, config: TrainConfig):
    """ One SGD update; weights of layers in ``config.l1l2_layers`` are penalised, biases never. """
    regularized = []
    for i in range(len(net.layers)):
        regularized.extend([i in config.l1l2_layers, False])
    apply_sgd(net.parameters(), gradients.as_list(), config.learning_rate, config.l1, config.l2, regularized)
    net.version += 1
    return net


def squared_loss(predictions, targets):
    """ Mean squared error and its gradient with respect to the predictions. """
    diff = np.asarray(predictions, dtype=float) - np.asarray(targets, dtype=float)
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


@attrs
class TrainingHistory(object):
    #: Training risk per epoch; entry 0 is the risk before the first update.
    train_risk = attrib(factory=list)
    validation_risk = attrib(factory=list)
    best_epoch = attrib(type=int, default=0)
    stopped_early = attrib(type=bool, default=False)
    seconds = attrib(type=float, default=0.0)

    @property
    def final_risk(self):
        return self.train_risk[self.best_epoch] if self.train_risk else float('nan')

    def to_dict(self):
        return {'train_risk': list(self.train_risk), 'validation_risk': list(self.validation_risk),
                'best_epoch': self.best_epoch, 'stopped_early': self.stopped_early}


def run_training(n_samples: int, config: TrainConfig, batch_step: Callable, evaluate: Callable,
                 get_state: Callable, set_state: Callable, label: str = 'network', tau: Optional[float] = None):
    """
    Epoch loop shared by all trainable models.

    ``batch_step(indices)`` performs one update and returns the batch loss;
    ``evaluate(indices)`` returns the risk over a subset without updating. The
    parameters with the lowest monitored risk (validation if a split exists,
    training otherwise) are restored at the end.

    :raises TrainingDivergedError: on a non-finite loss, naming the epoch.
    """
    if n_samples < 1:
        raise ConfigurationError('cannot train {} on an empty sample'.format(label))
    telemetry = get_telemetry()
    started = time.time()
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(n_samples)
    n_val = int(round(config.validation_fraction * n_samples)) if n_samples >= 10 else 0
    val_idx, train_idx = np.sort(order[:n_val]), np.sort(order[n_val:])
    batch_size = config.batch_size
    if batch_size > train_idx.size:
        logger.warning('%s: batch size %d exceeds %d training samples; using %d',
                       label, batch_size, train_idx.size, train_idx.size)
        batch_size = int(train_idx.size)

    history = TrainingHistory()
    risk = evaluate(train_idx)
    history.train_risk.append(risk)
    monitor = evaluate(val_idx) if n_val else risk
    history.validation_risk.append(monitor)
    best, best_state, wait = monitor, get_state(), 0

    for epoch in range(1, config.epochs + 1):
        shuffled = rng.permutation(train_idx)
        for start in range(0, shuffled.size, batch_size):
            loss = batch_step(shuffled[start:start + batch_size])
            if not np.isfinite(loss):
                telemetry.record_divergence(label, epoch)
                raise TrainingDivergedError(epoch, tau)
        risk = evaluate(train_idx)
        if not np.isfinite(risk):
            telemetry.record_divergence(label, epoch)
            raise TrainingDivergedError(epoch, tau)
        monitor = evaluate(val_idx) if n_val else risk
        history.train_risk.append(risk)
        history.validation_risk.append(monitor)
        if monitor < best:
            best, best_state, wait = monitor, get_state(), 0
            history.best_epoch = epoch
        else:
            wait += 1
        if config.log_every and epoch % config.log_every == 0:
            logger.info('%s epoch %d: train risk %.6g, monitored risk %.6g', label, epoch, risk, monitor)
        if wait >= config.patience:
            history.stopped_early = True
            logger.info('%s: no improvement for %d epochs, stopping at epoch %d', label, wait, epoch)
            break

    set_state(best_state)
    history.seconds = time.time() - started
    telemetry.record_training(label, len(history.train_risk) - 1, history.seconds, history.final_risk)
    logger.info('%s: best epoch %d, train risk %.6g (%.1fs)', label, history.best_epoch,
                history.final_risk, history.seconds)
    return history


def train_dense(net: DenseNetwork, X, y, config: TrainConfig, loss_fn: Callable = squared_loss,
                f_constant=None, label='network', tau=None):
    """
    Train ``net`` on rows of ``X`` against column targets ``y`` with minibatch SGD.

    ``loss_fn(predictions, targets)`` returns ``(mean loss, dLoss/dPredictions)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(X.shape[0], -1)
    fc = None if f_constant is None else np.asarray(f_constant, dtype=float).reshape(X.shape[0], -1)

    def batch_step(idx):
        out, cache = forward(net, X[idx], None if fc is None else fc[idx])
        value, grad = loss_fn(out, y[idx])
        sgd_step(net, backward(net, cache, grad), config)
        return value

    def evaluate(idx):
        if idx.size == 0:
            return float('nan')
        out, _ = forward(net, X[idx], None if fc is None else fc[idx])
        return loss_fn(out, y[idx])[0]

    return run_training(X.shape[0], config, batch_step, evaluate, net.get_state, net.set_state, label, tau)
