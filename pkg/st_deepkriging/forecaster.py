"""
Stacked LSTM quantile forecaster (QLSTM) on interpolated station series.

A model is one recurrent stack per quantile level. Each stack reads a window
of ``j`` standardised values, runs P recurrent layers over it and maps the
last hidden state of the top layer to a scalar with an affine head. The
median stack is trained first; the other levels use a psi head anchored on
the median forecast of the same window.

:py:class:`RecurrentStack` and :py:func:`train_recurrent` are cell-agnostic;
the convolutional variant plugs its own cell type in.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Callable, Dict, List, Optional, Sequence

import attr
import numpy as np
import pandas as pd
from attr import attrs, attrib, validators
from scipy.special import expit

from . import quantile
from .checkpoint import FORMAT_VERSION, decode_array, encode_array, read_checkpoint, read_json, \
    write_checkpoint, write_json
from .exceptions import ConfigurationError, ContractViolationError, DomainError, MissingQuantileError, \
    ModelNotFoundError, ShapeError
from .nn_core import TrainConfig, apply_sgd, init_weights, run_training, squared_loss

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 12
#: Updates are rescaled so the global gradient norm never exceeds this value.
GRAD_CLIP = 5.0
GATES = ('a', 'b', 'c', 'o')
POINT_LOSSES = ('check', 'mse')


def tau_key(tau) -> float:
    return round(float(tau), 6)


@attrs
class LstmCellParams(object):
    """
    Gate weights act on the concatenation [m_prev, x_t]: a forgets, b admits,
    c is the candidate cell state and o gates the output.
    """
    W_a = attrib()
    W_b = attrib()
    W_c = attrib()
    W_o = attrib()
    b_a = attrib()
    b_b = attrib()
    b_c = attrib()
    b_o = attrib()

    def __attrs_post_init__(self):
        shape = np.shape(self.W_a)
        if len(shape) != 2 or shape[0] < 1 or shape[1] <= shape[0]:
            raise ShapeError('gate matrices must be hidden x (hidden + input), got {}'.format(shape))
        for gate in GATES:
            W = getattr(self, 'W_' + gate)
            b = getattr(self, 'b_' + gate)
            if np.shape(W) != shape:
                raise ShapeError('W_{} has shape {}, W_a has {}'.format(gate, np.shape(W), shape))
            if np.shape(b) != (shape[0],):
                raise ShapeError('b_{} has shape {}, expected ({},)'.format(gate, np.shape(b), shape[0]))

    @property
    def hidden(self):
        return self.W_a.shape[0]

    @property
    def input_dim(self):
        return self.W_a.shape[1] - self.W_a.shape[0]

    @classmethod
    def init(cls, input_dim, hidden, seed=0):
        rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
        shape = (hidden, hidden + input_dim)
        weights = {'W_' + g: init_weights(shape, rng) * 0.5 for g in GATES}
        biases = {'b_' + g: np.zeros(hidden) for g in GATES}
        biases['b_a'] = np.ones(hidden)
        return cls(**weights, **biases)

    @classmethod
    def zeros(cls, input_dim, hidden):
        shape = (hidden, hidden + input_dim)
        return cls(**{'W_' + g: np.zeros(shape) for g in GATES}, **{'b_' + g: np.zeros(hidden) for g in GATES})

    def parameters(self):
        return [getattr(self, 'W_' + g) for g in GATES] + [getattr(self, 'b_' + g) for g in GATES]


def _lstm_forward(x, m_prev, C_prev, p: LstmCellParams):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    m_prev = np.atleast_2d(np.asarray(m_prev, dtype=float))
    C_prev = np.atleast_2d(np.asarray(C_prev, dtype=float))
    if x.shape[1] != p.input_dim:
        raise ShapeError('cell expects {} inputs, got {}'.format(p.input_dim, x.shape[1]))
    if m_prev.shape[1] != p.hidden or C_prev.shape != m_prev.shape:
        raise ShapeError('cell state shapes {} / {} do not match hidden size {}'.format(
            m_prev.shape, C_prev.shape, p.hidden))
    if m_prev.shape[0] != x.shape[0]:
        raise ShapeError('batch sizes differ: input {}, state {}'.format(x.shape[0], m_prev.shape[0]))
    z = np.concatenate([m_prev, x], axis=1)
    a = expit(z @ p.W_a.T + p.b_a)
    b = expit(z @ p.W_b.T + p.b_b)
    c = np.tanh(z @ p.W_c.T + p.b_c)
    o = expit(z @ p.W_o.T + p.b_o)
    C = a * C_prev + b * c
    tC = np.tanh(C)
    m = o * tC
    return m, C, (z, a, b, c, o, C_prev, tC)


def _lstm_backward(dm, dC, cache, p: LstmCellParams):
    z, a, b, c, o, C_prev, tC = cache
    do = dm * tC
    dC = dC + dm * o * (1.0 - tC * tC)
    dpre = {
        'a': dC * C_prev * a * (1.0 - a),
        'b': dC * c * b * (1.0 - b),
        'c': dC * b * (1.0 - c * c),
        'o': do * o * (1.0 - o),
    }
    grads = [dpre[g].T @ z for g in GATES] + [dpre[g].sum(axis=0) for g in GATES]
    dz = sum(dpre[g] @ getattr(p, 'W_' + g) for g in GATES)
    return grads, dz[:, p.hidden:], dz[:, :p.hidden], dC * a


def lstm_cell(x_t, m_prev, C_prev, params: LstmCellParams):
    """
    One LSTM step: ``C_t = a * C_prev + b * c`` and ``m_t = o * tanh(C_t)``.
    Accepts single vectors or row batches.

    :raises ShapeError: if the input or state shapes do not match ``params``.
    """
    squeezed = np.ndim(x_t) == 1
    m, C, _ = _lstm_forward(x_t, m_prev, C_prev, params)
    if squeezed:
        return m[0], C[0]
    return m, C


class LstmCell(object):
    kind = 'lstm'

    def __init__(self, params: LstmCellParams):
        self.params = params

    @property
    def state_shape(self):
        return (self.params.hidden,)

    def forward(self, x, m_prev, C_prev):
        return _lstm_forward(x.reshape(x.shape[0], -1), m_prev, C_prev, self.params)

    def backward(self, dm, dC, cache):
        grads, dx, dm_prev, dC_prev = _lstm_backward(dm, dC, cache, self.params)
        return grads, dx, dm_prev, dC_prev

    def parameters(self):
        return self.params.parameters()

    def set_parameters(self, arrays):
        names = ['W_' + g for g in GATES] + ['b_' + g for g in GATES]
        self.params = LstmCellParams(**{n: a.copy() for n, a in zip(names, arrays)})

    def to_dict(self):
        return {'kind': self.kind, 'arrays': [encode_array(a) for a in self.parameters()]}

    @classmethod
    def from_dict(cls, d):
        cell = cls(LstmCellParams.zeros(1, 1))
        cell.set_parameters([decode_array(a) for a in d['arrays']])
        return cell


#: Cell classes by checkpoint kind; the convolutional module adds its own.
CELL_TYPES = {'lstm': LstmCell}


@attrs
class RecurrentCache(object):
    stack_id = attrib()
    version = attrib()
    steps = attrib(factory=list)
    last_hidden = attrib(default=None)
    preact = attrib(default=None)
    batch = attrib(default=0)


class RecurrentStack(object):
    """
    P recurrent layers unrolled over a window plus an affine head on the
    flattened last hidden state of the top layer. The head output goes
    through psi for non-median levels.
    """

    def __init__(self, cells: Sequence, W_P, b_P, tau: float = 0.5, lam: float = 1.0):
        self.cells = list(cells)
        if not self.cells:
            raise ShapeError('a recurrent stack needs at least one layer')
        self.W_P = np.asarray(W_P, dtype=float)
        self.b_P = np.asarray(b_P, dtype=float)
        width = int(np.prod(self.cells[-1].state_shape))
        if self.W_P.shape != (1, width) or self.b_P.shape != (1,):
            raise ShapeError('head must be (1, {}) with a (1,) bias, got {} and {}'.format(
                width, self.W_P.shape, self.b_P.shape))
        self.tau = float(tau)
        self.lam = float(lam)
        self.version = 0

    @property
    def is_median(self):
        return self.tau == quantile.MEDIAN

    def parameters(self):
        out = []
        for cell in self.cells:
            out.extend(cell.parameters())
        return out + [self.W_P, self.b_P]

    def get_state(self):
        return [p.copy() for p in self.parameters()]

    def set_state(self, state):
        offset = 0
        for cell in self.cells:
            n = len(cell.parameters())
            cell.set_parameters(state[offset:offset + n])
            offset += n
        self.W_P = state[offset].copy()
        self.b_P = state[offset + 1].copy()
        self.version += 1

    def forward(self, X, f_constant=None):
        """
        Run a batch of windows, ``X`` of shape (B, j, ...), returning (B,)
        outputs and the cache needed by :py:meth:`backward`.
        """
        X = np.asarray(X, dtype=float)
        if X.ndim < 2 or X.shape[1] < 1:
            raise ShapeError('expected windows of shape (batch, steps, ...), got {}'.format(X.shape))
        batch = X.shape[0]
        m = [np.zeros((batch,) + cell.state_shape) for cell in self.cells]
        C = [np.zeros((batch,) + cell.state_shape) for cell in self.cells]
        cache = RecurrentCache(stack_id=id(self), version=self.version, batch=batch)
        for k in range(X.shape[1]):
            inp = X[:, k]
            step = []
            for i, cell in enumerate(self.cells):
                m[i], C[i], c = cell.forward(inp, m[i], C[i])
                step.append(c)
                inp = m[i]
            cache.steps.append(step)
        h = m[-1].reshape(batch, -1)
        z = (h @ self.W_P.T + self.b_P).ravel()
        cache.last_hidden, cache.preact = h, z
        if self.is_median:
            return z, cache
        if f_constant is None:
            raise ShapeError('a psi head needs per-window f_constant values')
        return quantile.psi(self.tau, z, np.asarray(f_constant, dtype=float).ravel(), self.lam), cache

    def backward(self, cache: RecurrentCache, grad_output):
        """
        Backpropagation through time; returns gradients in :py:meth:`parameters` order.

        :raises ContractViolationError: on a stale cache.
        """
        if cache.stack_id != id(self) or cache.version != self.version:
            raise ContractViolationError('recurrent cache is stale: parameters changed since the forward pass')
        dz = np.asarray(grad_output, dtype=float).ravel()
        if not self.is_median:
            dz = dz * quantile.psi_derivative(self.tau, cache.preact, self.lam)
        dz = dz.reshape(-1, 1)
        dW_P = dz.T @ cache.last_hidden
        db_P = dz.sum(axis=0)
        top_shape = (cache.batch,) + self.cells[-1].state_shape
        cell_grads = [[np.zeros_like(p) for p in cell.parameters()] for cell in self.cells]
        dm_next = [np.zeros((cache.batch,) + cell.state_shape) for cell in self.cells]
        dC_next = [np.zeros((cache.batch,) + cell.state_shape) for cell in self.cells]
        dm_next[-1] = (dz @ self.W_P).reshape(top_shape)
        for k in reversed(range(len(cache.steps))):
            from_above = None
            for i in reversed(range(len(self.cells))):
                dm = dm_next[i] if from_above is None else dm_next[i] + from_above
                grads, dx, dm_prev, dC_prev = self.cells[i].backward(dm, dC_next[i], cache.steps[k][i])
                for acc, g in zip(cell_grads[i], grads):
                    acc += g
                dm_next[i], dC_next[i] = dm_prev, dC_prev
                from_above = dx.reshape((cache.batch,) + self.cells[i - 1].state_shape) if i > 0 else None
        out = []
        for grads in cell_grads:
            out.extend(grads)
        return out + [dW_P, db_P]

    def to_dict(self):
        return {'cells': [cell.to_dict() for cell in self.cells], 'W_P': encode_array(self.W_P),
                'b_P': encode_array(self.b_P), 'tau': self.tau, 'lam': self.lam}

    @classmethod
    def from_dict(cls, d):
        cells = []
        for item in d['cells']:
            if item['kind'] not in CELL_TYPES:
                raise ConfigurationError('unknown recurrent cell kind {!r}'.format(item['kind']))
            cells.append(CELL_TYPES[item['kind']].from_dict(item))
        return cls(cells, decode_array(d['W_P']), decode_array(d['b_P']), d['tau'], d['lam'])


def build_lstm_stack(input_dim, hidden, n_layers, seed=0, tau=0.5, lam=1.0) -> RecurrentStack:
    rng = np.random.default_rng(seed)
    cells = []
    dim = input_dim
    for _ in range(n_layers):
        cells.append(LstmCell(LstmCellParams.init(dim, hidden, rng)))
        dim = hidden
    return RecurrentStack(cells, init_weights((1, hidden), rng), np.zeros(1), tau, lam)


def _clip(grads, limit=GRAD_CLIP):
    norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if norm > limit:
        return [g * (limit / norm) for g in grads]
    return grads


def train_recurrent(stack: RecurrentStack, X, y, config: TrainConfig, loss_fn: Callable = squared_loss,
                    f_constant=None, label='recurrent', tau=None):
    """ Minibatch SGD with BPTT; see :py:func:`st_deepkriging.nn_core.run_training`. """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    fc = None if f_constant is None else np.asarray(f_constant, dtype=float).ravel()

    def batch_step(idx):
        out, cache = stack.forward(X[idx], None if fc is None else fc[idx])
        value, grad = loss_fn(out, y[idx])
        grads = _clip(stack.backward(cache, grad))
        apply_sgd(stack.parameters(), grads, config.learning_rate)
        stack.version += 1
        return value

    def evaluate(idx):
        if idx.size == 0:
            return float('nan')
        out, _ = stack.forward(X[idx], None if fc is None else fc[idx])
        return loss_fn(out, y[idx])[0]

    return run_training(X.shape[0], config, batch_step, evaluate, stack.get_state, stack.set_state, label, tau)


def _check_loss(predictions, targets, tau):
    return quantile.check_loss_and_gradient(predictions, targets, tau)


@attrs(frozen=True)
class ForecastConfig(object):
    """
    Architecture of a recurrent forecaster. ``filters``, ``radius`` and
    ``spacing`` only apply to the convolutional variant.
    """
    #: Window length j.
    window = attrib(type=int, default=DEFAULT_WINDOW, converter=int)
    #: Number of stacked recurrent layers P.
    n_layers = attrib(type=int, default=1, converter=int)
    hidden = attrib(type=int, default=50, converter=int)
    filters = attrib(type=int, default=16, converter=int)
    #: Neighbourhood side r (odd, >= 3).
    radius = attrib(type=int, default=5, converter=int)
    #: Lattice spacing; None means the median nearest-station distance.
    spacing = attrib(default=None)
    point_loss = attrib(type=str, default='check', validator=validators.in_(POINT_LOSSES))

    @window.validator
    @n_layers.validator
    @hidden.validator
    @filters.validator
    def _positive(self, attribute, value):
        if value < 1:
            raise ValueError('{} must be a positive integer, got {!r}'.format(attribute.name, value))

    @radius.validator
    def _odd(self, attribute, value):
        if value < 3 or value % 2 == 0:
            raise ValueError('radius must be odd and >= 3, got {!r}'.format(value))

    def to_dict(self):
        return attr.asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def make_windows(series, j):
    """
    Consecutive (window, target) pairs: ``series[k-j:k] -> series[k]`` for
    k = j .. K-1, in chronological order.

    :raises DomainError: if the series is not longer than ``j``.
    """
    X, y = window_arrays(series, j)
    return [(X[i], float(y[i])) for i in range(y.size)]


def window_arrays(series, j):
    """ :py:func:`make_windows` as an (n, j) input matrix and an (n,) target vector. """
    series = np.asarray(series, dtype=float).ravel()
    j = int(j)
    if j < 1:
        raise DomainError('window length must be positive, got {}'.format(j))
    if series.size <= j:
        raise DomainError('a series of length {} is too short for windows of length {}'.format(series.size, j))
    X = np.lib.stride_tricks.sliding_window_view(series[:-1], j).copy()
    return X, series[j:].copy()


class RecurrentQuantileModel(object):
    """
    Per-quantile recurrent stacks with the standardisation of the series
    they were trained on. Subclasses define how raw inputs become windows.
    """
    KIND = 'recurrent'

    def __init__(self, networks: Dict[float, RecurrentStack], config: ForecastConfig, lam: float,
                 mean: float, std: float, train_config: Optional[TrainConfig] = None,
                 final_risk: Optional[Dict[float, float]] = None, meta: Optional[dict] = None):
        networks = {tau_key(k): v for k, v in networks.items()}
        if quantile.MEDIAN not in networks:
            raise ConfigurationError('a median network is required')
        self.networks = networks
        self.config = config
        self.lam = float(lam)
        self.mean = float(mean)
        self.std = float(std)
        self.train_config = train_config or TrainConfig()
        self.final_risk = dict(final_risk or {})
        self.meta = dict(meta or {})

    @property
    def taus(self):
        return sorted(self.networks)

    @property
    def window(self):
        return self.config.window

    def _standardize(self, values):
        return (np.asarray(values, dtype=float) - self.mean) / self.std

    def _destandardize(self, values):
        return np.asarray(values, dtype=float) * self.std + self.mean

    def predict_windows(self, X_std, taus=None) -> Dict[float, np.ndarray]:
        """ Standardised outputs per level for a batch of standardised windows. """
        taus = self.taus if taus is None else [tau_key(t) for t in taus]
        for tau in taus:
            if tau not in self.networks:
                raise MissingQuantileError('no network trained for tau={} (trained: {})'.format(tau, self.taus))
        median, _ = self.networks[quantile.MEDIAN].forward(X_std)
        out = {}
        for tau in taus:
            out[tau] = median if tau == quantile.MEDIAN else self.networks[tau].forward(X_std, median)[0]
        return out

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        files = {}
        for tau, stack in self.networks.items():
            name = 'net_tau_{:.6f}.json'.format(tau)
            write_checkpoint(os.path.join(directory, name), 'recurrent', stack.to_dict())
            files[repr(tau)] = name
        write_json(os.path.join(directory, 'manifest.json'), {
            'format_version': FORMAT_VERSION,
            'kind': self.KIND,
            'taus': self.taus,
            'networks': files,
            'config': self.config.to_dict(),
            'train': self.train_config.to_dict(),
            'lambda': self.lam,
            'mean': self.mean,
            'std': self.std,
            'final_risk': {repr(k): v for k, v in self.final_risk.items()},
            'meta': self.meta,
        })
        logger.info('saved %s model with taus %s to %s', self.KIND, self.taus, directory)

    @classmethod
    def load(cls, directory):
        if not os.path.isdir(directory):
            raise ModelNotFoundError('model directory not found: {}'.format(directory))
        manifest = read_json(os.path.join(directory, 'manifest.json'))
        if manifest.get('kind') != cls.KIND:
            raise ConfigurationError('{} holds a {!r} model, expected {!r}'.format(
                directory, manifest.get('kind'), cls.KIND))
        networks = {float(tau): RecurrentStack.from_dict(read_checkpoint(os.path.join(directory, name), 'recurrent'))
                    for tau, name in manifest['networks'].items()}
        return cls(networks, ForecastConfig.from_dict(manifest['config']), manifest['lambda'], manifest['mean'],
                   manifest['std'], TrainConfig.from_dict(manifest['train']),
                   {float(k): v for k, v in manifest.get('final_risk', {}).items()}, manifest.get('meta'))


def fit_stacks(X_std, y_std, taus, build: Callable, config: ForecastConfig, train: TrainConfig, lam_std: float,
               label: str):
    """
    Sequential protocol shared by both forecasters: train the median stack,
    then every other level with psi anchored on the median output.

    ``build(seed, tau, lam)`` returns a fresh :py:class:`RecurrentStack`.
    """
    order = quantile.fit_order(taus)
    networks, final_risk = {}, {}
    f_constant = None
    for i, tau in enumerate(order):
        cfg = attr.evolve(train, seed=train.seed + i)
        name = '{}:tau={}'.format(label, tau)
        if tau == quantile.MEDIAN:
            stack = build(cfg.seed, tau, 1.0)
            loss_fn = squared_loss if config.point_loss == 'mse' else partial(_check_loss, tau=tau)
            history = train_recurrent(stack, X_std, y_std, cfg, loss_fn, label=name, tau=tau)
            f_constant = stack.forward(X_std)[0]
        else:
            stack = build(cfg.seed, tau, lam_std)
            history = train_recurrent(stack, X_std, y_std, cfg, partial(_check_loss, tau=tau), f_constant,
                                      label=name, tau=tau)
        networks[tau] = stack
        final_risk[tau] = history.final_risk
    return networks, final_risk


def standardization(values):
    values = np.asarray(values, dtype=float)
    mean = float(np.mean(values))
    std = float(np.std(values)) or 1.0
    return mean, std


class QlstmModel(RecurrentQuantileModel):
    KIND = 'qlstm'

    def forecast(self, series, u: int) -> Dict[float, np.ndarray]:
        """
        Recursive multi-step forecast: each step appends the median forecast
        to the window.

        :raises DomainError: if u < 1 or the series is shorter than the window.
        """
        if int(u) < 1:
            raise DomainError('forecast horizon must be >= 1, got {}'.format(u))
        series = np.asarray(series, dtype=float).ravel()
        if series.size < self.window:
            raise DomainError('need at least {} values to forecast, got {}'.format(self.window, series.size))
        window = list(self._standardize(series[-self.window:]))
        out = {tau: np.empty(int(u)) for tau in self.taus}
        for h in range(int(u)):
            X = np.asarray(window[-self.window:]).reshape(1, self.window, 1)
            step = self.predict_windows(X)
            for tau, value in step.items():
                out[tau][h] = value[0]
            window.append(float(step[quantile.MEDIAN][0]))
        return {tau: self._destandardize(v) for tau, v in out.items()}


def fit_qlstm(series, taus=(0.5,), config: ForecastConfig = ForecastConfig(), train: TrainConfig = TrainConfig(),
              lam: Optional[float] = None) -> QlstmModel:
    """
    Train a QLSTM on one series.

    :raises DomainError: for non-finite values or a series too short for the window.
    :raises MissingQuantileError: if 0.5 is not among ``taus``.
    """
    series = np.asarray(series, dtype=float).ravel()
    if not np.all(np.isfinite(series)):
        raise DomainError('series contains non-finite values')
    quantile.fit_order(taus)
    mean, std = standardization(series)
    X, y = window_arrays((series - mean) / std, config.window)
    lam = float(lam) if lam is not None else quantile.default_lambda(series)
    logger.info('fitting QLSTM on %d windows (j=%d, P=%d, hidden=%d)', y.size, config.window, config.n_layers,
                config.hidden)

    def build(seed, tau, lam_std):
        return build_lstm_stack(1, config.hidden, config.n_layers, seed, tau, lam_std)

    networks, final_risk = fit_stacks(X[:, :, None], y, taus, build, config, train, lam / std, 'qlstm')
    return QlstmModel(networks, config, lam, mean, std, train, final_risk)


def forecast(model: QlstmModel, series, u: int) -> Dict[float, np.ndarray]:
    return model.forecast(series, u)


def forecast_frame(location_id, forecasts: Dict[float, np.ndarray]) -> pd.DataFrame:
    """ Long-format rows ``location_id, horizon, tau, value`` (horizon starts at 1). """
    rows = []
    for tau in sorted(forecasts):
        for h, value in enumerate(np.asarray(forecasts[tau]).ravel(), start=1):
            rows.append({'location_id': location_id, 'horizon': h, 'tau': tau, 'value': float(value)})
    return pd.DataFrame(rows, columns=['location_id', 'horizon', 'tau', 'value'])


def map_locations(func: Callable, items: List, jobs: int = 1) -> List:
    """
    ``[func(item) for item in items]``, spread over up to ``jobs`` worker
    processes; ``func`` must be picklable.
    """
    jobs = max(1, min(int(jobs), len(items)))
    if jobs == 1:
        return [func(item) for item in items]
    logger.info('training %d locations on %d worker processes', len(items), jobs)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))
