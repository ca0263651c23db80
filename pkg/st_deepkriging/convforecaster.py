"""
Convolution-gated LSTM quantile forecaster (QConvLSTM).

The interpolator is used as a gridding device: around the target location
it is queried on an r x r lattice at every time stamp, giving a sequence of
neighbourhood frames. Each recurrent layer concatenates its previous hidden
maps (zero-bordered to the frame size) with the incoming frame along the
channel axis and computes all four gates with one valid 3 x 3 convolution,
so the states of a layer are two cells smaller per side than its input.
The forecast target is the centre cell of the next frame.
"""

import logging
import os
from typing import Dict, Optional

import numpy as np
import pandas as pd
from attr import attrs, attrib
from scipy.special import expit

from . import quantile
from .checkpoint import decode_array, encode_array
from .exceptions import ConfigurationError, DomainError, ShapeError
from .forecaster import CELL_TYPES, ForecastConfig, RecurrentQuantileModel, RecurrentStack, fit_stacks, \
    standardization
from .nn_core import TrainConfig, init_weights

logger = logging.getLogger(__name__)

KERNEL = 3


def _check_side(r):
    if r < 3 or r % 2 == 0:
        raise ShapeError('neighbourhood side must be odd and >= 3, got {}'.format(r))


@attrs
class NeighborhoodSeries(object):
    """
    Time-ordered r x r frames of median interpolations around ``center``;
    frame cell (i, k) sits at ``center + ((i - r // 2) * spacing, (k - r // 2) * spacing)``.
    """
    frames = attrib(converter=lambda a: np.asarray(a, dtype=float), eq=False)
    times = attrib(converter=lambda a: np.asarray(a, dtype=float).ravel(), eq=False)
    center = attrib(converter=lambda a: np.asarray(a, dtype=float).ravel(), eq=False)
    spacing = attrib(type=float, converter=float)

    def __attrs_post_init__(self):
        if self.frames.ndim != 3 or self.frames.shape[1] != self.frames.shape[2]:
            raise ShapeError('frames must have shape (K, r, r), got {}'.format(self.frames.shape))
        _check_side(self.frames.shape[1])
        if self.times.shape[0] != self.frames.shape[0]:
            raise ShapeError('{} frames for {} time stamps'.format(self.frames.shape[0], self.times.shape[0]))

    @property
    def side(self):
        return self.frames.shape[1]

    def __len__(self):
        return self.frames.shape[0]

    def center_series(self):
        c = self.side // 2
        return self.frames[:, c, c].copy()

    def lattice(self):
        offsets = (np.arange(self.side) - self.side // 2) * self.spacing
        xx, yy = np.meshgrid(self.center[0] + offsets, self.center[1] + offsets, indexing='ij')
        return xx, yy

    def dump_frames(self, directory):
        """ One CSV per time slice with columns ``i, k, s1, s2, t, value``. """
        os.makedirs(directory, exist_ok=True)
        xx, yy = self.lattice()
        ii, kk = np.meshgrid(np.arange(self.side), np.arange(self.side), indexing='ij')
        for n, (t, frame) in enumerate(zip(self.times, self.frames)):
            pd.DataFrame({'i': ii.ravel(), 'k': kk.ravel(), 's1': xx.ravel(), 's2': yy.ravel(),
                          't': t, 'value': frame.ravel()}).to_csv(
                os.path.join(directory, 'frame_{:04d}.csv'.format(n)), index=False, encoding='utf-8')
        logger.info('dumped %d frames to %s', len(self), directory)


def grid_neighborhood(interp_model, s0, times, r: int = 5, delta: float = 0.05) -> NeighborhoodSeries:
    """
    Median interpolations on the r x r lattice centred at ``s0`` with spacing
    ``delta``, one frame per time stamp. Lattices reaching outside the
    training domain trigger the interpolator's extrapolation warning.
    """
    _check_side(r)
    if not delta > 0:
        raise DomainError('lattice spacing must be positive, got {!r}'.format(delta))
    times = np.asarray(times, dtype=float).ravel()
    s0 = np.asarray(s0, dtype=float).ravel()
    offsets = (np.arange(r) - r // 2) * float(delta)
    xx, yy = np.meshgrid(s0[0] + offsets, s0[1] + offsets, indexing='ij')
    cells = np.stack([xx.ravel(), yy.ravel()], axis=1)
    s = np.tile(cells, (times.size, 1))
    t = np.repeat(times, r * r)
    values = interp_model.predict_many(s, t, quantile.MEDIAN)
    return NeighborhoodSeries(values.reshape(times.size, r, r), times, s0, delta)


@attrs
class ConvLayerParams(object):
    """ ``kernels`` has shape (filters, channels, 3, 3); ``bias`` has one entry per filter. """
    kernels = attrib()
    bias = attrib()

    def __attrs_post_init__(self):
        shape = np.shape(self.kernels)
        if len(shape) != 4 or shape[2:] != (KERNEL, KERNEL):
            raise ShapeError('kernels must have shape (filters, channels, 3, 3), got {}'.format(shape))
        if np.shape(self.bias) != (shape[0],):
            raise ShapeError('bias must have shape ({},), got {}'.format(shape[0], np.shape(self.bias)))

    @property
    def filters(self):
        return self.kernels.shape[0]

    @property
    def channels(self):
        return self.kernels.shape[1]


def _as_batch(x):
    """ (r, r) -> (1, 1, r, r); (C, r, r) -> (1, C, r, r); batches pass through. """
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        return x[None, None], 2
    if x.ndim == 3:
        return x[None], 3
    if x.ndim == 4:
        return x, 4
    raise ShapeError('expected a frame of 2 to 4 dimensions, got shape {}'.format(x.shape))


def _conv(x, kernels, bias):
    # x: (B, C, r, r) -> (B, F, r - 2, r - 2), cross-correlation without padding
    if x.shape[-1] < KERNEL or x.shape[-2] < KERNEL:
        raise ShapeError('frames must be at least 3 x 3, got {}'.format(x.shape[-2:]))
    if x.shape[1] != kernels.shape[1]:
        raise ShapeError('kernels expect {} channels, got {}'.format(kernels.shape[1], x.shape[1]))
    windows = np.lib.stride_tricks.sliding_window_view(x, (KERNEL, KERNEL), axis=(2, 3))
    return np.einsum('bcijkl,fckl->bfij', windows, kernels) + bias[None, :, None, None]


def _conv_backward(dout, x, kernels):
    windows = np.lib.stride_tricks.sliding_window_view(x, (KERNEL, KERNEL), axis=(2, 3))
    dK = np.einsum('bcijkl,bfij->fckl', windows, dout)
    db = dout.sum(axis=(0, 2, 3))
    dx = np.zeros_like(x)
    h, w = dout.shape[2], dout.shape[3]
    for k in range(KERNEL):
        for l in range(KERNEL):
            dx[:, :, k:k + h, l:l + w] += np.einsum('bfij,fc->bcij', dout, kernels[:, :, k, l])
    return dK, db, dx


def conv_forward(frame, params: ConvLayerParams):
    """
    Valid 3 x 3 cross-correlation: ``out[f, i, k] = bias[f] + sum_c sum_{p,q}
    frame[c, i + p, k + q] kernels[f, c, p, q]``. A single frame gives
    (filters, r - 2, r - 2); a batch (B, C, r, r) gives (B, filters, r - 2, r - 2).

    :raises ShapeError: if the frame is smaller than 3 x 3.
    """
    x, ndim = _as_batch(frame)
    out = _conv(x, params.kernels, params.bias)
    return out if ndim == 4 else out[0]


@attrs
class ConvLstmCellParams(object):
    """
    All four gates in one convolution: ``kernels`` is (4 F, F + C, 3, 3) with
    the gate blocks in the order a (forget), b (input), c (candidate), o (output).
    """
    kernels = attrib()
    bias = attrib()
    #: Shape (C, r, r) of the frames this cell consumes.
    in_shape = attrib(converter=lambda v: tuple(int(x) for x in v))

    def __attrs_post_init__(self):
        shape = np.shape(self.kernels)
        if len(shape) != 4 or shape[0] % 4 or shape[2:] != (KERNEL, KERNEL):
            raise ShapeError('kernels must have shape (4 F, F + C, 3, 3), got {}'.format(shape))
        if shape[1] != shape[0] // 4 + self.in_shape[0]:
            raise ShapeError('kernels take {} channels, expected {} hidden + {} input'.format(
                shape[1], shape[0] // 4, self.in_shape[0]))
        if np.shape(self.bias) != (shape[0],):
            raise ShapeError('bias must have shape ({},), got {}'.format(shape[0], np.shape(self.bias)))
        if self.in_shape[1] < KERNEL or self.in_shape[2] < KERNEL:
            raise ShapeError('input frames must be at least 3 x 3, got {}'.format(self.in_shape[1:]))

    @property
    def filters(self):
        return self.kernels.shape[0] // 4

    @property
    def state_shape(self):
        return (self.filters, self.in_shape[1] - 2, self.in_shape[2] - 2)

    @classmethod
    def init(cls, in_shape, filters, seed=0):
        rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
        channels = filters + int(in_shape[0])
        kernels = init_weights((4 * filters, channels * KERNEL * KERNEL), rng).reshape(
            4 * filters, channels, KERNEL, KERNEL) * 0.5
        bias = np.zeros(4 * filters)
        bias[:filters] = 1.0
        return cls(kernels, bias, in_shape)

    @classmethod
    def zeros(cls, in_shape, filters):
        channels = filters + int(in_shape[0])
        return cls(np.zeros((4 * filters, channels, KERNEL, KERNEL)), np.zeros(4 * filters), in_shape)


def _convlstm_forward(x, m_prev, C_prev, p: ConvLstmCellParams):
    F = p.filters
    if x.shape[1:] != p.in_shape:
        raise ShapeError('cell expects frames of shape {}, got {}'.format(p.in_shape, x.shape[1:]))
    if m_prev.shape[1:] != p.state_shape or C_prev.shape != m_prev.shape:
        raise ShapeError('state shapes {} / {} do not match {}'.format(m_prev.shape, C_prev.shape, p.state_shape))
    if m_prev.shape[0] != x.shape[0]:
        raise ShapeError('batch sizes differ: frames {}, state {}'.format(x.shape[0], m_prev.shape[0]))
    m_pad = np.pad(m_prev, ((0, 0), (0, 0), (1, 1), (1, 1)))
    z = np.concatenate([m_pad, x], axis=1)
    pre = _conv(z, p.kernels, p.bias)
    a = expit(pre[:, :F])
    b = expit(pre[:, F:2 * F])
    c = np.tanh(pre[:, 2 * F:3 * F])
    o = expit(pre[:, 3 * F:])
    C = a * C_prev + b * c
    tC = np.tanh(C)
    m = o * tC
    return m, C, (z, a, b, c, o, C_prev, tC)


def _convlstm_backward(dm, dC, cache, p: ConvLstmCellParams):
    z, a, b, c, o, C_prev, tC = cache
    F = p.filters
    do = dm * tC
    dC = dC + dm * o * (1.0 - tC * tC)
    dpre = np.concatenate([dC * C_prev * a * (1.0 - a),
                           dC * c * b * (1.0 - b),
                           dC * b * (1.0 - c * c),
                           do * o * (1.0 - o)], axis=1)
    dK, db, dz = _conv_backward(dpre, z, p.kernels)
    dm_prev = dz[:, :F, 1:-1, 1:-1]
    dx = dz[:, F:]
    return [dK, db], dx, dm_prev, dC * a


def convlstm_cell(frame_t, m_prev, C_prev, params: ConvLstmCellParams):
    """
    One ConvLSTM step with the LSTM gate algebra and convolutional gate maps.
    Unbatched calls take a (r, r) or (C, r, r) frame and (F, r - 2, r - 2)
    states; batched calls add a leading batch axis everywhere.

    :raises ShapeError: if frame and state shapes do not match ``params``.
    """
    x, ndim = _as_batch(frame_t)
    m_prev = np.asarray(m_prev, dtype=float)
    C_prev = np.asarray(C_prev, dtype=float)
    batched = ndim == 4
    if not batched:
        m_prev, C_prev = m_prev[None], C_prev[None]
    m, C, _ = _convlstm_forward(x, m_prev, C_prev, params)
    if batched:
        return m, C
    return m[0], C[0]


class ConvLstmCell(object):
    kind = 'convlstm'

    def __init__(self, params: ConvLstmCellParams):
        self.params = params

    @property
    def state_shape(self):
        return self.params.state_shape

    def forward(self, x, m_prev, C_prev):
        return _convlstm_forward(x.reshape((x.shape[0],) + self.params.in_shape), m_prev, C_prev, self.params)

    def backward(self, dm, dC, cache):
        return _convlstm_backward(dm, dC, cache, self.params)

    def parameters(self):
        return [self.params.kernels, self.params.bias]

    def set_parameters(self, arrays):
        self.params = ConvLstmCellParams(arrays[0].copy(), arrays[1].copy(), self.params.in_shape)

    def to_dict(self):
        return {'kind': self.kind, 'in_shape': list(self.params.in_shape),
                'arrays': [encode_array(a) for a in self.parameters()]}

    @classmethod
    def from_dict(cls, d):
        return cls(ConvLstmCellParams(decode_array(d['arrays'][0]), decode_array(d['arrays'][1]), d['in_shape']))


CELL_TYPES[ConvLstmCell.kind] = ConvLstmCell


def build_convlstm_stack(r, filters, n_layers, seed=0, tau=0.5, lam=1.0) -> RecurrentStack:
    """
    :raises ConfigurationError: if ``n_layers`` valid convolutions do not fit in r.
    """
    if r - 2 * n_layers < 1:
        raise ConfigurationError('{} stacked 3x3 layers do not fit a {}x{} neighbourhood'.format(n_layers, r, r))
    rng = np.random.default_rng(seed)
    cells = []
    in_shape = (1, r, r)
    for _ in range(n_layers):
        cell = ConvLstmCell(ConvLstmCellParams.init(in_shape, filters, rng))
        cells.append(cell)
        in_shape = cell.state_shape
    width = int(np.prod(cells[-1].state_shape))
    return RecurrentStack(cells, init_weights((1, width), rng), np.zeros(1), tau, lam)


def frame_windows(frames, j):
    """
    Windows of ``j`` consecutive frames, shaped (n, j, 1, r, r), and the
    centre value of the frame following each window.

    :raises DomainError: with fewer than j + 1 frames.
    """
    frames = np.asarray(frames, dtype=float)
    if frames.shape[0] <= j:
        raise DomainError('{} frames are too few for windows of length {}'.format(frames.shape[0], j))
    c = frames.shape[1] // 2
    n = frames.shape[0] - j
    X = np.stack([frames[i:i + j] for i in range(n)])[:, :, None]
    return X, frames[j:, c, c].copy()


class QConvLstmModel(RecurrentQuantileModel):
    KIND = 'qconvlstm'

    def forecast(self, neigh: NeighborhoodSeries, u: int, future_frames=None) -> Dict[float, np.ndarray]:
        """
        Recursive multi-step forecast for the centre cell. The frame appended
        after each step is the next entry of ``future_frames`` when one is
        given (e.g. re-gridded from the interpolator) and the last frame
        otherwise, with its centre replaced by the median forecast.

        :raises DomainError: if u < 1 or fewer than ``window`` frames are given.
        """
        if int(u) < 1:
            raise DomainError('forecast horizon must be >= 1, got {}'.format(u))
        if len(neigh) < self.window:
            raise DomainError('need at least {} frames to forecast, got {}'.format(self.window, len(neigh)))
        r = neigh.side
        c = r // 2
        frames = list(self._standardize(neigh.frames[-self.window:]))
        future = None if future_frames is None else self._standardize(future_frames)
        out = {tau: np.empty(int(u)) for tau in self.taus}
        for h in range(int(u)):
            X = np.asarray(frames[-self.window:])[None, :, None]
            step = self.predict_windows(X)
            for tau, value in step.items():
                out[tau][h] = value[0]
            nxt = (future[h] if future is not None and h < len(future) else frames[-1]).copy()
            nxt[c, c] = step[quantile.MEDIAN][0]
            frames.append(nxt)
        return {tau: self._destandardize(v) for tau, v in out.items()}


def fit_qconvlstm(neigh: NeighborhoodSeries, taus=(0.5,), config: ForecastConfig = ForecastConfig(),
                  train: TrainConfig = TrainConfig(), lam: Optional[float] = None) -> QConvLstmModel:
    """
    Train a QConvLSTM on one neighbourhood series with the same sequential
    quantile protocol as the QLSTM.

    :raises DomainError: with too few frames or non-finite values.
    """
    if not np.all(np.isfinite(neigh.frames)):
        raise DomainError('neighbourhood frames contain non-finite values')
    quantile.fit_order(taus)
    mean, std = standardization(neigh.frames)
    X, y = frame_windows((neigh.frames - mean) / std, config.window)
    center = neigh.center_series()
    lam = float(lam) if lam is not None else quantile.default_lambda(center)
    logger.info('fitting QConvLSTM on %d windows (j=%d, r=%d, P=%d, filters=%d)', y.size, config.window,
                neigh.side, config.n_layers, config.filters)

    def build(seed, tau, lam_std):
        return build_convlstm_stack(neigh.side, config.filters, config.n_layers, seed, tau, lam_std)

    networks, final_risk = fit_stacks(X, y, taus, build, config, train, lam / std, 'qconvlstm')
    return QConvLstmModel(networks, config, lam, mean, std, train, final_risk,
                          meta={'center': neigh.center.tolist(), 'spacing': neigh.spacing})


def forecast_conv(model: QConvLstmModel, neigh: NeighborhoodSeries, u: int, future_frames=None):
    return model.forecast(neigh, u, future_frames)
