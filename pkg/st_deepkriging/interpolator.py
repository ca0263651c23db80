"""
Space-time DeepKriging interpolation.

One feed-forward network per quantile level maps the basis embedding of
(s, t) to a prediction. The median network is fitted first and frozen; every
other level uses a ``psi`` output layer anchored on the median prediction at
the same point, so quantile curves cannot cross.

Targets are standardised for optimisation. The psi transform is affine
equivariant, so training with ``lambda / std`` on the standardised scale and
de-standardising gives exactly psi with ``lambda`` on the original scale.
"""

import logging
import os
from functools import partial
from typing import Dict, Optional, Sequence

import attr
import numpy as np
import pandas as pd

from . import quantile
from .basis import EmbeddingConfig, Rescaler
from .checkpoint import FORMAT_VERSION, read_checkpoint, read_json, write_checkpoint, write_json
from .dataset import SpaceTimeDataset
from .exceptions import ConfigurationError, DomainError, MissingQuantileError, ModelNotFoundError
from .nn_core import DenseNetwork, TrainConfig, forward, squared_loss, train_dense

logger = logging.getLogger(__name__)

DEFAULT_SPATIAL_COUNTS = (25, 81, 144)
DEFAULT_TEMPORAL_COUNTS = (10, 15, 45)
#: 13 layers: eight of width 100, four of width 50, one output.
DEFAULT_ARCH = (100,) * 8 + (50,) * 4 + (1,)
POINT_LOSSES = ('check', 'mse')


def tau_key(tau) -> float:
    return round(float(tau), 6)


class DeepKrigingModel(object):
    """
    Trained interpolator: embedding configuration, one network per quantile
    level, lambda and the target standardisation.
    """

    def __init__(self, embedding: EmbeddingConfig, networks: Dict[float, DenseNetwork], lam: float,
                 z_mean: float, z_std: float, sigma_range: float, seed: int = 0,
                 point_loss: str = 'check', arch: Sequence[int] = DEFAULT_ARCH,
                 train_config: Optional[TrainConfig] = None, final_risk: Optional[Dict[float, float]] = None):
        networks = {tau_key(k): v for k, v in networks.items()}
        if networks and quantile.MEDIAN not in networks:
            raise ConfigurationError('a median network is required whenever quantile networks are present')
        for tau, net in networks.items():
            if net.input_dim != embedding.size:
                raise ConfigurationError('network for tau={} expects {} inputs, embedding has {}'.format(
                    tau, net.input_dim, embedding.size))
        self.embedding = embedding
        self.networks = networks
        self.lam = float(lam)
        self.z_mean = float(z_mean)
        self.z_std = float(z_std)
        self.sigma_range = float(sigma_range)
        self.seed = int(seed)
        self.point_loss = point_loss
        self.arch = tuple(int(a) for a in arch)
        self.train_config = train_config or TrainConfig()
        self.final_risk = dict(final_risk or {})

    @property
    def taus(self):
        return sorted(self.networks)

    def _network(self, tau):
        key = tau_key(tau)
        if key not in self.networks:
            raise MissingQuantileError('no network trained for tau={} (trained: {})'.format(tau, self.taus))
        return self.networks[key]

    def _median_std(self, X):
        out, _ = forward(self.networks[quantile.MEDIAN], X)
        return out.ravel()

    def predict_many(self, s, t, tau=0.5, covariates=None):
        """ Predictions at n points; ``s`` is (n, 2) and ``t`` has n entries. """
        net = self._network(tau)
        X = self.embedding.features(s, t, covariates)
        f_constant = self._median_std(X)
        if tau_key(tau) == quantile.MEDIAN:
            out = f_constant
        else:
            out, _ = forward(net, X, f_constant)
            out = out.ravel()
        return out * self.z_std + self.z_mean

    def predict(self, s, t, tau=0.5, covariates=None) -> float:
        cov = None if covariates is None else np.asarray(covariates, dtype=float).reshape(1, -1)
        return float(self.predict_many(np.asarray(s, dtype=float).reshape(1, 2), [t], tau, cov)[0])

    def interval_many(self, s, t, alpha, covariates=None):
        lo_tau, hi_tau = quantile.interval_levels(alpha)
        return (self.predict_many(s, t, lo_tau, covariates), self.predict_many(s, t, hi_tau, covariates))

    def interval(self, s, t, alpha, covariates=None):
        lo_tau, hi_tau = quantile.interval_levels(alpha)
        return (self.predict(s, t, lo_tau, covariates), self.predict(s, t, hi_tau, covariates))

    def interpolate_series(self, s0, times, covariates=None):
        times = np.asarray(times, dtype=float).ravel()
        if np.any(np.diff(times) < 0):
            raise DomainError('interpolate_series() needs times sorted ascending')
        s = np.repeat(np.asarray(s0, dtype=float).reshape(1, 2), times.size, axis=0)
        return self.predict_many(s, times, quantile.MEDIAN, covariates)

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        write_json(os.path.join(directory, 'embedding.json'), self.embedding.to_dict())
        files = {}
        for tau, net in self.networks.items():
            name = 'net_tau_{:.6f}.json'.format(tau)
            write_checkpoint(os.path.join(directory, name), 'dense', net.to_dict())
            files[repr(tau)] = name
        write_json(os.path.join(directory, 'manifest.json'), {
            'format_version': FORMAT_VERSION,
            'kind': 'interpolator',
            'taus': self.taus,
            'networks': files,
            'lambda': self.lam,
            'sigma_range': self.sigma_range,
            'z_mean': self.z_mean,
            'z_std': self.z_std,
            'rescale': self.embedding.rescaler.to_dict(),
            'seed': self.seed,
            'point_loss': self.point_loss,
            'arch': list(self.arch),
            'train': self.train_config.to_dict(),
            'final_risk': {repr(k): v for k, v in self.final_risk.items()},
        })
        logger.info('saved interpolator with taus %s to %s', self.taus, directory)

    @classmethod
    def load(cls, directory) -> 'DeepKrigingModel':
        if not os.path.isdir(directory):
            raise ModelNotFoundError('model directory not found: {}'.format(directory))
        manifest = read_json(os.path.join(directory, 'manifest.json'))
        if manifest.get('kind') != 'interpolator':
            raise ConfigurationError('{} does not hold an interpolator model'.format(directory))
        embedding = EmbeddingConfig.from_dict(read_json(os.path.join(directory, 'embedding.json')))
        networks = {}
        for tau, name in manifest['networks'].items():
            networks[float(tau)] = DenseNetwork.from_dict(read_checkpoint(os.path.join(directory, name), 'dense'))
        return cls(embedding, networks, manifest['lambda'], manifest['z_mean'], manifest['z_std'],
                   manifest['sigma_range'], manifest.get('seed', 0), manifest.get('point_loss', 'check'),
                   manifest.get('arch', DEFAULT_ARCH), TrainConfig.from_dict(manifest['train']),
                   {float(k): v for k, v in manifest.get('final_risk', {}).items()})


def fit(dataset: SpaceTimeDataset, arch: Sequence[int] = DEFAULT_ARCH, train: TrainConfig = TrainConfig(),
        taus: Sequence[float] = (0.5,), spatial_counts: Sequence[int] = DEFAULT_SPATIAL_COUNTS,
        temporal_counts: Sequence[int] = DEFAULT_TEMPORAL_COUNTS, lam: Optional[float] = None,
        point_loss: str = 'check') -> DeepKrigingModel:
    """
    Train the median network, freeze it, then each other level with a psi output layer.

    :raises DomainError: for an empty dataset.
    :raises MissingQuantileError: if 0.5 is not among ``taus``.
    :raises TrainingDivergedError: on a non-finite loss.
    """
    if len(dataset) == 0:
        raise DomainError('cannot fit an interpolator on an empty dataset')
    if point_loss not in POINT_LOSSES:
        raise ConfigurationError('point_loss must be one of {}, got {!r}'.format(POINT_LOSSES, point_loss))
    arch = tuple(int(a) for a in arch)
    if not arch or arch[-1] != 1:
        raise ConfigurationError('the last layer must have exactly one unit, got arch {}'.format(arch))
    rescaler = Rescaler.from_points(dataset.s, dataset.t)
    embedding = EmbeddingConfig.build(spatial_counts, temporal_counts, rescaler, dataset.n_covariates)
    X = embedding.features(dataset.s, dataset.t, dataset.covariates)
    z = dataset.z
    z_mean = float(np.mean(z))
    z_std = float(np.std(z)) or 1.0
    y = (z - z_mean) / z_std
    sigma_range = float(np.max(z) - np.min(z))
    lam = float(lam) if lam is not None else quantile.default_lambda(z)
    specs = quantile.quantile_specs(taus, lam / z_std)
    logger.info('fitting interpolator on %d points, Q=%d, taus=%s, lambda=%.4g', len(dataset), embedding.size,
                [spec.tau for spec in specs], lam)

    networks, final_risk = {}, {}
    f_constants = {}
    for i, spec in enumerate(specs):
        tau = spec.tau
        config = attr.evolve(train, seed=train.seed + i)
        label = 'interpolator:tau={}'.format(tau)
        if spec.is_median:
            net = DenseNetwork.build(embedding.size, arch, seed=config.seed)
            loss_fn = squared_loss if point_loss == 'mse' else partial(_check_loss, tau=tau)
            history = train_dense(net, X, y, config, loss_fn, label=label, tau=tau)
            f_constants[tau] = forward(net, X)[0].ravel()
        else:
            net = DenseNetwork.build(embedding.size, arch, seed=config.seed, output_activation='psi',
                                     tau=tau, lam=spec.lam)
            history = train_dense(net, X, y, config, partial(_check_loss, tau=tau),
                                  f_constant=f_constants[spec.median_ref], label=label, tau=tau)
        networks[tau] = net
        final_risk[tau] = history.final_risk
    return DeepKrigingModel(embedding, networks, lam, z_mean, z_std, sigma_range, train.seed, point_loss, arch,
                            train, final_risk)


def _check_loss(predictions, targets, tau):
    return quantile.check_loss_and_gradient(predictions, targets, tau)


def predict(model: DeepKrigingModel, s, t, tau=0.5, covariates=None) -> float:
    return model.predict(s, t, tau, covariates)


def interval(model: DeepKrigingModel, s, t, alpha, covariates=None):
    """ (lo, hi) of the 100(1 - alpha)% prediction interval at one point. """
    return model.interval(s, t, alpha, covariates)


def interpolate_series(model: DeepKrigingModel, s0, times, covariates=None):
    """ Median predictions at (s0, t_k) for every k, in order. """
    return model.interpolate_series(s0, times, covariates)


def predict_grid(model: DeepKrigingModel, n: int, t: float, alpha: float = 0.1) -> pd.DataFrame:
    """
    Median and interval predictions on an n x n lattice over the training
    domain at time ``t``, for external plotting.
    """
    r = model.embedding.rescaler
    xs = np.linspace(r.s1_min, r.s1_max, n)
    ys = np.linspace(r.s2_min, r.s2_max, n)
    xx, yy = np.meshgrid(xs, ys, indexing='ij')
    s = np.stack([xx.ravel(), yy.ravel()], axis=1)
    times = np.full(s.shape[0], float(t))
    frame = pd.DataFrame({'s1': s[:, 0], 's2': s[:, 1], 't': times,
                          'median': model.predict_many(s, times, quantile.MEDIAN)})
    lo_tau, hi_tau = quantile.interval_levels(alpha)
    if tau_key(lo_tau) in model.networks and tau_key(hi_tau) in model.networks:
        frame['lo'] = model.predict_many(s, times, lo_tau)
        frame['hi'] = model.predict_many(s, times, hi_tau)
        frame['width'] = frame['hi'] - frame['lo']
    return frame
