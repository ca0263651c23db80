"""
Ground-truth space-time Gaussian fields.

Fields are drawn exactly (Cholesky of the full covariance matrix) from the
nonseparable Matérn covariance

    C(h, v) = sigma2 / (a_t |v|^(2 alpha) + 1)
              * M_nu( (|h| / a_s) / (a_t |v|^(2 alpha) + 1)^(beta / 2) )

with an optional nonstationary temporal mean and independent nugget noise.
Exact sampling is O((NK)^3), so the number of points is capped.
"""

import logging
from typing import Optional, Tuple

import attr
import numpy as np
import pandas as pd
from attr import attrs, attrib, validators
from scipy.linalg import LinAlgError, cholesky
from scipy.spatial.distance import cdist
from scipy.special import gamma, kv

from .dataset import SpaceTimeDataset, from_grid
from .exceptions import CapExceededError, DomainError, NumericalError
from .telemetry import get_telemetry

logger = logging.getLogger(__name__)

DEFAULT_CAP = 5000
JITTER_START = 1e-10
JITTER_STOP = 1e-6
#: Number of final time stamps held out by the forecasting scenario.
SCENARIO_3_TIMES = 10
TIME_LAYOUTS = ('unit', 'index')


def matern_correlation(d, nu):
    """
    Matérn correlation in the sqrt(2 nu) d parametrisation, M_nu(0) = 1.

    Closed forms are used for nu in {0.5, 1.5, 2.5}; other values go through
    the modified Bessel function of the second kind.
    """
    if not nu > 0:
        raise DomainError('Matérn smoothness nu must be positive, got {!r}'.format(nu))
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr < 0) or np.any(np.isnan(d_arr)):
        raise DomainError('Matérn distance must be non-negative')
    if nu == 0.5:
        out = np.exp(-d_arr)
    elif nu == 1.5:
        x = np.sqrt(3.0) * d_arr
        out = (1.0 + x) * np.exp(-x)
    elif nu == 2.5:
        x = np.sqrt(5.0) * d_arr
        out = (1.0 + x + x * x / 3.0) * np.exp(-x)
    else:
        x = np.sqrt(2.0 * nu) * d_arr
        with np.errstate(invalid='ignore', over='ignore'):
            out = (2.0 ** (1.0 - nu) / gamma(nu)) * np.power(x, nu) * kv(nu, x)
        out = np.where(x == 0, 1.0, np.nan_to_num(out, nan=0.0, posinf=0.0))
    if out.ndim == 0:
        return float(out)
    return out


def _positive(instance, attribute, value):
    if not value > 0:
        raise ValueError('{} must be > 0, got {!r}'.format(attribute.name, value))


def _unit_interval(instance, attribute, value):
    if not 0.0 < value <= 1.0:
        raise ValueError('{} must lie in (0, 1], got {!r}'.format(attribute.name, value))


def _nonnegative(instance, attribute, value):
    if value < 0:
        raise ValueError('{} must be >= 0, got {!r}'.format(attribute.name, value))


def _count(instance, attribute, value):
    if int(value) < 1:
        raise ValueError('{} must be a positive integer, got {!r}'.format(attribute.name, value))


@attrs(frozen=True)
class SimulationSpec(object):
    """
    Parameters of a simulated space-time field.
    """
    #: Marginal variance.
    sigma2 = attrib(type=float, default=1.0, converter=float, validator=_positive)
    #: Matérn smoothness.
    nu = attrib(type=float, default=1.5, converter=float, validator=_positive)
    #: Temporal smoothness, in (0, 1].
    alpha = attrib(type=float, default=0.5, converter=float, validator=_unit_interval)
    #: Spatial range (in the units of the station coordinates).
    a_s = attrib(type=float, default=0.25, converter=float, validator=_positive)
    #: Temporal scaling (in the units of the time stamps).
    a_t = attrib(type=float, default=5.0, converter=float, validator=_positive)
    #: Space-time interaction, in (0, 1].
    beta = attrib(type=float, default=0.5, converter=float, validator=_unit_interval)
    nugget_var = attrib(type=float, default=0.05, converter=float, validator=_nonnegative)
    nonstationary_mean = attrib(type=bool, default=False, converter=bool)
    n_locations = attrib(type=int, default=100, converter=int, validator=_count)
    n_times = attrib(type=int, default=50, converter=int, validator=_count)
    seed = attrib(type=int, default=0, converter=int)
    #: Upper bound on n_locations * n_times for exact sampling.
    cap = attrib(type=int, default=DEFAULT_CAP, converter=int, validator=_count)
    #: 'unit' spreads the time stamps over [0, 1]; 'index' uses stamps on 1..time_span.
    time_layout = attrib(type=str, default='unit', validator=validators.in_(TIME_LAYOUTS))
    time_span = attrib(type=float, default=500.0, converter=float, validator=_positive)

    @property
    def n_points(self):
        return self.n_locations * self.n_times

    def to_dict(self):
        return attr.asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {a.name for a in attr.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError('unknown simulation fields: {}'.format(', '.join(sorted(unknown))))
        return cls(**d)


def st_covariance(h, v, spec: SimulationSpec):
    """ Nonseparable space-time covariance at spatial distance ``h`` and time lag ``v``. """
    h = np.asarray(h, dtype=float)
    v = np.asarray(v, dtype=float)
    temporal = spec.a_t * np.power(np.abs(v), 2.0 * spec.alpha) + 1.0
    scaled = (np.abs(h) / spec.a_s) / np.power(temporal, spec.beta / 2.0)
    out = spec.sigma2 / temporal * matern_correlation(scaled, spec.nu)
    if np.ndim(out) == 0:
        return float(out)
    return out


def nonstationary_mean(t):
    u = np.asarray(t, dtype=float) / 1000.0 - 0.9
    out = 2.0 * np.sin(15.0 * u) * np.cos(-37.0 * u ** 4) + u / 2.0
    if np.ndim(out) == 0:
        return float(out)
    return out


def default_locations(spec: SimulationSpec):
    """ Uniform random stations on [0, 1]^2, the same ones :py:func:`simulate` draws for ``spec``. """
    loc_seq = np.random.SeedSequence(spec.seed).spawn(3)[0]
    return np.random.default_rng(loc_seq).uniform(0.0, 1.0, size=(spec.n_locations, 2))


def default_times(spec: SimulationSpec):
    if spec.time_layout == 'unit':
        return np.linspace(0.0, 1.0, spec.n_times)
    # n_times equispaced stamps ending at time_span, e.g. 10, 20, .., 500
    return np.arange(1, spec.n_times + 1) * (spec.time_span / spec.n_times)


def covariance_matrix(s, t, spec: SimulationSpec):
    """ Covariance between the space-time points (s_i, t_i); ``s`` is (n, 2). """
    s = np.asarray(s, dtype=float).reshape(-1, 2)
    t = np.asarray(t, dtype=float).ravel()
    h = cdist(s, s)
    v = t[:, None] - t[None, :]
    C = st_covariance(h, v, spec)
    return 0.5 * (C + C.T)


def cholesky_with_jitter(C, sigma2):
    """
    Lower Cholesky factor of ``C + j I`` for the smallest j on the schedule
    1e-10 sigma2, 1e-9 sigma2, .., 1e-6 sigma2 that succeeds.

    :raises NumericalError: if even the largest jitter fails.
    """
    eye = np.eye(C.shape[0])
    rel = JITTER_START
    while rel <= JITTER_STOP * (1 + 1e-9):
        try:
            L = cholesky(C + rel * sigma2 * eye, lower=True)
        except LinAlgError:
            logger.debug('cholesky failed with jitter %.0e sigma2', rel)
            rel *= 10.0
            continue
        get_telemetry().record_jitter(rel)
        return L, rel
    condition = np.linalg.cond(C)
    raise NumericalError('covariance matrix is not positive definite after jitter {:.0e} sigma2 '
                         '(condition number {:.3e})'.format(JITTER_STOP, condition))


def _check_cap(n_points, cap):
    if n_points > cap:
        raise CapExceededError('{} space-time points exceed the exact-sampling cap of {}; '
                               'reduce the layout or raise the cap'.format(n_points, cap))


def simulate(spec: SimulationSpec, locations=None, times=None) -> SpaceTimeDataset:
    """
    Draw one field on every (location, time) pair; rows are station-major.

    :raises CapExceededError: if the number of points exceeds ``spec.cap``.
    :raises NumericalError: if the covariance cannot be factorised.
    """
    loc_seq, field_seq, noise_seq = np.random.SeedSequence(spec.seed).spawn(3)
    if locations is None:
        locations = np.random.default_rng(loc_seq).uniform(0.0, 1.0, size=(spec.n_locations, 2))
    if times is None:
        times = default_times(spec)
    locations = np.asarray(locations, dtype=float).reshape(-1, 2)
    times = np.asarray(times, dtype=float).ravel()
    n, k = locations.shape[0], times.shape[0]
    _check_cap(n * k, spec.cap)

    s = np.repeat(locations, k, axis=0)
    t = np.tile(times, n)
    L, jitter = cholesky_with_jitter(covariance_matrix(s, t, spec), spec.sigma2)
    field = L @ np.random.default_rng(field_seq).standard_normal(n * k)
    if spec.nonstationary_mean:
        field = field + nonstationary_mean(t)
    if spec.nugget_var > 0:
        field = field + np.random.default_rng(noise_seq).normal(0.0, np.sqrt(spec.nugget_var), n * k)
    logger.info('simulated %d stations x %d times (jitter %.0e sigma2, seed %d)', n, k, jitter, spec.seed)
    return from_grid(locations, times, field.reshape(n, k))


def sample_replicates(spec: SimulationSpec, s, t, n_replicates: int, seed: Optional[int] = None):
    """
    Zero-mean latent draws at arbitrary points, one row per replicate,
    sharing a single factorisation.
    """
    s = np.asarray(s, dtype=float).reshape(-1, 2)
    _check_cap(s.shape[0], spec.cap)
    L, _ = cholesky_with_jitter(covariance_matrix(s, t, spec), spec.sigma2)
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    return rng.standard_normal((n_replicates, s.shape[0])) @ L.T


def make_scenario(dataset: SpaceTimeDataset, scenario: int, holdout_fraction: float = 0.1,
                  seed: int = 0) -> Tuple[SpaceTimeDataset, SpaceTimeDataset]:
    """
    Split into (train, test) for one of the missing-data scenarios:

    1. whole stations held out at every time,
    2. random (station, time) cells held out,
    3. every station held out on the last 10 time stamps.

    :raises DomainError: for an unknown scenario, a fraction outside (0, 1)
        or a split that leaves the training set empty.
    """
    rng = np.random.default_rng(seed)
    n = len(dataset)
    if scenario in (1, 2) and not 0.0 < holdout_fraction < 1.0:
        raise DomainError('holdout_fraction must lie in (0, 1), got {!r}'.format(holdout_fraction))
    if scenario == 1:
        coords, inverse = dataset.stations()
        n_hold = max(1, int(round(holdout_fraction * coords.shape[0])))
        held = rng.choice(coords.shape[0], size=n_hold, replace=False)
        test = np.isin(inverse, held)
    elif scenario == 2:
        n_hold = max(1, int(round(holdout_fraction * n)))
        test = np.zeros(n, dtype=bool)
        test[rng.choice(n, size=n_hold, replace=False)] = True
    elif scenario == 3:
        last = dataset.times()[-SCENARIO_3_TIMES:]
        test = np.isin(dataset.t, last)
    else:
        raise DomainError('scenario must be 1, 2 or 3, got {!r}'.format(scenario))
    if test.all():
        raise DomainError('scenario {} leaves no training data'.format(scenario))
    logger.info('scenario %d: %d training and %d test points', scenario, int((~test).sum()), int(test.sum()))
    return dataset.subset(np.flatnonzero(~test)), dataset.subset(np.flatnonzero(test))


def forecast_truth(train: SpaceTimeDataset, test: SpaceTimeDataset) -> pd.DataFrame:
    """
    Held-out values keyed like forecasts: ``location_id`` is the station's
    position in ``train.stations()`` and ``horizon`` counts the test time
    stamps after the last training time, starting at 1.

    :raises DomainError: if a test time does not come after every training time.
    """
    if len(test) and len(train) and np.min(test.t) <= np.max(train.t):
        raise DomainError('forecast truth needs every test time after the last training time')
    coords, _ = train.stations()
    ids = {tuple(c): i for i, c in enumerate(coords)}
    horizons = np.searchsorted(test.times(), test.t) + 1
    rows = []
    for (s1, s2), horizon, z in zip(test.s, horizons, test.z):
        location_id = ids.get((s1, s2))
        if location_id is None:
            logger.warning('station (%g, %g) has no training series; left out of the forecast truth', s1, s2)
            continue
        rows.append((location_id, int(horizon), float(z)))
    frame = pd.DataFrame(sorted(rows), columns=['location_id', 'horizon', 'z'])
    frame['location_id'] = frame['location_id'].astype(str)
    return frame
