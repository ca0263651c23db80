"""
Space-time basis-function embedding.

Spatial coordinates are embedded with multi-resolution Wendland kernels placed
on square anchor grids, time with Gaussian kernels on equispaced anchors. The
blocks are stacked (not tensor-multiplied), so an embedding has
``sum(G_r) + sum(H_r)`` entries plus any covariates appended at the end.

Anchors always live on the rescaled unit domain; :py:class:`Rescaler` maps raw
coordinates (e.g. lon/lat, calendar time) onto it and is stored with a model.
"""

import logging
import math
import warnings
from typing import List, Optional, Sequence, Tuple

import numpy as np
from attr import attrs, attrib, validators

from .exceptions import ConfigurationError, DomainError, ExtrapolationWarning, ShapeError

logger = logging.getLogger(__name__)

#: Queries within this fraction of the range outside the training domain are silently accepted.
EXTRAPOLATION_TOLERANCE = 0.05
#: Bandwidth multiplier relative to the anchor spacing.
THETA_FACTOR = 2.5


def wendland(d):
    """
    Compactly supported Wendland kernel ``(1-d)^6/3 (35d^2 + 18d + 3)`` on [0, 1], zero beyond.

    Accepts a scalar or an array of nonnegative distances.

    :raises DomainError: if any distance is negative.
    """
    arr = np.asarray(d, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError('wendland() needs nonnegative distances')
    inside = np.clip(1.0 - arr, 0.0, None)
    out = inside ** 6 / 3.0 * (35.0 * arr ** 2 + 18.0 * arr + 3.0)
    if out.ndim == 0:
        return float(out)
    return out


def _positive(instance, attribute, value):
    if not value > 0:
        raise ValueError('{} must be strictly positive, got {!r}'.format(attribute.name, value))


@attrs(frozen=True)
class SpatialResolution(object):
    """
    One resolution of spatial anchors: a side x side grid with a shared bandwidth.
    """
    #: Number of anchors along each axis (g); the resolution holds g*g anchors.
    side = attrib(type=int)
    #: Wendland bandwidth, 2.5 times the anchor spacing.
    theta = attrib(type=float, validator=_positive)
    #: Anchor coordinates, shape (side*side, 2).
    anchors = attrib(eq=False, repr=False)

    @property
    def count(self):
        return self.side * self.side


@attrs(frozen=True)
class SpatialAnchorSet(object):
    #: ((s1_min, s1_max), (s2_min, s2_max)) covered by the grids.
    bounds = attrib()
    #: Resolutions ordered coarse to fine.
    resolutions = attrib(converter=tuple)

    @property
    def size(self):
        return sum(r.count for r in self.resolutions)


def _check_temporal(instance, attribute, value):
    anchors = np.asarray(value, dtype=float)
    if anchors.ndim != 1 or anchors.size < 2:
        raise ValueError('temporal anchors need at least two points')
    if np.any(np.diff(anchors) <= 0):
        raise ValueError('temporal anchors must be strictly increasing')


@attrs(frozen=True)
class TemporalAnchorSet(object):
    """
    Equispaced temporal anchors v_1..v_H with Gaussian scale kappa = |v_1 - v_2|.
    """
    anchors = attrib(eq=False, validator=_check_temporal, converter=lambda a: np.asarray(a, dtype=float))
    kappa = attrib(type=float, validator=_positive)

    @property
    def size(self):
        return int(self.anchors.size)


def make_spatial_anchors(domain_bounds, counts):
    """
    Build one square anchor grid per requested count (e.g. ``[25, 81, 144]``).

    Grids are corner-inclusive and each bandwidth is 2.5 times the spacing
    between adjacent anchors (the larger axis spacing for non-square bounds).

    :raises ConfigurationError: for non-square counts, counts below 4 or degenerate bounds.
    """
    (x0, x1), (y0, y1) = domain_bounds
    if not (x1 > x0 and y1 > y0):
        raise ConfigurationError('spatial domain bounds are degenerate: {!r}'.format(domain_bounds))
    resolutions = []
    for count in sorted(int(c) for c in counts):
        side = math.isqrt(count) if count > 0 else 0
        if count < 4 or side * side != count:
            raise ConfigurationError('spatial anchor count must be a perfect square >= 4, got {}'.format(count))
        xs = np.linspace(x0, x1, side)
        ys = np.linspace(y0, y1, side)
        xx, yy = np.meshgrid(xs, ys, indexing='ij')
        anchors = np.stack([xx.ravel(), yy.ravel()], axis=1)
        spacing = max((x1 - x0) / (side - 1), (y1 - y0) / (side - 1))
        resolutions.append(SpatialResolution(side=side, theta=THETA_FACTOR * spacing, anchors=anchors))
    return SpatialAnchorSet(bounds=((float(x0), float(x1)), (float(y0), float(y1))), resolutions=resolutions)


def make_temporal_anchors(time_bounds, counts) -> List[TemporalAnchorSet]:
    t0, t1 = time_bounds
    if not t1 > t0:
        raise ConfigurationError('time bounds are degenerate: {!r}'.format(time_bounds))
    out = []
    for count in sorted(int(c) for c in counts):
        if count < 2:
            raise ConfigurationError('temporal anchor count must be >= 2, got {}'.format(count))
        anchors = np.linspace(t0, t1, count)
        out.append(TemporalAnchorSet(anchors=anchors, kappa=float(abs(anchors[1] - anchors[0]))))
    return out


def spatial_basis(s, spatial: SpatialAnchorSet):
    """ Wendland features for points ``s`` of shape (n, 2); returns (n, G). """
    s = np.atleast_2d(np.asarray(s, dtype=float))
    if s.shape[-1] != 2:
        raise ShapeError('spatial coordinates must have 2 columns, got shape {}'.format(s.shape))
    blocks = []
    for res in spatial.resolutions:
        diff = s[:, None, :] - res.anchors[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        blocks.append(wendland(dist / res.theta))
    return np.concatenate(blocks, axis=1)


def temporal_basis(t, anchors: TemporalAnchorSet):
    """
    Gaussian kernels ``exp(-0.5 (t - v_j)^2 / kappa^2)``.

    A scalar ``t`` gives a vector of length H; an array of n times gives (n, H).
    """
    t_arr = np.asarray(t, dtype=float)
    z = (t_arr[..., None] - anchors.anchors) / anchors.kappa
    return np.exp(-0.5 * z * z)


def _as_temporal_list(temporal):
    if isinstance(temporal, TemporalAnchorSet):
        return [temporal]
    return list(temporal)


def embed_many(s, t, spatial: SpatialAnchorSet, temporal, covariates=None, n_covariates: Optional[int] = None):
    """
    Stacked embedding for n points: spatial blocks coarse to fine, temporal
    blocks coarse to fine, then covariates. Returns an (n, Q) array.
    """
    s = np.atleast_2d(np.asarray(s, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if s.shape[0] != t.shape[0]:
        raise ShapeError('got {} spatial points but {} times'.format(s.shape[0], t.shape[0]))
    blocks = [spatial_basis(s, spatial)]
    for res in _as_temporal_list(temporal):
        blocks.append(temporal_basis(t, res))
    if covariates is not None:
        cov = np.asarray(covariates, dtype=float)
        if cov.ndim == 1:
            cov = cov.reshape(s.shape[0], -1)
        if cov.shape[0] != s.shape[0]:
            raise ShapeError('covariates have {} rows for {} points'.format(cov.shape[0], s.shape[0]))
        if n_covariates is not None and cov.shape[1] != n_covariates:
            raise ShapeError('expected {} covariates, got {}'.format(n_covariates, cov.shape[1]))
        blocks.append(cov)
    elif n_covariates:
        raise ShapeError('expected {} covariates, got none'.format(n_covariates))
    return np.concatenate(blocks, axis=1)


def embed(s, t, spatial: SpatialAnchorSet, temporal, covariates=None, n_covariates: Optional[int] = None):
    """ Embedding vector phi(s, t) (with covariates appended) for a single point. """
    s = np.asarray(s, dtype=float).reshape(1, 2)
    cov = None if covariates is None else np.asarray(covariates, dtype=float).reshape(1, -1)
    return embed_many(s, [float(t)], spatial, temporal, cov, n_covariates)[0]


@attrs(frozen=True)
class Rescaler(object):
    """
    Affine map of raw coordinates and times onto [0, 1].
    A zero-width range maps every value to 0 (span treated as 1).
    """
    s1_min = attrib(type=float, default=0.0)
    s1_max = attrib(type=float, default=1.0)
    s2_min = attrib(type=float, default=0.0)
    s2_max = attrib(type=float, default=1.0)
    t_min = attrib(type=float, default=0.0)
    t_max = attrib(type=float, default=1.0)

    @classmethod
    def from_points(cls, s, t):
        s = np.atleast_2d(np.asarray(s, dtype=float))
        t = np.asarray(t, dtype=float)
        return cls(float(s[:, 0].min()), float(s[:, 0].max()),
                   float(s[:, 1].min()), float(s[:, 1].max()),
                   float(t.min()), float(t.max()))

    @staticmethod
    def _span(lo, hi):
        return hi - lo if hi > lo else 1.0

    def space(self, s):
        s = np.atleast_2d(np.asarray(s, dtype=float))
        out = np.empty_like(s)
        out[:, 0] = (s[:, 0] - self.s1_min) / self._span(self.s1_min, self.s1_max)
        out[:, 1] = (s[:, 1] - self.s2_min) / self._span(self.s2_min, self.s2_max)
        return out

    def time(self, t):
        return (np.asarray(t, dtype=float) - self.t_min) / self._span(self.t_min, self.t_max)

    @property
    def degenerate_space(self):
        return not (self.s1_max > self.s1_min or self.s2_max > self.s2_min)

    @property
    def degenerate_time(self):
        return not self.t_max > self.t_min

    def to_dict(self):
        return {'s1_min': self.s1_min, 's1_max': self.s1_max,
                's2_min': self.s2_min, 's2_max': self.s2_max,
                't_min': self.t_min, 't_max': self.t_max}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: float(v) for k, v in d.items()})


UNIT_BOUNDS = ((0.0, 1.0), (0.0, 1.0))


@attrs(frozen=True)
class EmbeddingConfig(object):
    """
    Everything needed to turn raw (s, t, covariates) into network inputs.
    """
    spatial = attrib(type=SpatialAnchorSet)
    temporal = attrib(converter=tuple)
    rescaler = attrib(type=Rescaler, factory=Rescaler)
    n_covariates = attrib(type=int, default=0, validator=validators.instance_of(int))

    @classmethod
    def build(cls, spatial_counts: Sequence[int], temporal_counts: Sequence[int],
              rescaler: Optional[Rescaler] = None, n_covariates: int = 0):
        rescaler = rescaler or Rescaler()
        spatial_counts = list(spatial_counts)
        temporal_counts = list(temporal_counts)
        if rescaler.degenerate_space and len(spatial_counts) > 1:
            logger.warning('all observations share one station; collapsing spatial anchors to G=%d', spatial_counts[0])
            spatial_counts = spatial_counts[:1]
        if rescaler.degenerate_time and len(temporal_counts) > 1:
            logger.warning('all observations share one time stamp; collapsing temporal anchors to H=%d', temporal_counts[0])
            temporal_counts = temporal_counts[:1]
        return cls(spatial=make_spatial_anchors(UNIT_BOUNDS, spatial_counts),
                   temporal=make_temporal_anchors((0.0, 1.0), temporal_counts),
                   rescaler=rescaler, n_covariates=int(n_covariates))

    @property
    def size(self):
        return self.spatial.size + sum(r.size for r in self.temporal) + self.n_covariates

    def _check_domain(self, s_unit, t_unit):
        lo, hi = -EXTRAPOLATION_TOLERANCE, 1.0 + EXTRAPOLATION_TOLERANCE
        outside = (np.any(s_unit < lo) or np.any(s_unit > hi)
                   or np.any(t_unit < lo) or np.any(t_unit > hi))
        if outside:
            msg = 'query points lie more than {:.0%} outside the training domain'.format(EXTRAPOLATION_TOLERANCE)
            logger.warning(msg)
            warnings.warn(msg, ExtrapolationWarning, stacklevel=3)

    def features(self, s, t, covariates=None):
        """ Rescale raw coordinates and return the (n, Q) embedding matrix. """
        s_unit = self.rescaler.space(s)
        t_unit = np.atleast_1d(self.rescaler.time(t))
        self._check_domain(s_unit, t_unit)
        return embed_many(s_unit, t_unit, self.spatial, self.temporal,
                          covariates if self.n_covariates else None, self.n_covariates)

    def to_dict(self):
        return {
            'spatial': [{'g': r.side, 'theta': r.theta} for r in self.spatial.resolutions],
            'temporal': [{'h': r.size, 'kappa': r.kappa} for r in self.temporal],
            'rescale': self.rescaler.to_dict(),
            'n_covariates': self.n_covariates,
        }

    @classmethod
    def from_dict(cls, d):
        resolutions = []
        for item in d['spatial']:
            side = int(item['g'])
            xs = np.linspace(0.0, 1.0, side)
            xx, yy = np.meshgrid(xs, xs, indexing='ij')
            resolutions.append(SpatialResolution(side=side, theta=float(item['theta']),
                                                 anchors=np.stack([xx.ravel(), yy.ravel()], axis=1)))
        temporal = [TemporalAnchorSet(anchors=np.linspace(0.0, 1.0, int(item['h'])), kappa=float(item['kappa']))
                    for item in d['temporal']]
        return cls(spatial=SpatialAnchorSet(bounds=UNIT_BOUNDS, resolutions=resolutions),
                   temporal=temporal,
                   rescaler=Rescaler.from_dict(d.get('rescale', {})),
                   n_covariates=int(d.get('n_covariates', 0)))
