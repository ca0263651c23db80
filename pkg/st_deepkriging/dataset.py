"""
Irregular station observations and the canonical CSV schema.

The schema is ``s1,s2,t,z[,x1..xp]`` (UTF-8, ``.`` decimal, any row order).
Duplicate (s1, s2, t) rows are rejected at ingest with their row numbers.
External exports (e.g. PM2.5 station dumps) map onto the schema with a
column mapping such as ``{'s1': 'lon', 's2': 'lat', 't': 'time', 'z': 'pm25'}``.
"""

import logging
import os
from typing import Dict, Optional

import numpy as np
import pandas as pd
from attr import attrs, attrib

from .exceptions import DomainError, ModelNotFoundError, SchemaError, ShapeError

logger = logging.getLogger(__name__)

COORD_COLUMNS = ('s1', 's2', 't')
REQUIRED_COLUMNS = COORD_COLUMNS + ('z',)


def parse_column_map(text) -> Dict[str, str]:
    """ ``'s1=lon,s2=lat'`` -> ``{'s1': 'lon', 's2': 'lat'}``. """
    if not text:
        return {}
    if isinstance(text, dict):
        return dict(text)
    mapping = {}
    for item in text.split(','):
        if '=' not in item:
            raise SchemaError('column mapping entries look like canonical=source, got {!r}'.format(item))
        key, value = item.split('=', 1)
        mapping[key.strip()] = value.strip()
    return mapping


def _numeric_column(frame, column):
    values = pd.to_numeric(frame[column], errors='coerce')
    bad = np.flatnonzero(values.isna().to_numpy())
    if bad.size:
        rows = [int(i) + 2 for i in bad]  # header is line 1
        raise SchemaError('column {!r} has missing or non-numeric values on rows {}'.format(column, rows[:20]),
                          column=column, rows=rows)
    return values.to_numpy(dtype=float)


def _check_duplicates(s, t, offset=2):
    keys = pd.DataFrame({'s1': s[:, 0], 's2': s[:, 1], 't': t})
    dup = keys.duplicated(keep=False).to_numpy()
    if dup.any():
        rows = [int(i) + offset for i in np.flatnonzero(dup)]
        raise SchemaError('duplicate (s1, s2, t) rows: {}'.format(rows[:20]), column='s1,s2,t', rows=rows)


@attrs
class SpaceTimeDataset(object):
    """
    Observations ``z`` at station coordinates ``s`` (n, 2) and times ``t`` (n,),
    with optional covariates (n, p).
    """
    s = attrib(converter=lambda a: np.atleast_2d(np.asarray(a, dtype=float)), eq=False)
    t = attrib(converter=lambda a: np.asarray(a, dtype=float).ravel(), eq=False)
    z = attrib(converter=lambda a: np.asarray(a, dtype=float).ravel(), eq=False)
    covariates = attrib(default=None, eq=False)
    covariate_names = attrib(default=None)

    def __attrs_post_init__(self):
        n = self.z.shape[0]
        if self.s.shape != (n, 2) or self.t.shape != (n,):
            raise ShapeError('dataset arrays disagree: s {}, t {}, z {}'.format(self.s.shape, self.t.shape, self.z.shape))
        if self.covariates is not None:
            self.covariates = np.asarray(self.covariates, dtype=float).reshape(n, -1)
            if self.covariate_names is None:
                self.covariate_names = ['x{}'.format(i + 1) for i in range(self.covariates.shape[1])]

    def __len__(self):
        return int(self.z.shape[0])

    @property
    def n_covariates(self):
        return 0 if self.covariates is None else int(self.covariates.shape[1])

    def subset(self, index) -> 'SpaceTimeDataset':
        index = np.asarray(index)
        return SpaceTimeDataset(self.s[index], self.t[index], self.z[index],
                                None if self.covariates is None else self.covariates[index],
                                self.covariate_names)

    def stations(self):
        """ Unique station coordinates (m, 2) and, per row, the index of its station. """
        coords, inverse = np.unique(self.s, axis=0, return_inverse=True)
        return coords, np.asarray(inverse).ravel()

    def times(self):
        return np.unique(self.t)

    def station_series(self, station):
        """ Time-ordered (t, z) of all rows at one station coordinate. """
        mask = np.all(self.s == np.asarray(station, dtype=float), axis=1)
        order = np.argsort(self.t[mask], kind='stable')
        return self.t[mask][order], self.z[mask][order]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({'s1': self.s[:, 0], 's2': self.s[:, 1], 't': self.t, 'z': self.z})
        if self.covariates is not None:
            for i, name in enumerate(self.covariate_names):
                frame[name] = self.covariates[:, i]
        return frame

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, column_map: Optional[Dict[str, str]] = None,
                   require_z: bool = True) -> 'SpaceTimeDataset':
        column_map = parse_column_map(column_map)
        frame = frame.rename(columns={v: k for k, v in column_map.items()})
        required = REQUIRED_COLUMNS if require_z else COORD_COLUMNS
        for column in required:
            if column not in frame.columns:
                raise SchemaError('missing required column {!r}'.format(column), column=column)
        s = np.stack([_numeric_column(frame, 's1'), _numeric_column(frame, 's2')], axis=1)
        t = _numeric_column(frame, 't')
        z = _numeric_column(frame, 'z') if require_z else np.full(t.shape, np.nan)
        _check_duplicates(s, t)
        extra = [c for c in frame.columns if c not in REQUIRED_COLUMNS and c not in column_map.values()]
        covariates = None
        if extra:
            covariates = np.stack([_numeric_column(frame, c) for c in extra], axis=1)
        return cls(s, t, z, covariates, extra or None)

    @classmethod
    def read_csv(cls, path, column_map=None, require_z=True) -> 'SpaceTimeDataset':
        if not os.path.exists(path):
            raise ModelNotFoundError('data file not found: {}'.format(path))
        frame = pd.read_csv(path, encoding='utf-8')
        dataset = cls.from_frame(frame, column_map, require_z)
        logger.info('read %d observations (%d covariates) from %s', len(dataset), dataset.n_covariates, path)
        return dataset

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False, encoding='utf-8')
        logger.info('wrote %d observations to %s', len(self), path)


def from_grid(locations, times, values, covariates=None) -> SpaceTimeDataset:
    """
    Dataset from a full (station x time) layout; ``values`` has shape
    (n_locations, n_times) and rows are emitted station-major.
    """
    locations = np.asarray(locations, dtype=float).reshape(-1, 2)
    times = np.asarray(times, dtype=float).ravel()
    values = np.asarray(values, dtype=float).reshape(locations.shape[0], times.shape[0])
    s = np.repeat(locations, times.shape[0], axis=0)
    t = np.tile(times, locations.shape[0])
    return SpaceTimeDataset(s, t, values.ravel(), covariates)


def median_station_spacing(dataset: SpaceTimeDataset) -> float:
    """ Median nearest-neighbour distance between distinct stations. """
    from scipy.spatial import cKDTree

    coords, _ = dataset.stations()
    if coords.shape[0] < 2:
        raise DomainError('need at least two stations to measure their spacing')
    dist, _ = cKDTree(coords).query(coords, k=2)
    return float(np.median(dist[:, 1]))
