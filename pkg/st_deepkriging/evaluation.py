"""
Prediction metrics, k-fold cross-validation and the inverse-distance baseline.
"""

import json
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from attr import attrs, attrib
from scipy.spatial import cKDTree
from sklearn.model_selection import KFold

from . import quantile
from .basis import Rescaler
from .dataset import SpaceTimeDataset
from .exceptions import DomainError, IntervalCrossingError, SchemaError

logger = logging.getLogger(__name__)

INTERP_KEYS = ('s1', 's2', 't')
FORECAST_KEYS = ('location_id', 'horizon')


def _paired(a, b, what):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0:
        raise DomainError('{} of an empty sample'.format(what))
    if a.shape != b.shape:
        raise DomainError('{}: got {} and {} values'.format(what, a.size, b.size))
    return a, b


def _standard_error(values):
    if values.size < 2:
        return 0.0
    return float(np.std(values, ddof=1) / math.sqrt(values.size))


def mspe(pred, truth):
    """
    Mean squared prediction error and its standard error (sample standard
    deviation of the squared errors over sqrt(n)).
    """
    pred, truth = _paired(pred, truth, 'mspe()')
    sq = (pred - truth) ** 2
    return float(np.mean(sq)), _standard_error(sq)


def mpiw_cov(lo, hi, truth, alpha=0.1):
    """
    Mean prediction interval width and the fraction of ``truth`` inside
    [lo, hi].

    :raises IntervalCrossingError: if any lo > hi.
    """
    quantile.interval_levels(alpha)
    lo, hi = _paired(lo, hi, 'mpiw_cov()')
    _, truth = _paired(lo, truth, 'mpiw_cov()')
    crossing = np.flatnonzero(lo > hi)
    if crossing.size:
        raise IntervalCrossingError('{} intervals have lo > hi (first at index {})'.format(crossing.size, crossing[0]))
    inside = (lo <= truth) & (truth <= hi)
    return float(np.mean(hi - lo)), float(np.mean(inside))


def _fraction(instance, attribute, value):
    if value is not None and not (math.isnan(value) or 0.0 <= value <= 1.0):
        raise ValueError('{} must lie in [0, 1], got {!r}'.format(attribute.name, value))


def _nonnegative(instance, attribute, value):
    if value is not None and value < 0:
        raise ValueError('{} must be >= 0, got {!r}'.format(attribute.name, value))


@attrs
class FoldReport(object):
    fold = attrib(type=int)
    mspe = attrib(type=float, validator=_nonnegative)
    n_test = attrib(type=int)
    mpiw = attrib(type=float, default=float('nan'))
    coverage = attrib(type=float, default=float('nan'), validator=_fraction)

    def to_dict(self):
        return {'fold': self.fold, 'mspe': self.mspe, 'n_test': self.n_test,
                'mpiw': _json_float(self.mpiw), 'coverage': _json_float(self.coverage)}


def _json_float(value):
    return None if value is None or math.isnan(value) else value


@attrs
class EvalReport(object):
    """
    Pooled metrics over every test point, with an optional per-fold breakdown.
    Interval metrics are NaN when no interval was evaluated.
    """
    method = attrib(type=str)
    mspe = attrib(type=float, validator=_nonnegative)
    mspe_se = attrib(type=float)
    n_test = attrib(type=int)
    alpha = attrib(type=float, default=0.1)
    mpiw = attrib(type=float, default=float('nan'), validator=_nonnegative)
    mpiw_se = attrib(type=float, default=float('nan'))
    coverage = attrib(type=float, default=float('nan'), validator=_fraction)
    folds = attrib(factory=list)
    #: Standard error of the per-fold MSPEs.
    fold_mspe_se = attrib(type=float, default=float('nan'))
    #: Folds on which this method had the strictly lower MSPE.
    wins = attrib(default=None)
    #: Folds on which both methods scored the same MSPE.
    ties = attrib(default=None)

    @classmethod
    def from_predictions(cls, pred, truth, lo=None, hi=None, alpha=0.1, method='deepkriging', folds=None):
        value, se = mspe(pred, truth)
        report = cls(method=method, mspe=value, mspe_se=se, n_test=int(np.size(pred)), alpha=alpha,
                     folds=list(folds or []))
        if lo is not None and hi is not None:
            report.mpiw, report.coverage = mpiw_cov(lo, hi, truth, alpha)
            report.mpiw_se = _standard_error(np.asarray(hi, dtype=float) - np.asarray(lo, dtype=float))
        if report.folds:
            report.fold_mspe_se = _standard_error(np.array([f.mspe for f in report.folds]))
        return report

    def to_dict(self):
        return {'method': self.method, 'mspe': self.mspe, 'mspe_se': self.mspe_se,
                'mpiw': _json_float(self.mpiw), 'mpiw_se': _json_float(self.mpiw_se),
                'coverage': _json_float(self.coverage), 'alpha': self.alpha, 'n_test': self.n_test,
                'fold_mspe_se': _json_float(self.fold_mspe_se), 'wins': self.wins, 'ties': self.ties,
                'folds': [f.to_dict() for f in self.folds]}

    def to_row(self):
        row = self.to_dict()
        del row['folds']
        return row

    def to_json(self, path):
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2)

    def to_csv(self, path):
        pd.DataFrame([self.to_row()]).to_csv(path, index=False, encoding='utf-8')


def kfold(dataset: SpaceTimeDataset, k: int = 10, seed: int = 0):
    """
    Shuffled k-fold partition of the rows into (train, test) pairs.

    :raises DomainError: if k < 2 or k exceeds the number of rows.
    """
    n = len(dataset)
    if k < 2:
        raise DomainError('k-fold needs k >= 2, got {}'.format(k))
    if k > n:
        raise DomainError('cannot split {} rows into {} folds'.format(n, k))
    splitter = KFold(n_splits=k, shuffle=True, random_state=seed)
    return [(dataset.subset(train_idx), dataset.subset(test_idx))
            for train_idx, test_idx in splitter.split(np.arange(n))]


class IdwBaseline(object):
    """
    Inverse-distance weighting over the k nearest space-time neighbours.
    Coordinates and times are rescaled to [0, 1] from the training data and
    time distances are multiplied by ``time_scale``. A query that coincides
    with a training point returns that point's value.
    """

    def __init__(self, train: SpaceTimeDataset, power: float = 2.0, k_neighbors: int = 8, time_scale: float = 1.0):
        if len(train) == 0:
            raise DomainError('IDW needs a non-empty training set')
        self.rescaler = Rescaler.from_points(train.s, train.t)
        self.time_scale = float(time_scale)
        self.power = float(power)
        self.k_neighbors = int(min(k_neighbors, len(train)))
        self.z = train.z.copy()
        self.tree = cKDTree(self._coords(train.s, train.t))

    def _coords(self, s, t):
        s_unit = self.rescaler.space(s)
        t_unit = np.atleast_1d(self.rescaler.time(t)) * self.time_scale
        return np.column_stack([s_unit, t_unit])

    def predict_many(self, s, t):
        dist, idx = self.tree.query(self._coords(s, t), k=self.k_neighbors)
        dist = dist.reshape(len(dist), -1)
        idx = idx.reshape(len(idx), -1)
        out = np.empty(dist.shape[0])
        for j, (d, i) in enumerate(zip(dist, idx)):
            if d[0] < 1e-12:
                out[j] = self.z[i[0]]
            else:
                w = 1.0 / d ** self.power
                out[j] = np.dot(w, self.z[i]) / np.sum(w)
        return out


def idw_predict(train: SpaceTimeDataset, s, t, power: float = 2.0, k_neighbors: int = 8,
                time_scale: float = 1.0) -> float:
    baseline = IdwBaseline(train, power, k_neighbors, time_scale)
    return float(baseline.predict_many(np.asarray(s, dtype=float).reshape(1, 2), [t])[0])


def count_wins(folds: Sequence[FoldReport], baseline: Sequence[FoldReport]) -> Tuple[int, int, int]:
    """ (folds won, folds lost, folds tied) comparing per-fold MSPE; equal MSPEs count as ties. """
    wins = sum(1 for a, b in zip(folds, baseline) if a.mspe < b.mspe)
    losses = sum(1 for a, b in zip(folds, baseline) if a.mspe > b.mspe)
    return wins, losses, min(len(folds), len(baseline)) - wins - losses


def cross_validate(dataset: SpaceTimeDataset, k: int = 10, seed: int = 0, alpha: float = 0.1,
                   fit_kwargs: Optional[dict] = None, idw_kwargs: Optional[dict] = None) -> Dict[str, EvalReport]:
    """
    k-fold comparison of the DeepKriging interpolator against the IDW baseline.

    Returns one :py:class:`EvalReport` per method; the interpolator report
    carries the per-fold breakdown and the number of folds it won.
    """
    from . import interpolator

    fit_kwargs = dict(fit_kwargs or {})
    lo_tau, hi_tau = quantile.interval_levels(alpha)
    fit_kwargs.setdefault('taus', (lo_tau, quantile.MEDIAN, hi_tau))
    with_interval = interpolator.tau_key(lo_tau) in {interpolator.tau_key(t) for t in fit_kwargs['taus']} \
        and interpolator.tau_key(hi_tau) in {interpolator.tau_key(t) for t in fit_kwargs['taus']}

    collected = {'truth': [], 'dk': [], 'lo': [], 'hi': [], 'idw': []}
    dk_folds: List[FoldReport] = []
    idw_folds: List[FoldReport] = []
    for fold, (train, test) in enumerate(kfold(dataset, k, seed)):
        model = interpolator.fit(train, **fit_kwargs)
        pred = model.predict_many(test.s, test.t, quantile.MEDIAN, test.covariates)
        base = IdwBaseline(train, **(idw_kwargs or {})).predict_many(test.s, test.t)
        fold_dk = FoldReport(fold=fold, mspe=mspe(pred, test.z)[0], n_test=len(test))
        if with_interval:
            lo, hi = model.interval_many(test.s, test.t, alpha, test.covariates)
            fold_dk.mpiw, fold_dk.coverage = mpiw_cov(lo, hi, test.z, alpha)
            collected['lo'].append(lo)
            collected['hi'].append(hi)
        fold_idw = FoldReport(fold=fold, mspe=mspe(base, test.z)[0], n_test=len(test))
        logger.info('fold %d: deepkriging MSPE %.4g, IDW MSPE %.4g', fold, fold_dk.mspe, fold_idw.mspe)
        dk_folds.append(fold_dk)
        idw_folds.append(fold_idw)
        collected['truth'].append(test.z)
        collected['dk'].append(pred)
        collected['idw'].append(base)

    truth = np.concatenate(collected['truth'])
    lo = np.concatenate(collected['lo']) if with_interval else None
    hi = np.concatenate(collected['hi']) if with_interval else None
    dk = EvalReport.from_predictions(np.concatenate(collected['dk']), truth, lo, hi, alpha, 'deepkriging', dk_folds)
    wins, losses, ties = count_wins(dk_folds, idw_folds)
    dk.wins, dk.ties = wins, ties
    idw = EvalReport.from_predictions(np.concatenate(collected['idw']), truth, alpha=alpha, method='idw',
                                      folds=idw_folds)
    idw.wins, idw.ties = losses, ties
    logger.info('cross-validation: deepkriging won %d of %d folds, IDW %d, %d tied', wins, k, losses, ties)
    return {'deepkriging': dk, 'idw': idw}


def report_from_frames(predictions: pd.DataFrame, truth: pd.DataFrame, alpha: float = 0.1,
                       method: str = 'deepkriging') -> EvalReport:
    """
    Score a long-format prediction table (keys, ``tau``, ``value``) against a
    truth table (keys, ``z``). Keys are ``s1,s2,t`` for interpolation and
    ``location_id,horizon`` for forecasts.

    :raises SchemaError: on missing columns or prediction keys absent from the truth.
    """
    keys = list(INTERP_KEYS) if set(INTERP_KEYS) <= set(predictions.columns) else list(FORECAST_KEYS)
    for column in keys + ['tau', 'value']:
        if column not in predictions.columns:
            raise SchemaError('predictions lack column {!r}'.format(column), column=column)
    for column in keys + ['z']:
        if column not in truth.columns:
            raise SchemaError('truth lacks column {!r}'.format(column), column=column)
    predictions = predictions.assign(tau=predictions['tau'].astype(float).round(6))
    wide = predictions.pivot_table(index=keys, columns='tau', values='value', aggfunc='first')
    if quantile.MEDIAN not in wide.columns:
        raise SchemaError('predictions hold no median (tau=0.5) rows', column='tau')
    merged = wide.join(truth.set_index(keys)['z'], how='left')
    missing = merged['z'].isna().to_numpy()
    if missing.any():
        first = list(merged.index[missing][:5])
        raise SchemaError('{} prediction keys have no truth value, e.g. {}'.format(int(missing.sum()), first),
                          column='z')
    lo_tau, hi_tau = (round(x, 6) for x in quantile.interval_levels(alpha))
    lo = merged[lo_tau].to_numpy() if lo_tau in merged.columns else None
    hi = merged[hi_tau].to_numpy() if hi_tau in merged.columns else None
    if lo is None or hi is None:
        lo = hi = None
    return EvalReport.from_predictions(merged[quantile.MEDIAN].to_numpy(), merged['z'].to_numpy(), lo, hi,
                                       alpha, method)
