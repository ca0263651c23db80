"""
Check loss, the non-crossing output transform and quantile-level bookkeeping.

Residuals are always taken as ``target - prediction``; with that orientation
minimising the mean check loss at level tau yields the tau-quantile.
"""

import logging
from typing import Iterable, List

import numpy as np
from attr import attrs, attrib
from scipy.special import expit

from .exceptions import DomainError, MissingQuantileError

logger = logging.getLogger(__name__)

MEDIAN = 0.5
#: Raw outputs are clipped to this magnitude before the sigmoid so the transform never saturates to the median.
PSI_CLIP = 30.0


def _check_tau(tau):
    if not 0.0 < tau < 1.0:
        raise DomainError('quantile level must lie in (0, 1), got {!r}'.format(tau))


def check_loss(v, tau):
    """ rho_tau(v) = v (tau - 1{v < 0}); scalar or elementwise on arrays. """
    _check_tau(tau)
    v_arr = np.asarray(v, dtype=float)
    out = v_arr * (tau - (v_arr < 0))
    if out.ndim == 0:
        return float(out)
    return out


def check_loss_gradient(v, tau):
    """ d rho_tau / dv, using tau - 0.5 at v == 0. """
    v = np.asarray(v, dtype=float)
    return np.where(v > 0, tau, np.where(v < 0, tau - 1.0, tau - 0.5))


def psi(tau, x, f_constant, lam):
    """
    Non-crossing output transform.

    tau = 0.5 returns ``x``; above the median the output lies in
    (f, f + lam (tau - 0.5)), below it in (f - lam (0.5 - tau), f).
    """
    _check_tau(tau)
    if tau == MEDIAN:
        return x
    if not lam > 0:
        raise DomainError('lambda must be positive, got {!r}'.format(lam))
    sig = expit(np.clip(np.asarray(x, dtype=float), -PSI_CLIP, PSI_CLIP))
    out = np.asarray(f_constant, dtype=float) + lam * (tau - MEDIAN) * sig
    if np.ndim(out) == 0:
        return float(out)
    return out


def psi_derivative(tau, x, lam):
    """ d psi / dx (independent of f_constant). """
    if tau == MEDIAN:
        return np.ones_like(np.asarray(x, dtype=float))
    x = np.asarray(x, dtype=float)
    clipped = np.clip(x, -PSI_CLIP, PSI_CLIP)
    sig = expit(clipped)
    grad = lam * (tau - MEDIAN) * sig * (1.0 - sig)
    return np.where(np.abs(x) > PSI_CLIP, 0.0, grad)


def empirical_risk(predictions, targets, tau):
    """ Mean check loss over all points (normalised by the total point count). """
    predictions = np.asarray(predictions, dtype=float).ravel()
    targets = np.asarray(targets, dtype=float).ravel()
    if predictions.size == 0:
        raise DomainError('empirical_risk() of an empty sample')
    if predictions.shape != targets.shape:
        raise DomainError('got {} predictions for {} targets'.format(predictions.size, targets.size))
    return float(np.mean(check_loss(targets - predictions, tau)))


def check_loss_and_gradient(predictions, targets, tau):
    """ Mean check loss and its gradient with respect to the predictions. """
    residual = np.asarray(targets, dtype=float) - np.asarray(predictions, dtype=float)
    n = residual.size
    value = float(np.mean(check_loss(residual, tau)))
    grad = -check_loss_gradient(residual, tau) / n
    return value, grad


def default_lambda(z):
    """ sigma_range / 2 with sigma_range = max(z) - min(z); falls back to 1 for constant data. """
    z = np.asarray(z, dtype=float)
    value = (float(np.max(z)) - float(np.min(z))) / 2.0
    if value <= 0:
        logger.warning('training targets are constant; using lambda = 1')
        return 1.0
    return value


@attrs(frozen=True)
class QuantileSpec(object):
    """
    A quantile level with its transform parameters. ``median_ref`` names the
    fitted median level that supplies the per-point f_constant; every level
    other than the median needs one.
    """
    tau = attrib(type=float)
    lam = attrib(type=float)
    median_ref = attrib(default=None)

    @tau.validator
    def _tau_in_range(self, attribute, value):
        _check_tau(value)

    @lam.validator
    def _lam_positive(self, attribute, value):
        if not value > 0:
            raise ValueError('lam must be positive, got {!r}'.format(value))

    @median_ref.validator
    def _anchored(self, attribute, value):
        if self.tau != MEDIAN and value is None:
            raise MissingQuantileError('level {} needs a fitted median to anchor on'.format(self.tau))

    @property
    def is_median(self):
        return self.tau == MEDIAN


def quantile_specs(taus: Iterable[float], lam: float) -> List[QuantileSpec]:
    """ One spec per level in fit order, every non-median level anchored on the median. """
    return [QuantileSpec(tau, lam, None if tau == MEDIAN else MEDIAN) for tau in fit_order(taus)]


def parse_taus(text) -> List[float]:
    """ Parse a comma list such as ``0.05,0.5,0.95``. """
    if isinstance(text, str):
        items = [p.strip() for p in text.split(',') if p.strip()]
    else:
        items = list(text)
    taus = sorted(set(float(x) for x in items))
    for tau in taus:
        _check_tau(tau)
    return taus


def fit_order(taus: Iterable[float]) -> List[float]:
    """ Median first, then the remaining levels in ascending order. """
    taus = sorted(set(float(t) for t in taus))
    if MEDIAN not in taus:
        raise MissingQuantileError('quantile level 0.5 is required (other levels are anchored on the median)')
    return [MEDIAN] + [t for t in taus if t != MEDIAN]


def interval_levels(alpha):
    if not 0.0 < alpha < 1.0:
        raise DomainError('alpha must lie in (0, 1), got {!r}'.format(alpha))
    return round(alpha / 2.0, 12), round(1.0 - alpha / 2.0, 12)
