import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from st_deepkriging import quantile
from st_deepkriging.exceptions import DomainError, MissingQuantileError
from st_deepkriging.quantile import QuantileSpec, check_loss, check_loss_and_gradient, check_loss_gradient, \
    default_lambda, empirical_risk, fit_order, interval_levels, parse_taus, psi, psi_derivative, quantile_specs


def test_check_loss_values():
    for tau in (0.05, 0.5, 0.9):
        assert check_loss(0.0, tau) == 0.0
    assert check_loss(2.0, 0.5) == pytest.approx(1.0)
    assert check_loss(-1.0, 0.9) == pytest.approx(0.1)
    assert_allclose(check_loss(np.array([-3.0, 3.0]), 0.5), [1.5, 1.5])


def test_check_loss_is_nonnegative(rng):
    v = rng.normal(size=1000)
    for tau in (0.01, 0.3, 0.5, 0.99):
        assert np.all(check_loss(v, tau) > 0)


@pytest.mark.parametrize('tau', [0.0, 1.0, -0.2, 1.5])
def test_check_loss_rejects_levels_outside_unit_interval(tau):
    with pytest.raises(DomainError):
        check_loss(1.0, tau)


def test_check_loss_subgradient_at_zero():
    assert_allclose(check_loss_gradient(np.array([-1.0, 0.0, 2.0]), 0.8), [-0.2, 0.3, 0.8])


def test_minimising_mean_check_loss_gives_the_quantile(rng):
    z = rng.normal(size=2001)
    grid = np.linspace(-3, 3, 1201)
    risks = [empirical_risk(np.full(z.size, c), z, 0.9) for c in grid]
    best = grid[int(np.argmin(risks))]
    assert best == pytest.approx(np.quantile(z, 0.9), abs=0.02)


def test_psi_values():
    assert psi(0.5, 1.7, 0.0, 1.0) == 1.7
    assert psi(0.95, 0.0, 1.0, 2.0) == pytest.approx(1.45)
    assert psi(0.05, 0.0, 1.0, 2.0) == pytest.approx(0.55)
    assert psi(0.9, 500.0, 0.0, 1.0) == pytest.approx(0.4)


def test_psi_rejects_nonpositive_lambda():
    with pytest.raises(DomainError):
        psi(0.9, 0.0, 0.0, 0.0)


def test_psi_never_crosses_the_median():
    rng = np.random.default_rng(2024)
    n = 10000
    x_u = rng.uniform(-50, 50, n)
    x_l = rng.uniform(-50, 50, n)
    f = rng.uniform(-5, 5, n)
    lam = rng.uniform(0.5, 5, n)
    tau_u = rng.uniform(0.55, 0.99, n)
    tau_l = rng.uniform(0.01, 0.45, n)
    upper = np.array([psi(tu, xu, fc, lm) for tu, xu, fc, lm in zip(tau_u, x_u, f, lam)])
    lower = np.array([psi(tl, xl, fc, lm) for tl, xl, fc, lm in zip(tau_l, x_l, f, lam)])
    assert np.all(lower < f)
    assert np.all(f < upper)
    assert np.all(upper - lower <= lam * (tau_u - tau_l) + 1e-12)


def test_psi_derivative_matches_finite_differences(rng):
    x = rng.normal(size=50) * 3
    for tau in (0.1, 0.5, 0.9):
        numeric = (psi(tau, x + 1e-6, 0.3, 2.0) - psi(tau, x - 1e-6, 0.3, 2.0)) / 2e-6
        assert_allclose(psi_derivative(tau, x, 2.0), numeric, rtol=1e-5, atol=1e-9)


def test_empirical_risk():
    assert empirical_risk([1.0, 2.0], [1.0, 2.0], 0.3) == 0.0
    assert empirical_risk([0.0, 0.0], [1.0, -1.0], 0.5) == pytest.approx(0.5)
    assert empirical_risk([0.0, 0.0], [1.0, -1.0], 0.9) == pytest.approx(0.5)


def test_empirical_risk_rejects_empty_input():
    with pytest.raises(DomainError):
        empirical_risk([], [], 0.5)


def test_loss_and_gradient_are_consistent(rng):
    pred = rng.normal(size=20)
    target = rng.normal(size=20)
    value, grad = check_loss_and_gradient(pred, target, 0.7)
    assert value == pytest.approx(empirical_risk(pred, target, 0.7))
    step = 1e-7
    bumped = pred.copy()
    bumped[3] += step
    assert (empirical_risk(bumped, target, 0.7) - value) / step == pytest.approx(grad[3], rel=1e-4)


def test_default_lambda():
    assert default_lambda([1.0, 5.0, 3.0]) == 2.0
    assert default_lambda([2.0, 2.0]) == 1.0


def test_quantile_spec_validation():
    spec = QuantileSpec(tau=0.95, lam=1.5, median_ref=0.5)
    assert not spec.is_median
    assert QuantileSpec(tau=0.5, lam=1.0).is_median
    with pytest.raises(DomainError):
        QuantileSpec(tau=1.2, lam=1.0)
    with pytest.raises(ValueError):
        QuantileSpec(tau=0.9, lam=0.0, median_ref=0.5)
    # only the median may stand on its own
    with pytest.raises(MissingQuantileError):
        QuantileSpec(tau=0.05, lam=1.0)


def test_quantile_specs_anchor_every_level_on_the_median():
    specs = quantile_specs([0.95, 0.5, 0.05], 2.0)
    assert [s.tau for s in specs] == [0.5, 0.05, 0.95]
    assert specs[0].median_ref is None
    assert all(s.median_ref == 0.5 and s.lam == 2.0 for s in specs[1:])
    with pytest.raises(MissingQuantileError):
        quantile_specs([0.05, 0.95], 2.0)


def test_parse_taus():
    assert parse_taus('0.95, 0.05,0.5') == [0.05, 0.5, 0.95]
    assert parse_taus([0.5, 0.5]) == [0.5]
    with pytest.raises(DomainError):
        parse_taus('0.5,1.0')


def test_fit_order_puts_the_median_first():
    assert fit_order([0.95, 0.05, 0.5]) == [0.5, 0.05, 0.95]
    with pytest.raises(MissingQuantileError):
        fit_order([0.05, 0.95])


def test_interval_levels():
    assert interval_levels(0.1) == (0.05, 0.95)
    lo, hi = interval_levels(0.2)
    assert math.isclose(lo, 0.1) and math.isclose(hi, 0.9)
    with pytest.raises(DomainError):
        interval_levels(1.0)
    assert quantile.MEDIAN == 0.5
