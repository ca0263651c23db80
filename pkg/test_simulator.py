import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from st_deepkriging.exceptions import CapExceededError, DomainError, NumericalError
from st_deepkriging.simulator import SCENARIO_3_TIMES, SimulationSpec, cholesky_with_jitter, covariance_matrix, \
    default_locations, default_times, forecast_truth, make_scenario, matern_correlation, nonstationary_mean, \
    sample_replicates, simulate, st_covariance


def test_matern_closed_forms():
    assert matern_correlation(1.0, 0.5) == pytest.approx(0.36788, abs=1e-5)
    assert matern_correlation(1.0, 1.5) == pytest.approx(0.48335, abs=1e-5)
    assert matern_correlation(0.0, 2.5) == 1.0


def test_matern_bessel_branch_agrees_with_closed_forms():
    d = np.linspace(0.0, 3.0, 31)
    for nu in (0.5, 1.5, 2.5):
        assert_allclose(matern_correlation(d, nu + 1e-9), matern_correlation(d, nu), rtol=1e-6, atol=1e-9)


def test_matern_general_smoothness():
    d = np.linspace(0.0, 5.0, 51)
    values = matern_correlation(d, 1.0)
    assert values[0] == 1.0
    assert np.all(values > 0) and np.all(values <= 1.0)
    assert np.all(np.diff(values) < 0)


def test_matern_rejects_bad_arguments():
    with pytest.raises(DomainError):
        matern_correlation(1.0, 0.0)
    with pytest.raises(DomainError):
        matern_correlation(-1.0, 1.5)


def test_st_covariance():
    spec = SimulationSpec(sigma2=2.0, nu=0.5, alpha=0.5, a_s=1.0, a_t=1.0, beta=1.0)
    assert st_covariance(0.0, 0.0, spec) == pytest.approx(2.0)
    assert st_covariance(0.3, 2.0, spec) == pytest.approx(st_covariance(0.3, -2.0, spec))
    # |v| = 1: temporal factor 2, spatial distance scaled by 1 / sqrt(2)
    assert st_covariance(1.0, 1.0, spec) == pytest.approx(2.0 / 2.0 * math.exp(-1.0 / math.sqrt(2.0)))


def test_covariance_decays_in_space_and_time():
    spec = SimulationSpec()
    assert st_covariance(0.1, 0.0, spec) > st_covariance(0.5, 0.0, spec)
    assert st_covariance(0.0, 0.1, spec) > st_covariance(0.0, 0.5, spec)


def test_nonstationary_mean():
    assert nonstationary_mean(900.0) == pytest.approx(0.0, abs=1e-12)
    assert np.shape(nonstationary_mean(np.arange(1, 501))) == (500,)


def test_covariance_matrix_is_symmetric_positive_definite(rng):
    s = rng.uniform(size=(30, 2))
    t = rng.uniform(size=30)
    C = covariance_matrix(s, t, SimulationSpec())
    assert_allclose(C, C.T)
    assert_allclose(np.diag(C), 1.0)
    assert np.linalg.eigvalsh(C).min() > -1e-8


def test_jitter_rescues_a_singular_matrix():
    L, rel = cholesky_with_jitter(np.ones((4, 4)), 1.0)
    assert rel <= 1e-6
    assert_allclose(L @ L.T, np.ones((4, 4)) + rel * np.eye(4), atol=1e-12)


def test_jitter_gives_up_on_an_indefinite_matrix():
    with pytest.raises(NumericalError):
        cholesky_with_jitter(-np.eye(3), 1.0)


def test_simulate_layout_and_determinism():
    spec = SimulationSpec(n_locations=10, n_times=6, seed=5)
    first = simulate(spec)
    assert len(first) == 60
    assert_allclose(first.t[:6], default_times(spec))
    assert_allclose(first.s[::6], default_locations(spec))
    assert first.z.tobytes() == simulate(spec).z.tobytes()
    assert not np.array_equal(first.z, simulate(SimulationSpec(n_locations=10, n_times=6, seed=6)).z)


def test_simulate_at_given_points():
    spec = SimulationSpec(seed=1)
    locations = np.array([[0.1, 0.1], [0.9, 0.2]])
    dataset = simulate(spec, locations, [0.0, 0.5, 1.0])
    assert len(dataset) == 6
    assert_allclose(dataset.s[3], [0.9, 0.2])


def test_simulation_cap():
    with pytest.raises(CapExceededError):
        simulate(SimulationSpec(n_locations=100, n_times=60))
    with pytest.raises(CapExceededError):
        simulate(SimulationSpec(n_locations=10, n_times=10, cap=50))


def test_index_time_layout():
    spec = SimulationSpec(n_times=50, time_layout='index', time_span=500.0)
    times = default_times(spec)
    assert times[0] == pytest.approx(10.0) and times[-1] == pytest.approx(500.0)


def test_spec_validation_and_round_trip():
    spec = SimulationSpec(nu=2.5, a_t=0.02, nonstationary_mean=True)
    assert SimulationSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ValueError):
        SimulationSpec(alpha=0.0)
    with pytest.raises(ValueError):
        SimulationSpec(beta=1.5)
    with pytest.raises(ValueError):
        SimulationSpec.from_dict({'sigma': 1.0})


def test_replicates_match_the_covariance():
    spec = SimulationSpec(sigma2=1.0, nu=0.5, a_s=0.3, a_t=2.0, nugget_var=0.0, seed=3)
    rng = np.random.default_rng(0)
    s = rng.uniform(size=(20, 2))
    t = rng.uniform(size=20)
    draws = sample_replicates(spec, s, t, 4000)
    empirical = draws.T @ draws / draws.shape[0]
    expected = covariance_matrix(s, t, spec)
    for i, j in [(0, 1), (2, 7), (5, 5), (10, 19), (3, 12)]:
        assert abs(empirical[i, j] - expected[i, j]) < 0.1 * spec.sigma2


def test_scenario_1_holds_out_whole_stations():
    data = simulate(SimulationSpec(n_locations=20, n_times=5, seed=2))
    train, test = make_scenario(data, 1, holdout_fraction=0.1, seed=0)
    assert len(train) + len(test) == len(data)
    held = {tuple(p) for p in test.stations()[0]}
    kept = {tuple(p) for p in train.stations()[0]}
    assert len(held) == 2 and not held & kept
    assert len(test) == 2 * 5


def test_scenario_2_holds_out_random_cells():
    data = simulate(SimulationSpec(n_locations=20, n_times=5, seed=2))
    train, test = make_scenario(data, 2, holdout_fraction=0.1, seed=0)
    assert len(test) == 10 and len(train) == 90


def test_scenario_3_holds_out_the_last_times():
    data = simulate(SimulationSpec(n_locations=5, n_times=15, seed=2))
    train, test = make_scenario(data, 3)
    assert_allclose(np.unique(test.t), data.times()[-SCENARIO_3_TIMES:])
    assert train.t.max() < test.t.min()


def test_bad_scenarios():
    data = simulate(SimulationSpec(n_locations=5, n_times=4, seed=2))
    with pytest.raises(DomainError):
        make_scenario(data, 4)
    with pytest.raises(DomainError):
        make_scenario(data, 2, holdout_fraction=1.0)
    with pytest.raises(DomainError):
        make_scenario(data, 3)


def test_forecast_truth_is_keyed_like_forecasts():
    data = simulate(SimulationSpec(n_locations=5, n_times=15, seed=2))
    train, test = make_scenario(data, 3)
    truth = forecast_truth(train, test)
    assert list(truth.columns) == ['location_id', 'horizon', 'z']
    assert len(truth) == 5 * SCENARIO_3_TIMES
    assert sorted(set(truth['location_id'])) == ['0', '1', '2', '3', '4']
    assert sorted(set(truth['horizon'])) == list(range(1, SCENARIO_3_TIMES + 1))
    # location ids follow the station order of the training set
    coords, _ = train.stations()
    station = coords[3]
    times, z = test.station_series(station)
    first = truth[(truth['location_id'] == '3') & (truth['horizon'] == 1)]['z'].iloc[0]
    assert first == z[0] and times[0] == test.times()[0]


def test_forecast_truth_needs_future_times():
    data = simulate(SimulationSpec(n_locations=5, n_times=15, seed=2))
    train, test = make_scenario(data, 2, holdout_fraction=0.2, seed=0)
    with pytest.raises(DomainError):
        forecast_truth(train, test)
