import os

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from st_deepkriging.convforecaster import ConvLayerParams, ConvLstmCellParams, NeighborhoodSeries, QConvLstmModel, \
    build_convlstm_stack, conv_forward, convlstm_cell, fit_qconvlstm, forecast_conv, frame_windows, \
    grid_neighborhood
from st_deepkriging.exceptions import ConfigurationError, DomainError, ShapeError
from st_deepkriging.forecaster import ForecastConfig
from st_deepkriging.nn_core import TrainConfig


class LinearField(object):
    """ Stands in for a trained interpolator: value = s1 + 10 s2 + 100 t. """

    def predict_many(self, s, t, tau=0.5, covariates=None):
        s = np.asarray(s, dtype=float)
        return s[:, 0] + 10.0 * s[:, 1] + 100.0 * np.asarray(t, dtype=float)


def _brute_force(frame, kernels, bias):
    F, C = kernels.shape[:2]
    r = frame.shape[-1]
    out = np.zeros((F, r - 2, r - 2))
    for f in range(F):
        for i in range(r - 2):
            for k in range(r - 2):
                total = bias[f]
                for c in range(C):
                    for p in range(3):
                        for q in range(3):
                            total += frame[c, i + p, k + q] * kernels[f, c, p, q]
                out[f, i, k] = total
    return out


def test_valid_convolution_shrinks_by_two():
    params = ConvLayerParams(kernels=np.ones((4, 1, 3, 3)), bias=np.zeros(4))
    assert conv_forward(np.ones((4, 4)), params).shape == (4, 2, 2)


def test_identity_kernel_crops_the_border(rng):
    kernels = np.zeros((1, 1, 3, 3))
    kernels[0, 0, 1, 1] = 1.0
    frame = rng.normal(size=(5, 5))
    out = conv_forward(frame, ConvLayerParams(kernels=kernels, bias=np.zeros(1)))
    assert_allclose(out[0], frame[1:-1, 1:-1])


def test_all_ones():
    out = conv_forward(np.ones((5, 5)), ConvLayerParams(kernels=np.ones((1, 1, 3, 3)), bias=np.zeros(1)))
    assert_allclose(out, 9.0)


def test_matches_the_brute_force_loop():
    rng = np.random.default_rng(7)
    for _ in range(100):
        frame = rng.normal(size=(2, 6, 6))
        kernels = rng.normal(size=(3, 2, 3, 3))
        bias = rng.normal(size=3)
        out = conv_forward(frame, ConvLayerParams(kernels=kernels, bias=bias))
        assert np.max(np.abs(out - _brute_force(frame, kernels, bias))) < 1e-10


def test_frames_smaller_than_the_kernel():
    params = ConvLayerParams(kernels=np.ones((1, 1, 3, 3)), bias=np.zeros(1))
    with pytest.raises(ShapeError):
        conv_forward(np.ones((2, 2)), params)


def test_convlstm_cell_shapes():
    params = ConvLstmCellParams.init((1, 5, 5), filters=2, seed=0)
    m, C = convlstm_cell(np.ones((5, 5)), np.zeros((2, 3, 3)), np.zeros((2, 3, 3)), params)
    assert m.shape == (2, 3, 3) and C.shape == (2, 3, 3)
    assert np.all(np.abs(m) < 1.0)


def test_zero_parameter_convlstm_cell(rng):
    params = ConvLstmCellParams.zeros((1, 5, 5), filters=1)
    C_prev = rng.normal(size=(1, 3, 3))
    m, C = convlstm_cell(rng.normal(size=(5, 5)), np.zeros((1, 3, 3)), C_prev, params)
    assert_allclose(C, 0.5 * C_prev)
    assert_allclose(m, 0.5 * np.tanh(0.5 * C_prev))


def test_convlstm_state_shape_mismatch():
    params = ConvLstmCellParams.init((1, 5, 5), filters=2, seed=0)
    with pytest.raises(ShapeError):
        convlstm_cell(np.ones((5, 5)), np.zeros((2, 5, 5)), np.zeros((2, 5, 5)), params)


def _relative_error(a, b):
    return np.max(np.abs(a - b) / np.maximum(1e-6, np.abs(a) + np.abs(b)))


@pytest.mark.parametrize('n_layers', [1, 2])
def test_convlstm_bptt_matches_finite_differences(n_layers):
    eps = 1e-5
    for seed in range(20):
        rng = np.random.default_rng(seed)
        stack = build_convlstm_stack(5, 2, n_layers, seed=seed)
        X = rng.normal(size=(2, 3, 1, 5, 5))
        weights = rng.normal(size=2)
        _, cache = stack.forward(X)
        analytic = stack.backward(cache, weights)
        for a, p in zip(analytic, stack.parameters()):
            numeric = np.zeros_like(p)
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + eps
                up = float(np.sum(stack.forward(X)[0] * weights))
                p[idx] = old - eps
                down = float(np.sum(stack.forward(X)[0] * weights))
                p[idx] = old
                numeric[idx] = (up - down) / (2 * eps)
            assert _relative_error(a, numeric) < 1e-4


def test_too_many_layers_for_the_neighbourhood():
    build_convlstm_stack(5, 2, 2)
    with pytest.raises(ConfigurationError):
        build_convlstm_stack(5, 2, 3)


def test_frame_windows():
    frames = np.arange(5 * 3 * 3, dtype=float).reshape(5, 3, 3)
    X, y = frame_windows(frames, 2)
    assert X.shape == (3, 2, 1, 3, 3)
    assert_allclose(X[1, 0, 0], frames[1])
    assert_allclose(y, frames[2:, 1, 1])
    with pytest.raises(DomainError):
        frame_windows(frames, 5)


def test_grid_neighborhood_layout():
    neigh = grid_neighborhood(LinearField(), (0.5, 0.5), [0.0, 1.0], r=3, delta=0.1)
    assert neigh.frames.shape == (2, 3, 3)
    assert neigh.frames[0, 1, 1] == pytest.approx(0.5 + 5.0)
    assert neigh.frames[0, 2, 1] == pytest.approx(0.6 + 5.0)
    assert neigh.frames[0, 1, 0] == pytest.approx(0.5 + 4.0)
    assert neigh.frames[1, 1, 1] == pytest.approx(105.5)
    assert_allclose(neigh.center_series(), [5.5, 105.5])


def test_grid_neighborhood_rejects_even_sides():
    with pytest.raises(ShapeError):
        grid_neighborhood(LinearField(), (0.5, 0.5), [0.0], r=4, delta=0.1)
    with pytest.raises(DomainError):
        grid_neighborhood(LinearField(), (0.5, 0.5), [0.0], r=3, delta=0.0)


def test_dump_frames(tmp_path):
    neigh = grid_neighborhood(LinearField(), (0.5, 0.5), [0.0, 0.5, 1.0], r=3, delta=0.1)
    neigh.dump_frames(str(tmp_path))
    assert sorted(os.listdir(str(tmp_path))) == ['frame_0000.csv', 'frame_0001.csv', 'frame_0002.csv']
    frame = pd.read_csv(str(tmp_path / 'frame_0001.csv'))
    assert list(frame.columns) == ['i', 'k', 's1', 's2', 't', 'value']
    assert len(frame) == 9
    assert_allclose(frame['value'], neigh.frames[1].ravel())


@pytest.fixture(scope='module')
def conv_model():
    times = np.linspace(0.0, 0.3, 30)
    neigh = grid_neighborhood(LinearField(), (0.5, 0.5), times, r=5, delta=0.05)
    neigh = NeighborhoodSeries(np.sin(neigh.frames), neigh.times, neigh.center, neigh.spacing)
    config = ForecastConfig(window=4, filters=2, radius=5)
    train = TrainConfig(learning_rate=0.05, batch_size=8, epochs=5, seed=1, log_every=0)
    return fit_qconvlstm(neigh, (0.05, 0.5, 0.95), config, train), neigh


def test_conv_quantile_forecasts_never_cross(conv_model):
    model, neigh = conv_model
    result = forecast_conv(model, neigh, 3)
    for tau in result:
        assert result[tau].shape == (3,)
    assert np.all(result[0.05] < result[0.5]) and np.all(result[0.5] < result[0.95])
    assert model.meta['spacing'] == 0.05


def test_conv_forecast_with_future_frames(conv_model):
    model, neigh = conv_model
    future = neigh.frames[-3:]
    result = model.forecast(neigh, 3, future)
    assert all(np.all(np.isfinite(v)) for v in result.values())
    with pytest.raises(DomainError):
        model.forecast(neigh, 0)


def test_saved_conv_model_reproduces_forecasts(conv_model, tmp_path):
    model, neigh = conv_model
    model.save(str(tmp_path / 'conv'))
    restored = QConvLstmModel.load(str(tmp_path / 'conv'))
    a, b = model.forecast(neigh, 2), restored.forecast(neigh, 2)
    for tau in a:
        assert a[tau].tobytes() == b[tau].tobytes()


def test_conv_model_does_not_load_as_another_kind(conv_model, tmp_path):
    from st_deepkriging.forecaster import QlstmModel
    model, _ = conv_model
    model.save(str(tmp_path / 'conv'))
    with pytest.raises(ConfigurationError):
        QlstmModel.load(str(tmp_path / 'conv'))


@pytest.mark.slow
def test_neighbourhood_forecasts_beat_single_series_forecasts():
    from st_deepkriging import interpolator
    from st_deepkriging.dataset import median_station_spacing
    from st_deepkriging.forecaster import fit_qlstm
    from st_deepkriging.simulator import SimulationSpec, make_scenario, simulate

    config = ForecastConfig(window=5, hidden=8, filters=4, radius=5)
    train = TrainConfig(learning_rate=0.01, batch_size=8, epochs=60, seed=0, log_every=0)
    interp_train = TrainConfig(learning_rate=0.01, batch_size=32, epochs=100, seed=0, log_every=0)
    better = 0
    for replicate in range(10):
        field = simulate(SimulationSpec(n_locations=50, n_times=40, seed=replicate))
        past, future = make_scenario(field, 3)
        interp = interpolator.fit(past, arch=(64, 64, 1), train=interp_train, spatial_counts=(25, 81),
                                  temporal_counts=(10, 15))
        times = past.times()
        delta = median_station_spacing(past)
        coords, _ = past.stations()
        errors = {'qlstm': [], 'qconvlstm': []}
        for s0 in coords[:5]:
            truth = future.station_series(s0)[1][:5]
            series = interp.interpolate_series(s0, times)
            errors['qlstm'].extend(fit_qlstm(series, (0.5,), config, train).forecast(series, 5)[0.5] - truth)
            neigh = grid_neighborhood(interp, s0, times, config.radius, delta)
            errors['qconvlstm'].extend(fit_qconvlstm(neigh, (0.5,), config, train).forecast(neigh, 5)[0.5] - truth)
        mspe = {name: np.mean(np.square(e)) for name, e in errors.items()}
        better += int(mspe['qconvlstm'] <= mspe['qlstm'])
    assert better >= 6
