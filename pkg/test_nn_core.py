import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from st_deepkriging.exceptions import ContractViolationError, ShapeError, TrainingDivergedError
from st_deepkriging.nn_core import DenseLayer, DenseNetwork, Gradients, TrainConfig, apply_sgd, backward, forward, \
    init_weights, run_training, sgd_step, train_dense


def _relative_error(a, b):
    return np.max(np.abs(a - b) / np.maximum(1e-6, np.abs(a) + np.abs(b)))


def _finite_difference(net, x, weights, f_constant=None, eps=1e-5):
    def loss():
        out, _ = forward(net, x, f_constant)
        return float(np.sum(out * weights))

    grads = []
    for p in net.parameters():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + eps
            up = loss()
            p[idx] = old - eps
            down = loss()
            p[idx] = old
            g[idx] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


@pytest.mark.parametrize('activation', ['tanh', 'sigmoid', 'identity'])
def test_gradients_match_finite_differences(activation):
    for seed in range(20):
        rng = np.random.default_rng(seed)
        net = DenseNetwork.build(3, [4, 3, 2], seed=seed, hidden_activation=activation)
        x = rng.normal(size=(5, 3))
        weights = rng.normal(size=(5, 2))
        _, cache = forward(net, x)
        analytic = backward(net, cache, weights).as_list()
        numeric = _finite_difference(net, x, weights)
        for a, n in zip(analytic, numeric):
            assert _relative_error(a, n) < 1e-4


def test_relu_gradients_match_finite_differences():
    checked = 0
    for seed in range(40):
        rng = np.random.default_rng(seed)
        net = DenseNetwork.build(3, [4, 3, 2], seed=seed, hidden_activation='relu')
        x = rng.normal(size=(5, 3))
        weights = rng.normal(size=(5, 2))
        _, cache = forward(net, x)
        # a central difference straddling the kink is meaningless
        if min(np.min(np.abs(z)) for z in cache.preacts[:-1]) < 1e-3:
            continue
        analytic = backward(net, cache, weights).as_list()
        numeric = _finite_difference(net, x, weights)
        for a, n in zip(analytic, numeric):
            assert _relative_error(a, n) < 1e-4
        checked += 1
    assert checked >= 30


def test_psi_output_gradients_match_finite_differences():
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        tau = 0.9 if seed % 2 else 0.1
        net = DenseNetwork.build(3, [4, 1], seed=seed, hidden_activation='tanh', output_activation='psi',
                                 tau=tau, lam=2.0)
        x = rng.normal(size=(6, 3))
        f = rng.normal(size=6)
        weights = rng.normal(size=(6, 1))
        _, cache = forward(net, x, f)
        analytic = backward(net, cache, weights).as_list()
        numeric = _finite_difference(net, x, weights, f)
        for a, n in zip(analytic, numeric):
            assert _relative_error(a, n) < 1e-4


def test_identity_network_passes_input_through():
    net = DenseNetwork([DenseLayer(W=np.eye(3), b=np.zeros(3), activation='identity')])
    out, _ = forward(net, np.array([1.0, -2.0, 0.5]))
    assert_allclose(out, [1.0, -2.0, 0.5])


def test_activations():
    relu = DenseNetwork([DenseLayer(W=np.eye(2), b=np.zeros(2), activation='relu')])
    assert_allclose(forward(relu, np.array([-1.0, 2.0]))[0], [0.0, 2.0])
    sigmoid = DenseNetwork([DenseLayer(W=np.eye(1), b=np.zeros(1), activation='sigmoid')])
    assert forward(sigmoid, np.array([0.0]))[0][0] == pytest.approx(0.5)
    tanh = DenseNetwork([DenseLayer(W=np.eye(1), b=np.zeros(1), activation='tanh')])
    assert forward(tanh, np.array([0.0]))[0][0] == 0.0


def test_input_width_mismatch():
    net = DenseNetwork.build(3, [2, 1], seed=0)
    with pytest.raises(ShapeError):
        forward(net, np.ones(4))


def test_layers_must_chain():
    with pytest.raises(ShapeError):
        DenseNetwork([DenseLayer(W=np.ones((2, 3)), b=np.zeros(2)), DenseLayer(W=np.ones((1, 3)), b=np.zeros(1))])


def test_zero_output_gradient_gives_zero_gradients():
    net = DenseNetwork.build(3, [4, 2], seed=1, hidden_activation='tanh')
    _, cache = forward(net, np.ones((2, 3)))
    for g in backward(net, cache, np.zeros((2, 2))).as_list():
        assert np.all(g == 0.0)


def test_single_linear_layer_squared_loss_gradient():
    W = np.array([[0.5, -1.0, 2.0]])
    b = np.array([0.3])
    x = np.array([1.0, 2.0, -1.0])
    y = 0.7
    net = DenseNetwork([DenseLayer(W=W.copy(), b=b.copy(), activation='identity')])
    out, cache = forward(net, x)
    residual = (W @ x + b)[0] - y
    grads = backward(net, cache, 2.0 * (out - y))
    assert_allclose(grads.weights[0], 2.0 * residual * x[None, :])
    assert_allclose(grads.biases[0], [2.0 * residual])


def test_stale_cache_is_rejected():
    net = DenseNetwork.build(2, [3, 1], seed=0)
    _, cache = forward(net, np.ones((4, 2)))
    grads = backward(net, cache, np.ones((4, 1)))
    sgd_step(net, grads, TrainConfig(learning_rate=0.1))
    with pytest.raises(ContractViolationError):
        backward(net, cache, np.ones((4, 1)))


def test_plain_sgd_arithmetic():
    w = np.array([1.0])
    apply_sgd([w], [np.array([2.0])], 0.1)
    assert w[0] == pytest.approx(0.8)


def test_zero_learning_rate_leaves_network_unchanged():
    net = DenseNetwork.build(3, [2, 1], seed=4)
    before = net.get_state()
    _, cache = forward(net, np.ones((2, 3)))
    grads = backward(net, cache, np.ones((2, 1)))
    apply_sgd(net.parameters(), grads.as_list(), 0.0)
    for a, b in zip(before, net.parameters()):
        assert np.array_equal(a, b)


def test_l2_penalty_decays_regularized_weights_only():
    net = DenseNetwork.build(2, [3, 1], seed=2)
    W0, b0 = net.layers[0].W.copy(), net.layers[0].b.copy() + 1.0
    net.layers[0].b = b0.copy()
    W1 = net.layers[1].W.copy()
    zero = [np.zeros_like(p) for p in net.parameters()]
    grads = Gradients(weights=[zero[0], zero[2]], biases=[zero[1], zero[3]])
    config = TrainConfig(learning_rate=0.1, l1=0.0, l2=0.5, l1l2_layers=(0,))
    for step in range(1, 4):
        sgd_step(net, grads, config)
        assert_allclose(net.layers[0].W, W0 * 0.9 ** step)
    assert_allclose(net.layers[0].b, b0)
    assert_allclose(net.layers[1].W, W1)


def test_init_weights_is_deterministic():
    a = init_weights((100, 100), 7)
    assert np.array_equal(a, init_weights((100, 100), 7))
    assert not np.array_equal(a, init_weights((100, 100), 8))


def test_init_weights_scale():
    a = init_weights((100, 100), 11)
    sigma = np.sqrt(2.0 / 100)
    assert abs(a.mean()) < 0.05 * sigma
    assert a.std() == pytest.approx(sigma, rel=0.05)


def test_training_reduces_loss_on_a_linear_problem(rng):
    X = rng.normal(size=(200, 3))
    y = X @ np.array([1.5, -2.0, 0.5]) + 0.3
    net = DenseNetwork.build(3, [1], seed=0)
    config = TrainConfig(learning_rate=0.05, batch_size=16, epochs=100, seed=0, log_every=0)
    history = train_dense(net, X, y, config)
    assert history.final_risk < 0.1 * history.train_risk[0]


def test_training_is_deterministic(rng):
    X = rng.normal(size=(60, 3))
    y = np.sin(X[:, 0])
    config = TrainConfig(learning_rate=0.02, batch_size=8, epochs=15, seed=5, log_every=0)
    nets = []
    for _ in range(2):
        net = DenseNetwork.build(3, [8, 1], seed=9)
        train_dense(net, X, y, config)
        nets.append(net)
    for a, b in zip(nets[0].parameters(), nets[1].parameters()):
        assert a.tobytes() == b.tobytes()


def test_divergence_names_the_epoch():
    losses = iter([1.0, float('nan')])

    def batch_step(idx):
        return next(losses)

    with pytest.raises(TrainingDivergedError) as info:
        run_training(4, TrainConfig(batch_size=2, epochs=5, log_every=0), batch_step, lambda idx: 1.0,
                     lambda: [], lambda state: None)
    assert info.value.epoch == 1


def test_checkpoint_round_trip_is_bit_exact(rng):
    net = DenseNetwork.build(4, [5, 1], seed=3, output_activation='psi', tau=0.95, lam=1.7)
    restored = DenseNetwork.from_dict(json.loads(json.dumps(net.to_dict())))
    x = rng.normal(size=(10, 4))
    f = rng.normal(size=10)
    assert forward(net, x, f)[0].tobytes() == forward(restored, x, f)[0].tobytes()
    assert restored.layers[-1].tau == 0.95


def test_default_penalty_shrinks_the_first_two_layers_only():
    config = TrainConfig(learning_rate=0.1)
    assert config.l1 > 0 and config.l2 > 0 and config.l1l2_layers == (0, 1)
    net = DenseNetwork.build(2, [3, 3, 1], seed=2)
    before = [layer.W.copy() for layer in net.layers]
    zero = [np.zeros_like(p) for p in net.parameters()]
    grads = Gradients(weights=zero[0::2], biases=zero[1::2])
    sgd_step(net, grads, config)
    for W0, layer in zip(before[:2], net.layers[:2]):
        assert_allclose(layer.W, W0 - 0.1 * (2 * config.l2 * W0 + config.l1 * np.sign(W0)))
        assert np.all(np.abs(layer.W) <= np.abs(W0))
    assert_allclose(net.layers[2].W, before[2])
