import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deephazard import nn


def test_activation_table_values():
    assert nn.activate(nn.Activation("relu"), -1.0) == 0.0
    assert nn.activate(nn.Activation("selu"), 1.0) == pytest.approx(1.0507)
    assert nn.activate(nn.Activation("elu", 0.1), 0.0) == 0.0
    assert nn.activate(nn.Activation("selu"), -1.0) == pytest.approx(1.0507 * 1.67326 * (np.exp(-1) - 1))
    assert nn.activate(nn.Activation("loglog"), 0.0) == pytest.approx(1 - np.exp(-1))
    assert nn.activate(nn.Activation("leakyrelu"), -2.0) == pytest.approx(-0.02)
    assert nn.activate(nn.Activation("elu", 0.5), -1.0) == pytest.approx(0.5 * (np.exp(-1) - 1))


def test_activation_parse():
    assert nn.Activation.parse("Elu(0.1)") == nn.Activation("elu", 0.1)
    assert nn.Activation.parse({"kind": "selu"}) == nn.Activation("selu")
    with pytest.raises(ValueError):
        nn.Activation.parse("swish")
    with pytest.raises(ValueError):
        nn.Activation("elu", -1.0)


@pytest.mark.parametrize("act", [nn.Activation(k) for k in nn.ACTIVATIONS] + [nn.Activation("elu", 0.1), nn.Activation("elu", 1.5)])
def test_activation_derivatives(act):
    rng = np.random.default_rng(7)
    x = rng.uniform(-3, 3, 20)
    x = x[np.abs(x) > 1e-6]
    h = 1e-6
    fd = (nn.activate(act, x + h) - nn.activate(act, x - h)) / (2 * h)
    an = nn.activate_grad(act, x)
    assert np.all(np.abs(fd - an) <= 1e-6 * np.maximum(1.0, np.abs(an)))


def test_kink_subgradient_is_zero():
    assert nn.activate_grad(nn.Activation("relu"), 0.0) == 0.0
    assert nn.activate_grad(nn.Activation("leakyrelu"), 0.0) == 0.0


def _net(weights, biases, out_w, out_b, act="relu", dropout=0.0):
    layers = [nn.DenseLayer(np.array(w, float), np.array(b, float), nn.Activation.parse(act), dropout) for w, b in zip(weights, biases)]
    return nn.IntervalNetwork(layers, np.array(out_w, float), np.array([out_b], float))


def test_forward_examples():
    zero = nn.build_network(3, [4, 2], "tanh", 0.0, np.random.default_rng(0))
    for p in zero.params():
        p[...] = 0
    assert nn.forward(zero, np.array([1.0, -2.0, 3.0]))[0] == 0.0
    net = _net([[[1.0]]], [[0.0]], [3.0], 0.0)
    assert nn.forward(net, np.array([2.0]))[0] == 6.0


def test_dropout_zero_train_equals_eval():
    rng = np.random.default_rng(1)
    net = nn.build_network(3, [5, 4], "selu", 0.0, rng)
    z = rng.normal(size=(6, 3))
    a, _ = nn.forward(net, z, train=True, rng=rng)
    b, _ = nn.forward(net, z, train=False)
    assert np.array_equal(a, b)


def test_dropout_expectation_matches_eval():
    rng = np.random.default_rng(2)
    # one hidden layer: the mask multiplies activations feeding an affine output, so the mean is exact
    net = nn.build_network(2, [8], "elu(1.0)", 0.3, rng)
    net.layers[0].bias[:] = 5.0
    z = np.array([0.4, -0.2])
    reps = np.array([nn.forward(net, z, train=True, rng=rng)[0] for _ in range(20000)])
    ev = nn.forward(net, z)[0]
    assert abs(reps.mean() - ev) <= 0.02 * abs(ev)


def test_forward_dimension_mismatch():
    net = nn.build_network(3, [2], "relu", 0.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        nn.forward(net, np.zeros(4))


def test_backward_examples():
    rng = np.random.default_rng(3)
    net = nn.build_network(3, [4], "tanh", 0.0, rng)
    z = rng.normal(size=(5, 3))
    _, tape = nn.forward(net, z)
    assert all(np.all(g == 0) for g in nn.backward(net, tape, np.zeros(5)))
    linear = nn.IntervalNetwork([], np.array([0.5, -1.0]), np.zeros(1))
    x = np.array([2.0, 3.0])
    _, tape = nn.forward(linear, x)
    g = nn.backward(linear, tape, 1.7)
    assert np.allclose(g[0], 1.7 * x) and g[1][0] == pytest.approx(1.7)


def test_backward_rejects_foreign_tape():
    rng = np.random.default_rng(4)
    a = nn.build_network(2, [3], "relu", 0.0, rng)
    b = nn.build_network(2, [3], "relu", 0.0, rng)
    _, tape = nn.forward(a, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        nn.backward(b, tape, np.ones(2))


def _fd_check(net, z, upstream, mask_rng_seed=None):
    """Compare backward with central differences of sum(upstream * risk)."""
    def value():
        rng = None if mask_rng_seed is None else np.random.default_rng(mask_rng_seed)
        r, _ = nn.forward(net, z, train=mask_rng_seed is not None, rng=rng)
        return float(np.dot(upstream, r))

    rng = None if mask_rng_seed is None else np.random.default_rng(mask_rng_seed)
    _, tape = nn.forward(net, z, train=mask_rng_seed is not None, rng=rng)
    grads = nn.backward(net, tape, upstream)
    h = 1e-6
    worst = 0.0
    for p, g in zip(net.params(), grads):
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = value()
            p[idx] = old - h
            dn = value()
            p[idx] = old
            fd = (up - dn) / (2 * h)
            worst = max(worst, abs(fd - g[idx]) / max(1.0, abs(fd)))
    return worst


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), depth=st.integers(0, 4), act=st.sampled_from(["tanh", "selu", "elu(0.5)", "atan", "loglog"]))
def test_backward_matches_finite_differences(seed, depth, act):
    rng = np.random.default_rng(seed)
    widths = list(rng.integers(1, 5, depth))
    net = nn.build_network(3, widths, act, 0.0, rng)
    z = rng.normal(size=(4, 3))
    assert _fd_check(net, z, rng.normal(size=4)) < 1e-5


def test_backward_with_dropout_masks():
    rng = np.random.default_rng(5)
    net = nn.build_network(3, [5, 4], "tanh", 0.3, rng)
    assert _fd_check(net, rng.normal(size=(6, 3)), rng.normal(size=6), mask_rng_seed=99) < 1e-5


def test_he_normal():
    rng = np.random.default_rng(6)
    w = nn.init_he_normal((100000 // 8, 8), rng)
    assert abs(w.var() - 0.25) < 0.05 * 0.25
    a = nn.init_he_normal((3, 4), np.random.default_rng(1))
    b = nn.init_he_normal((3, 4), np.random.default_rng(1))
    assert np.array_equal(a, b)
    net = nn.build_network(4, [3, 2], "relu", 0.0, rng)
    assert all(np.all(l.bias == 0) for l in net.layers) and net.out_bias[0] == 0


def test_sgd_and_adam_steps():
    theta = np.array([1.0])
    nn.Optimizer("sgd", 0.1).step([theta], [np.array([2.0])])
    assert theta[0] == pytest.approx(0.8)
    for g in (3.0, -0.02):
        theta = np.array([1.0])
        nn.Optimizer("adam", 0.01).step([theta], [np.array([g])])
        assert theta[0] == pytest.approx(1.0 - 0.01 * np.sign(g), abs=1e-8)
    for kind in ("sgd", "adam"):
        theta = np.array([1.0, 2.0])
        nn.Optimizer(kind, 0.5).step([theta], [np.zeros(2)])
        assert theta.tolist() == [1.0, 2.0]
    with pytest.raises(FloatingPointError):
        nn.Optimizer("adam", 0.1).step([np.zeros(1)], [np.array([np.nan])])


def test_penalty_examples():
    v, g = nn.penalty_value_and_grad(nn.Penalty(0.0, 2), [np.array([1.0, -3.0])])
    assert v == 0 and np.all(g[0] == 0)
    v, g = nn.penalty_value_and_grad(nn.Penalty(1.0, 2), [np.array([1.0, -2.0])])
    assert v == 5 and g[0].tolist() == [2.0, -4.0]
    v, g = nn.penalty_value_and_grad(nn.Penalty(1.0, 1), [np.array([1.0, -2.0, 0.0])])
    assert v == 3 and g[0].tolist() == [1.0, -1.0, 0.0]
    with pytest.raises(ValueError):
        nn.Penalty(-1.0)
    with pytest.raises(ValueError):
        nn.Penalty(1.0, 3)


def test_serialization_round_trip():
    rng = np.random.default_rng(8)
    net = nn.build_network(3, [4, 2], ["elu(0.1)", "selu"], [0.1, 0.15], rng)
    back = nn.IntervalNetwork.from_dict(net.to_dict())
    z = rng.normal(size=(5, 3))
    assert np.array_equal(nn.forward(net, z)[0], nn.forward(back, z)[0])
    assert back.layers[1].dropout == 0.15 and back.layers[0].activation == nn.Activation("elu", 0.1)


def test_per_layer_lengths_checked():
    with pytest.raises(ValueError):
        nn.build_network(3, [4, 2, 2], ["relu", "selu"], 0.0, np.random.default_rng(0))
