import numpy as np
import pytest
from hypothesis import given, strategies as st

from headbasis.errors import ContractError, DomainError, ShapeError
from headbasis.gradients import check_net
from headbasis.nets import (GradCheckReport, Layer, SGDMomentum, SmallNet, grad_check,
                          relative_error, relu_near_kink)


def identity_net(n=3):
    return SmallNet([Layer(np.eye(n), np.zeros(n), "linear")])


def test_identity_layer():
    x = np.array([0.5, -2.0, 3.0])
    assert np.array_equal(identity_net()(x), x)


def test_relu_layer():
    net = SmallNet([Layer(np.eye(2), np.zeros(2), "relu")])
    assert net(np.array([-1.0, 2.0])).tolist() == [0.0, 2.0]


def test_seeded_two_layer_net_is_bit_reproducible():
    x = np.linspace(-1, 1, 7)
    a = SmallNet.build([7, 5, 3], ["tanh", "linear"], rng=42)
    b = SmallNet.build([7, 5, 3], ["tanh", "linear"], rng=42)
    assert a(x).tobytes() == b(x).tobytes() == a(x).tobytes()


def test_linear_gradient_of_squared_output():
    # loss = y'y with y = Wx  =>  dL/dW = 2 y x'
    rng = np.random.default_rng(0)
    w, x = rng.normal(size=(3, 4)), rng.normal(size=4)
    net = SmallNet([Layer(w, np.zeros(3), "linear")])
    y, cache = net.forward(x)
    grads, _ = net.backward(cache, 2 * y)
    np.testing.assert_allclose(grads["W0"], 2 * np.outer(y, x), rtol=1e-14)


def test_zero_upstream_gives_zero_gradients():
    net = SmallNet.build([4, 6, 2], ["relu", "tanh"], rng=1)
    _, cache = net.forward(np.ones((3, 4)))
    grads, gx = net.backward(cache, np.zeros((3, 2)))
    assert not any(g.any() for g in grads.values()) and not gx.any()


@pytest.mark.parametrize("seed", range(100))
def test_random_nets_match_finite_differences(seed):
    assert check_net(seed).passed


def test_batched_gradients_are_sums_of_single_ones():
    net = SmallNet.build([3, 4, 2], ["tanh", "linear"], rng=2)
    x = np.random.default_rng(3).normal(size=(5, 3))
    up = np.random.default_rng(4).normal(size=(5, 2))
    _, cache = net.forward(x)
    batch, gx = net.backward(cache, up)
    total = {k: np.zeros_like(v) for k, v in batch.items()}
    for i in range(5):
        _, c = net.forward(x[i])
        g, gxi = net.backward(c, up[i])
        for k in total:
            total[k] += g[k]
        np.testing.assert_allclose(gxi, gx[i], rtol=1e-13)
    for k in total:
        np.testing.assert_allclose(batch[k], total[k], rtol=1e-12, atol=1e-15)


def test_stale_cache_raises():
    net = SmallNet.build([2, 2], ["linear"], rng=0)
    _, cache = net.forward(np.ones(2))
    net.touch()
    with pytest.raises(ContractError):
        net.backward(cache, np.ones(2))


def test_shape_errors():
    net = SmallNet.build([3, 2], ["linear"], rng=0)
    with pytest.raises(ShapeError):
        net(np.ones(4))
    _, cache = net.forward(np.ones(3))
    with pytest.raises(ShapeError):
        net.backward(cache, np.ones(3))
    with pytest.raises(ShapeError):
        SmallNet([Layer(np.ones((2, 3)), np.zeros(2)), Layer(np.ones((2, 3)), np.zeros(2))])
    with pytest.raises(DomainError):
        Layer(np.ones((2, 2)), np.zeros(2), "sigmoid")
    with pytest.raises(DomainError):
        Layer(np.full((2, 2), np.nan), np.zeros(2))


def test_grad_check_passes_exact_gradient_tightly():
    params = {"x": np.array([1.0, -2.0, 0.5])}

    def fn():
        x = params["x"]
        return float(x @ x), {"x": 2 * x}

    assert grad_check(params, fn, tolerance=1e-6).passed


def test_grad_check_flags_planted_fault():
    net = SmallNet.build([3, 4, 2], ["tanh", "linear"], rng=0)
    x = np.random.default_rng(1).normal(size=3)

    def fn():
        y, cache = net.forward(x)
        grads, _ = net.backward(cache, np.ones(2))
        grads["W1"] = grads["W1"].copy()
        grads["W1"][1, 2] *= 2.0
        return float(y.sum()), grads

    report = grad_check(net.params(), fn, tolerance=1e-4)
    assert not report.passed
    assert report.failures() == ["W1"]
    assert report.worst_index["W1"] == (1, 2)
    assert "FAIL" in str(report)


def test_grad_check_subsamples_large_parameters():
    params = {"x": np.arange(50, dtype=np.float64)}
    calls = []

    def fn():
        calls.append(1)
        return float(params["x"].sum()), {"x": np.ones(50)}

    grad_check(params, fn, max_entries=5, rng=0)
    assert len(calls) == 1 + 2 * 5


def test_relative_error_floor():
    assert relative_error(0.0, 1e-9) == pytest.approx(1e-3)
    assert relative_error(2.0, 1.0) == 0.5
    assert GradCheckReport({}, 1e-4).passed


def test_relu_kink_detection():
    net = SmallNet([Layer(np.eye(2), np.zeros(2), "relu")])
    assert relu_near_kink(net, np.array([1e-9, 1.0]))
    assert not relu_near_kink(net, np.array([0.1, 1.0]))


@given(st.floats(0.0, 0.99), st.floats(1e-4, 1.0))
def test_momentum_matches_closed_form(mu, lr):
    # constant gradient g: after n steps p = p0 - lr * g * sum_k sum_j<=k mu^j
    opt = SGDMomentum(mu)
    p = {"w": np.array([1.0])}
    g = {"w": np.array([0.5])}
    for _ in range(4):
        opt.step(p, g, lr)
    expected = 1.0 - lr * 0.5 * sum(sum(mu ** j for j in range(k + 1)) for k in range(4))
    assert p["w"][0] == pytest.approx(expected, rel=1e-12)


def test_build_options():
    net = SmallNet.build([5, 4, 3], ["relu", "linear"], rng=0, zero_last=True)
    assert not net.layers[-1].weight.any()
    assert np.array_equal(net(np.ones(5)), np.zeros(3))
    a = SmallNet.build([5, 4], ["tanh"], rng=0)
    b = SmallNet.build([5, 4], ["tanh"], rng=0, input_gain=10.0)
    np.testing.assert_allclose(b.layers[0].weight, 10 * a.layers[0].weight)
    c = SmallNet.build([5, 4, 2], ["tanh", "linear"], rng=0, hidden_bias_std=0.5)
    assert c.layers[0].bias.any() and not c.layers[1].bias.any()
