import math

import numpy as np
import numpy.testing as npt
import pytest

from pivot import nn
from pivot.errors import ConfigurationError, NumericalError, RejectedInputError


def test_param_count():
    assert nn.param_count([2, 20, 20, 1]) == 2 * 20 + 20 + 20 * 20 + 20 + 20 + 1


def test_init_is_deterministic():
    a = nn.init_params([2, 5, 1], [nn.TANH, nn.SIGMOID], seed=4)
    b = nn.init_params([2, 5, 1], [nn.TANH, nn.SIGMOID], seed=4)
    c = nn.init_params([2, 5, 1], [nn.TANH, nn.SIGMOID], seed=5)
    assert a == b
    assert a != c
    # biases start at zero
    for _, bias in a.layers():
        assert not np.any(bias)


def test_rejects_bad_architectures():
    with pytest.raises(RejectedInputError):
        nn.DenseNet((2, 1), (nn.SIGMOID,), np.zeros(2))
    with pytest.raises(RejectedInputError):
        nn.DenseNet((2, 3, 1), (nn.SOFTMAX, nn.SIGMOID), np.zeros(13))
    with pytest.raises(RejectedInputError):
        nn.DenseNet((2, 1), ("swish",), np.zeros(3))
    with pytest.raises(RejectedInputError):
        nn.DenseNet((2,), (), np.zeros(0))


def test_params_are_read_only():
    net = nn.init_params([2, 1], [nn.LINEAR], seed=0)
    with pytest.raises(ValueError):
        net.params[0] = 1.0


def test_forward_known_values():
    # W = [[1], [2]], b = [0.5]
    net = nn.DenseNet((2, 1), (nn.LINEAR,), [1.0, 2.0, 0.5])
    npt.assert_allclose(nn.forward(net, [1.0, 1.0]), [3.5])
    npt.assert_allclose(nn.forward_batch(net, [[1.0, 0.0], [0.0, 1.0]]),
                        [[1.5], [2.5]])
    with pytest.raises(RejectedInputError):
        nn.forward(net, [1.0, 2.0, 3.0])


def test_softmax_output_is_a_distribution():
    net = nn.init_params([1, 4, 3], [nn.TANH, nn.SOFTMAX], seed=2)
    out = nn.forward_batch(net, np.linspace(-2, 2, 7).reshape(-1, 1))
    npt.assert_allclose(out.sum(axis=1), 1.0)


def test_overflow_reports_the_layer():
    net = nn.DenseNet((1, 1), (nn.EXPONENTIAL,), [1000.0, 0.0])
    with pytest.raises(NumericalError) as e:
        nn.forward(net, [1.0])
    assert e.value.layer == 0


def test_bce_at_zero_logit():
    net = nn.DenseNet((1, 1), (nn.SIGMOID,), [0.0, 0.0])
    loss, grad = nn.loss_and_grad(net, [([1.0], 1)], nn.BCE)
    assert loss == pytest.approx(math.log(2.0))
    # d/dW = (sigmoid(0) - 1) * x, d/db = sigmoid(0) - 1
    npt.assert_allclose(grad, [-0.5, -0.5])


def test_bce_needs_a_sigmoid_head():
    net = nn.DenseNet((1, 1), (nn.LINEAR,), [0.0, 0.0])
    with pytest.raises(ConfigurationError):
        nn.loss_and_grad(net, [([1.0], 1)], nn.BCE)


def test_loss_and_grad_matches_batched_version():
    rng = np.random.default_rng(0)
    net = nn.init_params([3, 4, 1], [nn.TANH, nn.SIGMOID], seed=1)
    X = rng.normal(size=(5, 3))
    y = np.array([0, 1, 1, 0, 1])
    loss, grad = nn.loss_and_grad(net, zip(X, y), nn.BCE)
    loss2, grad2, _ = nn.batch_loss_and_grads(net, X, y, nn.BCE)
    assert loss == loss2
    npt.assert_array_equal(grad, grad2)


def _random_triple(rng):
    hidden = list(rng.integers(2, 6, size=rng.integers(1, 3)))
    acts = list(rng.choice([nn.TANH, nn.RELU, nn.SIGMOID], size=len(hidden)))
    n_in = int(rng.integers(1, 4))
    batch = int(rng.integers(1, 6))
    X = rng.uniform(-1.0, 1.0, size=(batch, n_in))
    loss = rng.choice([nn.BCE, nn.MDN_NLL, nn.CAT_NLL])
    if loss == nn.BCE:
        sizes, out, targets = 1, nn.SIGMOID, rng.integers(0, 2, size=batch)
    elif loss == nn.MDN_NLL:
        C = int(rng.choice([1, 5]))
        sizes, out, targets = 3 * C, nn.LINEAR, rng.standard_normal(batch)
    else:
        n = int(rng.integers(2, 5))
        sizes, out, targets = n, nn.SOFTMAX, rng.integers(0, n, size=batch)
    net = nn.init_params([n_in] + hidden + [sizes], acts + [out],
                         seed=int(rng.integers(1 << 30)))
    return net, X, targets, loss


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(2024)
    seen = set()
    for _ in range(100):
        net, X, targets, loss = _random_triple(rng)
        seen.add(loss)
        assert nn.gradient_check(net, X, targets, loss, h=1e-5) <= 1e-4
    assert seen == {nn.BCE, nn.MDN_NLL, nn.CAT_NLL}


def test_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    net = nn.init_params([2, 6, 1], [nn.TANH, nn.SIGMOID], seed=8)
    X = rng.normal(size=(4, 2))
    y = np.array([1, 0, 0, 1])
    _, _, grad_in = nn.batch_loss_and_grads(net, X, y, nn.BCE)

    def loss_at(flat):
        return nn.batch_loss(net, flat.reshape(X.shape), y, nn.BCE)

    numeric = nn.numerical_gradient(loss_at, X.ravel())
    npt.assert_allclose(grad_in.ravel(), numeric, rtol=1e-6, atol=1e-9)


def test_checkpoint_round_trip(tmp_path):
    net = nn.init_params([2, 20, 20, 1], [nn.TANH, nn.RELU, nn.SIGMOID], seed=7)
    path = tmp_path / "f.ckpt"
    nn.save_checkpoint(net, path, head="mixture:5")
    loaded, head = nn.load_checkpoint(path)
    assert loaded == net
    assert head == "mixture:5"
    assert path.read_text().splitlines()[0] == "pivot-checkpoint 1"


def test_checkpoint_without_head(tmp_path):
    net = nn.init_params([1, 3], [nn.LINEAR], seed=0)
    nn.save_checkpoint(net, tmp_path / "r.ckpt")
    assert nn.load_checkpoint(tmp_path / "r.ckpt")[1] is None


def test_truncated_checkpoint_is_rejected(tmp_path):
    net = nn.init_params([1, 3], [nn.LINEAR], seed=0)
    path = tmp_path / "bad.ckpt"
    nn.save_checkpoint(net, path)
    path.write_text("\n".join(path.read_text().splitlines()[:-2]) + "\n")
    with pytest.raises(ConfigurationError):
        nn.load_checkpoint(path)
