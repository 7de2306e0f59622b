import math

import numpy as np
import numpy.testing as npt
import pytest

from pivot import adversary, nn
from pivot.adversary import (SIGMA_FLOOR, AdversaryKind, CategoricalParams,
                             MixtureParams)
from pivot.errors import ConfigurationError, RejectedInputError
from pivot.optim import ADAM, DESCEND, new_optimizer, optimizer_step

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def test_kind_parsing():
    kind = AdversaryKind.parse("mixture:5")
    assert kind == adversary.mixture(5)
    assert str(kind) == "mixture:5"
    assert kind.width == 15
    assert kind.loss_tag == nn.MDN_NLL
    cat = AdversaryKind.parse("categorical:2")
    assert cat.width == 2 and cat.loss_tag == nn.CAT_NLL
    for bad in ("mixture", "mixture:x", "gaussian:3", "categorical:1",
                "mixture:0"):
        with pytest.raises(ConfigurationError):
            AdversaryKind.parse(bad)


def test_build_adversary_heads():
    r = adversary.build_adversary(adversary.mixture(5), seed=0)
    assert r.layer_sizes == (1, 20, 20, 15)
    assert r.activations == (nn.RELU, nn.RELU, nn.LINEAR)
    c = adversary.build_adversary(adversary.categorical(2), (64, 64, 64))
    assert c.layer_sizes == (1, 64, 64, 64, 2)
    assert c.output_activation == nn.SOFTMAX
    with pytest.raises(ConfigurationError):
        adversary.check_head(r, adversary.categorical(2))
    with pytest.raises(ConfigurationError):
        adversary.build_adversary(adversary.mixture(1), (5, 5), [nn.RELU])


def test_mixture_params_validation():
    with pytest.raises(RejectedInputError):
        MixtureParams([0.0], [SIGMA_FLOOR / 2], [1.0])
    with pytest.raises(RejectedInputError):
        MixtureParams([0.0, 1.0], [1.0, 1.0], [0.7, 0.7])
    with pytest.raises(RejectedInputError):
        MixtureParams([0.0, 1.0], [1.0], [1.0])


def test_mdn_nll_of_a_standard_normal():
    params = MixtureParams([0.0], [1.0], [1.0])
    assert adversary.mdn_nll(params, 0.0) == pytest.approx(HALF_LOG_2PI)
    assert adversary.mdn_nll(params, 2.0) == pytest.approx(HALF_LOG_2PI + 2.0)
    # two identical components make the same density
    twice = MixtureParams([0.0, 0.0], [1.0, 1.0], [0.5, 0.5])
    assert adversary.mdn_nll(twice, 1.3) == pytest.approx(
        adversary.mdn_nll(params, 1.3))


def test_mdn_nll_far_in_the_tail_is_finite():
    params = MixtureParams([0.0, 5.0], [SIGMA_FLOOR, SIGMA_FLOOR], [0.5, 0.5])
    assert np.isfinite(adversary.mdn_nll(params, 100.0))


def test_mdn_head_from_net():
    net = nn.DenseNet((1, 3), (nn.LINEAR,), np.zeros(6))
    params = adversary.mdn_head(net, 0.3)
    npt.assert_allclose(params.means, [0.0])
    npt.assert_allclose(params.stddevs, [1.0])
    assert adversary.mdn_nll(params, 0.0) == pytest.approx(HALF_LOG_2PI)
    # a very negative log-stddev bias hits the floor
    floored = net.with_params([0, 0, 0, 0.0, -20.0, 0.0])
    assert adversary.mdn_head(floored, 0.3).stddevs[0] == SIGMA_FLOOR


def test_categorical_head_and_floor():
    net = nn.DenseNet((1, 2), (nn.SOFTMAX,), np.zeros(4))
    params = adversary.categorical_head(net, 0.9)
    npt.assert_allclose(params.probs, [0.5, 0.5])
    assert adversary.cat_nll(params, 1) == pytest.approx(math.log(2.0))
    certain = CategoricalParams([1.0, 0.0])
    assert adversary.cat_nll(certain, 1) == pytest.approx(-math.log(1e-12))
    with pytest.raises(RejectedInputError):
        adversary.cat_nll(certain, 2)
    with pytest.raises(RejectedInputError):
        CategoricalParams([0.6, 0.6])


def test_categorical_entropy():
    assert adversary.categorical_entropy([0.5, 0.5]) == pytest.approx(math.log(2))
    assert adversary.categorical_entropy([1.0, 0.0]) == 0.0


def test_score_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    kind = adversary.mixture(3)
    r = adversary.build_adversary(kind, (8,), [nn.TANH], seed=4)
    s = rng.uniform(0, 1, size=6)
    z = rng.standard_normal(6)
    _, _, grad_s = adversary.adversary_loss(r, s, z, kind)
    h = 1e-6
    for i in range(s.size):
        up, down = s.copy(), s.copy()
        up[i] += h
        down[i] -= h
        numeric = (adversary.adversary_loss(r, up, z, kind)[0] -
                   adversary.adversary_loss(r, down, z, kind)[0]) / (2 * h)
        assert grad_s[i] == pytest.approx(numeric, rel=1e-5, abs=1e-8)


def test_adversary_loss_rejects_mismatched_batches():
    kind = adversary.categorical(2)
    r = adversary.build_adversary(kind, (4,))
    with pytest.raises(RejectedInputError):
        adversary.adversary_loss(r, [0.1, 0.2], [0], kind)


def test_adversary_learns_the_prior_of_an_uninformative_score():
    """With no information in s, the best NLL is H(Z) = 1.4189."""
    rng = np.random.default_rng(0)
    kind = adversary.mixture(5)
    r = adversary.build_adversary(kind, (20, 20), seed=0)
    opt = new_optimizer(ADAM, 5e-3, r.params.size)
    for _ in range(2000):
        s = rng.uniform(0.0, 1.0, size=128)
        z = rng.standard_normal(128)
        _, grad, _ = adversary.adversary_loss(r, s, z, kind)
        r, opt = optimizer_step(opt, r, grad, DESCEND)
    s = rng.uniform(0.0, 1.0, size=20000)
    z = rng.standard_normal(20000)
    loss, _, _ = adversary.adversary_loss(r, s, z, kind)
    assert loss == pytest.approx(1.4189, abs=0.05)


def _random_mixture(rng, C=5):
    return (rng.normal(0.0, 2.0, size=C), rng.uniform(0.3, 2.0, size=C),
            rng.dirichlet(np.ones(C)))


def test_mdn_nll_ignores_component_order():
    rng = np.random.default_rng(21)
    means, stddevs, weights = _random_mixture(rng)
    params = MixtureParams(means, stddevs, weights)
    for _ in range(5):
        p = rng.permutation(5)
        shuffled = MixtureParams(means[p], stddevs[p], weights[p])
        for z in (-3.0, 0.3, 4.2):
            assert adversary.mdn_nll(shuffled, z) == pytest.approx(
                adversary.mdn_nll(params, z), rel=1e-12)


def test_mdn_nll_matches_a_direct_sum():
    rng = np.random.default_rng(5)
    means, stddevs, weights = _random_mixture(rng)
    density = sum(w * math.exp(-0.5 * ((0.3 - m) / s) ** 2) / (s * math.sqrt(2 * math.pi))
                  for m, s, w in zip(means, stddevs, weights))
    params = MixtureParams(means, stddevs, weights)
    assert abs(adversary.mdn_nll(params, 0.3) + math.log(density)) < 1e-10
