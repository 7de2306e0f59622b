# Part of the pivotal adversarial training library (pivot)
#
# It is licensed under a liberal MIT/X11 style license;
# see the file "LICENSE" in this directory for details.

"""Adversary heads: models of p(z | s) on top of a DenseNet.

A continuous nuisance is modelled by a gaussian mixture density head: the
net's final layer is linear with 3C outputs, laid out as C means, C raw
log-stddevs and C mixture logits.  Stddevs are exp(raw), floored at
SIGMA_FLOOR; weights are the softmax of the logits.

A categorical nuisance is modelled by a softmax head with one output per
category."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_softmax, logsumexp, softmax

from pivot import nn
from pivot.errors import ConfigurationError, RejectedInputError

log = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-3
PROB_FLOOR = 1e-12
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

MIXTURE = "mixture"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class AdversaryKind(object):
    """What the adversary models: mixture(C) or categorical(n)."""
    name: str
    size: int

    def __post_init__(self):
        if self.name not in (MIXTURE, CATEGORICAL):
            raise ConfigurationError("unknown adversary kind %r" % self.name)
        if int(self.size) < 1 or (self.name == CATEGORICAL and self.size < 2):
            raise ConfigurationError("bad size %r for %s adversary" % (
                self.size, self.name))
        object.__setattr__(self, "size", int(self.size))

    @classmethod
    def parse(cls, text):
        """Parse 'mixture:5' or 'categorical:2'."""
        name, sep, size = str(text).strip().partition(":")
        if not sep:
            raise ConfigurationError("adversary kind %r is not kind:size" % text)
        try:
            return cls(name.strip(), int(size))
        except ValueError as e:
            if isinstance(e, ConfigurationError):
                raise
            raise ConfigurationError("adversary kind %r: %s" % (text, e))

    def __str__(self):
        return "%s:%d" % (self.name, self.size)

    @property
    def is_mixture(self):
        return self.name == MIXTURE

    @property
    def width(self):
        """Output width of the adversary net."""
        return 3 * self.size if self.is_mixture else self.size

    @property
    def loss_tag(self):
        return nn.MDN_NLL if self.is_mixture else nn.CAT_NLL

    @property
    def output_activation(self):
        return nn.LINEAR if self.is_mixture else nn.SOFTMAX


def mixture(components):
    return AdversaryKind(MIXTURE, components)


def categorical(categories):
    return AdversaryKind(CATEGORICAL, categories)


#
# parameter types
#
@dataclass(frozen=True, eq=False)
class MixtureParams(object):
    """Gaussian mixture: means, stddevs and weights, one entry per component."""
    means: np.ndarray
    stddevs: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64).ravel()
        stddevs = np.asarray(self.stddevs, dtype=np.float64).ravel()
        weights = np.asarray(self.weights, dtype=np.float64).ravel()
        if not (means.size == stddevs.size == weights.size) or means.size == 0:
            raise RejectedInputError("mixture component counts disagree")
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(stddevs))
                and np.all(np.isfinite(weights))):
            raise RejectedInputError("non-finite mixture parameters")
        if np.any(stddevs < SIGMA_FLOOR):
            raise RejectedInputError("stddev below floor %g" % SIGMA_FLOOR)
        if np.any(weights < 0.0) or abs(weights.sum() - 1.0) > 1e-9:
            raise RejectedInputError("mixture weights are not a probability vector")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stddevs", stddevs)
        object.__setattr__(self, "weights", weights)

    @property
    def components(self):
        return self.means.size


@dataclass(frozen=True, eq=False)
class CategoricalParams(object):
    """Probability vector over nuisance categories."""
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64).ravel()
        if probs.size == 0 or np.any(probs < 0.0) or np.any(probs > 1.0) \
                or abs(probs.sum() - 1.0) > 1e-9:
            raise RejectedInputError("not a probability vector: %r" % (probs,))
        object.__setattr__(self, "probs", probs)

    @property
    def categories(self):
        return self.probs.size


#
# heads
#
def check_head(net, kind):
    """Raise ConfigurationError unless net can serve as a 'kind' adversary."""
    if net.n_inputs != 1:
        raise ConfigurationError("adversary input width must be 1, got %d" %
                                 net.n_inputs)
    if net.n_outputs != kind.width or net.output_activation != kind.output_activation:
        raise ConfigurationError(
            "%s adversary needs a %s output layer of width %d, got %s/%d" % (
                kind, kind.output_activation, kind.width,
                net.output_activation, net.n_outputs))


def _split_raw(raw, components):
    C = components
    return raw[..., :C], raw[..., C:2 * C], raw[..., 2 * C:]


def _mixture_components(net):
    if net.output_activation != nn.LINEAR or net.n_outputs % 3 != 0:
        raise ConfigurationError(
            "mixture head needs a linear output layer of width 3C, got %s/%d"
            % (net.output_activation, net.n_outputs))
    return net.n_outputs // 3


def mdn_head(net, s):
    """Mixture parameters the adversary assigns to score s."""
    C = _mixture_components(net)
    raw = nn.forward(net, [float(s)])
    means, rho, omega = _split_raw(raw, C)
    with np.errstate(over="ignore"):
        stddevs = np.maximum(np.exp(rho), SIGMA_FLOOR)
    return MixtureParams(means, stddevs, softmax(omega))


def mdn_nll(params, z):
    """-log sum_c w_c N(z; mu_c, sigma_c), via log-sum-exp."""
    z = float(z)
    if not np.isfinite(z):
        raise RejectedInputError("non-finite nuisance value")
    u = (z - params.means) / params.stddevs
    with np.errstate(divide="ignore"):
        log_w = np.log(params.weights)
    terms = log_w - 0.5 * u * u - np.log(params.stddevs) - _LOG_SQRT_2PI
    return float(-logsumexp(terms))


def mdn_raw_loss(net, raw, z):
    """Per-sample mixture NLL and its gradient w.r.t. the raw head outputs."""
    C = _mixture_components(net)
    z = np.asarray(z, dtype=np.float64).reshape(-1, 1)
    mu, rho, omega = _split_raw(raw, C)
    expo = np.exp(rho)
    sigma = np.maximum(expo, SIGMA_FLOOR)
    log_pi = log_softmax(omega, axis=1)
    u = (z - mu) / sigma
    a = log_pi - 0.5 * u * u - np.log(sigma) - _LOG_SQRT_2PI
    norm = logsumexp(a, axis=1, keepdims=True)
    resp = np.exp(a - norm)
    d_mu = -resp * u / sigma
    # clamped stddevs do not move with rho
    d_rho = -resp * (u * u - 1.0) * (expo > SIGMA_FLOOR)
    d_omega = np.exp(log_pi) - resp
    return -norm[:, 0], np.concatenate([d_mu, d_rho, d_omega], axis=1)


def categorical_head(net, s):
    """Category probabilities the adversary assigns to score s."""
    if net.output_activation != nn.SOFTMAX:
        raise ConfigurationError("categorical head needs a softmax output layer")
    return CategoricalParams(nn.forward(net, [float(s)]))


def cat_nll(params, z_index):
    """-log p(z_index), probability floored at PROB_FLOOR."""
    idx = int(z_index)
    if idx != z_index or not 0 <= idx < params.categories:
        raise RejectedInputError("category %r outside [0, %d)" % (
            z_index, params.categories))
    return float(-math.log(max(params.probs[idx], PROB_FLOOR)))


def cat_raw_loss(net, tr, z_index):
    """Per-sample categorical NLL and its gradient w.r.t. the logits."""
    if net.output_activation != nn.SOFTMAX:
        raise ConfigurationError("cat_nll needs a softmax output layer")
    idx = np.asarray(z_index, dtype=np.float64).reshape(-1)
    if np.any(idx != np.round(idx)) or np.any(idx < 0) or \
            np.any(idx >= net.n_outputs):
        raise RejectedInputError("category index outside [0, %d)" % net.n_outputs)
    idx = idx.astype(np.int64)
    rows = np.arange(idx.size)
    logp = log_softmax(tr.logits, axis=1)[rows, idx]
    floored = logp <= math.log(PROB_FLOOR)
    losses = -np.where(floored, math.log(PROB_FLOOR), logp)
    delta = tr.output.copy()
    delta[rows, idx] -= 1.0
    delta[floored] = 0.0
    return losses, delta


#
# the adversary's loss on a batch of scores
#
def adversary_loss(r_net, scores, zs, kind):
    """Mean NLL of zs given scores under r_net.

    Returns (loss, gradient w.r.t. the adversary params, gradient w.r.t.
    each score); the last one is what gets pushed back through f."""
    check_head(r_net, kind)
    scores = np.asarray(scores, dtype=np.float64).ravel()
    zs = np.asarray(zs, dtype=np.float64).ravel()
    if scores.size == 0 or scores.size != zs.size:
        raise RejectedInputError("%d scores for %d nuisance values" % (
            scores.size, zs.size))
    loss, grad, grad_in = nn.batch_loss_and_grads(
        r_net, scores.reshape(-1, 1), zs, kind.loss_tag)
    return loss, grad, grad_in[:, 0]


def build_adversary(kind, hidden=(20, 20), activations=None, seed=0):
    """Adversary net from score to the head 'kind' needs."""
    hidden = [int(n) for n in hidden]
    if activations is None:
        activations = [nn.RELU] * len(hidden)
    if len(activations) != len(hidden):
        raise ConfigurationError("%d activations for %d hidden layers" % (
            len(activations), len(hidden)))
    return nn.init_params([1] + hidden + [kind.width],
                          list(activations) + [kind.output_activation], seed)


def categorical_entropy(probs):
    """Shannon entropy (nats) of a probability vector."""
    p = np.asarray(probs, dtype=np.float64)
    p = p[p > 0.0]
    return float(-np.sum(p * np.log(p)))
