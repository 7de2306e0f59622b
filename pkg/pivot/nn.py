# Part of the pivotal adversarial training library (pivot)
#
# It is licensed under a liberal MIT/X11 style license;
# see the file "LICENSE" in this directory for details.

"""Small dense-network engine with exact analytic gradients.

A DenseNet is an immutable value: layer sizes, one activation tag per
layer, and a flat float64 parameter vector.  The flat ordering is fixed
and is what checkpoints store: for each layer in order, the weight matrix
of shape (in, out) in row-major order, followed by the out biases.

Only the layer and loss zoo the experiments need is supported:
activations tanh, relu, sigmoid, linear, exponential and softmax (the last
two only in the output layer), and the losses bce, mdn_nll and cat_nll."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.special import expit, softmax

from pivot.errors import (ConfigurationError, NumericalError,
                          RejectedInputError)

log = logging.getLogger(__name__)

TANH = "tanh"
RELU = "relu"
SIGMOID = "sigmoid"
LINEAR = "linear"
EXPONENTIAL = "exponential"
SOFTMAX = "softmax"
ACTIVATIONS = (TANH, RELU, SIGMOID, LINEAR, EXPONENTIAL, SOFTMAX)
# adversary heads only
OUTPUT_ONLY = (EXPONENTIAL, SOFTMAX)

BCE = "bce"
MDN_NLL = "mdn_nll"
CAT_NLL = "cat_nll"
LOSSES = (BCE, MDN_NLL, CAT_NLL)

CHECKPOINT_MAGIC = "pivot-checkpoint"
CHECKPOINT_VERSION = 1

# A gradient shares the length and ordering of the params it belongs to.
GradientVector = np.ndarray


def param_count(layer_sizes):
    """Length of the flat parameter vector for the given layer sizes."""
    return sum(n_in * n_out + n_out
               for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]))


@dataclass(frozen=True, eq=False)
class DenseNet(object):
    """Feed-forward network.

    layer_sizes includes the input width, so a net with L layers has L+1
    sizes and L activation tags."""
    layer_sizes: Tuple[int, ...]
    activations: Tuple[str, ...]
    params: np.ndarray

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        tags = tuple(str(a) for a in self.activations)
        if len(sizes) < 2:
            raise RejectedInputError("empty architecture: %r" % (sizes,))
        if any(n < 1 for n in sizes):
            raise RejectedInputError("layer sizes must be positive: %r" % (sizes,))
        if len(tags) != len(sizes) - 1:
            raise RejectedInputError(
                "%d activation tags for %d layers" % (len(tags), len(sizes) - 1))
        for i, tag in enumerate(tags):
            if tag not in ACTIVATIONS:
                raise RejectedInputError("unknown activation %r" % tag)
            if tag in OUTPUT_ONLY and i != len(tags) - 1:
                raise RejectedInputError(
                    "%s is only allowed in the output layer" % tag)
        params = np.array(self.params, dtype=np.float64).ravel()
        if params.size != param_count(sizes):
            raise RejectedInputError("expected %d params, got %d" % (
                param_count(sizes), params.size))
        params.flags.writeable = False
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "activations", tags)
        object.__setattr__(self, "params", params)

    @property
    def n_layers(self):
        return len(self.activations)

    @property
    def n_inputs(self):
        return self.layer_sizes[0]

    @property
    def n_outputs(self):
        return self.layer_sizes[-1]

    @property
    def output_activation(self):
        return self.activations[-1]

    def layers(self):
        """Yield (W, b) views into params, W shaped (in, out)."""
        offset = 0
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            W = self.params[offset:offset + n_in * n_out].reshape(n_in, n_out)
            offset += n_in * n_out
            b = self.params[offset:offset + n_out]
            offset += n_out
            yield W, b

    def with_params(self, params):
        """Same architecture, new parameters."""
        return DenseNet(self.layer_sizes, self.activations, params)

    def same_architecture(self, other):
        return (self.layer_sizes == other.layer_sizes and
                self.activations == other.activations)

    def __eq__(self, other):
        if not isinstance(other, DenseNet):
            return NotImplemented
        return (self.same_architecture(other) and
                np.array_equal(self.params, other.params))

    __hash__ = None


def init_params(layer_sizes, activations, seed):
    """Glorot-uniform weights and zero biases, deterministic under seed."""
    sizes = [int(n) for n in layer_sizes]
    if len(sizes) < 2:
        raise RejectedInputError("empty architecture: %r" % (sizes,))
    rng = np.random.default_rng(seed)
    chunks = []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (n_in + n_out))
        chunks.append(rng.uniform(-bound, bound, size=n_in * n_out))
        chunks.append(np.zeros(n_out))
    return DenseNet(tuple(sizes), tuple(activations), np.concatenate(chunks))


#
# forward pass
#
def _activate(tag, a):
    if tag == TANH:
        return np.tanh(a)
    if tag == RELU:
        return np.maximum(a, 0.0)
    if tag == SIGMOID:
        return expit(a)
    if tag == LINEAR:
        return a
    if tag == EXPONENTIAL:
        return np.exp(a)
    return softmax(a, axis=1)


def _derivative(tag, a, h):
    """Elementwise dh/da for hidden-capable activations."""
    if tag == TANH:
        return 1.0 - h * h
    if tag == RELU:
        return (a > 0.0).astype(np.float64)
    if tag == SIGMOID:
        return h * (1.0 - h)
    if tag == EXPONENTIAL:
        return h
    return np.ones_like(a)


@dataclass(frozen=True)
class Trace(object):
    """Everything the backward pass needs: per-layer pre-activations and
    activations (activations[0] is the input batch)."""
    pre: List[np.ndarray]
    post: List[np.ndarray]

    @property
    def output(self):
        return self.post[-1]

    @property
    def logits(self):
        return self.pre[-1]


def _as_batch(net, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != net.n_inputs:
        raise RejectedInputError("input width %s does not match net input %d" % (
            X.shape[1:] or X.shape, net.n_inputs))
    return X


def trace(net, X):
    """Batched forward pass keeping intermediates.  X is (n, n_inputs)."""
    X = _as_batch(net, X)
    pre, post = [], [X]
    with np.errstate(over="ignore", invalid="ignore"):
        for i, (W, b) in enumerate(net.layers()):
            a = post[-1] @ W + b
            h = _activate(net.activations[i], a)
            if not (np.all(np.isfinite(a)) and np.all(np.isfinite(h))):
                raise NumericalError("non-finite activation", layer=i)
            pre.append(a)
            post.append(h)
    return Trace(pre, post)


def forward_batch(net, X):
    """Row-wise forward pass, returns (n, n_outputs)."""
    return trace(net, X).output


def forward(net, x):
    """Forward pass for a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise RejectedInputError("forward expects a single input vector")
    return forward_batch(net, x)[0]


#
# backward pass
#
def output_delta(net, tr, upstream):
    """Turn dL/d(output) into dL/d(final pre-activation)."""
    upstream = np.asarray(upstream, dtype=np.float64).reshape(tr.output.shape)
    tag = net.output_activation
    if tag == SOFTMAX:
        out = tr.output
        return out * (upstream - np.sum(upstream * out, axis=1, keepdims=True))
    return upstream * _derivative(tag, tr.logits, tr.output)


def backward(net, tr, delta):
    """Backpropagate delta = dL/d(final pre-activation).

    Returns the flat parameter gradient and dL/d(input)."""
    delta = np.asarray(delta, dtype=np.float64)
    layers = list(net.layers())
    grads = [None] * net.n_layers
    for i in reversed(range(net.n_layers)):
        W, _ = layers[i]
        grads[i] = ((tr.post[i].T @ delta).ravel(), delta.sum(axis=0))
        delta_in = delta @ W.T
        if i > 0:
            delta = delta_in * _derivative(net.activations[i - 1],
                                           tr.pre[i - 1], tr.post[i])
    flat = np.concatenate([part for pair in grads for part in pair])
    return flat, delta_in


#
# losses on the output layer
#
def _bce(net, tr, y):
    if net.output_activation != SIGMOID or net.n_outputs != 1:
        raise ConfigurationError("bce needs a single sigmoid output")
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if np.any((y != 0.0) & (y != 1.0)):
        raise RejectedInputError("bce targets must be 0 or 1")
    a = tr.logits[:, 0]
    # log(1 + e^a) - y*a is -log p(y|x) written on the logit
    losses = np.logaddexp(0.0, a) - y * a
    delta = (expit(a) - y).reshape(-1, 1)
    return losses, delta


def sample_losses(net, tr, targets, loss_tag):
    """Per-sample losses and per-sample dL/d(final pre-activation)."""
    if loss_tag == BCE:
        return _bce(net, tr, targets)
    # the adversary module owns the likelihood heads
    from pivot import adversary
    if loss_tag == MDN_NLL:
        return adversary.mdn_raw_loss(net, tr.output, targets)
    if loss_tag == CAT_NLL:
        return adversary.cat_raw_loss(net, tr, targets)
    raise RejectedInputError("unknown loss %r" % loss_tag)


def batch_loss_and_grads(net, X, targets, loss_tag):
    """Mean loss over a batch, its gradient w.r.t. params and w.r.t. inputs."""
    tr = trace(net, X)
    n = tr.output.shape[0]
    if n == 0:
        raise RejectedInputError("empty batch")
    if len(targets) != n:
        raise RejectedInputError("%d targets for %d inputs" % (len(targets), n))
    with np.errstate(over="ignore", invalid="ignore"):
        losses, delta = sample_losses(net, tr, targets, loss_tag)
        loss = float(np.mean(losses))
    if not (np.isfinite(loss) and np.all(np.isfinite(delta))):
        raise NumericalError("non-finite %s loss" % loss_tag,
                             layer=net.n_layers - 1)
    grad, grad_in = backward(net, tr, delta / n)
    return loss, grad, grad_in


def loss_and_grad(net, batch, loss_tag):
    """Mean loss over a batch of (input, target) pairs and its exact gradient."""
    batch = list(batch)
    if not batch:
        raise RejectedInputError("empty batch")
    X = np.array([np.asarray(inp, dtype=np.float64).ravel() for inp, _ in batch])
    targets = np.array([t for _, t in batch])
    loss, grad, _ = batch_loss_and_grads(net, X, targets, loss_tag)
    return loss, grad


def batch_loss(net, X, targets, loss_tag):
    """Mean loss only."""
    tr = trace(net, X)
    with np.errstate(over="ignore", invalid="ignore"):
        losses, _ = sample_losses(net, tr, targets, loss_tag)
    return float(np.mean(losses))


#
# finite-difference verification
#
def _relu_signs(net, X):
    tr = trace(net, X)
    return [tr.pre[i] > 0.0 for i, tag in enumerate(net.activations)
            if tag == RELU]


def numerical_gradient(fun, params, h=1e-5):
    """Central differences of a scalar function of a flat vector."""
    params = np.array(params, dtype=np.float64)
    grad = np.empty_like(params)
    for i in range(params.size):
        old = params[i]
        params[i] = old + h
        up = fun(params)
        params[i] = old - h
        down = fun(params)
        params[i] = old
        grad[i] = (up - down) / (2.0 * h)
    return grad


def relative_error(analytic, numeric, floor=1e-4):
    """Coordinate-wise |a - n| / max(|a| + |n|, floor)."""
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    return np.abs(analytic - numeric) / np.maximum(
        np.abs(analytic) + np.abs(numeric), floor)


def gradient_check(net, X, targets, loss_tag, h=1e-5):
    """Largest relative error between analytic and central-difference gradients.

    Coordinates whose +h or -h perturbation flips a relu unit are skipped:
    the loss is not differentiable across the kink."""
    X = _as_batch(net, X)
    _, analytic, _ = batch_loss_and_grads(net, X, targets, loss_tag)
    base = _relu_signs(net, X)
    worst = 0.0
    params = np.array(net.params)
    for i in range(params.size):
        values = []
        kink = False
        for step in (h, -h):
            probe = params.copy()
            probe[i] += step
            moved = net.with_params(probe)
            if any(np.any(a != b) for a, b in zip(base, _relu_signs(moved, X))):
                kink = True
                break
            values.append(batch_loss(moved, X, targets, loss_tag))
        if kink:
            continue
        numeric = (values[0] - values[1]) / (2.0 * h)
        worst = max(worst, float(relative_error(analytic[i], numeric)))
    return worst


#
# checkpoints
#
def save_checkpoint(net, path, head=None):
    """Write architecture, optional head descriptor and params as text."""
    lines = ["%s %d" % (CHECKPOINT_MAGIC, CHECKPOINT_VERSION),
             "layers " + " ".join(str(n) for n in net.layer_sizes),
             "activations " + " ".join(net.activations)]
    if head is not None:
        lines.append("head %s" % head)
    lines.append("params %d" % net.params.size)
    lines.extend(repr(float(p)) for p in net.params)
    with open(str(path), "w") as handle:
        handle.write("\n".join(lines) + "\n")
    log.debug("wrote checkpoint %s", path)


def load_checkpoint(path):
    """Read a checkpoint; returns (net, head string or None)."""
    with open(str(path), "r") as handle:
        lines = handle.read().splitlines()
    try:
        magic, version = lines[0].split()
        if magic != CHECKPOINT_MAGIC or int(version) != CHECKPOINT_VERSION:
            raise ValueError("not a version %d checkpoint" % CHECKPOINT_VERSION)
        fields = {}
        pos = 1
        while not lines[pos].startswith("params "):
            key, _, value = lines[pos].partition(" ")
            fields[key] = value
            pos += 1
        count = int(lines[pos].split()[1])
        params = np.array([float(v) for v in lines[pos + 1:pos + 1 + count]])
        if params.size != count:
            raise ValueError("truncated parameter block")
        sizes = tuple(int(n) for n in fields["layers"].split())
        tags = tuple(fields["activations"].split())
    except (IndexError, KeyError, ValueError) as e:
        raise ConfigurationError("bad checkpoint %s: %s" % (path, e))
    return DenseNet(sizes, tags, params), fields.get("head")
