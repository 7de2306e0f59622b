# Part of the pivotal adversarial training library (pivot)
#
# It is licensed under a liberal MIT/X11 style license;
# see the file "LICENSE" in this directory for details.

"""First-order optimizers over a DenseNet's flat parameter vector.

Optimizer states are values: optimizer_step returns a new net and a new
state and leaves its arguments alone."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from pivot.errors import NumericalError, RejectedInputError

SGD = "sgd"
ADAM = "adam"
OPTIMIZERS = (SGD, ADAM)

DESCEND = "descend"
ASCEND = "ascend"


@dataclass(frozen=True, eq=False)
class OptimizerState(object):
    """Learning rate, Adam moment accumulators and the step counter."""
    kind: str
    learning_rate: float
    first_moment: Optional[np.ndarray] = None
    second_moment: Optional[np.ndarray] = None
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.kind not in OPTIMIZERS:
            raise RejectedInputError("unknown optimizer %r" % self.kind)
        if not self.learning_rate > 0.0:
            raise RejectedInputError("learning rate must be positive")
        if self.kind == ADAM and (self.first_moment is None or
                                  self.second_moment is None):
            raise RejectedInputError("adam state needs moment accumulators")


def new_optimizer(kind, learning_rate, n_params):
    """Fresh state for a net with n_params parameters."""
    if kind == ADAM:
        return OptimizerState(kind, float(learning_rate),
                              np.zeros(n_params), np.zeros(n_params))
    return OptimizerState(kind, float(learning_rate))


def optimizer_step(state, net, grad, direction=DESCEND):
    """Apply one update; returns (new net, new state).

    'ascend' negates the gradient before the usual descent update."""
    grad = np.asarray(grad, dtype=np.float64).ravel()
    if grad.size != net.params.size:
        raise RejectedInputError("gradient length %d, params %d" % (
            grad.size, net.params.size))
    if state.kind == ADAM and state.first_moment.size != grad.size:
        raise RejectedInputError("optimizer state belongs to another net")
    if not np.all(np.isfinite(grad)):
        raise NumericalError("non-finite gradient")
    if direction == ASCEND:
        grad = -grad
    elif direction != DESCEND:
        raise RejectedInputError("unknown direction %r" % direction)

    t = state.step_count + 1
    if state.kind == SGD:
        return (net.with_params(net.params - state.learning_rate * grad),
                replace(state, step_count=t))

    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * (grad * grad)
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    params = net.params - state.learning_rate * m_hat / (np.sqrt(v_hat) +
                                                         state.epsilon)
    return (net.with_params(params),
            replace(state, first_moment=m, second_moment=v, step_count=t))
