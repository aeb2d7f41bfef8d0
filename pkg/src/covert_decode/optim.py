"""Adam optimizer over named parameter dictionaries."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    """First/second moment accumulators for the trainable parameters only."""

    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def init_adam(
    params: dict,
    learning_rate: float = 1e-4,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
) -> AdamState:
    state = AdamState(learning_rate, beta1, beta2, epsilon)
    for key, value in params.items():
        state.m[key] = np.zeros_like(value)
        state.v[key] = np.zeros_like(value)
    return state


def adam_step(params: dict, grads: dict, state: AdamState):
    """One Adam update, in place on the parameter arrays.

    m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;  with bias correction
    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).

    Parameters without a gradient entry this step are left untouched, but the
    step counter always advances by exactly one.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1**state.t
    bias2 = 1.0 - b2**state.t
    for key, grad in grads.items():
        if key not in state.m:
            raise KeyError(f"gradient for unknown parameter {key!r}")
        param = params[key]
        grad = np.asarray(grad, dtype=param.dtype)
        m = state.m[key]
        v = state.v[key]
        m *= b1
        m += (1.0 - b1) * grad
        v *= b2
        v += (1.0 - b2) * grad * grad
        m_hat = m / bias1
        v_hat = v / bias2
        param -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params, state
