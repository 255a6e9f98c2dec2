"""RMSProp with zero momentum, the optimizer the training loop uses."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import OptimizerError


@dataclass
class OptimizerState:
    """Per-parameter running mean-square accumulators plus hyperparameters.

    Accumulators are created lazily and stay non-negative by construction.
    """

    learning_rate: float = 5e-5
    decay: float = 0.9
    epsilon: float = 1e-8
    acc: dict[str, np.ndarray] = field(default_factory=dict)


def rmsprop_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray | None],
                 state: OptimizerState) -> dict[str, np.ndarray]:
    """One update: acc <- decay*acc + (1-decay)*g^2; p <- p - lr*g/(sqrt(acc)+eps).

    Parameters are updated in place and the same mapping is returned. A
    missing or ``None`` gradient decays the accumulator and leaves the
    parameter untouched. Non-finite gradients abort with the parameter name.
    """
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            if name in state.acc:
                state.acc[name] *= p.dtype.type(state.decay)
            continue
        if not np.isfinite(g).all():
            raise OptimizerError(f"non-finite gradient for parameter '{name}'")
        if g.shape != p.shape:
            raise OptimizerError(
                f"gradient shape {g.shape} does not match parameter '{name}' {p.shape}")
        acc = state.acc.get(name)
        if acc is None:
            acc = np.zeros_like(p)
            state.acc[name] = acc
        kernels.rmsprop_update(p, g.astype(p.dtype, copy=False), acc,
                               state.learning_rate, state.decay, state.epsilon)
    return params
