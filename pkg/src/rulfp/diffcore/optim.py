from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from rulfp.diffcore.params import ModelParams
from rulfp.errors import ConfigurationError, NumericalError


@dataclass
class OptimizerState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_update(params: ModelParams, grads: dict, state: OptimizerState) -> ModelParams:
    """Apply one bias-corrected Adam step.

    Returns a new :class:`ModelParams`; ``state`` is advanced in place.
    """
    for name in params:
        if name not in grads:
            raise ConfigurationError(f"no gradient for parameter {name!r}")
        if np.shape(grads[name]) != params[name].shape:
            raise ConfigurationError(
                f"gradient shape {np.shape(grads[name])} != parameter shape {params[name].shape} for {name!r}")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    out = params.copy()
    for name in params:
        g = np.asarray(grads[name], dtype=np.float64)
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(g)
            v = np.zeros_like(g)
        else:
            v = state.v[name]
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.m[name], state.v[name] = m, v
        update = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        new = params[name] - update
        if not np.all(np.isfinite(new)):
            raise NumericalError(f"Adam produced non-finite values in {name!r}")
        out[name] = new
    return out
