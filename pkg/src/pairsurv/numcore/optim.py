"""Adam optimizer with bias correction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    """First/second moment estimates per parameter plus the step counter.

    Moment tensors always mirror the shapes of the parameters they track;
    the step counter advances by exactly one per update.
    """

    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


def adam_step(state: AdamState, params, grads, lr: float):
    """One Adam update; returns the new parameter arrays.

    The state is advanced in place; the input parameter arrays are left
    untouched.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("adam_step: parameter/gradient count mismatch")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(
                f"adam_step: parameter shape {p.shape} does not match "
                f"gradient shape {g.shape}"
            )
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**state.step
    corr2 = 1.0 - b2**state.step
    updated = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * (g * g)
        m_hat = state.m[i] / corr1
        v_hat = state.v[i] / corr2
        updated.append(p - lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return updated
