"""Deterministic bias-corrected Adam over flat parameter tuples."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import ModelParams


@dataclass(frozen=True)
class OptState:
    """First/second moment accumulators mirroring ModelParams.flat()."""

    m: tuple
    v: tuple
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: ModelParams) -> "OptState":
        zeros = tuple(np.zeros_like(a) for a in params.flat())
        return cls(m=zeros, v=tuple(np.zeros_like(a) for a in params.flat()))


def adam_step(params: ModelParams, grads, state: OptState, lr: float):
    """One Adam update; returns (new params, new state).

    Aborts with a ValueError if any gradient entry is non-finite.
    """
    flat = params.flat()
    grads = tuple(np.asarray(g, dtype=np.float64) for g in grads)
    if len(grads) != len(flat):
        raise ValueError(f"expected {len(flat)} gradient arrays, got {len(grads)}")
    for i, (p, g) in enumerate(zip(flat, grads)):
        if p.shape != g.shape:
            raise ValueError(f"gradient {i} shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient entries in parameter {i}; step aborted")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(flat, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        new_m.append(m)
        new_v.append(v)
        new_p.append(p - lr * m_hat / (np.sqrt(v_hat) + state.eps))
    next_state = OptState(tuple(new_m), tuple(new_v), t, b1, b2, state.eps)
    return params.replace_flat(new_p), next_state
