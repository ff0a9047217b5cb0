"""Bias-corrected Adam over named parameter tensors."""

import logging
from dataclasses import dataclass, field

import numpy as np

from ganaug.core.ops import Tensor
from ganaug.errors import DimensionError, NonFiniteError

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """First/second moment estimates per parameter name, plus the step counter."""
    m: dict[str, Tensor] = field(default_factory=dict)
    v: dict[str, Tensor] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def zeros_like(cls, params: dict[str, Tensor]) -> "AdamState":
        return cls(
            m={name: np.zeros_like(p) for name, p in params.items()},
            v={name: np.zeros_like(p) for name, p in params.items()},
            t=0,
        )


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, Tensor],
    state: AdamState,
    lr: float = 2e-4,
    beta1: float = 0.5,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[dict[str, Tensor], AdamState]:
    """One Adam update. Inputs are left untouched; new dicts are returned.

    Raises:
        DimensionError: If params, grads and moments disagree in names or shapes.
        NonFiniteError: If a gradient contains NaN/Inf (names the parameter).
    """
    if set(grads) != set(params):
        raise DimensionError(
            f"gradient names {sorted(grads)} do not match parameters {sorted(params)}"
        )
    if state.t < 0:
        raise DimensionError(f"Adam step counter must be >= 0, got {state.t}")

    t = state.t + 1
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t

    new_params: dict[str, Tensor] = {}
    new_m: dict[str, Tensor] = {}
    new_v: dict[str, Tensor] = {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise DimensionError(f"gradient for {name} has shape {g.shape}, expected {p.shape}")
        if not np.isfinite(g).all():
            raise NonFiniteError(f"gradient of {name}")
        m_prev = state.m.get(name, np.zeros_like(p))
        v_prev = state.v.get(name, np.zeros_like(p))
        if m_prev.shape != p.shape or v_prev.shape != p.shape:
            raise DimensionError(f"Adam moments for {name} do not match shape {p.shape}")

        m = beta1 * m_prev + (1.0 - beta1) * g
        v = beta2 * v_prev + (1.0 - beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        new_params[name] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[name] = m
        new_v[name] = v

    return new_params, AdamState(m=new_m, v=new_v, t=t)
