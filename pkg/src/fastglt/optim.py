"""Adam optimizer for one parameter tensor, with mask-aware updates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NonFiniteGradient(FloatingPointError):
    """Raised when a gradient contains NaN or infinity."""


@dataclass
class AdamState:
    """First/second moment accumulators and step counter for one tensor."""

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)

    @staticmethod
    def for_param(param: np.ndarray, lr: float = 0.001, beta1: float = 0.9,
                  beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps,
                         m=np.zeros_like(param), v=np.zeros_like(param))

    def reset_entries(self, flat_indices: np.ndarray) -> None:
        """Zero the moments at the given flat positions (regrown entries)."""
        self.m.reshape(-1)[flat_indices] = 0.0
        self.v.reshape(-1)[flat_indices] = 0.0


def adam_step(state: AdamState, param: np.ndarray, grad: np.ndarray,
              binary_mask: np.ndarray | None = None,
              name: str = "param") -> np.ndarray:
    """One in-place Adam update; only unmasked entries move when a binary
    mask is active. Returns the updated parameter array."""
    if not np.isfinite(grad).all():
        bad = int(np.count_nonzero(~np.isfinite(grad)))
        raise NonFiniteGradient(
            f"{bad} non-finite gradient entries for {name!r} at step "
            f"{state.t + 1}")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    step = state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    if binary_mask is not None:
        step = step * binary_mask
    param -= step
    return param
