"""Adam variant with a running coordinatewise maximum of the corrected
second moment (the max enters the denominator, so the effective step size
never grows back).

Update rule, per step t = 1, 2, ...:

    m <- beta1*m + (1-beta1)*g          m_hat = m / (1 - beta1^t)
    v <- beta2*v + (1-beta2)*g^2        v_hat = max(v_hat_prev, v / (1 - beta2^t))
    w <- w - eta_t * m_hat / (sqrt(v_hat) + eps)

eta_t is the fixed learning rate by default; the "inv_sqrt" schedule uses
eta_t = lr / sqrt(t) instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import ParameterSet

SCHEDULES = ("fixed", "inv_sqrt")


@dataclass
class AdamState:
    step: int
    m: np.ndarray
    v: np.ndarray
    v_hat: np.ndarray
    beta1: float = 0.9
    beta2: float = 0.99
    lr: float = 0.001
    eps: float = 1e-8
    schedule: str = "fixed"

    def __post_init__(self):
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown lr schedule {self.schedule!r}")


def fresh_state(
    n_params: int,
    beta1: float = 0.9,
    beta2: float = 0.99,
    lr: float = 0.001,
    eps: float = 1e-8,
    schedule: str = "fixed",
) -> AdamState:
    """Zeroed moments at t = 0."""
    zeros = np.zeros(n_params)
    return AdamState(
        step=0,
        m=zeros.copy(),
        v=zeros.copy(),
        v_hat=zeros.copy(),
        beta1=beta1,
        beta2=beta2,
        lr=lr,
        eps=eps,
        schedule=schedule,
    )


def adam_step_flat(
    state: AdamState, flat: np.ndarray, grad: np.ndarray
) -> tuple[AdamState, np.ndarray]:
    """One update on a flat parameter vector; returns new (state, params)."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != flat.shape:
        raise ValueError(f"gradient shape {grad.shape} != parameter shape {flat.shape}")
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = np.maximum(state.v_hat, v / (1.0 - state.beta2**t))
    if state.schedule == "inv_sqrt":
        eta = state.lr / np.sqrt(t)
    else:
        eta = state.lr
    new_flat = flat - eta * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(
        step=t,
        m=m,
        v=v,
        v_hat=v_hat,
        beta1=state.beta1,
        beta2=state.beta2,
        lr=state.lr,
        eps=state.eps,
        schedule=state.schedule,
    )
    return new_state, new_flat


def adam_step(
    state: AdamState, params: ParameterSet, grad: np.ndarray
) -> tuple[AdamState, ParameterSet]:
    """One update of a ParameterSet; inputs are not mutated."""
    new_state, new_flat = adam_step_flat(state, params.flat, grad)
    return new_state, ParameterSet(params.spec, new_flat)
