"""Adam and a cyclical learning-rate schedule with a decaying ceiling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError

POLICIES = ("decay", "triangular")


@dataclass(frozen=True)
class CyclicalSchedule:
    """Triangular cycles between ``min_lr`` and a ceiling.

    With ``policy="decay"`` the ceiling falls linearly from ``max_lr`` at
    t=0 towards ``min_lr`` at ``total_iters``; ``"triangular"`` keeps it at
    ``max_lr``.
    """

    min_lr: float = 1e-4
    max_lr: float = 1e-3
    step_size: int = 2000
    total_iters: int = 60000
    policy: str = "decay"

    def __post_init__(self):
        if not 0 < self.min_lr <= self.max_lr:
            raise ConfigError(f"need 0 < min_lr <= max_lr, got {self.min_lr}, {self.max_lr}")
        if self.step_size < 1 or self.total_iters < 1:
            raise ConfigError("step_size and total_iters must be positive")
        if self.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {POLICIES}, got {self.policy!r}")


def triangle(t, step_size):
    """0 at multiples of ``2*step_size``, 1 at odd multiples of ``step_size``."""
    cycle = np.floor(1 + t / (2 * step_size))
    x = abs(t / step_size - 2 * cycle + 1)
    return max(0.0, 1.0 - x)


def lr_at(t, sched=None):
    sched = sched or CyclicalSchedule()
    if not 0 <= t < sched.total_iters:
        raise ConfigError(f"iteration {t} outside [0, {sched.total_iters})")
    ceiling = sched.max_lr
    if sched.policy == "decay":
        ceiling = sched.max_lr - (sched.max_lr - sched.min_lr) * t / sched.total_iters
    return float(sched.min_lr + (ceiling - sched.min_lr) * triangle(t, sched.step_size))


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params, grads, state, lr):
    """One Adam update. Returns new ``(params, state)``; the inputs are not modified."""
    if params.keys() != grads.keys():
        raise ShapeError("params and grads have different names")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_params, m_new, v_new = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        if np.shape(g) != np.shape(p):
            raise ShapeError(f"gradient for {name} has shape {np.shape(g)}, parameter {np.shape(p)}")
        m = state.m.get(name, np.zeros_like(p))
        v = state.v.get(name, np.zeros_like(p))
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_params[name] = (p - lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype, copy=False)
        m_new[name], v_new[name] = m, v
    return new_params, AdamState(m_new, v_new, t, b1, b2, state.eps)
