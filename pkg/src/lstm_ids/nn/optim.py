"""Adam updates and global-norm gradient clipping.

    m ← β₁m + (1−β₁)g        v ← β₂v + (1−β₂)g²
    m̂ = m / (1−β₁ᵗ)          v̂ = v / (1−β₂ᵗ)
    θ ← θ − lr·m̂ / (√v̂ + ε)

``adam_step`` updates the parameter arrays and the state in place; one
training run owns both, so calls must be serialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from lstm_ids.exceptions import ConfigError, ShapeError
from lstm_ids.nn.lstm import LstmParams, ParamGrads

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-7


@dataclass(eq=False)
class OptimizerState:
    learning_rate: float
    beta1: float = BETA1
    beta2: float = BETA2
    epsilon: float = EPSILON
    step: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        problems = []
        if not self.learning_rate > 0:
            problems.append(f"learning_rate must be > 0, got {self.learning_rate}")
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            if not 0 < value < 1:
                problems.append(f"{name} must lie in (0, 1), got {value}")
        if not self.epsilon > 0:
            problems.append(f"epsilon must be > 0, got {self.epsilon}")
        if problems:
            raise ConfigError(problems)

    @classmethod
    def for_params(cls, params: LstmParams, learning_rate: float,
                   **hyper) -> "OptimizerState":
        state = cls(learning_rate=learning_rate, **hyper)
        state.m = [np.zeros_like(a) for a in params.arrays()]
        state.v = [np.zeros_like(a) for a in params.arrays()]
        return state


def _update(theta: np.ndarray, g: np.ndarray, m: np.ndarray, v: np.ndarray,
            state: OptimizerState) -> None:
    m *= state.beta1
    m += (1.0 - state.beta1) * g
    v *= state.beta2
    v += (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1 ** state.step)
    v_hat = v / (1.0 - state.beta2 ** state.step)
    theta -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)


def adam_step(params: LstmParams, grads: ParamGrads,
              state: OptimizerState) -> Tuple[LstmParams, OptimizerState]:
    """One bias-corrected Adam update of every parameter array."""
    adam_update(params.arrays(), grads.arrays(), state)
    return params, state


def adam_update(thetas: List[np.ndarray], gs: List[np.ndarray],
                state: OptimizerState) -> None:
    """Adam over parallel lists of parameter and gradient arrays, in place."""
    if not state.m:
        state.m = [np.zeros_like(a) for a in thetas]
        state.v = [np.zeros_like(a) for a in thetas]
    if len(gs) != len(thetas) or len(state.m) != len(thetas):
        raise ShapeError("Gradients or optimizer state do not match the parameter set")
    for theta, g in zip(thetas, gs):
        if theta.shape != g.shape:
            raise ShapeError(f"Gradient shape {g.shape} does not match parameter {theta.shape}")
    state.step += 1
    for theta, g, m, v in zip(thetas, gs, state.m, state.v):
        _update(theta, g, m, v, state)


def global_norm(grads: ParamGrads) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.arrays())))


def clip_by_global_norm(grads: ParamGrads, max_norm: Optional[float]) -> float:
    """Scale ``grads`` in place so their global norm is at most ``max_norm``.

    Returns the norm before clipping.
    """
    norm = global_norm(grads)
    if max_norm is not None and norm > max_norm:
        scale = max_norm / norm
        for g in grads.arrays():
            g *= scale
    return norm
