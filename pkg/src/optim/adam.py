"""Adam optimizer over named numpy parameter arrays."""

import logging
from dataclasses import dataclass, field

import numpy as np

from src.errors import DivergenceError

logger = logging.getLogger(__name__)


@dataclass
class OptimState:
    """Adam state for a set of named parameters.

    Moment arrays are created lazily the first time a parameter is stepped.

    Attributes:
        lr: Learning rate
        beta1: First-moment decay
        beta2: Second-moment decay
        epsilon: Denominator guard
        batch_size: Views averaged per step (informational for the loops)
        step: Number of updates applied so far
        m: First-moment estimates keyed by parameter name
        v: Second-moment estimates keyed by parameter name
    """

    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ValueError(f"Learning rate must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"Batch size must be >= 1, got {self.batch_size}")


def adam_step(
    state: OptimState,
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
) -> dict[str, np.ndarray]:
    """Apply one bias-corrected Adam update in place.

    Parameters without an entry in ``grads`` are left alone.

    Args:
        state: Optimizer state, advanced by one step
        params: Float arrays updated in place
        grads: Gradients matching ``params`` shapes

    Returns:
        ``params``

    Raises:
        DivergenceError: If a gradient contains NaN or inf (state is not advanced)
        ValueError: On shape mismatch

    Example:
        >>> state = OptimState(lr=0.1)
        >>> p = {"x": np.array([1.0])}
        >>> adam_step(state, p, {"x": np.array([2.0])})["x"]
        array([0.9])
    """
    for name, g in grads.items():
        if name not in params:
            raise ValueError(f"Gradient for unknown parameter '{name}'")
        if np.shape(g) != np.shape(params[name]):
            raise ValueError(
                f"Gradient shape {np.shape(g)} does not match parameter '{name}' "
                f"{np.shape(params[name])}"
            )
        if not np.all(np.isfinite(g)):
            raise DivergenceError(
                f"Non-finite gradient for '{name}' at step {state.step + 1}", epoch=state.step
            )

    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    step_size = state.lr / bc1

    for name, g in grads.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(params[name], dtype=np.float64)
            state.v[name] = np.zeros_like(params[name], dtype=np.float64)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        params[name] -= step_size * m / (np.sqrt(v / bc2) + state.epsilon)
    return params
