"""
The Adam optimiser.
"""

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from spectrans.autodiff.tensor import Tensor
from spectrans.core.errors import ConfigError, ContractError


@dataclass
class AdamState:
    """
    Mutable optimiser state, with moment estimates keyed by parameter
    name.
    """

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict[str, np.ndarray])
    v: dict[str, np.ndarray] = field(default_factory=dict[str, np.ndarray])

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError("invalid_learning_rate", str(self.lr))
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError(
                "invalid_betas", f"({self.beta1}, {self.beta2})"
            )


def adam_step(params: Mapping[str, Tensor], state: AdamState) -> None:
    """
    Apply one bias-corrected Adam update to every parameter, then reset
    their gradients.

    Raises:
        ContractError: some parameter has no gradient.
    """
    missing = [k for k, p in params.items() if p.grad is None]
    if missing:
        raise ContractError(
            "missing_gradient",
            "Some parameters received no gradient.",
            meta=missing,
        )
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1 - b1**state.step
    c2 = 1 - b2**state.step
    for name, p in params.items():
        g = p.grad
        assert g is not None
        m = state.m.get(name)
        v = state.v.get(name)
        m = (1 - b1) * g if m is None else b1 * m + (1 - b1) * g
        v = (1 - b2) * g**2 if v is None else b2 * v + (1 - b2) * g**2
        state.m[name], state.v[name] = m, v
        delta = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.values = p.values - delta
        p.grad = None


def zero_grads(params: Mapping[str, Tensor]) -> None:
    for p in params.values():
        p.grad = None
