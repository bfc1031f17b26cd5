"""Adam optimizer and a finite-difference gradient checker."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError, NumericError
from .rng import make_rng
from .tensor import Array, Tensor

__all__ = ["OptimizerState", "Adam", "grad_check"]


@dataclass
class OptimizerState:
    """Moment buffers and step counter for one parameter set."""

    learning_rate: float
    step_count: int = 0
    first_moment: dict[str, Array] = field(default_factory=dict)
    second_moment: dict[str, Array] = field(default_factory=dict)


class Adam:
    """Adam with bias correction (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(
        self,
        params: dict[str, Tensor],
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        if learning_rate <= 0:
            raise InvalidArgumentError("learning_rate must be positive")
        self.params = params
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = OptimizerState(
            learning_rate=learning_rate,
            first_moment={k: np.zeros_like(p.data) for k, p in params.items()},
            second_moment={k: np.zeros_like(p.data) for k, p in params.items()},
        )

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        s = self.state
        s.step_count += 1
        t = s.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad
            m = s.first_moment[name]
            v = s.second_moment[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= s.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def grad_check(
    loss_fn: Callable[[], Tensor],
    params: dict[str, Tensor],
    h: float = 1e-5,
    seed: int = 0,
    max_coords_per_param: int = 24,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn`` closes over ``params`` and returns a scalar Tensor.  A seeded
    subset of coordinates per parameter is probed; the relative error is
    |analytic - fd| / max(1, |analytic|).
    """
    if not (0.0 < h <= 1e-3):
        raise InvalidArgumentError("h must lie in (0, 1e-3]")
    for p in params.values():
        if not np.all(np.isfinite(p.data)):
            raise NumericError("non-finite parameter")
        p.grad = None
    loss = loss_fn()
    if not np.all(np.isfinite(loss.data)):
        raise NumericError("non-finite loss")
    loss.backward()
    analytic = {
        k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for k, p in params.items()
    }

    rng = make_rng(seed)
    worst = 0.0
    for name, p in params.items():
        flat = p.data.ravel()
        n = flat.size
        if n <= max_coords_per_param:
            coords = np.arange(n)
        else:
            coords = rng.choice(n, size=max_coords_per_param, replace=False)
        for c in coords:
            original = flat[c]
            flat[c] = original + h
            up = float(loss_fn().data)
            flat[c] = original - h
            down = float(loss_fn().data)
            flat[c] = original
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NumericError("non-finite loss during finite differences")
            fd = (up - down) / (2.0 * h)
            a = analytic[name].ravel()[c]
            err = abs(a - fd) / max(1.0, abs(a))
            worst = max(worst, err)
    return worst
