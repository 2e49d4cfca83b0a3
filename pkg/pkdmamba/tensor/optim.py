from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import NumericalError, ParameterError, ShapeError
from .core import Tensor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LRSchedule:
    """Geometric decay: lr_t = initial * factor ** (t // step_size)."""

    initial: float
    factor: float = 0.9
    step_size: int = 1

    def __post_init__(self) -> None:
        if self.initial < 0:
            raise ParameterError(f"learning rate must be >= 0, got {self.initial}")
        if not 0 < self.factor <= 1:
            raise ParameterError(f"decay factor must be in (0, 1], got {self.factor}")
        if self.step_size < 1:
            raise ParameterError(f"decay step_size must be >= 1, got {self.step_size}")

    def lr_at(self, step: int) -> float:
        return self.initial * self.factor ** (step // self.step_size)


def sgd_step(params: Sequence[Tensor], grads: Sequence[np.ndarray], lr: float) -> Sequence[Tensor]:
    """p <- p - lr * g for every (param, grad) pair."""
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} params but {len(grads)} grads")
    for param, grad in zip(params, grads):
        if grad.shape != param.shape:
            raise ShapeError(f"grad shape {grad.shape} != param shape {param.shape}")
        if lr != 0:
            param.data = param.data - np.asarray(lr * grad, dtype=param.dtype)
    return params


class SGD:
    """Stochastic gradient descent with an epoch-driven decay schedule.

    With ``momentum=0`` and no clipping each step is exactly p <- p - lr_t * g.
    """

    def __init__(
        self,
        named_params: Sequence[tuple[str, Tensor]],
        schedule: LRSchedule,
        momentum: float = 0.0,
        clip_norm: float | None = None,
    ):
        if not 0 <= momentum < 1:
            raise ParameterError(f"momentum must be in [0, 1), got {momentum}")
        self.named_params = list(named_params)
        self.schedule = schedule
        self.momentum = momentum
        self.clip_norm = clip_norm
        self.epoch = 0
        self._velocity: dict[str, np.ndarray] = {}

    @property
    def lr(self) -> float:
        return self.schedule.lr_at(self.epoch)

    def zero_grad(self) -> None:
        for _, param in self.named_params:
            param.grad = None

    def advance_epoch(self) -> None:
        self.epoch += 1

    def _collect_grads(self) -> list[np.ndarray]:
        grads = []
        bad = []
        for name, param in self.named_params:
            grad = param.grad if param.grad is not None else np.zeros_like(param.data)
            if not np.all(np.isfinite(grad)):
                bad.append(f"{name} ({int(np.count_nonzero(~np.isfinite(grad)))} non-finite)")
            grads.append(grad)
        if bad:
            logger.warning("non-finite gradients in %s", ", ".join(bad))
            raise NumericalError(f"non-finite gradients at epoch {self.epoch}: {', '.join(bad)}")
        return grads

    def step(self) -> None:
        grads = self._collect_grads()
        if self.clip_norm is not None:
            total = float(np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads)))
            if total > self.clip_norm:
                scale = self.clip_norm / total
                grads = [g * scale for g in grads]
        if self.momentum:
            updated = []
            for (name, _), grad in zip(self.named_params, grads):
                velocity = self._velocity.get(name)
                velocity = grad if velocity is None else self.momentum * velocity + grad
                self._velocity[name] = velocity
                updated.append(velocity)
            grads = updated
        sgd_step([p for _, p in self.named_params], grads, self.lr)
