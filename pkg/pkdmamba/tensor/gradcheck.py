from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .core import Tensor, backward, no_grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / (||a|| + ||n||), zero when both vanish."""
    denom = float(np.linalg.norm(analytic) + np.linalg.norm(numeric))
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric)) / denom


def numeric_gradient(fn: Callable[[], Tensor], param: Tensor, h: float = 1e-5) -> np.ndarray:
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    out = grad.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + h
            plus = fn().item()
            flat[i] = saved - h
            minus = fn().item()
            flat[i] = saved
            out[i] = (plus - minus) / (2.0 * h)
    return grad


def check_gradients(
    fn: Callable[[], Tensor],
    params: Sequence[Tensor] | Sequence[tuple[str, Tensor]],
    h: float = 1e-5,
) -> dict[str, float]:
    """Compare tape gradients of the scalar ``fn()`` with central differences.

    ``params`` may be bare tensors or (name, tensor) pairs; the result maps each name
    (or positional index) to its relative error.
    """
    named = [(str(i), p) if isinstance(p, Tensor) else (p[0], p[1]) for i, p in enumerate(params)]
    for _, param in named:
        param.grad = None
    backward(fn())
    errors = {}
    for name, param in named:
        analytic = param.grad if param.grad is not None else np.zeros_like(param.data)
        errors[name] = relative_error(analytic, numeric_gradient(fn, param, h))
    return errors
