"""
Zero-order-hold and Euler discretization of a diagonal state matrix.

For a diagonal A the matrix exponential is elementwise:

    Ā = exp(Δ·A)
    B̄ = (exp(Δ·A) - 1) / A · B        (A = 0  ->  B̄ = Δ·B)
"""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError
from ..tensor import Function, Tensor, exp
from ..tensor.core import as_tensor


def _zoh_factor(delta: np.ndarray, A: np.ndarray) -> np.ndarray:
    """(exp(Δ·A) - 1) / A with the series limit Δ where A == 0."""
    dA = delta * A
    zero = A == 0
    safe_A = np.where(zero, 1.0, A)
    return np.where(zero, delta * np.ones_like(dA), np.expm1(dA) / safe_A).astype(dA.dtype, copy=False)


def discretize_zoh(A, B, delta) -> tuple[np.ndarray, np.ndarray]:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if np.any(delta <= 0):
        raise ParameterError(f"step size must be > 0, got {delta}")
    return np.exp(delta * A), _zoh_factor(delta, A) * B


def discretize_euler(A, B, delta) -> tuple[np.ndarray, np.ndarray]:
    """Exact Ā with the first-order B̄ = Δ·B."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if np.any(delta <= 0):
        raise ParameterError(f"step size must be > 0, got {delta}")
    return np.exp(delta * A), delta * B


class ZohFactor(Function):
    def forward(self, delta, A):
        self.delta, self.A = delta, A
        self.exp_dA = np.exp(delta * A)
        return _zoh_factor(delta, A)

    def backward(self, grad):
        delta, A, e = self.delta, self.A, self.exp_dA
        dA = delta * A
        zero = A == 0
        safe_A = np.where(zero, 1.0, A)
        d_A = np.where(zero, 0.5 * delta * delta, (dA * e - np.expm1(dA)) / (safe_A * safe_A))
        return grad * e, grad * d_A


def discretize_tensors(delta: Tensor, A: Tensor, B_k: Tensor, method: str = "zoh") -> tuple[Tensor, Tensor]:
    """Differentiable discretization: delta [..,1], A [N], B_k [..,N] -> (Ā [..,N], B̄ [..,N])."""
    delta, A = as_tensor(delta), as_tensor(A)
    abar = exp(delta * A)
    if method == "zoh":
        bbar = ZohFactor.apply(delta, A) * B_k
    elif method == "euler":
        bbar = delta * B_k
    else:
        raise ParameterError(f"unknown discretization {method!r}")
    return abar, bbar
