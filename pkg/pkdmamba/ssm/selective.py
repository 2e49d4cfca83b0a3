"""
Selective (input-dependent) state-space layer.

Per step k and channel d, with a shared diagonal A of size N:

    Δ_k = softplus(x_k · w_Δ + b_Δ)          one scalar per step
    B_k = x_k · B_proj,   C_k = x_k · C_proj
    h_k[d] = Ā_k ⊙ h_{k-1}[d] + B̄_k · x_k[d]
    y_k[d] = C_k · h_k[d] + D[d] · x_k[d]
"""

from __future__ import annotations

import logging

import numpy as np

from ..errors import NumericalError, ShapeError
from ..tensor import Function, Module, Tensor, exp, matmul, parameter, softplus
from ..tensor.core import as_tensor
from .discretize import discretize_tensors
from .scan import linear_scan

logger = logging.getLogger(__name__)

DELTA_MIN = 1e-3
DELTA_MAX = 1e-1


def inverse_softplus(y: np.ndarray) -> np.ndarray:
    return y + np.log(-np.expm1(-y))


class SsmParams(Module):
    """Trainable parameters of one selective SSM.

    ``A_log`` stores log(-A) so A = -exp(A_log) stays negative; the initial A is
    -(1, 2, ..., N). ``B_bias``/``C_bias`` are optional fixed offsets, used to pin the
    layer to a time-invariant system.
    """

    def __init__(self, d_inner: int, state_dim: int, rng: np.random.Generator, dtype=None):
        super().__init__()
        self.d_inner = d_inner
        self.state_dim = state_dim
        bound = 1.0 / np.sqrt(d_inner)
        self.A_log = parameter(np.log(np.arange(1, state_dim + 1, dtype=np.float64)), dtype)
        self.delta_w = parameter(rng.uniform(-bound, bound, (d_inner, 1)), dtype)
        delta0 = np.exp(rng.uniform(np.log(DELTA_MIN), np.log(DELTA_MAX), (1,)))
        self.delta_bias = parameter(inverse_softplus(delta0), dtype)
        self.B_proj = parameter(rng.uniform(-bound, bound, (d_inner, state_dim)), dtype)
        self.C_proj = parameter(rng.uniform(-bound, bound, (d_inner, state_dim)), dtype)
        self.D = parameter(np.ones(d_inner), dtype)
        self.B_bias: np.ndarray | None = None
        self.C_bias: np.ndarray | None = None

    @property
    def A(self) -> Tensor:
        return -exp(self.A_log)

    def freeze_lti(self, delta: float, B, C) -> None:
        """Zero the input projections so Δ, B and C no longer depend on the input."""
        self.delta_w.data = np.zeros_like(self.delta_w.data)
        self.delta_bias.data = np.asarray(inverse_softplus(np.array([delta])), dtype=self.delta_bias.dtype)
        self.B_proj.data = np.zeros_like(self.B_proj.data)
        self.C_proj.data = np.zeros_like(self.C_proj.data)
        self.B_bias = np.asarray(B, dtype=self.B_proj.dtype)
        self.C_bias = np.asarray(C, dtype=self.C_proj.dtype)


def selective_step_params(x_k, params: SsmParams) -> tuple[float, np.ndarray, np.ndarray]:
    """(Δ_k, B_k, C_k) for one input vector, by plain array arithmetic."""
    x_k = np.asarray(x_k, dtype=params.B_proj.dtype)
    pre = float(x_k @ params.delta_w.data[:, 0] + params.delta_bias.data[0])
    delta = float(np.logaddexp(0.0, pre))
    B_k = x_k @ params.B_proj.data
    C_k = x_k @ params.C_proj.data
    if params.B_bias is not None:
        B_k = B_k + params.B_bias
    if params.C_bias is not None:
        C_k = C_k + params.C_bias
    return delta, B_k, C_k


class SelectiveScan(Function):
    """y[b,t,d] = Σ_n c[b,t,n] h[b,t,d,n] with h_t = Ā_t ⊙ h_{t-1} + B̄_t · u_t[d].

    The backward pass runs the adjoint recurrence λ_t = ∂y/∂h_t + Ā_{t+1} ⊙ λ_{t+1}
    as a reversed scan.
    """

    def forward(self, u, abar, bbar, c, method: str = "parallel"):
        self.method = method
        a_full = np.broadcast_to(abar[:, :, np.newaxis, :], u.shape + abar.shape[-1:])
        b_full = bbar[:, :, np.newaxis, :] * u[..., np.newaxis]
        h = linear_scan(a_full, b_full, axis=1, method=method)
        if not np.all(np.isfinite(h)):
            bad = ~np.isfinite(h).reshape(h.shape[0], h.shape[1], -1).any(axis=2).any(axis=0)
            step = int(np.argmax(bad))
            logger.warning("non-finite hidden state at step %d", step)
            raise NumericalError(f"non-finite hidden state at step {step}")
        self.u, self.abar, self.bbar, self.c, self.h = u, abar, bbar, c, h
        return np.einsum("btdn,btn->btd", h, c)

    def backward(self, grad):
        u, abar, bbar, c, h = self.u, self.abar, self.bbar, self.c, self.h
        direct = grad[..., np.newaxis] * c[:, :, np.newaxis, :]
        a_next = np.concatenate([abar[:, 1:], np.zeros_like(abar[:, :1])], axis=1)
        a_next = np.broadcast_to(a_next[:, :, np.newaxis, :], h.shape)
        lam = linear_scan(a_next[:, ::-1], direct[:, ::-1], axis=1, method=self.method)[:, ::-1]
        h_prev = np.concatenate([np.zeros_like(h[:, :1]), h[:, :-1]], axis=1)
        grad_u = np.einsum("btdn,btn->btd", lam, bbar)
        grad_bbar = np.einsum("btdn,btd->btn", lam, u)
        grad_abar = np.einsum("btdn,btdn->btn", lam, h_prev)
        grad_c = np.einsum("btdn,btd->btn", h, grad)
        return grad_u, grad_abar, grad_bbar, grad_c


def selective_scan(u: Tensor, abar: Tensor, bbar: Tensor, c: Tensor, method: str = "parallel") -> Tensor:
    return SelectiveScan.apply(u, abar, bbar, c, method=method)


def ssm_forward(x, params: SsmParams, method: str = "parallel", discretization: str = "zoh") -> Tensor:
    """Selective SSM over x of shape [T, d] or [B, T, d]; returns the same shape."""
    x = as_tensor(x)
    squeeze = x.ndim == 2
    if squeeze:
        x = x.reshape((1,) + x.shape)
    if x.ndim != 3 or x.shape[2] != params.d_inner:
        raise ShapeError(f"ssm_forward expects [B, T, {params.d_inner}], got {x.shape}")

    delta = softplus(matmul(x, params.delta_w) + params.delta_bias)
    B_k = matmul(x, params.B_proj)
    C_k = matmul(x, params.C_proj)
    if params.B_bias is not None:
        B_k = B_k + params.B_bias
    if params.C_bias is not None:
        C_k = C_k + params.C_bias
    abar, bbar = discretize_tensors(delta, params.A, B_k, discretization)
    y = selective_scan(x, abar, bbar, C_k, method=method) + x * params.D
    return y.reshape(y.shape[1:]) if squeeze else y
