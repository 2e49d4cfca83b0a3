from __future__ import annotations

import numpy as np

from ..errors import ParameterError, ShapeError


def ssm_kernel_lti(A_bar, B_bar, C, length: int) -> np.ndarray:
    """K̄ = (C·B̄, C·Ā·B̄, ..., C·Ā^(T-1)·B̄) for a diagonal time-invariant system."""
    if length < 1:
        raise ParameterError(f"kernel length must be >= 1, got {length}")
    A_bar = np.atleast_1d(np.asarray(A_bar, dtype=np.float64))
    weights = np.atleast_1d(np.asarray(C, dtype=np.float64)) * np.atleast_1d(np.asarray(B_bar, dtype=np.float64))
    powers = A_bar[np.newaxis, :] ** np.arange(length)[:, np.newaxis]
    return powers @ weights


def lti_convolve(x, kernel) -> np.ndarray:
    """Causal y_k = Σ_{j<=k} K̄_j · x_{k-j} along axis 0 of x ([T] or [T, d])."""
    x = np.asarray(x, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 1 or kernel.shape[0] < x.shape[0]:
        raise ShapeError(f"kernel of shape {kernel.shape} cannot cover {x.shape[0]} steps")
    steps = x.shape[0]
    y = np.zeros_like(x)
    for lag in range(steps):
        y[lag:] += kernel[lag] * x[:steps - lag]
    return y
