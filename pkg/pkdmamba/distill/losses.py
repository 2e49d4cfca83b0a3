from __future__ import annotations

import logging

import numpy as np

from ..errors import ParameterError, ShapeError
from ..tensor import Tensor, clip, cross_entropy, log, log_softmax
from ..tensor.core import as_tensor
from ..tensor.ops import softmax_array
from .hyper import DistillHyper

logger = logging.getLogger(__name__)

CLAMP_EPS = 1e-6


def _array(value) -> np.ndarray:
    return value.data if isinstance(value, Tensor) else np.asarray(value)


def kd_loss(student_logits, teacher_logits, targets, hyper: DistillHyper | None = None) -> Tensor:
    """alpha·CE(student, targets) + (1 - alpha)·T²·KL(softmax_T(teacher) ‖ softmax_T(student)).

    The teacher side is a constant; only the student logits carry gradient.
    """
    hyper = hyper or DistillHyper()
    alpha, temperature = hyper.alpha, hyper.temperature
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha must be in [0, 1], got {alpha}")
    student_logits = as_tensor(student_logits)
    teacher = _array(teacher_logits)
    if teacher.shape != student_logits.shape:
        raise ShapeError(f"teacher logits {teacher.shape} vs student logits {student_logits.shape}")
    if alpha == 1.0:
        return cross_entropy(student_logits, targets)

    p = softmax_array(teacher.astype(student_logits.dtype) / temperature)
    with np.errstate(divide="ignore", invalid="ignore"):
        entropy_part = float(np.where(p > 0, p * np.log(p), 0.0).sum()) / p.shape[0]
    log_q = log_softmax(student_logits / temperature)
    cross_part = -(log_q * p).sum() / p.shape[0]
    soft = (cross_part + entropy_part) * (temperature * temperature)
    if alpha == 0.0:
        return soft
    return cross_entropy(student_logits, targets) * alpha + soft * (1.0 - alpha)


def residual_loss(
    student_probs,
    teacher_probs,
    K_plus: np.ndarray,
    K_minus: np.ndarray,
    hyper: DistillHyper | None = None,
    reduction: str = "sum",
    stats: dict | None = None,
) -> Tensor:
    """-(1/γ)·Σ_ij log(1 ± l_ij / 2B) with l = student - teacher probabilities.

    The sign is + where K⁺ > K⁻ and - elsewhere. l is clamped to ±2B(1 - 1e-6)
    first; the number of clamped entries is added to ``stats["clamped"]``.
    """
    hyper = hyper or DistillHyper()
    student_probs = as_tensor(student_probs)
    teacher = _array(teacher_probs)
    if teacher.shape != student_probs.shape or K_plus.shape != student_probs.shape or K_minus.shape != student_probs.shape:
        raise ShapeError(
            f"residual_loss shapes differ: student {student_probs.shape}, teacher {teacher.shape}, "
            f"K+ {K_plus.shape}, K- {K_minus.shape}"
        )
    two_b = 2.0 * hyper.B_reg
    bound = two_b * (1.0 - CLAMP_EPS)
    residual = student_probs - teacher.astype(student_probs.dtype)
    clamped = int(np.count_nonzero(np.abs(residual.data) > bound))
    if stats is not None:
        stats["clamped"] = stats.get("clamped", 0) + clamped
    if clamped:
        logger.info("residual loss clamped %d entries", clamped)
    residual = clip(residual, -bound, bound)
    sign = np.where(K_plus > K_minus, 1.0, -1.0).astype(student_probs.dtype)
    total = log(residual * (sign / two_b) + 1.0).sum() * (-1.0 / hyper.gamma)
    if reduction == "sum":
        return total
    if reduction == "mean":
        return total / float(student_probs.shape[0])
    raise ParameterError(f"unknown reduction {reduction!r}")
