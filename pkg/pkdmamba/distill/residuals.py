"""
Residual probability matrices K⁺ and K⁻ over (sample, label) pairs.

Both are N×L and nonnegative; for every label column the combined mass of the two
matrices is 1. A candidate student is a weak learner when, for every label j,

    Σ_i K⁺(i,j)·(f - g)_ij + K⁻(i,j)·(g - f)_ij  >  margin

with f and g the student's and teacher's temperature-1 probabilities.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError, ShapeError

logger = logging.getLogger(__name__)

NORM_TOL = 1e-9


@dataclass(frozen=True)
class ResidualMatrices:
    K_plus: np.ndarray
    K_minus: np.ndarray

    def __post_init__(self) -> None:
        plus = np.asarray(self.K_plus, dtype=np.float64)
        minus = np.asarray(self.K_minus, dtype=np.float64)
        if plus.shape != minus.shape or plus.ndim != 2:
            raise ShapeError(f"K+ {plus.shape} and K- {minus.shape} must be matching N×L matrices")
        if np.any(plus < 0) or np.any(minus < 0):
            raise ParameterError("residual matrices must be nonnegative")
        object.__setattr__(self, "K_plus", plus)
        object.__setattr__(self, "K_minus", minus)

    @classmethod
    def uniform(cls, n_samples: int, n_labels: int) -> ResidualMatrices:
        fill = np.full((n_samples, n_labels), 1.0 / (2 * n_samples))
        return cls(fill, fill.copy())

    @property
    def shape(self) -> tuple[int, int]:
        return self.K_plus.shape

    @property
    def indicator(self) -> np.ndarray:
        """I⁺ = 1[K⁺ > K⁻]."""
        return self.K_plus > self.K_minus

    def column_mass(self) -> np.ndarray:
        return self.K_plus.sum(axis=0) + self.K_minus.sum(axis=0)

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return bool(np.all(np.abs(self.column_mass() - 1.0) <= tol))

    def rows(self, index) -> tuple[np.ndarray, np.ndarray]:
        return self.K_plus[index], self.K_minus[index]


@dataclass(frozen=True)
class WeakLearnerResult:
    passed: bool
    margins: np.ndarray
    bootstrap: bool = False

    @property
    def min_margin(self) -> float:
        return float(np.min(self.margins)) if self.margins.size else float("nan")


def _probs(model_or_probs, data):
    if data is None:
        return np.asarray(model_or_probs, dtype=np.float64)
    from ..models import predict_proba

    return predict_proba(model_or_probs, data.images)


def residual_margins(student_probs: np.ndarray, teacher_probs: np.ndarray, K: ResidualMatrices) -> np.ndarray:
    diff = np.asarray(student_probs, dtype=np.float64) - np.asarray(teacher_probs, dtype=np.float64)
    if diff.shape != K.shape:
        raise ShapeError(f"outputs {diff.shape} do not match residual matrices {K.shape}")
    return ((K.K_plus - K.K_minus) * diff).sum(axis=0)


def weak_learner_check(student, teacher, K: ResidualMatrices, data=None, weak_margin: float = 0.0) -> WeakLearnerResult:
    """Per-label margins of ``student`` against ``teacher``; passes iff every margin > weak_margin.

    ``student``/``teacher`` are probability arrays, or models evaluated on ``data``.
    """
    margins = residual_margins(_probs(student, data), _probs(teacher, data), K)
    return WeakLearnerResult(passed=bool(np.all(margins > weak_margin)), margins=margins)


def first_round_check(student_probs: np.ndarray, labels: np.ndarray, n_labels: int,
                      weak_margin: float = 0.0) -> WeakLearnerResult:
    """Acceptance for the first student, when uniform matrices make every residual margin zero.

    Margin j is the mean probability the student gives label j on samples labelled j,
    minus chance 1/L. A label with no samples gets margin 0.
    """
    probs = np.asarray(student_probs, dtype=np.float64)
    labels = np.asarray(labels)
    margins = np.zeros(n_labels)
    for j in range(n_labels):
        mask = labels == j
        if mask.any():
            margins[j] = probs[mask, j].mean() - 1.0 / n_labels
    return WeakLearnerResult(passed=bool(np.all(margins > weak_margin)), margins=margins, bootstrap=True)


def update_matrices(K: ResidualMatrices, student_probs, teacher_probs, eta: float) -> ResidualMatrices:
    """Multiplicative-weights step followed by joint per-column renormalization.

    K⁺ shrinks where the student overshoots the teacher (f > g) and K⁻ grows there.
    """
    if eta < 0:
        raise ParameterError(f"eta must be >= 0, got {eta}")
    diff = np.asarray(student_probs, dtype=np.float64) - np.asarray(teacher_probs, dtype=np.float64)
    if diff.shape != K.shape:
        raise ShapeError(f"outputs {diff.shape} do not match residual matrices {K.shape}")
    step = eta * diff
    if not np.any(step):
        return ResidualMatrices(K.K_plus.copy(), K.K_minus.copy())
    with np.errstate(divide="ignore"):
        log_plus = np.log(K.K_plus) - step
        log_minus = np.log(K.K_minus) + step
    peak = np.maximum(log_plus.max(axis=0), log_minus.max(axis=0))
    plus = np.exp(log_plus - peak)
    minus = np.exp(log_minus - peak)
    mass = plus.sum(axis=0) + minus.sum(axis=0)
    return ResidualMatrices(plus / mass, minus / mass)
