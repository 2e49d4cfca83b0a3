from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ParameterError
from ..extensions import map_ordered
from ..metrics import accuracy
from ..models import MambaModel, predict_proba


@dataclass
class Ensemble:
    """Ordered students f_1..f_T; the prefix F_t averages the first t of them."""

    students: list[MambaModel] = field(default_factory=list)
    teacher: MambaModel | None = None

    def __len__(self) -> int:
        return len(self.students)

    def append(self, student: MambaModel) -> None:
        self.students.append(student)


def student_probabilities(students: Sequence[MambaModel], images: np.ndarray, batch_size: int = 256) -> list[np.ndarray]:
    """Temperature-1 probabilities of every student, evaluated concurrently, in student order."""
    return map_ordered(lambda s: predict_proba(s, images, batch_size), students)


def prefix_mean(probs: Sequence[np.ndarray], t: int) -> np.ndarray:
    """Mean of probs[0..t-1], summed left to right."""
    total = np.array(probs[0], dtype=np.float64, copy=True)
    for p in probs[1:t]:
        total += p
    return total / t


def ensemble_predict(ensemble: Ensemble, images: np.ndarray, t: int | None = None, batch_size: int = 256) -> np.ndarray:
    """Averaged class probabilities of the first ``t`` students (all when t is None)."""
    t = len(ensemble) if t is None else t
    if not 1 <= t <= len(ensemble):
        raise ParameterError(f"prefix length must be in [1, {len(ensemble)}], got {t}")
    return prefix_mean(student_probabilities(ensemble.students[:t], images, batch_size), t)


def prefix_accuracies(ensemble: Ensemble, images: np.ndarray, labels: np.ndarray) -> list[float]:
    """Accuracy of F_1..F_T; each student is evaluated once."""
    if not len(ensemble):
        return []
    probs = student_probabilities(ensemble.students, images)
    out = []
    running = np.zeros_like(probs[0], dtype=np.float64)
    for t, p in enumerate(probs, start=1):
        running += p
        out.append(accuracy(running / t, labels))
    return out


def ensemble_accuracy(ensemble: Ensemble, images: np.ndarray, labels: np.ndarray, n_classes: int,
                      t: int | None = None) -> float:
    """Prefix accuracy; an empty ensemble predicts uniformly and scores at chance."""
    if not len(ensemble):
        uniform = np.full((len(labels), n_classes), 1.0 / n_classes)
        return accuracy(uniform, labels)
    return accuracy(ensemble_predict(ensemble, images, t), labels)
