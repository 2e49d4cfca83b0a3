from .ensemble import Ensemble, ensemble_accuracy, ensemble_predict, prefix_accuracies, prefix_mean, student_probabilities
from .hyper import DistillHyper
from .losses import CLAMP_EPS, kd_loss, residual_loss
from .pkd import DistillRound, PkdResult, RungAttempt, derive_seed, find_weak_learner, run_pkd
from .residuals import (
    ResidualMatrices,
    WeakLearnerResult,
    first_round_check,
    residual_margins,
    update_matrices,
    weak_learner_check,
)
from .store import RunStore
from .trainer import TrainParams, TrainResult, evaluate_loss, train_model, train_teacher

__all__ = [
    "Ensemble",
    "ensemble_accuracy",
    "ensemble_predict",
    "prefix_accuracies",
    "prefix_mean",
    "student_probabilities",
    "DistillHyper",
    "CLAMP_EPS",
    "kd_loss",
    "residual_loss",
    "DistillRound",
    "PkdResult",
    "RungAttempt",
    "derive_seed",
    "find_weak_learner",
    "run_pkd",
    "ResidualMatrices",
    "WeakLearnerResult",
    "first_round_check",
    "residual_margins",
    "update_matrices",
    "weak_learner_check",
    "RunStore",
    "TrainParams",
    "TrainResult",
    "evaluate_loss",
    "train_model",
    "train_teacher",
]
