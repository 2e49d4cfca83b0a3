"""
Progressive knowledge distillation.

Round t searches the student ladder, starting at the rung after the last accepted
one, for a weak learner against the residual matrices K. The first round trains on
the KD loss and is accepted on per-label better-than-chance confidence; later rounds
train on the residual loss and must pass the residual margin test. Accepted
students join the ensemble and K is updated from their residuals.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..data import Dataset
from ..metrics import accuracy, flops_estimate, param_count
from ..models import MambaModel, StudentConfig, build_model, predict_logits, predict_proba, round_to_checkpoint
from ..tensor import Tensor, softmax
from ..tensor.ops import softmax_array
from .ensemble import Ensemble, prefix_accuracies
from .hyper import DistillHyper
from .losses import kd_loss, residual_loss
from .residuals import ResidualMatrices, WeakLearnerResult, first_round_check, update_matrices, weak_learner_check
from .store import RunStore
from .trainer import TrainParams, train_model

logger = logging.getLogger(__name__)

CandidateFactory = Callable[[StudentConfig, int], MambaModel]


def derive_seed(*key: int) -> int:
    """Stable 32-bit seed for a (seed, round, rung, ...) key."""
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1)[0])


@dataclass
class RungAttempt:
    rung: int
    config: StudentConfig
    epochs_trained: int
    check: WeakLearnerResult
    student_accuracy: float | None = None


@dataclass
class DistillRound:
    round: int
    rung: int | None
    config: StudentConfig | None
    student: MambaModel | None
    weak_learner: bool
    check: WeakLearnerResult | None = None
    epochs_trained: int = 0
    student_accuracy: float | None = None
    rejected: list[RungAttempt] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)

    @property
    def margins(self) -> np.ndarray:
        return self.check.margins if self.check is not None else np.zeros(0)


@dataclass
class PkdResult:
    ensemble: Ensemble
    rounds: list[DistillRound]
    rows: list[dict]
    residuals: ResidualMatrices


def _row(t: int, rung: int, cfg: StudentConfig, epochs: int, check: WeakLearnerResult,
         student_acc, prefix_acc, teacher_flops: int) -> dict:
    flops = flops_estimate(cfg)
    return {
        "round": t,
        "rung": rung,
        "epochs_trained": epochs,
        "weak_learner": bool(check.passed),
        "min_margin": check.min_margin,
        "student_accuracy": student_acc,
        "prefix_ensemble_accuracy": prefix_acc,
        "params": param_count(cfg),
        "flops": flops,
        "flops_fraction_of_teacher": flops / teacher_flops,
    }


def find_weak_learner(
    ladder: Sequence[StudentConfig],
    K: ResidualMatrices,
    teacher_logits: np.ndarray,
    data: Dataset,
    hyper: DistillHyper,
    params: TrainParams,
    seed: int,
    round_index: int = 1,
    start_rung: int = 0,
    first_round: bool = False,
    candidate_factory: CandidateFactory | None = None,
    eval_data: Dataset | None = None,
) -> DistillRound:
    """Train candidates rung by rung until one is a weak learner or the ladder runs out."""
    teacher_logits = np.asarray(teacher_logits, dtype=np.float64)
    teacher_probs = softmax_array(teacher_logits)
    labels = data.labels
    rejected: list[RungAttempt] = []

    for r in range(start_rung, len(ladder)):
        cfg = ladder[r]
        rung = r + 1
        student_seed = derive_seed(seed, round_index, rung)
        if candidate_factory is not None:
            student = candidate_factory(cfg, student_seed)
        else:
            student = build_model(cfg, student_seed, dtype=params.dtype)

        stats: dict = {}
        if first_round:
            def loss_fn(logits: Tensor, idx: np.ndarray) -> Tensor:
                return kd_loss(logits, teacher_logits[idx], labels[idx], hyper)
        else:
            def loss_fn(logits: Tensor, idx: np.ndarray) -> Tensor:
                k_plus, k_minus = K.rows(idx)
                return residual_loss(softmax(logits), teacher_probs[idx], k_plus, k_minus, hyper,
                                     reduction="mean", stats=stats)

        def check() -> WeakLearnerResult:
            probs = predict_proba(student, data.images)
            if first_round:
                return first_round_check(probs, labels, data.n_classes, hyper.weak_margin)
            return weak_learner_check(probs, teacher_probs, K, weak_margin=hyper.weak_margin)

        state = {"checked_at": None, "result": None, "best": np.inf, "stale": 0}

        def on_epoch(epoch: int, loss: float) -> bool:
            if loss < state["best"]:
                state["best"], state["stale"] = loss, 0
            else:
                state["stale"] += 1
            if (epoch + 1) % hyper.weak_check_epochs == 0:
                result = check()
                state["checked_at"], state["result"] = epoch, result
                logger.info("round %d rung %d epoch %d: weak learner %s (min margin %.4g)",
                            round_index, rung, epoch + 1, "yes" if result.passed else "no", result.min_margin)
                if result.passed and hyper.stop_on_success:
                    return True
            if state["stale"] >= hyper.patience:
                logger.info("round %d rung %d: loss flat for %d epochs", round_index, rung, hyper.patience)
                return True
            return False

        trained = train_model(student, data, loss_fn, params, [seed, round_index, rung], epochs=hyper.epochs,
                              on_epoch=on_epoch, desc=f"round {round_index} rung {rung}")
        if stats.get("clamped"):
            logger.debug("round %d rung %d: %d residual terms clamped", round_index, rung, stats["clamped"])
        if state["checked_at"] != trained.epochs_trained - 1:
            state["result"] = check()
        result: WeakLearnerResult = state["result"]
        if result.passed:
            round_to_checkpoint(student)
            result = check()

        student_acc = None
        if eval_data is not None:
            student_acc = accuracy(predict_logits(student, eval_data.images), eval_data.labels)

        if result.passed:
            logger.info("round %d: accepted rung %d (%s) after %d epochs",
                        round_index, rung, cfg.label, trained.epochs_trained)
            return DistillRound(round=round_index, rung=rung, config=cfg, student=student, weak_learner=True,
                                check=result, epochs_trained=trained.epochs_trained,
                                student_accuracy=student_acc, rejected=rejected)
        logger.info("round %d: rung %d is not a weak learner (min margin %.4g), advancing",
                    round_index, rung, result.min_margin)
        rejected.append(RungAttempt(rung, cfg, trained.epochs_trained, result, student_acc))

    logger.warning("round %d: ladder exhausted without a weak learner", round_index)
    return DistillRound(round=round_index, rung=None, config=None, student=None, weak_learner=False,
                        rejected=rejected)


def run_pkd(
    teacher: MambaModel,
    ladder: Sequence[StudentConfig],
    data: Dataset,
    hyper: DistillHyper,
    params: TrainParams,
    seed: int,
    eval_data: Dataset | None = None,
    store: RunStore | None = None,
    candidate_factory: CandidateFactory | None = None,
) -> PkdResult:
    """Grow an ensemble of up to ``hyper.rounds`` weak learners.

    Accuracies in the round log are measured on ``eval_data`` when given, else on
    ``data``. With a ``store`` every accepted round is persisted and an existing store
    is resumed from its last round.
    """
    eval_data = data if eval_data is None else eval_data
    teacher_flops = flops_estimate(teacher.cfg)
    teacher_logits = predict_logits(teacher, data.images).astype(np.float64)
    teacher_probs = softmax_array(teacher_logits)

    ensemble = Ensemble(teacher=teacher)
    rounds: list[DistillRound] = []
    rows: list[dict] = []
    K = ResidualMatrices.uniform(len(data), data.n_classes)
    next_rung = 0
    start_round = 1

    if store is not None:
        records = store.load_records()
        for record in records:
            ensemble.append(store.load_student(record["round"], params.dtype))
            rows.extend(record["rows"])
            next_rung = record["rung"]
        if records:
            start_round = records[-1]["round"] + 1
            K = store.load_residuals(records[-1]["round"])
            logger.info("resuming after round %d from %s", records[-1]["round"], store.root)

    for t in range(start_round, hyper.rounds + 1):
        found = find_weak_learner(ladder, K, teacher_logits, data, hyper, params, seed, round_index=t,
                                  start_rung=next_rung, first_round=(t == 1), candidate_factory=candidate_factory,
                                  eval_data=eval_data)
        round_rows = [
            _row(t, a.rung, a.config, a.epochs_trained, a.check, a.student_accuracy, None, teacher_flops)
            for a in found.rejected
        ]
        rounds.append(found)
        if not found.weak_learner:
            rows.extend(round_rows)
            if store is not None:
                store.save_tail(round_rows)
            break

        ensemble.append(found.student)
        prefix_acc = prefix_accuracies(ensemble, eval_data.images, eval_data.labels)[-1]
        accepted = _row(t, found.rung, found.config, found.epochs_trained, found.check,
                        found.student_accuracy, prefix_acc, teacher_flops)
        found.metrics = accepted
        round_rows.append(accepted)
        rows.extend(round_rows)

        student_probs = predict_proba(found.student, data.images)
        K = update_matrices(K, student_probs, teacher_probs, hyper.eta)
        next_rung = found.rung
        if store is not None:
            record = {
                "round": t,
                "rung": found.rung,
                "config": found.config.to_dict(),
                "margins": [float(m) for m in found.margins],
                "bootstrap": bool(found.check.bootstrap),
                "epochs_trained": found.epochs_trained,
                "rows": round_rows,
            }
            store.save_round(record, found.student, K)
        if next_rung >= len(ladder):
            logger.info("ladder fully used after round %d", t)
            break

    return PkdResult(ensemble=ensemble, rounds=rounds, rows=rows, residuals=K)
