from __future__ import annotations

import logging
import sys
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from tqdm import tqdm

from ..data import Dataset, split_dataset
from ..errors import ParameterError
from ..models import MambaModel, StudentConfig, build_model, round_to_checkpoint
from ..tensor import SGD, LRSchedule, Tensor, backward, cross_entropy, no_grad

logger = logging.getLogger(__name__)

LossFn = Callable[[Tensor, np.ndarray], Tensor]
# on_epoch(epoch, mean_loss) -> True to stop training
EpochHook = Callable[[int, float], bool]


@dataclass(frozen=True)
class TrainParams:
    lr: float = 1e-4
    lr_decay: float = 0.9
    decay_step: int = 1
    momentum: float = 0.0
    clip_norm: float | None = None
    batch_size: int = 32
    epochs: int = 50
    patience: int = 5
    val_fraction: float = 0.1
    dtype: str = "float32"
    scan_method: str = "parallel"
    progress: bool = True

    def __post_init__(self) -> None:
        if self.lr < 0:
            raise ParameterError(f"lr: must be >= 0, got {self.lr}")
        if not 0 < self.lr_decay <= 1:
            raise ParameterError(f"lr_decay: must be in (0, 1], got {self.lr_decay}")
        if self.decay_step < 1 or self.batch_size < 1 or self.patience < 1:
            raise ParameterError("decay_step, batch_size and patience must be >= 1")
        if self.epochs < 0:
            raise ParameterError(f"epochs: must be >= 0, got {self.epochs}")
        if not 0 <= self.momentum < 1:
            raise ParameterError(f"momentum: must be in [0, 1), got {self.momentum}")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ParameterError(f"clip_norm: must be > 0, got {self.clip_norm}")
        if not 0 <= self.val_fraction < 1:
            raise ParameterError(f"val_fraction: must be in [0, 1), got {self.val_fraction}")
        if self.dtype not in ("float32", "float64"):
            raise ParameterError(f"dtype: expected float32 or float64, got {self.dtype!r}")
        if self.scan_method not in ("parallel", "sequential"):
            raise ParameterError(f"scan_method: expected parallel or sequential, got {self.scan_method!r}")

    def schedule(self) -> LRSchedule:
        return LRSchedule(self.lr, self.lr_decay, self.decay_step)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    epochs_trained: int = 0
    history: list[float] = field(default_factory=list)
    val_history: list[float] = field(default_factory=list)
    best_val_loss: float | None = None
    stopped_early: bool = False


def _show_progress(params: TrainParams) -> bool:
    return params.progress and sys.stderr.isatty()


def evaluate_loss(model: MambaModel, data: Dataset, loss_fn: LossFn, params: TrainParams) -> float:
    total = 0.0
    with no_grad():
        for start in range(0, len(data), params.batch_size):
            idx = np.arange(start, min(start + params.batch_size, len(data)))
            images = data.images[idx].astype(model.head.weight.dtype)
            loss = loss_fn(model(images, scan_method=params.scan_method), idx)
            total += loss.item() * len(idx)
    return total / max(len(data), 1)


def train_model(
    model: MambaModel,
    data: Dataset,
    loss_fn: LossFn,
    params: TrainParams,
    seed,
    *,
    epochs: int | None = None,
    val: Dataset | None = None,
    val_loss_fn: LossFn | None = None,
    on_epoch: EpochHook | None = None,
    desc: str = "train",
) -> TrainResult:
    """Minibatch SGD over ``data``.

    ``loss_fn`` receives the batch logits and the batch's indices into ``data``. Batch
    order for epoch e comes from a generator seeded with (seed, e). With ``val`` the
    run stops after ``patience`` epochs without a lower validation loss and restores
    the best weights.
    """
    epochs = params.epochs if epochs is None else epochs
    seed_key = list(seed) if isinstance(seed, (tuple, list)) else [int(seed)]
    opt = SGD(list(model.named_parameters()), params.schedule(), params.momentum, params.clip_norm)
    dtype = model.head.weight.dtype
    result = TrainResult()
    best_state = None
    waited = 0

    for epoch in range(epochs):
        order = np.random.default_rng(seed_key + [epoch]).permutation(len(data))
        batches = [order[i:i + params.batch_size] for i in range(0, len(order), params.batch_size)]
        losses = []
        for idx in tqdm(batches, desc=f"{desc} {epoch + 1}/{epochs}", leave=False, disable=not _show_progress(params)):
            logits = model(data.images[idx].astype(dtype), scan_method=params.scan_method)
            loss = loss_fn(logits, idx)
            opt.zero_grad()
            backward(loss)
            opt.step()
            losses.append(loss.item() * len(idx))
        mean_loss = float(np.sum(losses)) / max(len(data), 1)
        result.history.append(mean_loss)
        result.epochs_trained = epoch + 1
        lr = opt.lr
        opt.advance_epoch()

        if val is not None and len(val):
            val_loss = evaluate_loss(model, val, val_loss_fn or loss_fn, params)
            result.val_history.append(val_loss)
            logger.info("%s epoch %d: loss %.6g, val loss %.6g, lr %.3g", desc, epoch + 1, mean_loss, val_loss, lr)
            if result.best_val_loss is None or val_loss < result.best_val_loss:
                result.best_val_loss = val_loss
                best_state = model.state_dict()
                waited = 0
            else:
                waited += 1
                if waited >= params.patience:
                    logger.warning("%s: no validation improvement for %d epochs, restoring best weights",
                                   desc, params.patience)
                    model.load_state_dict(best_state)
                    result.stopped_early = True
                    break
        else:
            logger.info("%s epoch %d: loss %.6g, lr %.3g", desc, epoch + 1, mean_loss, lr)

        if on_epoch is not None and on_epoch(epoch, mean_loss):
            result.stopped_early = True
            break

    if best_state is not None and not result.stopped_early:
        model.load_state_dict(best_state)
    return result


def train_teacher(cfg: StudentConfig, data: Dataset, params: TrainParams, seed: int) -> tuple[MambaModel, TrainResult]:
    """Cross-entropy training with a validation split carved from ``data`` for early stopping.

    The returned weights are rounded to checkpoint precision.
    """
    model = build_model(cfg, seed, dtype=params.dtype)
    val = None
    train = data
    if params.val_fraction > 0 and len(data) >= 10:
        train, val = split_dataset(data, seed, 1.0 - params.val_fraction)

    def ce(logits: Tensor, idx: np.ndarray) -> Tensor:
        return cross_entropy(logits, train.labels[idx])

    def val_ce(logits: Tensor, idx: np.ndarray) -> Tensor:
        return cross_entropy(logits, val.labels[idx])

    result = train_model(model, train, ce, params, [seed, 0], val=val, val_loss_fn=val_ce, desc="teacher")
    round_to_checkpoint(model)
    return model, result
