"""
Accuracy, parameter counts and the FLOPs convention.

FLOPs convention "pkd-flops/1", per image and single forward pass:

- a multiply-accumulate counts 2, every other elementwise arithmetic op or
  activation counts 1 per element;
- linear m -> n on one token: 2mn + n;
- one Mamba block on one token (d channels, N states, conv width K):
      in_proj 2d²+d, conv 2dK+d, silu d, Δ projection 2d+1, softplus 1,
      B and C projections 2dN each, discretization 5N, state update 3dN,
      output contraction 2dN, D skip 2d, gate 2d²+d, silu d, gating d,
      out_proj 2d²+d, residual d
  which sums to 6d² + 2dK + 12d + 9dN + 5N + 2;
- embedding per channel: 2·p²·d + d (projection) + d (positions) per token;
- head: mean pooling T·d + d per channel, hidden layers 2·in·h + 2h,
  classifier 2·in·L + L.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.metrics import accuracy_score

from ..errors import ParameterError, ShapeError
from ..models import MambaModel, StudentConfig
from ..tensor import Tensor

FLOPS_CONVENTION = "pkd-flops/1"


def accuracy(logits, targets) -> float:
    """Fraction of rows whose argmax (lowest index on ties) equals the target."""
    logits = np.asarray(logits.data if isinstance(logits, Tensor) else logits)
    targets = np.asarray(targets)
    if logits.ndim != 2 or logits.shape[0] < 1:
        raise ParameterError(f"accuracy needs a non-empty [B, L] array, got shape {logits.shape}")
    if targets.shape != (logits.shape[0],):
        raise ShapeError(f"expected {logits.shape[0]} targets, got shape {targets.shape}")
    return float(accuracy_score(targets, np.argmax(logits, axis=1)))


def block_flops_per_token(d: int, state_dim: int, conv_width: int) -> int:
    n, k = state_dim, conv_width
    return 6 * d * d + 2 * d * k + 12 * d + 9 * d * n + 5 * n + 2


def block_params(d: int, state_dim: int, conv_width: int) -> int:
    n, k = state_dim, conv_width
    return 3 * d * d + d * k + 6 * d + 2 * d * n + n + 1


@dataclass(frozen=True)
class FlopsBreakdown:
    embedding: int
    blocks: tuple[int, ...]
    head: int

    @property
    def total(self) -> int:
        return self.embedding + sum(self.blocks) + self.head


def _config_of(model_or_config) -> StudentConfig:
    if isinstance(model_or_config, MambaModel):
        return model_or_config.cfg
    if isinstance(model_or_config, StudentConfig):
        return model_or_config
    raise TypeError(f"expected a MambaModel or StudentConfig, got {type(model_or_config).__name__}")


def flops_breakdown(model_or_config) -> FlopsBreakdown:
    cfg = _config_of(model_or_config)
    d, steps, channels = cfg.d_model, cfg.seq_len, cfg.channels
    embedding = channels * steps * (2 * cfg.patch_dim * d + 2 * d)
    per_block = steps * block_flops_per_token(d, cfg.state_dim, cfg.conv_width)
    head = channels * (steps * d + d)
    width = channels * d
    for hidden in cfg.hidden_layers:
        head += 2 * width * hidden + 2 * hidden
        width = hidden
    head += 2 * width * cfg.n_classes + cfg.n_classes
    return FlopsBreakdown(embedding=embedding, blocks=(per_block,) * cfg.n_blocks, head=head)


def flops_estimate(model_or_config) -> int:
    return flops_breakdown(model_or_config).total


def param_count(cfg: StudentConfig) -> int:
    """Closed-form trainable parameter count; equals count_params(build_model(cfg))."""
    d = cfg.d_model
    total = cfg.patch_dim * d + d
    total += cfg.n_blocks * block_params(d, cfg.state_dim, cfg.conv_width)
    width = cfg.channels * d
    for hidden in cfg.hidden_layers:
        total += width * hidden + hidden
        width = hidden
    return total + width * cfg.n_classes + cfg.n_classes


@dataclass(frozen=True)
class CostReport:
    name: str
    params: int
    flops: int
    flops_fraction: float
    accuracy: float


def cost_report(name: str, model_or_config, accuracy_value: float, teacher_flops: int) -> CostReport:
    cfg = _config_of(model_or_config)
    flops = flops_estimate(cfg)
    return CostReport(
        name=name,
        params=param_count(cfg),
        flops=flops,
        flops_fraction=flops / teacher_flops,
        accuracy=float(accuracy_value),
    )


def cumulative_flops_fraction(reports: Sequence[CostReport], teacher_flops: int) -> float:
    return sum(r.flops for r in reports) / teacher_flops
