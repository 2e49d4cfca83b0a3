"""
Mamba blocks and image classifiers built from a StudentConfig.

An image is cut into patch sequences (one per channel), embedded, run through the
blocks assigned to its channel, mean-pooled over time, and classified by a small
Swish MLP head. Blocks are assigned to channels round-robin.
"""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path

import numpy as np

from ..errors import CheckpointError, ConfigError, NumericalError, ShapeError
from ..extensions import map_ordered
from ..ssm import SsmParams, ssm_forward
from ..tensor import (
    Module,
    ModuleList,
    Tensor,
    concat,
    get_default_dtype,
    load_checkpoint,
    mean,
    no_grad,
    save_checkpoint,
    silu,
)
from .config import StudentConfig
from .layers import CausalConv, Linear, PatchEmbedding, patchify

logger = logging.getLogger(__name__)


class MambaBlock(Module):
    def __init__(self, d_model: int, state_dim: int, conv_width: int, rng: np.random.Generator,
                 dtype=None, discretization: str = "zoh"):
        super().__init__()
        self.discretization = discretization
        self.in_proj = Linear(d_model, d_model, rng, dtype)
        self.conv = CausalConv(d_model, conv_width, rng, dtype)
        self.ssm = SsmParams(d_model, state_dim, rng, dtype)
        self.gate_proj = Linear(d_model, d_model, rng, dtype)
        self.out_proj = Linear(d_model, d_model, rng, dtype)

    def forward(self, x, scan_method: str = "parallel") -> Tensor:
        u = silu(self.conv(self.in_proj(x)))
        y = ssm_forward(u, self.ssm, method=scan_method, discretization=self.discretization)
        y = y * silu(self.gate_proj(x))
        return self.out_proj(y) + x


def block_forward(x, block: MambaBlock, scan_method: str = "parallel") -> Tensor:
    return block(x, scan_method=scan_method)


class MambaModel(Module):
    def __init__(self, cfg: StudentConfig, seed: int = 0, dtype=None):
        super().__init__()
        cfg.validate()
        dtype = np.dtype(dtype or get_default_dtype())
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.seed = seed
        d = cfg.d_model
        self.embedding = PatchEmbedding(cfg.patch_dim, d, cfg.seq_len, rng, dtype)
        self.blocks = ModuleList(
            MambaBlock(d, cfg.state_dim, cfg.conv_width, rng, dtype, cfg.discretization) for _ in range(cfg.n_blocks)
        )
        widths = [cfg.channels * d, *cfg.hidden_layers]
        self.hidden = ModuleList(Linear(w_in, w_out, rng, dtype) for w_in, w_out in zip(widths[:-1], widths[1:]))
        self.head = Linear(widths[-1], cfg.n_classes, rng, dtype)

    def forward(self, images, scan_method: str = "parallel") -> Tensor:
        seq = patchify(images, self.cfg)
        if seq.tokens.ndim != 4:
            raise ShapeError(f"model_forward expects a batch [B, C, H, W], got {seq.tokens.shape}")
        streams = [self.embedding(seq.tokens[:, c]) for c in range(self.cfg.channels)]
        for i, block in enumerate(self.blocks):
            c = i % self.cfg.channels
            streams[c] = block(streams[c], scan_method=scan_method)
            if not np.all(np.isfinite(streams[c].data)):
                logger.warning("non-finite activations after block %d", i)
                raise NumericalError(f"non-finite activations after block {i}")
        h = concat([mean(s, axis=1) for s in streams], axis=1)
        for layer in self.hidden:
            h = silu(layer(h))
        logits = self.head(h)
        if not np.all(np.isfinite(logits.data)):
            raise NumericalError(f"non-finite logits at layer {len(self.blocks) + len(self.hidden)}")
        return logits


def build_model(cfg: StudentConfig, seed: int = 0, dtype=None) -> MambaModel:
    if not isinstance(cfg, StudentConfig):
        raise ConfigError(f"expected a StudentConfig, got {type(cfg).__name__}")
    return MambaModel(cfg, seed, dtype)


def model_forward(model: MambaModel, batch, scan_method: str = "parallel") -> Tensor:
    return model(batch, scan_method=scan_method)


def count_params(model: Module) -> int:
    return int(sum(p.size for p in model.parameters()))


def predict_logits(model: MambaModel, images: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Logits for every image, evaluated in batches without recording a tape."""
    images = np.asarray(images, dtype=model.head.weight.dtype)
    if len(images) == 0:
        return np.zeros((0, model.cfg.n_classes), dtype=np.float64)
    starts = range(0, len(images), batch_size)

    def run(start: int) -> np.ndarray:
        with no_grad():
            return model(images[start:start + batch_size]).data

    return np.concatenate(map_ordered(run, starts))


def predict_proba(model: MambaModel, images: np.ndarray, batch_size: int = 256) -> np.ndarray:
    from ..tensor.ops import softmax_array

    return softmax_array(predict_logits(model, images, batch_size).astype(np.float64))


# *** persistence: MPKD weights plus a JSON sidecar holding the config ***

def sidecar_path(path: str | os.PathLike) -> Path:
    return Path(path).with_suffix(".json")


def save_model(model: MambaModel, path: str | os.PathLike) -> None:
    save_checkpoint(path, model.state_dict())
    meta = {"config": model.cfg.to_dict(), "seed": model.seed}
    sidecar_path(path).write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def load_model(path: str | os.PathLike, dtype=None) -> MambaModel:
    side = sidecar_path(path)
    if not Path(path).exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        meta = json.loads(side.read_text(encoding="utf-8"))
        cfg = StudentConfig.from_dict(meta["config"])
    except FileNotFoundError as exc:
        raise CheckpointError(f"missing config sidecar {side}") from exc
    except (KeyError, json.JSONDecodeError, ConfigError) as exc:
        raise CheckpointError(f"invalid config sidecar {side}: {exc}") from exc
    model = build_model(cfg, meta.get("seed", 0), dtype)
    model.load_state_dict(load_checkpoint(path))
    return model


def round_to_checkpoint(model: MambaModel) -> MambaModel:
    """Round weights to checkpoint precision so the in-memory model equals its saved copy."""
    model.load_state_dict({k: v.astype(np.float32) for k, v in model.state_dict().items()})
    return model
