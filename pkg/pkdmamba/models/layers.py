from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from ..tensor import Module, Tensor, causal_conv1d, matmul, parameter
from ..tensor.core import as_tensor


def uniform_init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape)


class Linear(Module):
    """y = x @ W + b with W stored as [in, out]."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, dtype=None, bias: bool = True):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = parameter(uniform_init(rng, in_features, (in_features, out_features)), dtype)
        self.bias = parameter(uniform_init(rng, in_features, (out_features,)), dtype) if bias else None

    def forward(self, x) -> Tensor:
        y = matmul(x, self.weight)
        return y + self.bias if self.bias is not None else y


class CausalConv(Module):
    """Depthwise causal convolution over time, one K-tap filter per channel."""

    def __init__(self, channels: int, width: int, rng: np.random.Generator, dtype=None):
        super().__init__()
        self.weight = parameter(uniform_init(rng, width, (channels, width)), dtype)
        self.bias = parameter(uniform_init(rng, width, (channels,)), dtype)

    def forward(self, x) -> Tensor:
        return causal_conv1d(x, self.weight, self.bias)


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    """Fixed [length, dim] table: sin on even columns, cos on odd ones."""
    positions = np.arange(length, dtype=np.float64)[:, np.newaxis]
    index = np.arange(dim)
    freq = np.power(10000.0, -2.0 * (index // 2) / dim)
    angles = positions * freq[np.newaxis, :]
    return np.where(index % 2 == 0, np.sin(angles), np.cos(angles))


@dataclass(frozen=True)
class PatchSequence:
    """Raw patches [..., C, T, p²] in row-major patch order."""

    tokens: Tensor
    patch_size: int

    @property
    def channels(self) -> int:
        return self.tokens.shape[-3]

    @property
    def length(self) -> int:
        return self.tokens.shape[-2]


def patchify(images, cfg) -> PatchSequence:
    """Split [C, H, W] or [B, C, H, W] images into flattened p×p patches per channel."""
    images = as_tensor(images)
    single = images.ndim == 3
    if single:
        images = images.reshape((1,) + images.shape)
    if images.ndim != 4:
        raise ShapeError(f"expected [B, C, H, W] images, got {images.shape}")
    batch, channels, height, width = images.shape
    p = cfg.patch_size
    if height % p or width % p:
        raise ShapeError(f"patch size {p} does not divide {height}x{width}")
    if (channels, height, width) != (cfg.channels, cfg.height, cfg.width):
        raise ShapeError(f"model expects {cfg.channels}x{cfg.height}x{cfg.width} images, got {channels}x{height}x{width}")
    rows, cols = height // p, width // p
    x = images.reshape((batch, channels, rows, p, cols, p))
    x = x.transpose((0, 1, 2, 4, 3, 5))
    x = x.reshape((batch, channels, rows * cols, p * p))
    if single:
        x = x.reshape(x.shape[1:])
    return PatchSequence(tokens=x, patch_size=p)


class PatchEmbedding(Module):
    """Linear patch embedding shared by all channels plus fixed sinusoidal positions."""

    def __init__(self, patch_dim: int, d_model: int, seq_len: int, rng: np.random.Generator, dtype=None):
        super().__init__()
        self.proj = Linear(patch_dim, d_model, rng, dtype)
        self.positions = sinusoidal_positions(seq_len, d_model).astype(self.proj.weight.dtype)

    def forward(self, patches) -> Tensor:
        return self.proj(patches) + self.positions
