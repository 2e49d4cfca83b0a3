from __future__ import annotations

import itertools

import numpy as np

from ..errors import ParameterError
from .dataset import Dataset

# Horizontal, vertical and the two diagonals first; the rest fill in larger class counts.
_PRIMARY_WAVES = ((1, 0), (0, 1), (1, 1), (1, -1))


def _wave_vectors(period: int):
    yield from _PRIMARY_WAVES
    for ky, kx in itertools.product(range(period), repeat=2):
        if (kx, ky) != (0, 0):
            yield kx, ky


def templates(n_classes: int, image_size: int, period: int = 4) -> np.ndarray:
    """One oriented grating per class, values in [0, 1].

    Every grating repeats after ``period`` pixels along both axes, so any patch
    size that is a multiple of ``period`` sees the same pattern in every patch and
    the class survives averaging over patches.
    """
    if period < 2:
        raise ParameterError(f"period must be >= 2, got {period}")
    yy, xx = np.meshgrid(np.arange(image_size), np.arange(image_size), indexing="ij")
    out: list[np.ndarray] = []
    for kx, ky in _wave_vectors(period):
        grid = 0.5 + 0.5 * np.sin(2 * np.pi * (kx * xx + ky * yy) / period + np.pi / 4)
        if any(np.allclose(grid, seen) for seen in out):
            continue
        out.append(grid)
        if len(out) == n_classes:
            return np.stack(out)
    raise ParameterError(f"period {period} gives only {len(out)} distinct gratings, need {n_classes}")


def synthetic_blobs(
    n_per_class: int,
    n_classes: int,
    image_size: int,
    seed: int,
    noise: float = 0.1,
) -> Dataset:
    """Exactly balanced class-conditional gratings with seeded Gaussian noise, clipped to [0, 1]."""
    if n_per_class < 1 or n_classes < 2 or image_size < 1:
        raise ParameterError(
            f"need n_per_class >= 1, n_classes >= 2, image_size >= 1; got {n_per_class}, {n_classes}, {image_size}"
        )
    if noise < 0:
        raise ParameterError(f"noise must be >= 0, got {noise}")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(n_classes), n_per_class)
    labels = labels[rng.permutation(labels.size)]
    base = templates(n_classes, image_size)[labels]
    if noise > 0:
        base = base + rng.normal(0.0, noise, base.shape)
    images = np.clip(base, 0.0, 1.0)[:, np.newaxis]
    return Dataset(images=images, labels=labels, name="synthetic", split="all", n_classes=n_classes)
