from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from sklearn.model_selection import train_test_split

from ..errors import LabelIndexError, ParameterError, ShapeError


@dataclass(frozen=True, eq=False)
class Dataset:
    """Images [N, C, H, W] scaled to [0, 1] with integer labels in [0, n_classes)."""

    images: np.ndarray
    labels: np.ndarray
    name: str
    split: str = "all"
    n_classes: int = 10

    def __post_init__(self) -> None:
        images = np.ascontiguousarray(self.images, dtype=np.float32)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if images.ndim != 4:
            raise ShapeError(f"{self.name}: images must be [N, C, H, W], got {images.shape}")
        if labels.shape != (images.shape[0],):
            raise ShapeError(f"{self.name}: {images.shape[0]} images but labels of shape {labels.shape}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise LabelIndexError(f"{self.name}: labels must lie in [0, {self.n_classes})")
        if images.size and (images.min() < 0 or images.max() > 1):
            raise ParameterError(f"{self.name}: pixel values must lie in [0, 1]")
        images.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def subset(self, indices, split: str | None = None) -> Dataset:
        indices = np.asarray(indices, dtype=np.int64)
        return replace(self, images=self.images[indices], labels=self.labels[indices], split=split or self.split)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


def concat_datasets(parts: list[Dataset], name: str | None = None, split: str = "all") -> Dataset:
    if not parts:
        raise ParameterError("nothing to concatenate")
    return Dataset(
        images=np.concatenate([p.images for p in parts]),
        labels=np.concatenate([p.labels for p in parts]),
        name=name or parts[0].name,
        split=split,
        n_classes=parts[0].n_classes,
    )


def split_indices(n: int, seed: int, train_fraction: float) -> tuple[np.ndarray, np.ndarray]:
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(n * train_fraction))
    return order[:n_train], order[n_train:]


def split_dataset(ds: Dataset, seed: int, train_fraction: float = 0.7) -> tuple[Dataset, Dataset]:
    """Seeded shuffle of the whole pool; the first ``train_fraction`` becomes the train split."""
    if len(ds) < 10:
        raise ParameterError(f"need at least 10 examples to split, got {len(ds)}")
    if not 0 < train_fraction < 1:
        raise ParameterError(f"train_fraction must be in (0, 1), got {train_fraction}")
    train_idx, test_idx = split_indices(len(ds), seed, train_fraction)
    return ds.subset(train_idx, "train"), ds.subset(test_idx, "test")


def split_70_30(ds: Dataset, seed: int) -> tuple[Dataset, Dataset]:
    return split_dataset(ds, seed, 0.7)


def stratified_subset(ds: Dataset, n: int, seed: int) -> Dataset:
    """``n`` examples drawn with the class proportions of ``ds``."""
    if n >= len(ds):
        return ds
    indices = np.arange(len(ds))
    chosen, _ = train_test_split(indices, train_size=n, stratify=ds.labels, random_state=seed % (2**32))
    return ds.subset(np.sort(chosen))
