"""
Readers and writers for the MNIST IDX and CIFAR-10 binary formats.

IDX (big endian):
    images: u32 magic 2051 | u32 count | u32 rows | u32 cols | u8 pixels, row-wise
    labels: u32 magic 2049 | u32 count | u8 labels

CIFAR-10 binary: records of 1 label byte followed by 3072 pixel bytes
(1024 red, 1024 green, 1024 blue, each plane row-wise over 32x32).
"""

from __future__ import annotations

import gzip
import logging
import os
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import DataLengthError, DatasetMissingError, FormatError
from .dataset import Dataset, concat_datasets

logger = logging.getLogger(__name__)

MNIST_IMAGE_MAGIC = 2051
MNIST_LABEL_MAGIC = 2049
CIFAR_SIDE = 32
CIFAR_RECORD = 1 + 3 * CIFAR_SIDE * CIFAR_SIDE

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
CIFAR_FILES = [f"data_batch_{i}.bin" for i in range(1, 6)] + ["test_batch.bin"]


def _read_bytes(path: str | os.PathLike) -> bytes:
    path = Path(path)
    if not path.exists():
        raise DatasetMissingError(f"dataset file not found: {path}")
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def _header(raw: bytes, fields: int, path) -> np.ndarray:
    if len(raw) < 4 * fields:
        raise DataLengthError(f"{path}: header needs {4 * fields} bytes, file has {len(raw)}")
    return np.frombuffer(raw, dtype=">u4", count=fields).astype(np.int64)


def read_idx_images(path) -> np.ndarray:
    raw = _read_bytes(path)
    magic, count, rows, cols = _header(raw, 4, path)
    if magic != MNIST_IMAGE_MAGIC:
        raise FormatError(f"{path}: image magic {magic}, expected {MNIST_IMAGE_MAGIC}")
    expected = 16 + count * rows * cols
    if len(raw) < expected:
        raise DataLengthError(f"{path}: expected {expected} bytes for {count} images, file has {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8, count=count * rows * cols, offset=16).reshape(count, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    raw = _read_bytes(path)
    magic, count = _header(raw, 2, path)
    if magic != MNIST_LABEL_MAGIC:
        raise FormatError(f"{path}: label magic {magic}, expected {MNIST_LABEL_MAGIC}")
    if len(raw) < 8 + count:
        raise DataLengthError(f"{path}: expected {8 + count} bytes for {count} labels, file has {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=8)


def load_mnist_idx(image_path, label_path, split: str = "all") -> Dataset:
    pixels = read_idx_images(image_path)
    labels = read_idx_labels(label_path)
    if len(pixels) != len(labels):
        raise FormatError(f"{len(pixels)} images in {image_path} but {len(labels)} labels in {label_path}")
    images = (pixels.astype(np.float32) / 255.0)[:, np.newaxis]
    return Dataset(images=images, labels=labels, name="mnist", split=split, n_classes=10)


def load_cifar_binary(batch_paths: Sequence[str | os.PathLike] | str | os.PathLike, split: str = "all") -> Dataset:
    if isinstance(batch_paths, (str, os.PathLike)):
        batch_paths = [batch_paths]
    images, labels = [], []
    for path in batch_paths:
        raw = _read_bytes(path)
        if len(raw) == 0 or len(raw) % CIFAR_RECORD:
            raise DataLengthError(f"{path}: length {len(raw)} is not a multiple of the {CIFAR_RECORD}-byte record")
        records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
        labels.append(records[:, 0])
        images.append(records[:, 1:].reshape(-1, 3, CIFAR_SIDE, CIFAR_SIDE))
    pixels = np.concatenate(images)
    return Dataset(
        images=pixels.astype(np.float32) / 255.0,
        labels=np.concatenate(labels),
        name="cifar10",
        split=split,
        n_classes=10,
    )


def _find(directory: Path, stem: str) -> Path:
    candidates = [stem, stem + ".gz", stem.replace("-idx", ".idx"), stem.replace("-idx", ".idx") + ".gz"]
    for name in candidates:
        if (directory / name).exists():
            return directory / name
    raise DatasetMissingError(
        f"{stem} not found in {directory}; download the official MNIST files there or set PKD_DATA_DIR"
    )


def load_mnist_dir(directory: str | os.PathLike) -> Dataset:
    """Official train and test files merged into one 70,000-image pool."""
    directory = Path(directory)
    parts = []
    for split, (images, labels) in MNIST_FILES.items():
        parts.append(load_mnist_idx(_find(directory, images), _find(directory, labels), split))
    pool = concat_datasets(parts, name="mnist")
    logger.info("loaded %d MNIST images from %s", len(pool), directory)
    return pool


def load_cifar_dir(directory: str | os.PathLike) -> Dataset:
    """The five training batches and the test batch merged into one 60,000-image pool."""
    directory = Path(directory)
    nested = directory / "cifar-10-batches-bin"
    if not (directory / CIFAR_FILES[0]).exists() and nested.is_dir():
        directory = nested
    missing = [name for name in CIFAR_FILES if not (directory / name).exists()]
    if missing:
        raise DatasetMissingError(
            f"{', '.join(missing)} not found in {directory}; extract cifar-10-binary.tar.gz there or set PKD_DATA_DIR"
        )
    pool = load_cifar_binary([directory / name for name in CIFAR_FILES])
    logger.info("loaded %d CIFAR-10 images from %s", len(pool), directory)
    return pool


def _to_bytes(images: np.ndarray) -> np.ndarray:
    return np.rint(np.asarray(images, dtype=np.float64) * 255.0).astype(np.uint8)


def write_mnist_idx(ds: Dataset, image_path, label_path) -> None:
    pixels = _to_bytes(ds.images[:, 0])
    count, rows, cols = pixels.shape
    with open(image_path, "wb") as fh:
        fh.write(np.array([MNIST_IMAGE_MAGIC, count, rows, cols], dtype=">u4").tobytes())
        fh.write(pixels.tobytes())
    with open(label_path, "wb") as fh:
        fh.write(np.array([MNIST_LABEL_MAGIC, count], dtype=">u4").tobytes())
        fh.write(ds.labels.astype(np.uint8).tobytes())


def write_cifar_binary(ds: Dataset, path) -> None:
    pixels = _to_bytes(ds.images).reshape(len(ds), -1)
    records = np.concatenate([ds.labels.astype(np.uint8)[:, np.newaxis], pixels], axis=1)
    with open(path, "wb") as fh:
        fh.write(records.tobytes())
