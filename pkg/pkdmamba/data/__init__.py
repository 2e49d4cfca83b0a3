from .dataset import Dataset, concat_datasets, split_70_30, split_dataset, stratified_subset
from .readers import (
    load_cifar_binary,
    load_cifar_dir,
    load_mnist_dir,
    load_mnist_idx,
    write_cifar_binary,
    write_mnist_idx,
)
from .synthetic import synthetic_blobs, templates

__all__ = [
    "Dataset",
    "concat_datasets",
    "split_70_30",
    "split_dataset",
    "stratified_subset",
    "load_cifar_binary",
    "load_cifar_dir",
    "load_mnist_dir",
    "load_mnist_idx",
    "write_cifar_binary",
    "write_mnist_idx",
    "synthetic_blobs",
    "templates",
]
