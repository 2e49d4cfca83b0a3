"""
Settings and experiment configuration.

Process settings come from the environment (optionally a ``.env`` file). An
experiment is a ``RunConfig`` read from a TOML file or picked from the presets in
``config_by_name``.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .data import Dataset, load_cifar_dir, load_mnist_dir, split_dataset, stratified_subset, synthetic_blobs
from .distill import DistillHyper, TrainParams
from .errors import ConfigError, ParameterError
from .metrics import flops_estimate
from .models import (
    CIFAR_LADDER,
    CIFAR_TEACHER,
    DESK_MNIST_LADDER,
    DESK_MNIST_TEACHER,
    MNIST_LADDER,
    MNIST_TEACHER,
    SYNTHETIC_LADDER,
    SYNTHETIC_TEACHER,
    StudentConfig,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class Settings:
    WORKERS = 1
    DATA_DIR = "data"
    OUTPUT_DIR = "runs"
    LOG_LEVEL = "INFO"


class DevelopmentSettings(Settings):
    pass


class ProductionSettings(Settings):
    LOG_LEVEL = "WARNING"


settings_by_name = {
    "development": DevelopmentSettings,
    "production": ProductionSettings,
}

ENV_PREFIX = "PKD_"


def get_settings() -> Settings:
    """Settings for ``PKD_ENV``, with any ``PKD_<NAME>`` variable overriding the class value."""
    name = os.environ.get("PKD_ENV", "development")
    try:
        settings = settings_by_name[name]()
    except KeyError:
        raise ConfigError(f"PKD_ENV: unknown environment {name!r}, expected one of {sorted(settings_by_name)}")
    for key in ("WORKERS", "DATA_DIR", "OUTPUT_DIR", "LOG_LEVEL"):
        raw = os.environ.get(ENV_PREFIX + key)
        if raw is None:
            continue
        try:
            setattr(settings, key, type(getattr(settings, key))(raw))
        except ValueError as exc:
            raise ConfigError(f"{ENV_PREFIX}{key}: {exc}") from exc
    return settings


DATASETS = ("synthetic", "mnist", "cifar10")

# channels, height, width, classes of the real datasets
_DATASET_SHAPES = {
    "mnist": (1, 28, 28, 10),
    "cifar10": (3, 32, 32, 10),
}


@dataclass(frozen=True)
class DatasetConfig:
    """Where the examples come from and how they are split.

    ``subset`` draws a class-stratified subset of that many examples before the
    train/test split; the synthetic fields only apply to ``name = "synthetic"``.
    """

    name: str = "synthetic"
    data_dir: str | None = None
    train_fraction: float = 0.7
    subset: int | None = None
    n_per_class: int = 75
    n_classes: int = 4
    image_size: int = 16
    noise: float = 0.1

    def __post_init__(self) -> None:
        if self.name not in DATASETS:
            raise ParameterError(f"name: expected one of {DATASETS}, got {self.name!r}")
        if not 0 < self.train_fraction < 1:
            raise ParameterError(f"train_fraction: must be in (0, 1), got {self.train_fraction}")
        if self.subset is not None and self.subset < 10:
            raise ParameterError(f"subset: need at least 10 examples, got {self.subset}")
        if self.n_per_class < 1 or self.n_classes < 2 or self.image_size < 1:
            raise ParameterError("n_per_class, image_size must be >= 1 and n_classes >= 2")
        if self.noise < 0:
            raise ParameterError(f"noise: must be >= 0, got {self.noise}")

    @property
    def shape(self) -> tuple[int, int, int, int]:
        if self.name == "synthetic":
            return 1, self.image_size, self.image_size, self.n_classes
        return _DATASET_SHAPES[self.name]


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetConfig
    teacher: StudentConfig
    ladder: tuple[StudentConfig, ...]
    hyper: DistillHyper = field(default_factory=DistillHyper)
    train: TrainParams = field(default_factory=TrainParams)
    seed: int = 0
    out_dir: str = "default"

    def __post_init__(self) -> None:
        object.__setattr__(self, "ladder", tuple(self.ladder))
        if not self.ladder:
            raise ConfigError("ladder: must contain at least one student")
        if self.seed < 0:
            raise ConfigError(f"seed: must be a non-negative integer, got {self.seed}")
        channels, height, width, n_classes = self.dataset.shape
        for path, cfg in [("teacher", self.teacher)] + [(f"ladder[{i}]", c) for i, c in enumerate(self.ladder)]:
            found = (cfg.channels, cfg.height, cfg.width, cfg.n_classes)
            if found != (channels, height, width, n_classes):
                raise ConfigError(
                    f"{path}: model expects channels/height/width/classes {found}, "
                    f"dataset {self.dataset.name} provides {(channels, height, width, n_classes)}"
                )
        flops = [flops_estimate(c) for c in self.ladder]
        for i in range(1, len(flops)):
            if flops[i] <= flops[i - 1]:
                raise ConfigError(
                    f"ladder[{i}]: FLOPs {flops[i]} do not exceed ladder[{i - 1}] ({flops[i - 1]}); "
                    "order rungs by increasing cost"
                )

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "out_dir": self.out_dir,
            "dataset": asdict(self.dataset),
            "teacher": self.teacher.to_dict(),
            "ladder": [c.to_dict() for c in self.ladder],
            "hyper": self.hyper.to_dict(),
            "train": self.train.to_dict(),
        }


def config_hash(cfg: RunConfig) -> str:
    """SHA-256 of the canonical JSON of everything but the output location."""
    payload = cfg.to_dict()
    payload.pop("out_dir")
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a table, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}: unknown field")
    try:
        return cls(**data)
    except ParameterError as exc:
        raise ConfigError(f"{path}.{exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _student(data: dict, shared: dict, path: str, name: str) -> StudentConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a table, got {type(data).__name__}")
    return StudentConfig.from_dict({"name": name, **shared, **data}, path)


def _from_mapping(data: dict) -> RunConfig:
    allowed = {"seed", "out_dir", "dataset", "model", "teacher", "ladder", "hyper", "train"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown field")
    for key in ("teacher", "ladder"):
        if key not in data:
            raise ConfigError(f"{key}: missing")
    dataset = _build(DatasetConfig, data.get("dataset", {}), "dataset")
    channels, height, width, n_classes = dataset.shape
    # fields shared by the teacher and every rung; dataset dims fill in what is left out
    shared = {"channels": channels, "height": height, "width": width, "n_classes": n_classes}
    model = data.get("model", {})
    if not isinstance(model, dict):
        raise ConfigError("model: expected a table")
    shared.update(model)
    teacher = _student(data["teacher"], shared, "teacher", "teacher")
    if not isinstance(data["ladder"], list):
        raise ConfigError("ladder: expected an array of tables")
    ladder = tuple(
        _student(entry, shared, f"ladder[{i}]", f"student-{i + 1}") for i, entry in enumerate(data["ladder"])
    )
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"seed: must be an integer, got {seed!r}")
    return RunConfig(
        dataset=dataset,
        teacher=teacher,
        ladder=ladder,
        hyper=_build(DistillHyper, data.get("hyper", {}), "hyper"),
        train=_build(TrainParams, data.get("train", {}), "train"),
        seed=seed,
        out_dir=str(data.get("out_dir", "default")),
    )


def _synthetic() -> RunConfig:
    return RunConfig(
        dataset=DatasetConfig(name="synthetic", train_fraction=2 / 3, n_per_class=75, n_classes=4, image_size=16),
        teacher=SYNTHETIC_TEACHER,
        ladder=SYNTHETIC_LADDER,
        hyper=DistillHyper(rounds=3, epochs=30, weak_check_epochs=5, patience=5),
        train=TrainParams(lr=0.05, momentum=0.9, clip_norm=5.0, epochs=10, batch_size=32, dtype="float64"),
        out_dir="synthetic",
    )


def _mnist_desk() -> RunConfig:
    return RunConfig(
        dataset=DatasetConfig(name="mnist", subset=10_000, train_fraction=0.8),
        teacher=DESK_MNIST_TEACHER,
        ladder=DESK_MNIST_LADDER,
        hyper=DistillHyper(rounds=7, epochs=20, weak_check_epochs=5, patience=5, stop_on_success=False),
        train=TrainParams(lr=0.05, momentum=0.9, clip_norm=5.0, epochs=20, batch_size=32),
        out_dir="mnist-desk",
    )


def _mnist() -> RunConfig:
    return RunConfig(
        dataset=DatasetConfig(name="mnist"),
        teacher=MNIST_TEACHER,
        ladder=MNIST_LADDER,
        out_dir="mnist",
    )


def _cifar10() -> RunConfig:
    return RunConfig(
        dataset=DatasetConfig(name="cifar10"),
        teacher=CIFAR_TEACHER,
        ladder=CIFAR_LADDER,
        out_dir="cifar10",
    )


config_by_name = {
    "synthetic": _synthetic,
    "mnist-desk": _mnist_desk,
    "mnist": _mnist,
    "cifar10": _cifar10,
}


def load_config(source: str | os.PathLike, seed: int | None = None, out_dir: str | os.PathLike | None = None) -> RunConfig:
    """Resolve a preset name or a TOML path into a validated RunConfig."""
    if str(source) in config_by_name:
        cfg = config_by_name[str(source)]()
    else:
        path = Path(source)
        if path.suffix != ".toml" and not path.exists():
            raise ConfigError(f"unknown preset {str(source)!r}; presets are {sorted(config_by_name)}")
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        cfg = _from_mapping(data)
    changes = {}
    if seed is not None:
        if seed < 0:
            raise ConfigError(f"seed: must be a non-negative integer, got {seed}")
        changes["seed"] = int(seed)
    if out_dir is not None:
        changes["out_dir"] = str(out_dir)
    return replace(cfg, **changes) if changes else cfg


def load_splits(dataset: DatasetConfig, seed: int, settings: Settings | None = None) -> tuple[Dataset, Dataset]:
    """Train and test splits for ``dataset``; the same seed always gives the same split."""
    if dataset.name == "synthetic":
        full = synthetic_blobs(dataset.n_per_class, dataset.n_classes, dataset.image_size, seed, noise=dataset.noise)
    else:
        settings = settings or get_settings()
        directory = dataset.data_dir or os.path.join(settings.DATA_DIR, dataset.name)
        full = load_mnist_dir(directory) if dataset.name == "mnist" else load_cifar_dir(directory)
    if dataset.subset is not None and dataset.subset < len(full):
        full = stratified_subset(full, dataset.subset, seed)
    return split_dataset(full, seed, dataset.train_fraction)
