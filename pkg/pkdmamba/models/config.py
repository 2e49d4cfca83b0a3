from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

from ..errors import ConfigError

DISCRETIZATIONS = ("zoh", "euler")


@dataclass(frozen=True)
class StudentConfig:
    """One rung of a model ladder (the teacher is just the largest rung)."""

    n_blocks: int
    state_dim: int
    expansion_factor: int = 2
    conv_width: int = 4
    patch_size: int = 1
    hidden_layers: tuple[int, ...] = ()
    n_classes: int = 10
    channels: int = 1
    height: int = 28
    width: int = 28
    discretization: str = "zoh"
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        self.validate()

    def validate(self, path: str = "") -> None:
        prefix = f"{path}." if path else ""
        for key in ("n_blocks", "state_dim", "expansion_factor", "conv_width", "patch_size",
                    "channels", "height", "width"):
            value = getattr(self, key)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{prefix}{key}: must be a positive integer, got {value!r}")
        if self.n_classes < 2:
            raise ConfigError(f"{prefix}n_classes: need at least 2 classes, got {self.n_classes}")
        if any(h < 1 for h in self.hidden_layers):
            raise ConfigError(f"{prefix}hidden_layers: widths must be positive, got {self.hidden_layers}")
        if self.height % self.patch_size or self.width % self.patch_size:
            raise ConfigError(
                f"{prefix}patch_size: {self.patch_size} does not divide the {self.height}x{self.width} image"
            )
        if self.n_blocks < self.channels:
            raise ConfigError(
                f"{prefix}n_blocks: {self.n_blocks} blocks cannot cover {self.channels} channel sequences"
            )
        if self.discretization not in DISCRETIZATIONS:
            raise ConfigError(f"{prefix}discretization: expected one of {DISCRETIZATIONS}, got {self.discretization!r}")

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size

    @property
    def d_model(self) -> int:
        return self.expansion_factor * self.patch_dim

    @property
    def seq_len(self) -> int:
        return (self.height // self.patch_size) * (self.width // self.patch_size)

    @property
    def label(self) -> str:
        return self.name or f"b{self.n_blocks}-s{self.state_dim}-e{self.expansion_factor}"

    def to_dict(self) -> dict:
        data = asdict(self)
        data["hidden_layers"] = list(self.hidden_layers)
        return data

    @classmethod
    def from_dict(cls, data: dict, path: str = "") -> StudentConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            prefix = f"{path}." if path else ""
            raise ConfigError(f"{prefix}{unknown[0]}: unknown field")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"{path or 'model'}: {exc}") from exc
        except ConfigError as exc:
            if path and not str(exc).startswith(path):
                raise ConfigError(f"{path}.{exc}") from exc
            raise

    def replace(self, **changes) -> StudentConfig:
        data = self.to_dict()
        data.update(changes)
        return StudentConfig(**data)


def _ladder(shape: dict, rungs, names=None) -> tuple[StudentConfig, ...]:
    out = []
    for i, (blocks, state, expansion) in enumerate(rungs, start=1):
        name = names[i - 1] if names else f"student-{i}"
        out.append(StudentConfig(n_blocks=blocks, state_dim=state, expansion_factor=expansion, name=name, **shape))
    return tuple(out)


MNIST_SHAPE = dict(patch_size=1, conv_width=4, n_classes=10, channels=1, height=28, width=28)
CIFAR_SHAPE = dict(patch_size=1, conv_width=4, n_classes=10, channels=3, height=32, width=32)
DESK_MNIST_SHAPE = dict(patch_size=4, conv_width=4, n_classes=10, channels=1, height=28, width=28)
SYNTHETIC_SHAPE = dict(patch_size=4, conv_width=4, n_classes=4, channels=1, height=16, width=16)

# Block and state sizes follow the reference ladders; expansion factors are raised
# on the upper rungs so parameters and FLOPs strictly increase.
MNIST_LADDER = _ladder(MNIST_SHAPE, [(1, 16, 2), (1, 32, 2), (1, 64, 2), (4, 64, 2), (7, 32, 3), (7, 64, 3), (14, 32, 3)])
MNIST_TEACHER = StudentConfig(n_blocks=28, state_dim=128, expansion_factor=4, name="teacher", **MNIST_SHAPE)

CIFAR_LADDER = _ladder(
    CIFAR_SHAPE, [(24, 128, 2), (24, 256, 2), (48, 128, 2), (48, 256, 2), (48, 256, 3), (96, 128, 3), (96, 128, 4)]
)
CIFAR_TEACHER = StudentConfig(n_blocks=96, state_dim=256, expansion_factor=4, name="teacher", **CIFAR_SHAPE)

DESK_MNIST_LADDER = _ladder(
    DESK_MNIST_SHAPE, [(1, 16, 2), (1, 32, 2), (1, 64, 2), (2, 32, 2), (2, 64, 2), (4, 32, 2), (4, 64, 2)]
)
DESK_MNIST_TEACHER = StudentConfig(n_blocks=8, state_dim=64, expansion_factor=2, name="teacher", **DESK_MNIST_SHAPE)

SYNTHETIC_LADDER = _ladder(SYNTHETIC_SHAPE, [(1, 8, 2), (1, 16, 2), (2, 16, 2)])
SYNTHETIC_TEACHER = StudentConfig(n_blocks=4, state_dim=32, expansion_factor=2, name="teacher", **SYNTHETIC_SHAPE)


@dataclass(frozen=True)
class ReferenceResult:
    """Reference figures for a rung: parameters, FLOPs and accuracy."""

    params: int
    flops: int
    accuracy: float


# Keyed by rung name; the teacher row anchors the reference FLOPs fractions.
MNIST_REFERENCE = {
    "teacher": ReferenceResult(34674, 94684, 0.98),
    "student-7": ReferenceResult(11966, 51744, 0.98),
    "student-6": ReferenceResult(5078, 7448, 0.93),
    "student-5": ReferenceResult(3734, 7448, 0.91),
    "student-4": ReferenceResult(3674, 5096, 0.88),
    "student-3": ReferenceResult(2378, 2744, 0.84),
    "student-2": ReferenceResult(1206, 1372, 0.76),
    "student-1": ReferenceResult(620, 686, 0.60),
}

CIFAR_REFERENCE = {
    "teacher": ReferenceResult(443530, 2390016, 0.87),
    "student-7": ReferenceResult(83528, 450106, 0.86),
    "student-6": ReferenceResult(78730, 430340, 0.84),
    "student-5": ReferenceResult(76908, 420202, 0.81),
    "student-4": ReferenceResult(72214, 405304, 0.78),
    "student-3": ReferenceResult(65242, 351560, 0.73),
    "student-2": ReferenceResult(38224, 206080, 0.65),
    "student-1": ReferenceResult(22176, 119506, 0.50),
}

reference_by_dataset = {
    "mnist": MNIST_REFERENCE,
    "cifar10": CIFAR_REFERENCE,
}
