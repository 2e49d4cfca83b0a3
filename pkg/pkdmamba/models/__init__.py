from .config import (
    CIFAR_LADDER,
    CIFAR_TEACHER,
    DESK_MNIST_LADDER,
    DESK_MNIST_TEACHER,
    MNIST_LADDER,
    MNIST_TEACHER,
    SYNTHETIC_LADDER,
    SYNTHETIC_TEACHER,
    ReferenceResult,
    StudentConfig,
    reference_by_dataset,
)
from .layers import CausalConv, Linear, PatchEmbedding, PatchSequence, patchify, sinusoidal_positions
from .mamba import (
    MambaBlock,
    MambaModel,
    block_forward,
    build_model,
    count_params,
    load_model,
    model_forward,
    predict_logits,
    predict_proba,
    round_to_checkpoint,
    save_model,
)

__all__ = [
    "CIFAR_LADDER",
    "CIFAR_TEACHER",
    "DESK_MNIST_LADDER",
    "DESK_MNIST_TEACHER",
    "MNIST_LADDER",
    "MNIST_TEACHER",
    "SYNTHETIC_LADDER",
    "SYNTHETIC_TEACHER",
    "ReferenceResult",
    "StudentConfig",
    "reference_by_dataset",
    "CausalConv",
    "Linear",
    "PatchEmbedding",
    "PatchSequence",
    "patchify",
    "sinusoidal_positions",
    "MambaBlock",
    "MambaModel",
    "block_forward",
    "build_model",
    "count_params",
    "load_model",
    "model_forward",
    "predict_logits",
    "predict_proba",
    "round_to_checkpoint",
    "save_model",
]
