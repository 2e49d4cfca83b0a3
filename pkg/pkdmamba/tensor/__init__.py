from .core import (
    Function,
    Tensor,
    as_tensor,
    backward,
    get_default_dtype,
    is_grad_enabled,
    no_grad,
    set_default_dtype,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import check_gradients
from .module import Module, ModuleList, parameter
from .ops import (
    causal_conv1d,
    clip,
    concat,
    cross_entropy,
    exp,
    log,
    log_softmax,
    matmul,
    mean,
    sigmoid,
    silu,
    softmax,
    softmax_t,
    softplus,
)
from .optim import SGD, LRSchedule, sgd_step

__all__ = [
    "Function",
    "Tensor",
    "as_tensor",
    "backward",
    "get_default_dtype",
    "is_grad_enabled",
    "no_grad",
    "set_default_dtype",
    "load_checkpoint",
    "save_checkpoint",
    "check_gradients",
    "Module",
    "ModuleList",
    "parameter",
    "causal_conv1d",
    "clip",
    "concat",
    "cross_entropy",
    "exp",
    "log",
    "log_softmax",
    "matmul",
    "mean",
    "sigmoid",
    "silu",
    "softmax",
    "softmax_t",
    "softplus",
    "SGD",
    "LRSchedule",
    "sgd_step",
]
