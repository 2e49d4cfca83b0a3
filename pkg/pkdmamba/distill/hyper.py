from __future__ import annotations

from dataclasses import asdict, dataclass

from ..errors import ParameterError


@dataclass(frozen=True)
class DistillHyper:
    """Distillation hyperparameters.

    alpha weighs hard-label cross-entropy against the softened teacher term;
    gamma and B_reg shape the residual loss; eta is the residual-matrix update rate.
    """

    alpha: float = 0.5
    temperature: float = 2.0
    gamma: float = 1.0
    B_reg: float = 1.0
    eta: float = 0.5
    rounds: int = 7
    weak_check_epochs: int = 10
    patience: int = 5
    epochs: int = 50
    weak_margin: float = 0.0
    stop_on_success: bool = True

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha: must be in [0, 1], got {self.alpha}")
        for key in ("temperature", "gamma", "B_reg", "eta"):
            if not getattr(self, key) > 0:
                raise ParameterError(f"{key}: must be > 0, got {getattr(self, key)}")
        if self.rounds < 0:
            raise ParameterError(f"rounds: must be >= 0, got {self.rounds}")
        for key in ("weak_check_epochs", "patience"):
            if getattr(self, key) < 1:
                raise ParameterError(f"{key}: must be >= 1, got {getattr(self, key)}")
        if self.epochs < 0:
            raise ParameterError(f"epochs: must be >= 0, got {self.epochs}")

    def to_dict(self) -> dict:
        return asdict(self)
