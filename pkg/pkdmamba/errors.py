from __future__ import annotations


class PkdError(Exception):
    """Base class for every error raised by pkdmamba."""


class ShapeError(PkdError, ValueError):
    pass


class ParameterError(PkdError, ValueError):
    pass


class UsageError(PkdError, RuntimeError):
    pass


class NumericalError(PkdError, ArithmeticError):
    """Non-finite values found in gradients, hidden states or activations."""


class LabelIndexError(PkdError, IndexError):
    pass


class FormatError(PkdError, ValueError):
    pass


class DataLengthError(FormatError):
    pass


class DatasetMissingError(PkdError, FileNotFoundError):
    pass


class ConfigError(PkdError, ValueError):
    pass


class CheckpointError(PkdError, ValueError):
    pass
