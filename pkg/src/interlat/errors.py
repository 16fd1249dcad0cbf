"""Exception types raised across the package."""


class InterlatError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(InterlatError, ValueError):
    pass


class DimMismatch(ShapeMismatch):
    """Channel dimension of hidden states does not match the latent dimension."""


class AxisOutOfRange(InterlatError, IndexError):
    pass


class ElementCountMismatch(InterlatError, ValueError):
    pass


class InvalidPermutation(InterlatError, ValueError):
    pass


class NonScalarRoot(InterlatError, ValueError):
    pass


class EmptyTape(InterlatError, RuntimeError):
    pass


class NonFiniteError(InterlatError, FloatingPointError):
    """A NaN or Inf was produced where only finite values are allowed."""


class NonFiniteEvaluation(NonFiniteError):
    pass


class InvalidDimension(InterlatError, ValueError):
    pass


class TooFewLatents(InterlatError, ValueError):
    pass


class NonPositiveTemperature(InterlatError, ValueError):
    pass


class StepOutOfRange(InterlatError, IndexError):
    pass


class ConfigInvalid(InterlatError, ValueError):
    pass


class DatasetEmpty(InterlatError, ValueError):
    pass


class NonFiniteLoss(NonFiniteError):
    def __init__(self, step, value=None):
        super().__init__(f"non-finite loss at step {step}: {value!r}")
        self.step = step
        self.value = value


class UnknownClass(InterlatError, KeyError):
    pass


class IoError(InterlatError, OSError):
    pass


class FormatVersionMismatch(InterlatError, ValueError):
    pass


class ChecksumMismatch(InterlatError, ValueError):
    pass
