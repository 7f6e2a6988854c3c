"""Exception types shared across the package."""


class KrignetError(Exception):
    """Base class for all package-specific errors."""


class DegenerateDomainError(KrignetError, ValueError):
    """All input locations coincide; no spatial domain to scale."""


class DuplicateLocationError(KrignetError, ValueError):
    """Two or more input locations are identical."""


class FactorizationError(KrignetError, ValueError):
    """A correlation matrix failed its positive-definite factorization."""


class EnvelopeError(KrignetError, ValueError):
    """A covariance parameter lies outside the surrogate training envelope."""

    def __init__(self, parameter: str, value: float, lo: float, hi: float):
        self.parameter = parameter
        self.value = value
        self.lo = lo
        self.hi = hi
        super().__init__(
            f"{parameter}={value:g} outside training envelope [{lo:g}, {hi:g}]"
        )


class EnvelopeWarning(UserWarning):
    """A value was clamped to the edge of the supported range."""


class BankFormatError(KrignetError, ValueError):
    """A model-bank file is unreadable: bad version, checksum, or truncation."""


class TrainingDivergedError(KrignetError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        super().__init__(f"non-finite training loss ({loss}) at epoch {epoch}")


class FlatFieldError(KrignetError, ValueError):
    """Data has (near-)zero variance; the empirical variogram is degenerate."""
