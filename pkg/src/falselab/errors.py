"""Exception types shared across the package."""


class FalselabError(Exception):
    """Base class for all errors raised by falselab."""


class DimensionError(FalselabError, ValueError):
    """Tensor shapes do not compose (carries the offending layer in the message)."""


class DomainError(FalselabError, ValueError):
    """An input value lies outside the mathematical domain of an operation."""


class ParameterError(FalselabError, ValueError):
    """A caller-supplied parameter violates a precondition."""


class ConstructionError(FalselabError, ValueError):
    """Problem or network construction invariants are violated."""


class StateError(FalselabError, RuntimeError):
    """An operation was called in the wrong order (e.g. backward before forward)."""


class MalformedImageError(FalselabError, ValueError):
    """An image does not contain a single full-length 3-pixel stripe."""


class DivergedError(FalselabError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss during epoch {epoch}")


class SerializationError(FalselabError, ValueError):
    """A serialized network file is truncated, corrupt, or has a bad header."""
