"""Package-wide exception types."""


class NoisyNetError(Exception):
    """Base class for errors raised by this package."""


class CapExceeded(NoisyNetError):
    """Exact enumeration would exceed the configured budget."""

    def __init__(self, message, size=None):
        super().__init__(message)
        self.size = size


class TreeCapExceeded(CapExceeded):
    """Materializing a decision tree would exceed the node cap."""


class UndersizedCell(NoisyNetError):
    """A tessellation cell holds fewer nodes than the decomposition needs."""


class EmptyS2(NoisyNetError):
    """The transmission filter removed every candidate cell."""
