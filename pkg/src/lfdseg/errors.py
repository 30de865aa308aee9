"""Exception types raised by the engine."""


class LfdsegError(Exception):
    """Base class for all engine errors."""


class ShapeError(LfdsegError):
    """Tensor or kernel argument dimensions are inconsistent."""


class GraphBuildError(LfdsegError):
    """A variant cannot be built for the requested input size."""


class WeightFormatError(LfdsegError):
    """Base class for .lfdw container parse failures."""


class BadMagicError(WeightFormatError):
    pass


class BadVersionError(WeightFormatError):
    pass


class ChecksumError(WeightFormatError):
    pass


class TruncatedError(WeightFormatError):
    pass


class UnsupportedDtypeError(WeightFormatError):
    pass


class BindError(LfdsegError):
    """Weight store does not satisfy the graph's slots."""


class DataError(LfdsegError):
    """Input files are missing, unreadable, or inconsistent."""
