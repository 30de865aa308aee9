"""Ultra-fast bilateral road segmentation: CPU inference and analysis engine."""

from .errors import (
    BindError,
    DataError,
    GraphBuildError,
    LfdsegError,
    ShapeError,
    WeightFormatError,
)
from .tensor import Tensor

__version__ = "1.0.0"

__all__ = [
    "BindError",
    "DataError",
    "GraphBuildError",
    "LfdsegError",
    "ShapeError",
    "Tensor",
    "WeightFormatError",
    "__version__",
]
