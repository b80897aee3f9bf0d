"""Numerical lab for u_t + b.grad u + (-Delta)^s u = f via the extension problem."""

__version__ = "0.1.0"

from .core import (
    ExtendedField,
    FractionalParams,
    GradedYGrid,
    HolderSynthConfig,
    ScalarField,
    SplitMix64,
    TorusGrid,
)
from .errors import FracdriftError

__all__ = [
    "__version__",
    "ExtendedField",
    "FractionalParams",
    "GradedYGrid",
    "HolderSynthConfig",
    "ScalarField",
    "SplitMix64",
    "TorusGrid",
    "FracdriftError",
]
