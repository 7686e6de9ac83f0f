"""Numerical laboratory for continuous LWE and its homogeneous variant."""

from .distributions import ClweParams, HiddenDirection, HiddenSubspace, SampleBatch
from .lattice import Lattice
from .numerics import InternalConsistencyError, ParameterError, PrecisionError, width_to_std

__version__ = "0.1.0"

__all__ = [
    "ClweParams",
    "HiddenDirection",
    "HiddenSubspace",
    "InternalConsistencyError",
    "Lattice",
    "ParameterError",
    "PrecisionError",
    "SampleBatch",
    "width_to_std",
]
