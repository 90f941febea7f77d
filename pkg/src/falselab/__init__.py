"""falselab: a numerical laboratory for shortcut (false-structure) learning.

Two synthetic binary-classification experiments, a from-scratch training
engine (dense/conv/pool layers, ADAM, glorot init), an analytic
construction of a provably stable classifier, and diagnostics that decide
whether a trained network implements the intended rule, a rival shortcut
rule, or neither.
"""

from . import case1, case2, diagnostics, nn, reporting
from .errors import (ConstructionError, DimensionError, DivergedError,
                     DomainError, FalselabError, MalformedImageError,
                     ParameterError, SerializationError, StateError)

__version__ = "0.1.0"

__all__ = [
    "case1", "case2", "diagnostics", "nn", "reporting",
    "ConstructionError", "DimensionError", "DivergedError", "DomainError",
    "FalselabError", "MalformedImageError", "ParameterError",
    "SerializationError", "StateError", "__version__",
]
