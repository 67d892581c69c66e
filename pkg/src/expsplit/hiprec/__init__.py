"""Double-double and quad-double arithmetic."""

from .core import (
    DEFAULT_PREC,
    EPS,
    NCOMP,
    DomainError,
    ExComplex,
    ExReal,
    HiPrecError,
    NonFiniteError,
    as_exreal,
)
from .elementary import atan2, cos, exp, expm1, ln2, log, pi, sin, sqrt

__all__ = [
    "DEFAULT_PREC",
    "EPS",
    "NCOMP",
    "DomainError",
    "ExComplex",
    "ExReal",
    "HiPrecError",
    "NonFiniteError",
    "as_exreal",
    "atan2",
    "cos",
    "exp",
    "expm1",
    "ln2",
    "log",
    "pi",
    "sin",
    "sqrt",
]
