"""Noncommutative Nevanlinna-Pick and Carathéodory interpolation on the operator unit ball."""

import logging

from .config import DEFAULT_SETTINGS, Settings
from .derive import (
    CaraProblem,
    Variant,
    build_lowered,
    build_total,
    cara_feasible,
    cara_synthesize,
    partial_derivative,
    pq_check,
    total_derivative_direct,
    total_derivative_mk,
)
from .displacement import DisplacementSystem, solve_exact, solve_series, wave_operators
from .errors import InvalidInputError, NcPickError, NumericalError
from .interpolate import NPProblem, np_feasible, pick_matrix, synthesize, verify_certificate
from .points import OperatorTuple, szego_kernel
from .schur import SchurElement, evaluate, random_schur

__all__ = [
    "Settings",
    "DEFAULT_SETTINGS",
    "NcPickError",
    "InvalidInputError",
    "NumericalError",
    "OperatorTuple",
    "szego_kernel",
    "SchurElement",
    "evaluate",
    "random_schur",
    "DisplacementSystem",
    "solve_series",
    "solve_exact",
    "wave_operators",
    "NPProblem",
    "pick_matrix",
    "np_feasible",
    "synthesize",
    "verify_certificate",
    "CaraProblem",
    "Variant",
    "build_lowered",
    "build_total",
    "partial_derivative",
    "total_derivative_direct",
    "total_derivative_mk",
    "pq_check",
    "cara_feasible",
    "cara_synthesize",
]

__version__ = "0.1.0"  # Also update in pyproject.toml

logging.getLogger(__name__).addHandler(logging.NullHandler())
