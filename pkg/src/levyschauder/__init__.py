"""Numerical toolkit for non-local elliptic operators of Levy type on periodic grids."""

__version__ = "0.1.0"

from .errors import (
    AccuracyError,
    DataError,
    DivergenceError,
    DomainError,
    GridMismatchError,
    InvalidKernelError,
    LevyError,
)
from .field import Field, GridSpec, Spectrum, load_csv, random_field, save_csv
from .kernel import KernelSpec, builtin_kernel
from .symbol import SymbolTable, symbol_table
from .operator import apply_quadrature, apply_spectral
from .resolvent import green_function, solve_constant, solve_variable

__all__ = [
    "__version__",
    "AccuracyError",
    "DataError",
    "DivergenceError",
    "DomainError",
    "GridMismatchError",
    "InvalidKernelError",
    "LevyError",
    "Field",
    "GridSpec",
    "Spectrum",
    "load_csv",
    "random_field",
    "save_csv",
    "KernelSpec",
    "builtin_kernel",
    "SymbolTable",
    "symbol_table",
    "apply_quadrature",
    "apply_spectral",
    "green_function",
    "solve_constant",
    "solve_variable",
]
