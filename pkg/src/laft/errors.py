"""Exception types shared across the package."""

from __future__ import annotations


class LaftError(Exception):
    """Base class for all errors raised by this package."""


class InputError(LaftError, ValueError):
    """Invalid user input: malformed files, shape mismatches, bad parameters."""


class NumericalError(LaftError, ArithmeticError):
    """A decomposition or other numerical routine failed."""
