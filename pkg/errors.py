"""Exception roots shared by every module; the CLI maps them to exit codes."""

from __future__ import annotations


class InputError(ValueError):
    pass


class NumericalError(RuntimeError):
    pass
