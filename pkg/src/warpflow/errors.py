"""Exception types that map onto CLI exit codes."""
from __future__ import annotations


class WarpflowError(Exception):
    exit_code = 1


class InputError(WarpflowError):
    """Bad configuration or initial data (exit 2)."""

    exit_code = 2


class MonitorBreach(WarpflowError):
    """A monitored bound failed beyond its warning band (exit 3)."""

    exit_code = 3


class NumericalFatal(WarpflowError):
    """Sign loss of H, non-finite values or loss of parabolicity (exit 4)."""

    exit_code = 4


class VerificationFailure(WarpflowError):
    """An identity check missed its threshold (exit 5)."""

    exit_code = 5
