"""Exception hierarchy shared by the library and the command line tool."""

from __future__ import annotations


class ScjLabelError(Exception):
    """Base class for all errors raised by this package."""


class InputError(ScjLabelError):
    """Malformed or inconsistent user input (files, parameters, labelings)."""


class CapacityExceeded(ScjLabelError):
    """A subproblem's label space is too large for the requested solver."""


class InternalInvariantError(ScjLabelError):
    """A solver self-check failed; the result cannot be trusted."""
