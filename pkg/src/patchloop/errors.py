"""Shared exception types.

Every error raised by this package derives from :class:`PatchLoopError` so
callers can catch one base class at the CLI boundary.  Modules define their
own specific subclasses next to the code that raises them; only errors used
by more than one module live here.
"""

from __future__ import annotations


class PatchLoopError(Exception):
    """Base class for all errors raised by patchloop."""


class EmptyPool(PatchLoopError):
    """An operation that needs at least one element got an empty pool."""


class BadConfig(PatchLoopError):
    """A config file or override failed validation.

    The message names the offending field.
    """
