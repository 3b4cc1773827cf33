"""Exception types shared across the package."""

from __future__ import annotations


class UsageError(ValueError):
    """A caller violated a precondition (bad parameter, invalid combination)."""


class CapacityError(RuntimeError):
    """An exact computation was requested on an instance too large for it."""


class StepCapExceeded(RuntimeError):
    """A simulation hit its safety step cap before its stopping rule fired.

    Carries whatever was measured up to the cap in ``partial`` so callers can
    log the replica instead of dropping it.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial
