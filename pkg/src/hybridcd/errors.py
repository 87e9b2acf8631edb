"""Exception hierarchy shared across the package.

Every error carries a short machine-readable code (used by the CLI to pick
an exit status) and an optional context mapping with structured details.
"""

from __future__ import annotations


class HybridCdError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = context


class UsageError(HybridCdError):
    """The caller violated an API or CLI contract (bad flag, mismatched sizes)."""

    code = "usage"


class DataValidationError(HybridCdError):
    """Input data failed validation (bad CSV cell, domain violation, bad JSON)."""

    code = "data"


class InsufficientDataError(DataValidationError):
    """Too few samples to fit the requested local model."""

    code = "insufficient-data"


class CapabilityError(HybridCdError):
    """The request exceeds a documented capability ceiling."""

    code = "capability"


class StructureError(HybridCdError):
    """A graph invariant was violated (e.g. a cycle in supposedly acyclic edges)."""

    code = "structure"
