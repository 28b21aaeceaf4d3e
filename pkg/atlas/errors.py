from __future__ import annotations


class AtlasError(Exception):
    """Base class for every error raised by the atlas library."""


class ValidationError(AtlasError):
    """Input violates a schema or a constellation/region invariant."""


class DegenerateInputError(AtlasError):
    """Input is well-formed but carries no usable geometry (e.g. all-zero points)."""


class MissingLabelsError(AtlasError):
    """A bit-level quantity was requested from a constellation without labels."""


class TooLargeError(AtlasError):
    """Exhaustive enumeration would exceed the combinatorial guard."""


class PreconditionError(AtlasError):
    """Arguments fall outside the domain an operation is defined on."""


class UsageError(AtlasError):
    """Command-line configuration is invalid."""


__all__ = [
    "AtlasError",
    "ValidationError",
    "DegenerateInputError",
    "MissingLabelsError",
    "TooLargeError",
    "PreconditionError",
    "UsageError",
]
