"""Shared exception base for all somnoline data errors."""


class SomnolineError(Exception):
    """Base class for recoverable data/contract errors raised by this package."""


class LengthMismatch(SomnolineError):
    """Two per-epoch sequences that must align have different lengths."""
