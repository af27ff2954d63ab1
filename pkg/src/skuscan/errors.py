"""Shared exception base for the skuscan package."""


class SkuscanError(Exception):
    """Base class for all errors raised by this package."""
