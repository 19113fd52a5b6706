"""Shared exception base class."""


class DiveError(Exception):
    """Base class for all errors raised by this package."""
