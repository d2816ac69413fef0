"""Shared exception types."""


class DataError(Exception):
    """An input file, manifest, or dataset failed validation."""
