"""Common exception base so the CLI can catch everything domain-level at once."""


class PlateGuardError(Exception):
    """Base class for all errors raised by this package."""
