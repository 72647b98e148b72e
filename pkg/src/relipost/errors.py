"""Shared exception hierarchy.

The CLI maps these to exit codes: UsageError -> 1, DataError -> 2, anything
else -> 3. Modules raise their own DataError subclasses so the CLI can name
the failing stage.
"""


class RelipostError(Exception):
    """Base class for every error raised by this package."""


class UsageError(RelipostError):
    """Bad command line, unknown subcommand, or unreadable configuration."""


class DataError(RelipostError):
    """Structured error caused by input data or on-disk artifacts."""
