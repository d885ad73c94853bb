"""Exception hierarchy shared by all modelmarket modules.

Every error raised on purpose derives from :class:`ModelMarketError` so
callers (and the CLI) can distinguish expected failures from bugs.
"""

from __future__ import annotations


class ModelMarketError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(ModelMarketError, ValueError):
    """An argument violates a documented precondition."""


class ConvergenceError(ModelMarketError, RuntimeError):
    """An iterative solver hit its iteration cap before converging."""


class ParseError(ModelMarketError, ValueError):
    """A file could not be parsed; message includes the offending line."""


class PartitionError(ModelMarketError, RuntimeError):
    """A partition request cannot produce valid per-party splits."""


class TrainingError(ModelMarketError, RuntimeError):
    """Training diverged or otherwise failed; message names the epoch."""


class ConflictError(ModelMarketError, RuntimeError):
    """A store write collides with an existing record id."""


class NotFoundError(ModelMarketError, KeyError):
    """A requested record id does not exist."""


class IntegrityError(ModelMarketError, RuntimeError):
    """A stored blob fails checksum or shape validation."""


class StorageError(ModelMarketError, OSError):
    """An I/O operation failed; the store is left unchanged."""


class ResourceError(ModelMarketError, RuntimeError):
    """A request exceeds a configured resource guard (e.g. subset cap)."""


class ConfigError(ModelMarketError, ValueError):
    """An experiment config violates its schema; message names the field path."""
