"""Exception taxonomy.

Integrity failures (abort) are *not* exceptions: they are a normal protocol
outcome and travel inside ``QueryResult``. Exceptions cover configuration,
input, and transport faults.
"""

from __future__ import annotations


class PiqlbError(Exception):
    """Base class for all package errors."""


class ConfigError(PiqlbError):
    """Incompatible parameters (mismatched group sizes, bad widths, ...)."""


class InputError(PiqlbError):
    """A value outside the declared domain of an operation."""


class UnsupportedError(PiqlbError):
    """A parameter combination the implementation deliberately rejects."""


class ResourceLimitError(PiqlbError):
    """Request exceeds a configured resource cap (e.g. truth-table size)."""


class DecodeError(PiqlbError):
    """Malformed canonical bytes. Carries the byte offset of the fault."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class ParseError(PiqlbError):
    """Query text rejected. Carries position and the expected tokens."""

    def __init__(self, message: str, position: int, expected: tuple[str, ...] = ()):
        detail = f"{message} at position {position}"
        if expected:
            detail += " (expected " + " | ".join(expected) + ")"
        super().__init__(detail)
        self.position = position
        self.expected = expected


class SchemaError(PiqlbError):
    """A record or query does not conform to the column schema."""


class LedgerError(PiqlbError):
    """Chain construction or verification failure."""


class EvalError(PiqlbError):
    """Service-provider evaluation refused (e.g. aggregate overflow)."""


class ProtocolError(PiqlbError):
    """Transport-level failure, distinct from an integrity abort."""
