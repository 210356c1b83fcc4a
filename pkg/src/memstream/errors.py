"""Shared exception types.

The CLI maps these onto exit codes: ValidationError -> 2, TransportError -> 3,
DataError -> 4.
"""
from __future__ import annotations


class MemstreamError(Exception):
    """Base class for all package errors."""


class ValidationError(MemstreamError, ValueError):
    """Invalid value, argument, or configuration."""


class TransportError(MemstreamError, RuntimeError):
    """Remote backend unreachable or failing after all retries."""


class ToolArgumentError(ValidationError):
    """A model-issued tool call carried malformed arguments.

    Keeps the raw payload so the caller can decide how to recover.
    """

    def __init__(self, message: str, tool_name: str = "", raw_payload: object = None):
        super().__init__(message)
        self.tool_name = tool_name
        self.raw_payload = raw_payload


class GapError(MemstreamError):
    """One or more inspect ranges fell entirely inside unobserved gaps.

    Ranges that did intersect observed clips are still processed; their
    observations ride along on the exception so partial work is not lost.
    """

    def __init__(self, gap_ranges, observations=()):
        names = ", ".join(str(r) for r in gap_ranges)
        super().__init__(f"range(s) entirely within unobserved gaps: {names}")
        self.gap_ranges = list(gap_ranges)
        self.observations = list(observations)


class DataError(MemstreamError):
    """Malformed or inconsistent input data files."""
