"""Exporter failure modes.

``ConfigError`` covers bad hook configuration, ``TokenNotFoundError``
unresolvable subject tokens (its message carries the full tokenization
so the right indices can be read off), ``MissingBlockError`` blocks the
pipeline never produced, and ``CaptureError`` malformed tensors arriving
from the pipeline itself.
"""

from __future__ import annotations

__all__ = [
    "ExporterError",
    "ConfigError",
    "TokenNotFoundError",
    "MissingBlockError",
    "CaptureError",
]


class ExporterError(Exception):
    """Base class for all exporter errors."""


class ConfigError(ExporterError):
    """Hook configuration violates an invariant."""


class TokenNotFoundError(ExporterError):
    """A subject token could not be resolved against the tokenization."""

    def __init__(self, message: str, tokens: tuple[str, ...]):
        listing = ", ".join(f"{i}:{tok!r}" for i, tok in enumerate(tokens))
        super().__init__(f"{message}; prompt tokenizes as [{listing}]")
        self.tokens = tokens


class MissingBlockError(ExporterError):
    """A configured block is absent from the pipeline or its output."""


class CaptureError(ExporterError):
    """The pipeline handed back tensors the hook cannot use."""
