"""Exception taxonomy shared across the package.

Two broad families matter to callers: ``DataError`` for malformed inputs
(bad distributions, specs, indices, or container files) and
``NumericalError`` for failures of the math itself (undefined divergences,
non-finite gradients).  The command line maps these families to distinct
exit codes.
"""

from __future__ import annotations

__all__ = [
    "AttnJsdError",
    "DataError",
    "MalformedDistributionError",
    "DimensionMismatchError",
    "MissingBlockError",
    "DumpError",
    "DumpFormatError",
    "DumpVersionError",
    "DumpSizeError",
    "NumericalError",
    "DivergenceUndefinedError",
]


class AttnJsdError(Exception):
    """Base class for all package errors."""


class DataError(AttnJsdError):
    """Malformed input data: distributions, specs, files, or indices."""


class MalformedDistributionError(DataError):
    """A vector that cannot be interpreted as a probability distribution."""


class DimensionMismatchError(DataError):
    """Operands whose dimensions are required to agree do not."""


class MissingBlockError(DataError):
    """A requested attention block is absent from the supplied collection."""


class DumpError(DataError):
    """Base class for attention dump container problems."""


class DumpFormatError(DumpError):
    """The dump preamble is not valid JSON or fails structural validation."""


class DumpVersionError(DumpError):
    """The dump declares a format version this reader does not support."""


class DumpSizeError(DumpError):
    """The dump payload length disagrees with the manifest dimensions."""


class NumericalError(AttnJsdError):
    """Numerical failure: undefined divergences or non-finite values."""


class DivergenceUndefinedError(NumericalError):
    """KL(p, q) requested where q assigns zero mass inside p's support."""
