"""Per-token spatial attention from joint transformer attention.

Joint attention over a sequence of n image tokens followed by m prompt
tokens is an (n+m) x (n+m) matrix A.  Prompt token i interacts with the
image both through its row (token attending to pixels) and its column
(pixels attending to the token); the two directions are averaged with an
energy-preserving weight before normalization:

    v = (A[n+i, :n] + A[:n, n+i]) / sqrt(2)

For ``raw_logits`` matrices the field is softmax(v); adding any constant
to both the token's row and column shifts v uniformly and leaves the
field unchanged.  For ``softmaxed`` matrices v is renormalized by its
sum; an all-zero v falls back to the uniform field and emits
``DegenerateExtractionWarning``.  When n is a perfect square the field
carries its (sqrt(n), sqrt(n)) spatial shape.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distributions import ProbField
from .errors import (
    DataError,
    DimensionMismatchError,
    MalformedDistributionError,
    MissingBlockError,
)

__all__ = [
    "KIND_RAW_LOGITS",
    "KIND_SOFTMAXED",
    "JointAttentionMatrix",
    "DegenerateExtractionWarning",
    "extract_token_field",
    "extract_pool",
]

KIND_RAW_LOGITS = "raw_logits"
KIND_SOFTMAXED = "softmaxed"
_KINDS = (KIND_RAW_LOGITS, KIND_SOFTMAXED)

# Softmaxed attention rows must carry unit mass up to accumulated
# float32 error from upstream frameworks.
ROW_SUM_TOLERANCE = 1e-4


class DegenerateExtractionWarning(UserWarning):
    """A token's attention vector was all zero; uniform fallback used."""


@dataclass(frozen=True, eq=False)
class JointAttentionMatrix:
    """One joint attention matrix with its token split and provenance."""

    data: np.ndarray
    n: int
    m: int
    kind: str = KIND_RAW_LOGITS
    block_index: int = 0
    timestep: int = 0

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise DataError(f"unknown attention kind {self.kind!r}, expected one of {_KINDS}")
        if self.n < 1 or self.m < 1:
            raise DataError(f"need n >= 1 image and m >= 1 prompt tokens, got n={self.n}, m={self.m}")
        arr = np.asarray(self.data, dtype=np.float64)
        size = self.n + self.m
        if arr.shape != (size, size):
            raise DimensionMismatchError(
                f"attention matrix must be ({size}, {size}), got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise DataError("attention matrix contains non-finite values")
        if self.kind == KIND_SOFTMAXED:
            if np.any(arr < 0.0):
                raise MalformedDistributionError("softmaxed attention contains negative entries")
            sums = arr.sum(axis=1)
            worst = float(np.max(np.abs(sums - 1.0)))
            if worst > ROW_SUM_TOLERANCE:
                row = int(np.argmax(np.abs(sums - 1.0)))
                raise MalformedDistributionError(
                    f"softmaxed attention row {row} sums to {sums[row]!r}, "
                    f"outside 1 +/- {ROW_SUM_TOLERANCE}"
                )
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)


def _field_shape(n: int) -> tuple[int, int] | None:
    root = math.isqrt(n)
    return (root, root) if root * root == n else None


def extract_token_field(matrix: JointAttentionMatrix, token: int) -> ProbField:
    """Spatial attention field of prompt token ``token``.

    ``token`` indexes the prompt segment (0 .. m-1).  See the module
    docstring for the symmetrization and normalization rules.
    """
    if not 0 <= token < matrix.m:
        raise DataError(f"prompt token {token} outside [0, {matrix.m})")
    n = matrix.n
    col = n + token
    v = (matrix.data[col, :n] + matrix.data[:n, col]) / math.sqrt(2.0)
    shape = _field_shape(n)
    if matrix.kind == KIND_RAW_LOGITS:
        shifted = v - v.max()
        e = np.exp(shifted)
        return ProbField(e / e.sum(), shape)
    total = float(v.sum())
    if total <= 0.0:
        warnings.warn(
            f"token {token} at block {matrix.block_index}, step {matrix.timestep} "
            "has zero attention mass; using the uniform field",
            DegenerateExtractionWarning,
            stacklevel=2,
        )
        return ProbField.uniform(n, shape)
    return ProbField(v / total, shape)


def extract_pool(
    blocks: Sequence[JointAttentionMatrix],
    tokens: Sequence[int],
    block_range: tuple[int, int] | None = None,
) -> list[ProbField]:
    """Extract fields for ``tokens`` from every block in an inclusive range.

    Blocks are ordered by block index; within a block, fields follow the
    given token order, so the result is block-major with
    ``len(blocks_in_range) * len(tokens)`` entries.  Every block index in
    the range must be present exactly once.
    """
    if not blocks:
        raise DataError("no attention blocks supplied")
    if not tokens:
        raise DataError("no prompt tokens requested")
    n, m = blocks[0].n, blocks[0].m
    by_index: dict[int, JointAttentionMatrix] = {}
    for b in blocks:
        if (b.n, b.m) != (n, m):
            raise DimensionMismatchError(
                f"block {b.block_index} has token split ({b.n}, {b.m}), expected ({n}, {m})"
            )
        if b.block_index in by_index:
            raise DataError(f"block index {b.block_index} appears more than once")
        by_index[b.block_index] = b
    if block_range is None:
        wanted = sorted(by_index)
    else:
        lo, hi = block_range
        if lo > hi:
            raise DataError(f"empty block range {lo}:{hi}")
        wanted = list(range(lo, hi + 1))
    fields: list[ProbField] = []
    for index in wanted:
        if index not in by_index:
            raise MissingBlockError(f"block {index} is missing from the supplied collection")
        for token in tokens:
            fields.append(extract_token_field(by_index[index], token))
    return fields
