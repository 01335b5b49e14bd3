"""Discrete probability fields and divergence/entropy primitives.

Attention maps are treated as discrete probability distributions over
spatial cells.  All quantities use the natural logarithm.  For a set
P = {p_1, ..., p_n} of d-cell distributions with mixture
m = (1/n) * sum_k p_k, the generalized Jensen-Shannon divergence

    jsd(P) = (1/n) * sum_k KL(p_k || m)

is bounded by [0, log n], and the Shannon entropy H(p) = -sum_i p_i log p_i
is bounded by [0, log d].  The ``*_normalized`` variants divide by those
bounds so results land in [0, 1] regardless of set size or cell count.

Zero cells follow the usual conventions 0 * log(0) = 0 and
0 * log(0/q) = 0.  Every KL term appearing inside a set divergence is of
the member-versus-mixture form, where the mixture dominates each member,
so no log(0) arises and set divergences are exact even for distributions
with empty cells; in particular disjoint supports attain the upper bound
exactly.  Only the two-argument :func:`kl_divergence` can be undefined,
when ``p`` puts mass where ``q`` has none.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import (
    DimensionMismatchError,
    DivergenceUndefinedError,
    MalformedDistributionError,
)

__all__ = [
    "FLOOR_EPS",
    "SUM_TOLERANCE",
    "ProbField",
    "DistributionSet",
    "floor_distribution",
    "kl_divergence",
    "mixture",
    "jsd",
    "jsd_normalized",
    "entropy",
    "entropy_normalized",
]

# Numerical floor used when materializing distributions inside gradient
# computations, where log(p) must stay finite.  Set divergences themselves
# are computed exactly and never floored.
FLOOR_EPS = 1e-12

# Construction accepts vectors whose mass deviates from 1 by at most this
# much (softmax outputs summed in float32 drift at this scale) and
# renormalizes; anything further off is rejected as malformed.
SUM_TOLERANCE = 1e-3


@dataclass(frozen=True, eq=False)
class ProbField:
    """A discrete probability distribution over ``d`` cells.

    ``values`` must be a 1-D nonnegative vector whose mass is within
    ``SUM_TOLERANCE`` of 1; it is renormalized to sum to 1 exactly (up to
    float rounding) and stored read-only.  ``shape`` optionally records a
    2-D spatial arrangement ``(h, w)`` with ``h * w == d``.
    """

    values: np.ndarray
    shape: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1:
            raise MalformedDistributionError(
                f"probability field must be a 1-D vector, got ndim={arr.ndim}"
            )
        if arr.size < 1:
            raise MalformedDistributionError("probability field needs at least one cell")
        if not np.all(np.isfinite(arr)):
            raise MalformedDistributionError("probability field contains non-finite values")
        if np.any(arr < 0.0):
            raise MalformedDistributionError("probability field contains negative mass")
        total = float(arr.sum())
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise MalformedDistributionError(
                f"probability mass sums to {total!r}, outside 1 +/- {SUM_TOLERANCE}"
            )
        arr = arr / total
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        if self.shape is not None:
            h, w = self.shape
            if h < 1 or w < 1 or h * w != arr.size:
                raise MalformedDistributionError(
                    f"shape {self.shape} incompatible with {arr.size} cells"
                )
            object.__setattr__(self, "shape", (int(h), int(w)))

    @property
    def dim(self) -> int:
        return int(self.values.size)

    def as_grid(self) -> np.ndarray:
        """Return the field reshaped to its 2-D spatial layout."""
        if self.shape is None:
            raise MalformedDistributionError("field carries no spatial shape")
        return self.values.reshape(self.shape)

    @classmethod
    def uniform(cls, dim: int, shape: tuple[int, int] | None = None) -> "ProbField":
        if dim < 1:
            raise MalformedDistributionError("dimension must be >= 1")
        return cls(np.full(dim, 1.0 / dim), shape)

    @classmethod
    def delta(cls, dim: int, index: int, shape: tuple[int, int] | None = None) -> "ProbField":
        if not 0 <= index < dim:
            raise MalformedDistributionError(f"delta index {index} outside [0, {dim})")
        v = np.zeros(dim)
        v[index] = 1.0
        return cls(v, shape)

    @classmethod
    def from_grid(cls, grid: np.ndarray) -> "ProbField":
        arr = np.asarray(grid, dtype=np.float64)
        if arr.ndim != 2:
            raise MalformedDistributionError("from_grid expects a 2-D array")
        return cls(arr.reshape(-1), (arr.shape[0], arr.shape[1]))


@dataclass(frozen=True, eq=False)
class DistributionSet:
    """A non-empty collection of equal-dimension probability fields."""

    members: tuple[ProbField, ...]

    def __post_init__(self) -> None:
        members = tuple(self.members)
        if not members:
            raise MalformedDistributionError("distribution set must be non-empty")
        d = members[0].dim
        for k, f in enumerate(members):
            if not isinstance(f, ProbField):
                raise MalformedDistributionError(f"member {k} is not a ProbField")
            if f.dim != d:
                raise DimensionMismatchError(
                    f"member {k} has {f.dim} cells, expected {d}"
                )
        object.__setattr__(self, "members", members)

    @property
    def n(self) -> int:
        return len(self.members)

    @property
    def dim(self) -> int:
        return self.members[0].dim


Distributions = Union[DistributionSet, Sequence[ProbField]]


def _member_matrix(dists: Distributions) -> np.ndarray:
    """Stack a distribution set into an (n, d) float64 matrix."""
    if isinstance(dists, DistributionSet):
        members = dists.members
    else:
        members = tuple(dists)
        DistributionSet(members)  # reuse validation
    return np.stack([f.values for f in members], axis=0)


def floor_distribution(values: np.ndarray, eps: float = FLOOR_EPS) -> np.ndarray:
    """Clamp cells below ``eps`` and renormalize to unit mass.

    Used when a distribution feeds log expressions directly (gradient
    paths).  For softmax outputs this is a no-op in practice; it only
    guards hand-built inputs containing exact zeros.
    """
    v = np.maximum(np.asarray(values, dtype=np.float64), eps)
    return v / v.sum()


def _entropy_from_vector(p: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = p * np.log(p)
    terms[p == 0.0] = 0.0
    return max(0.0, float(-terms.sum()))


def _jsd_from_matrix(members: np.ndarray) -> float:
    """Exact set divergence for an (n, d) row-stochastic matrix."""
    m = members.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = members * np.log(members / m)
    terms[members == 0.0] = 0.0
    return max(0.0, float(terms.sum(axis=1).mean()))


def kl_divergence(p: ProbField, q: ProbField) -> float:
    """KL(p || q) = sum_i p_i log(p_i / q_i), in nats.

    Raises ``DivergenceUndefinedError`` when ``p`` has mass on a cell
    where ``q`` has none; raises ``DimensionMismatchError`` for unequal
    cell counts.  Always nonnegative (Gibbs).
    """
    if p.dim != q.dim:
        raise DimensionMismatchError(f"KL operands differ: {p.dim} vs {q.dim} cells")
    pv, qv = p.values, q.values
    bad = (pv > 0.0) & (qv == 0.0)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise DivergenceUndefinedError(
            f"KL undefined: p has mass {pv[i]!r} at cell {i} where q is zero"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = pv * np.log(pv / qv)
    terms[pv == 0.0] = 0.0
    return max(0.0, float(terms.sum()))


def mixture(dists: Distributions) -> ProbField:
    """Uniform mixture (elementwise mean) of a distribution set."""
    if isinstance(dists, DistributionSet):
        members = dists.members
    else:
        members = tuple(dists)
    mat = _member_matrix(members)
    shapes = {f.shape for f in members}
    shape = shapes.pop() if len(shapes) == 1 else None
    return ProbField(mat.mean(axis=0), shape)


def jsd(dists: Distributions) -> float:
    """Generalized Jensen-Shannon divergence of a distribution set.

    jsd(P) = (1/n) sum_k KL(p_k || m) with m the uniform mixture.  The
    mixture dominates every member, so the value is always defined, lies
    in [0, log n], vanishes exactly when all members coincide, and
    attains log n exactly on pairwise disjoint supports.
    """
    return _jsd_from_matrix(_member_matrix(dists))


def jsd_normalized(dists: Distributions) -> float:
    """``jsd`` scaled by its upper bound log n, clamped to [0, 1].

    A singleton set has divergence 0 by convention (the bound log 1 = 0
    is degenerate and the member trivially equals the mixture).
    """
    mat = _member_matrix(dists)
    n = mat.shape[0]
    if n == 1:
        return 0.0
    value = _jsd_from_matrix(mat) / math.log(n)
    return min(1.0, max(0.0, value))


def entropy(p: ProbField) -> float:
    """Shannon entropy H(p) = -sum_i p_i log p_i, in nats, in [0, log d]."""
    return _entropy_from_vector(p.values)


def entropy_normalized(p: ProbField) -> float:
    """``entropy`` scaled by its upper bound log d, clamped to [0, 1].

    A single-cell distribution is maximally spread over its (one-cell)
    domain, so d = 1 returns 1.0 by convention.
    """
    if p.dim == 1:
        return 1.0
    value = _entropy_from_vector(p.values) / math.log(p.dim)
    return min(1.0, max(0.0, value))
