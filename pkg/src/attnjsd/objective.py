"""Disentanglement objectives over grouped attention distributions.

A prompt declares subject groups, each owning a disjoint set of indices
into a pool of attention maps.  Over softmaxed maps p_1..p_N with group
mixtures m_s (uniform mean of the group's members) the three-term loss is

    intra     = (1/|S|) sum_s  jsd_normalized(P_s)
    inter     = 1 - jsd_normalized({m_s})
    diversity = (1/|S|) sum_s (1 - entropy_normalized(m_s))
    total     = intra + inter + weight * diversity

Minimizing pulls each group's maps together (intra), pushes different
subjects' mixtures apart (inter), and keeps each mixture from collapsing
onto few cells (diversity, weakly weighted).  Each component lies in
[0, 1]; disabled components are recorded as 0 and excluded from the total.

The contrastive baseline ``nt_xent_loss`` treats maps of the same group
as positives under cosine similarity with temperature tau.

Gradients are computed with respect to pre-softmax logits by reverse-mode
accumulation through the explicit composition softmax -> mixtures -> KL
sums (no autodiff framework).  With G = |S|, group size n_s, cell count
d, and mixture-of-mixtures mu = (1/G) sum_s m_s, the adjoints used are

    d intra / d p_k     =  log(p_k / m_s) / (G' log(n_s) n_s)   (n_s >= 2)
    d inter / d p_k     = -log(m_s / mu)  / (G  log(G)   n_s)   (G   >= 2)
    d diversity / d p_k =  (log(m_s) + 1) / (G  log(d)   n_s)   (d   >= 2)

where k ranges over group s and G' counts all groups (singleton groups
contribute a constant 0 to intra).  Each map's logit gradient follows by
the softmax pullback g_z = p * (g_p - <p, g_p>).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distributions import (
    ProbField,
    _entropy_from_vector,
    _jsd_from_matrix,
    floor_distribution,
)
from .errors import DataError, DimensionMismatchError, NumericalError

__all__ = [
    "SubjectGroup",
    "PromptSpec",
    "LossConfig",
    "ObjectiveBreakdown",
    "intra_coherence",
    "inter_separation",
    "diversity_penalty",
    "jedi_loss",
    "nt_xent_loss",
    "jedi_value_and_grad",
    "nt_xent_value_and_grad",
    "loss_gradient",
    "logits_breakdown",
    "softmax_fields",
    "softmax_matrix",
]


@dataclass(frozen=True)
class SubjectGroup:
    """A named subject and the pool indices of its attention maps."""

    id: str
    map_indices: tuple[int, ...]

    def __post_init__(self) -> None:
        indices = tuple(int(i) for i in self.map_indices)
        if not indices:
            raise DataError(f"subject {self.id!r} owns no attention maps")
        if any(i < 0 for i in indices):
            raise DataError(f"subject {self.id!r} has a negative map index")
        if len(set(indices)) != len(indices):
            raise DataError(f"subject {self.id!r} repeats a map index")
        object.__setattr__(self, "map_indices", indices)

    @property
    def size(self) -> int:
        return len(self.map_indices)


@dataclass(frozen=True)
class PromptSpec:
    """Subject groups with pairwise disjoint map indices."""

    subjects: tuple[SubjectGroup, ...]

    def __post_init__(self) -> None:
        subjects = tuple(self.subjects)
        if not subjects:
            raise DataError("prompt spec declares no subjects")
        seen: set[int] = set()
        ids: set[str] = set()
        for g in subjects:
            if g.id in ids:
                raise DataError(f"duplicate subject id {g.id!r}")
            ids.add(g.id)
            overlap = seen.intersection(g.map_indices)
            if overlap:
                raise DataError(
                    f"subject {g.id!r} shares map indices {sorted(overlap)} with another subject"
                )
            seen.update(g.map_indices)
        object.__setattr__(self, "subjects", subjects)

    @property
    def num_subjects(self) -> int:
        return len(self.subjects)

    @property
    def all_indices(self) -> tuple[int, ...]:
        """Pool indices in group-major declaration order."""
        return tuple(i for g in self.subjects for i in g.map_indices)

    def max_index(self) -> int:
        return max(self.all_indices)


@dataclass(frozen=True)
class LossConfig:
    """Weighting and ablation switches for the three-term objective."""

    diversity_weight: float = 0.01
    enable_intra: bool = True
    enable_inter: bool = True
    enable_diversity: bool = True

    def __post_init__(self) -> None:
        w = float(self.diversity_weight)
        if not math.isfinite(w) or w < 0.0:
            raise DataError(f"diversity weight must be finite and >= 0, got {w!r}")
        object.__setattr__(self, "diversity_weight", w)


@dataclass(frozen=True)
class ObjectiveBreakdown:
    """Per-component objective values; disabled components are stored as 0."""

    intra: float
    inter: float
    diversity: float
    diversity_weight: float
    total: float

    def __post_init__(self) -> None:
        slack = 1e-9
        for name in ("intra", "inter", "diversity"):
            v = getattr(self, name)
            if not -slack <= v <= 1.0 + slack:
                raise DataError(f"{name} component {v!r} outside [0, 1]")
        expected = self.intra + self.inter + self.diversity_weight * self.diversity
        if abs(self.total - expected) > slack:
            raise DataError(
                f"total {self.total!r} inconsistent with components (expected {expected!r})"
            )

    @classmethod
    def build(
        cls, intra: float, inter: float, diversity: float, weight: float
    ) -> "ObjectiveBreakdown":
        return cls(intra, inter, diversity, weight, intra + inter + weight * diversity)


# ---------------------------------------------------------------------------
# pool handling

def _pool_matrix(pool: Sequence[ProbField]) -> np.ndarray:
    fields = tuple(pool)
    if not fields:
        raise DataError("attention pool is empty")
    d = fields[0].dim
    for k, f in enumerate(fields):
        if not isinstance(f, ProbField):
            raise DataError(f"pool entry {k} is not a ProbField")
        if f.dim != d:
            raise DimensionMismatchError(f"pool entry {k} has {f.dim} cells, expected {d}")
    return np.stack([f.values for f in fields], axis=0)


def _group_index_arrays(spec: PromptSpec, pool_size: int) -> list[np.ndarray]:
    if spec.max_index() >= pool_size:
        raise DataError(
            f"prompt spec references map {spec.max_index()} but pool has {pool_size} entries"
        )
    return [np.asarray(g.map_indices, dtype=np.intp) for g in spec.subjects]


def _jsd_norm_matrix(members: np.ndarray) -> float:
    n = members.shape[0]
    if n == 1:
        return 0.0
    return min(1.0, max(0.0, _jsd_from_matrix(members) / math.log(n)))


def _entropy_norm_vector(v: np.ndarray) -> float:
    d = v.size
    if d == 1:
        return 1.0
    return min(1.0, max(0.0, _entropy_from_vector(v) / math.log(d)))


def _components(
    p: np.ndarray, groups: list[np.ndarray]
) -> tuple[float, float, float, np.ndarray]:
    """(intra, inter, diversity, mixtures) for a row-stochastic pool."""
    mixtures = np.stack([p[idx].mean(axis=0) for idx in groups], axis=0)
    intra = float(np.mean([_jsd_norm_matrix(p[idx]) for idx in groups]))
    inter = 1.0 - _jsd_norm_matrix(mixtures) if len(groups) >= 2 else 0.0
    diversity = float(np.mean([_entropy_norm_vector(m) for m in mixtures]))
    return intra, min(1.0, max(0.0, inter)), 1.0 - diversity, mixtures


# ---------------------------------------------------------------------------
# objective values on probability fields

def intra_coherence(spec: PromptSpec, pool: Sequence[ProbField]) -> float:
    """Mean over groups of the group's normalized set divergence."""
    p = _pool_matrix(pool)
    groups = _group_index_arrays(spec, p.shape[0])
    return float(np.mean([_jsd_norm_matrix(p[idx]) for idx in groups]))


def inter_separation(spec: PromptSpec, pool: Sequence[ProbField]) -> float:
    """1 minus the normalized set divergence of the subject mixtures.

    Vanishes exactly when mixtures have pairwise disjoint supports; a
    single-subject prompt scores 0 (nothing to separate).
    """
    p = _pool_matrix(pool)
    groups = _group_index_arrays(spec, p.shape[0])
    if len(groups) < 2:
        return 0.0
    mixtures = np.stack([p[idx].mean(axis=0) for idx in groups], axis=0)
    return min(1.0, max(0.0, 1.0 - _jsd_norm_matrix(mixtures)))


def diversity_penalty(spec: PromptSpec, pool: Sequence[ProbField]) -> float:
    """Mean over groups of (1 - normalized entropy of the group mixture)."""
    p = _pool_matrix(pool)
    groups = _group_index_arrays(spec, p.shape[0])
    return float(np.mean([1.0 - _entropy_norm_vector(p[idx].mean(axis=0)) for idx in groups]))


def jedi_loss(
    spec: PromptSpec, pool: Sequence[ProbField], config: LossConfig | None = None
) -> ObjectiveBreakdown:
    """Evaluate the three-term objective on a pool of probability fields."""
    cfg = config if config is not None else LossConfig()
    p = _pool_matrix(pool)
    groups = _group_index_arrays(spec, p.shape[0])
    intra, inter, diversity, _ = _components(p, groups)
    return ObjectiveBreakdown.build(
        intra if cfg.enable_intra else 0.0,
        inter if cfg.enable_inter else 0.0,
        diversity if cfg.enable_diversity else 0.0,
        cfg.diversity_weight,
    )


def _nt_xent_positive_pairs(groups: list[np.ndarray]) -> list[tuple[int, int]]:
    """Ordered positive pairs in participant-local indices (group-major)."""
    pairs: list[tuple[int, int]] = []
    offset = 0
    for idx in groups:
        n = idx.size
        for a in range(n):
            for b in range(n):
                if a != b:
                    pairs.append((offset + a, offset + b))
        offset += n
    return pairs


def _nt_xent_core(
    part: np.ndarray, groups: list[np.ndarray], temperature: float
) -> tuple[float, np.ndarray, np.ndarray, list[tuple[int, int]], np.ndarray, np.ndarray]:
    """Shared forward pass: loss, similarities, unit rows, pairs, lse, norms."""
    if temperature <= 0.0 or not math.isfinite(temperature):
        raise DataError(f"temperature must be finite and > 0, got {temperature!r}")
    count = part.shape[0]
    if count < 2:
        raise DataError("contrastive loss needs at least two participating maps")
    pairs = _nt_xent_positive_pairs(groups)
    if not pairs:
        raise DataError("contrastive loss needs at least one group of size >= 2")
    norms = np.linalg.norm(part, axis=1)
    if np.any(norms == 0.0):
        raise NumericalError("zero-norm distribution in contrastive loss")
    unit = part / norms[:, None]
    sims = np.clip(unit @ unit.T, -1.0, 1.0)
    scaled = sims / temperature
    np.fill_diagonal(scaled, -np.inf)
    row_max = scaled.max(axis=1)
    lse = row_max + np.log(np.exp(scaled - row_max[:, None]).sum(axis=1))
    loss = float(np.mean([lse[a] - sims[a, b] / temperature for a, b in pairs]))
    return loss, sims, unit, pairs, lse, norms


def nt_xent_loss(
    spec: PromptSpec, pool: Sequence[ProbField], temperature: float = 0.5
) -> float:
    """Contrastive baseline over the participating maps.

    Positives are ordered same-group pairs; for anchor a and positive b,
    the term is -log( exp(cos(a,b)/tau) / sum_{k != a} exp(cos(a,k)/tau) ),
    averaged over positives.  The denominator runs over every
    participating map, either group.  As tau -> inf this tends to
    log(N - 1) with N participants.
    """
    p = _pool_matrix(pool)
    groups = _group_index_arrays(spec, p.shape[0])
    part = p[np.concatenate(groups)]
    loss, *_ = _nt_xent_core(part, groups, temperature)
    return loss


# ---------------------------------------------------------------------------
# gradients with respect to logits

def softmax_matrix(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax of an (N, d) logit matrix."""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 2:
        raise DataError(f"logit pool must be 2-D (maps, cells), got ndim={z.ndim}")
    if not np.all(np.isfinite(z)):
        raise NumericalError("logit pool contains non-finite values")
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_fields(
    logits: np.ndarray, shape: tuple[int, int] | None = None
) -> list[ProbField]:
    """Softmax each logit row into a ProbField."""
    return [ProbField(row, shape) for row in softmax_matrix(logits)]


def _floored_softmax(logits: np.ndarray) -> np.ndarray:
    p = softmax_matrix(logits)
    return np.stack([floor_distribution(row) for row in p], axis=0)


def _softmax_pullback(p: np.ndarray, grad_p: np.ndarray) -> np.ndarray:
    inner = (p * grad_p).sum(axis=1, keepdims=True)
    return p * (grad_p - inner)


def _jedi_grad_p(
    p: np.ndarray, groups: list[np.ndarray], mixtures: np.ndarray, cfg: LossConfig
) -> np.ndarray:
    count, d = p.shape
    num_groups = len(groups)
    grad = np.zeros((count, d))
    if cfg.enable_intra:
        for s, idx in enumerate(groups):
            n_s = idx.size
            if n_s < 2:
                continue
            coef = 1.0 / (num_groups * math.log(n_s) * n_s)
            grad[idx] += coef * np.log(p[idx] / mixtures[s])
    if cfg.enable_inter and num_groups >= 2:
        mu = mixtures.mean(axis=0)
        base = -1.0 / (num_groups * math.log(num_groups))
        for s, idx in enumerate(groups):
            grad[idx] += (base / idx.size) * np.log(mixtures[s] / mu)
    if cfg.enable_diversity and d >= 2 and cfg.diversity_weight > 0.0:
        coef = cfg.diversity_weight / (num_groups * math.log(d))
        for s, idx in enumerate(groups):
            grad[idx] += (coef / idx.size) * (np.log(mixtures[s]) + 1.0)
    return grad


def jedi_value_and_grad(
    spec: PromptSpec, logits: np.ndarray, config: LossConfig | None = None
) -> tuple[ObjectiveBreakdown, np.ndarray]:
    """Objective breakdown and its exact gradient with respect to logits.

    The value path softmaxes each row (with the defensive numerical
    floor) and evaluates the same kernels as :func:`jedi_loss`, so the
    returned breakdown matches evaluating the softmaxed pool directly.
    """
    cfg = config if config is not None else LossConfig()
    p = _floored_softmax(logits)
    groups = _group_index_arrays(spec, p.shape[0])
    intra, inter, diversity, mixtures = _components(p, groups)
    breakdown = ObjectiveBreakdown.build(
        intra if cfg.enable_intra else 0.0,
        inter if cfg.enable_inter else 0.0,
        diversity if cfg.enable_diversity else 0.0,
        cfg.diversity_weight,
    )
    grad_p = _jedi_grad_p(p, groups, mixtures, cfg)
    return breakdown, _softmax_pullback(p, grad_p)


def nt_xent_value_and_grad(
    spec: PromptSpec, logits: np.ndarray, temperature: float = 0.5
) -> tuple[float, np.ndarray]:
    """Contrastive loss and its exact gradient with respect to logits.

    Reverse mode through cosine similarities: with softmax weights
    w_ab over k != a and c_a positives anchored at a, the similarity
    adjoint is A_ab = (c_a w_ab - [ (a,b) positive ]) / (|Pos| tau);
    both orientations accumulate through the symmetric cosine, whose
    pullback at row a is (u_b - cos(a,b) u_a) / ||p_a||.
    """
    p = _floored_softmax(logits)
    groups = _group_index_arrays(spec, p.shape[0])
    order = np.concatenate(groups)
    part = p[order]
    loss, sims, unit, pairs, lse, norms = _nt_xent_core(part, groups, temperature)

    count = part.shape[0]
    scaled = sims / temperature
    np.fill_diagonal(scaled, -np.inf)
    weights = np.exp(scaled - lse[:, None])
    np.fill_diagonal(weights, 0.0)
    anchors = np.zeros(count)
    pos = np.zeros((count, count))
    for a, b in pairs:
        anchors[a] += 1.0
        pos[a, b] = 1.0
    adj = (anchors[:, None] * weights - pos) / (len(pairs) * temperature)
    sym = adj + adj.T
    row_dot = (sym * sims).sum(axis=1)
    grad_part = (sym @ unit - row_dot[:, None] * unit) / norms[:, None]

    grad_p = np.zeros_like(p)
    grad_p[order] = grad_part
    return loss, _softmax_pullback(p, grad_p)


def loss_gradient(
    spec: PromptSpec,
    logits: np.ndarray,
    config: LossConfig | None = None,
    loss: str = "jedi",
    temperature: float = 0.5,
) -> np.ndarray:
    """Gradient of the selected objective with respect to pool logits."""
    if loss == "jedi":
        return jedi_value_and_grad(spec, logits, config)[1]
    if loss == "nt_xent":
        return nt_xent_value_and_grad(spec, logits, temperature)[1]
    raise DataError(f"unknown loss {loss!r}, expected 'jedi' or 'nt_xent'")


def logits_breakdown(
    spec: PromptSpec, logits: np.ndarray, config: LossConfig | None = None
) -> tuple[ObjectiveBreakdown, float]:
    """Breakdown plus raw inter-group normalized JSD for a logit pool.

    The second value is the separation diagnostic jsd_normalized over the
    subject mixtures, reported independently of ablation switches.
    """
    cfg = config if config is not None else LossConfig()
    p = _floored_softmax(logits)
    groups = _group_index_arrays(spec, p.shape[0])
    intra, inter, diversity, mixtures = _components(p, groups)
    breakdown = ObjectiveBreakdown.build(
        intra if cfg.enable_intra else 0.0,
        inter if cfg.enable_inter else 0.0,
        diversity if cfg.enable_diversity else 0.0,
        cfg.diversity_weight,
    )
    return breakdown, _jsd_norm_matrix(mixtures)
