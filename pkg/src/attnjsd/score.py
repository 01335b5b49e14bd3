"""Disentanglement scoring of captured attention dumps.

For each (timestep, block) pair the score is the normalized set
divergence of the subject mixtures: token fields are extracted from the
joint matrix, averaged within each subject group, and the mixtures'
jsd_normalized is the entry value, in [0, 1].  1 means subjects attend
to disjoint regions; 0 means their attention coincides.

Aggregation reports the mean and population standard deviation (ddof 0)
over all selected entries, both for the full timestep selection and for
the tail from timestep 5 on, where layouts have typically locked in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .distributions import ProbField, jsd_normalized, mixture
from .dump import AttentionDump
from .errors import DataError
from .extraction import extract_token_field

__all__ = [
    "LATE_WINDOW_START",
    "ScoreSeries",
    "disentanglement_score",
    "export_series_csv",
    "series_summary",
]

LATE_WINDOW_START = 5


@dataclass(frozen=True, eq=False)
class ScoreSeries:
    """Per-(timestep, block) disentanglement values with aggregates."""

    timesteps: tuple[int, ...]
    blocks: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        timesteps = tuple(int(t) for t in self.timesteps)
        blocks = tuple(int(b) for b in self.blocks)
        arr = np.asarray(self.values, dtype=np.float64)
        if not timesteps or not blocks:
            raise DataError("score series must cover at least one timestep and block")
        if arr.shape != (len(timesteps), len(blocks)):
            raise DataError(
                f"values shape {arr.shape} does not match "
                f"({len(timesteps)}, {len(blocks)})"
            )
        if not np.all(np.isfinite(arr)):
            raise DataError("score series contains non-finite values")
        if np.any(arr < -1e-9) or np.any(arr > 1.0 + 1e-9):
            raise DataError("score series contains values outside [0, 1]")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "timesteps", timesteps)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "values", arr)

    @property
    def per_timestep_mean(self) -> np.ndarray:
        return self.values.mean(axis=1)

    @property
    def per_timestep_std(self) -> np.ndarray:
        return self.values.std(axis=1)

    @property
    def overall_mean(self) -> float:
        return float(self.values.mean())

    @property
    def overall_std(self) -> float:
        return float(self.values.std())

    def late_window(self) -> np.ndarray:
        mask = np.asarray([t >= LATE_WINDOW_START for t in self.timesteps])
        return self.values[mask]

    @property
    def late_mean(self) -> float | None:
        tail = self.late_window()
        return float(tail.mean()) if tail.size else None

    @property
    def late_std(self) -> float | None:
        tail = self.late_window()
        return float(tail.std()) if tail.size else None


def _resolve_groups(
    dump: AttentionDump, subject_tokens: Mapping[str, Sequence[int]] | None
) -> list[tuple[str, tuple[int, ...]]]:
    if subject_tokens is None:
        groups = dump.prompt_groups()
        if not groups:
            raise DataError("dump declares no subject groups and none were supplied")
        return groups
    m = dump.manifest.m
    out: list[tuple[str, tuple[int, ...]]] = []
    seen: set[int] = set()
    for name, tokens in subject_tokens.items():
        idx = tuple(int(i) for i in tokens)
        if not idx:
            raise DataError(f"subject {name!r} lists no tokens")
        for i in idx:
            if not 0 <= i < m:
                raise DataError(f"subject {name!r} references token {i}, outside [0, {m})")
            if i in seen:
                raise DataError(f"token {i} belongs to more than one subject")
            seen.add(i)
        out.append((str(name), idx))
    return out


def _select_labels(
    available: tuple[int, ...], wanted: tuple[int, int] | None, what: str
) -> tuple[int, ...]:
    if wanted is None:
        return available
    lo, hi = wanted
    if lo > hi:
        raise DataError(f"empty {what} range {lo}:{hi}")
    missing = [v for v in range(lo, hi + 1) if v not in available]
    if missing:
        raise DataError(f"{what}s {missing} requested but absent from the dump")
    return tuple(v for v in available if lo <= v <= hi)


def disentanglement_score(
    dump: AttentionDump,
    subject_tokens: Mapping[str, Sequence[int]] | None = None,
    block_range: tuple[int, int] | None = None,
    timestep_range: tuple[int, int] | None = None,
) -> ScoreSeries:
    """Score a dump over inclusive block and timestep ranges.

    Subject groups default to the dump manifest's.  Every label inside a
    requested range must be present in the dump.  A single-subject
    grouping scores 0 everywhere (nothing to separate).
    """
    groups = _resolve_groups(dump, subject_tokens)
    timesteps = _select_labels(dump.manifest.timesteps, timestep_range, "timestep")
    blocks = _select_labels(dump.manifest.blocks, block_range, "block")
    values = np.zeros((len(timesteps), len(blocks)))
    for ti, t in enumerate(timesteps):
        for bi, b in enumerate(blocks):
            matrix = dump.matrix(t, b)
            mixtures: list[ProbField] = []
            for _, tokens in groups:
                fields = [extract_token_field(matrix, tok) for tok in tokens]
                mixtures.append(mixture(fields))
            values[ti, bi] = jsd_normalized(mixtures) if len(mixtures) >= 2 else 0.0
    return ScoreSeries(timesteps, blocks, values)


def export_series_csv(
    optimized: ScoreSeries, baseline: ScoreSeries, path: str
) -> None:
    """Write two aligned series side by side as CSV.

    Columns are ``timestep``, per-block optimized values ``jedi_0..``,
    per-block baseline values ``base_0..``, then the per-timestep means
    of each series.  Both series must cover identical timesteps and
    equally many blocks.  Floats are rendered with ``repr`` so values
    round-trip exactly.
    """
    if optimized.timesteps != baseline.timesteps:
        raise DataError("series cover different timesteps")
    if len(optimized.blocks) != len(baseline.blocks):
        raise DataError("series cover different block counts")
    num_blocks = len(optimized.blocks)
    header = (
        ["timestep"]
        + [f"jedi_{i}" for i in range(num_blocks)]
        + [f"base_{i}" for i in range(num_blocks)]
        + ["jedi_mean", "base_mean"]
    )
    lines = [",".join(header)]
    opt_mean = optimized.per_timestep_mean
    base_mean = baseline.per_timestep_mean
    for ti, t in enumerate(optimized.timesteps):
        cells = [str(t)]
        cells += [repr(float(v)) for v in optimized.values[ti]]
        cells += [repr(float(v)) for v in baseline.values[ti]]
        cells += [repr(float(opt_mean[ti])), repr(float(base_mean[ti]))]
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def series_summary(series: ScoreSeries) -> dict:
    """JSON-ready aggregate view of a series."""
    return {
        "std_kind": "population",
        "overall_mean": series.overall_mean,
        "overall_std": series.overall_std,
        "late_window_start": LATE_WINDOW_START,
        "late_mean": series.late_mean,
        "late_std": series.late_std,
        "blocks": list(series.blocks),
        "per_timestep": [
            {
                "timestep": t,
                "mean": float(series.per_timestep_mean[i]),
                "std": float(series.per_timestep_std[i]),
            }
            for i, t in enumerate(series.timesteps)
        ],
    }
