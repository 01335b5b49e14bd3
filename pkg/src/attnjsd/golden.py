"""Deterministic synthetic dumps for demos, tests, and golden files.

Two companion dumps share layout (16 image tokens on a 4x4 grid, four
prompt tokens in two subject groups, timesteps 0..27, blocks 7..15) and
differ only in how far the two subjects' attention separates over time:
the "separated" dump ramps the subjects apart as denoising proceeds, the
"entangled" dump keeps both near the grid center.  Construction is pure
arithmetic on a seeded generator, so byte-identical files come out on
every run.
"""

from __future__ import annotations

import os

import numpy as np

from .dump import AttentionDump, DumpManifest, write_dump
from .extraction import KIND_RAW_LOGITS

__all__ = [
    "separated_fixture_dump",
    "entangled_fixture_dump",
    "write_fixture_dumps",
]

_GRID = 4
_N = _GRID * _GRID
_M = 4
_TIMESTEPS = tuple(range(28))
_BLOCKS = tuple(range(7, 16))
_LABELS = ("subject_a_0", "subject_a_1", "subject_b_0", "subject_b_1")
_GROUPS = {"subject_a": (0, 1), "subject_b": (2, 3)}


def _fixture_manifest() -> DumpManifest:
    return DumpManifest(
        n=_N,
        m=_M,
        heads_averaged=True,
        kind=KIND_RAW_LOGITS,
        timesteps=_TIMESTEPS,
        blocks=_BLOCKS,
        token_labels=_LABELS,
        subject_groups=dict(_GROUPS),
    )


def _blob(cx: float, cy: float, scale: float, amp: float) -> np.ndarray:
    cols, rows = np.meshgrid(np.arange(_GRID), np.arange(_GRID))
    x = (cols + 0.5) / _GRID
    y = (rows + 0.5) / _GRID
    r2 = (x - cx) ** 2 + (y - cy) ** 2
    return (amp * np.exp(-r2 / (2.0 * scale * scale))).reshape(-1)


def _build(separation_at, seed: int) -> AttentionDump:
    manifest = _fixture_manifest()
    rng = np.random.default_rng([404, seed])
    size = _N + _M
    payload = np.zeros((len(_TIMESTEPS), len(_BLOCKS), size, size), dtype=np.float64)
    for ti, t in enumerate(_TIMESTEPS):
        for bi, b in enumerate(_BLOCKS):
            sep = separation_at(t, b)
            matrix = 0.05 * rng.standard_normal((size, size))
            for token in range(_M):
                side = -1.0 if token < 2 else 1.0
                wobble = 0.03 * (token % 2)
                blob = _blob(
                    0.5 + side * sep,
                    0.5 + wobble,
                    0.22,
                    5.0 + 0.2 * rng.standard_normal(),
                )
                noise = 0.05 * rng.standard_normal(_N)
                payload[ti, bi, _N + token, :_N] = blob + noise
                payload[ti, bi, :_N, _N + token] = blob + noise
    return AttentionDump(manifest, payload.astype(np.float32))


def separated_fixture_dump() -> AttentionDump:
    """Subjects drift apart over denoising, faster in later blocks."""

    def separation(t: int, b: int) -> float:
        ramp = min(1.0, t / 18.0)
        return 0.02 + (0.26 + 0.005 * (b - 7)) * ramp

    return _build(separation, seed=1)


def entangled_fixture_dump() -> AttentionDump:
    """Subjects stay near the grid center the whole run."""

    def separation(t: int, b: int) -> float:
        return 0.02 + 0.001 * min(t, 10)

    return _build(separation, seed=2)


def write_fixture_dumps(directory: str) -> tuple[str, str]:
    """Write both fixture dumps; returns (separated_path, entangled_path)."""
    os.makedirs(directory, exist_ok=True)
    sep_path = os.path.join(directory, "separated.attndump")
    ent_path = os.path.join(directory, "entangled.attndump")
    write_dump(separated_fixture_dump(), sep_path)
    write_dump(entangled_fixture_dump(), ent_path)
    return sep_path, ent_path
