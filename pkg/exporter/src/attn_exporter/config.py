"""Capture configuration."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import ConfigError

__all__ = ["KIND_RAW_LOGITS", "KIND_SOFTMAXED", "HookConfig"]

KIND_RAW_LOGITS = "raw_logits"
KIND_SOFTMAXED = "softmaxed"
_KINDS = (KIND_RAW_LOGITS, KIND_SOFTMAXED)

# Transformer blocks whose attention carries usable spatial layout;
# early and late blocks are mostly noise for this purpose.
DEFAULT_BLOCKS = tuple(range(5, 16))


@dataclass(frozen=True)
class HookConfig:
    """What to capture and where to put it.

    ``subject_tokens`` maps a subject name to prompt-token selectors:
    integers are positions in the tokenized prompt, strings are matched
    against the tokens themselves and must resolve to exactly one
    position.  ``timestep_range`` is an inclusive (lo, hi) filter over
    the pipeline's step labels; None captures every step.
    """

    prompt: str
    output_path: str
    subject_tokens: Mapping[str, Sequence[int | str]] = field(default_factory=dict)
    blocks: tuple[int, ...] = DEFAULT_BLOCKS
    kind: str = KIND_RAW_LOGITS
    timestep_range: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if not self.prompt.strip():
            raise ConfigError("prompt is empty")
        if not self.output_path:
            raise ConfigError("output path is empty")
        blocks = tuple(int(b) for b in self.blocks)
        if not blocks:
            raise ConfigError("block list is empty")
        if len(set(blocks)) != len(blocks):
            raise ConfigError(f"block list repeats entries: {blocks}")
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown capture kind {self.kind!r}, expected one of {_KINDS}")
        if self.timestep_range is not None:
            lo, hi = self.timestep_range
            if lo > hi:
                raise ConfigError(f"empty timestep range {lo}:{hi}")
            object.__setattr__(self, "timestep_range", (int(lo), int(hi)))
        for name, selectors in self.subject_tokens.items():
            if not selectors:
                raise ConfigError(f"subject {name!r} lists no tokens")
        object.__setattr__(self, "blocks", tuple(sorted(blocks)))
