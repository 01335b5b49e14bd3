"""Hook a DiT-style pipeline and write its joint attention to a dump file.

The pipeline is duck-typed; anything with this surface works:

    tokenize(prompt) -> list[str]      prompt tokens, in sequence order
    image_token_count -> int           n, image tokens per matrix
    block_indices -> sequence of int   transformer blocks that exist
    run(prompt, on_attention) -> None  denoise, calling
        on_attention(timestep, block, scores) once per (step, block)
        with scores shaped (heads, n+m, n+m): raw pre-softmax logits of
        the joint attention, image tokens first

Captured heads are mean-averaged before storage.  ``raw_logits`` stores
that average directly; ``softmaxed`` row-softmaxes each head first, so
the stored average is still row-stochastic.  The manifest records which
path was taken and that heads were averaged.
"""

from __future__ import annotations

import numpy as np

from .config import KIND_SOFTMAXED, HookConfig
from .dumpfile import write_attention_dump
from .errors import CaptureError, ConfigError, MissingBlockError, TokenNotFoundError

__all__ = ["capture_run", "resolve_subject_tokens"]


def resolve_subject_tokens(
    subject_tokens, tokens: tuple[str, ...]
) -> dict[str, tuple[int, ...]]:
    """Map subject-name -> selector lists to concrete token indices.

    Integer selectors index ``tokens`` directly; string selectors must
    match exactly one token.  Every failure message carries the full
    tokenization, so the caller can switch to explicit indices.
    """
    groups: dict[str, tuple[int, ...]] = {}
    claimed: set[int] = set()
    for name, selectors in subject_tokens.items():
        indices: list[int] = []
        for sel in selectors:
            if isinstance(sel, str):
                hits = [i for i, tok in enumerate(tokens) if tok == sel]
                if not hits:
                    raise TokenNotFoundError(
                        f"subject {name!r}: token {sel!r} not found", tokens
                    )
                if len(hits) > 1:
                    raise TokenNotFoundError(
                        f"subject {name!r}: token {sel!r} is ambiguous "
                        f"(positions {hits}), use an explicit index",
                        tokens,
                    )
                indices.append(hits[0])
            else:
                i = int(sel)
                if not 0 <= i < len(tokens):
                    raise TokenNotFoundError(
                        f"subject {name!r}: index {i} outside [0, {len(tokens)})", tokens
                    )
                indices.append(i)
        for i in indices:
            if i in claimed:
                raise ConfigError(f"token {i} belongs to more than one subject")
            claimed.add(i)
        groups[str(name)] = tuple(indices)
    return groups


def _head_average(scores: np.ndarray, size: int, kind: str) -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[1:] != (size, size):
        raise CaptureError(
            f"expected attention scores shaped (heads, {size}, {size}), got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise CaptureError("attention scores contain non-finite values")
    if kind == KIND_SOFTMAXED:
        arr = arr - arr.max(axis=2, keepdims=True)
        arr = np.exp(arr)
        arr /= arr.sum(axis=2, keepdims=True)
    return arr.mean(axis=0)


def capture_run(pipeline, config: HookConfig) -> str:
    """Run the pipeline once, capturing into ``config.output_path``.

    Returns the output path.  Raises ``MissingBlockError`` if a
    configured block does not exist in the pipeline or never produced
    attention during the run.
    """
    tokens = tuple(str(t) for t in pipeline.tokenize(config.prompt))
    if not tokens:
        raise CaptureError("prompt tokenized to nothing")
    groups = resolve_subject_tokens(config.subject_tokens, tokens)
    available = set(int(b) for b in pipeline.block_indices)
    absent = [b for b in config.blocks if b not in available]
    if absent:
        raise MissingBlockError(
            f"blocks {absent} not present in the pipeline (has {sorted(available)})"
        )

    n = int(pipeline.image_token_count)
    m = len(tokens)
    size = n + m
    wanted_blocks = set(config.blocks)
    lo, hi = config.timestep_range if config.timestep_range else (None, None)
    captured: dict[tuple[int, int], np.ndarray] = {}
    timestep_order: list[int] = []

    def on_attention(timestep: int, block: int, scores) -> None:
        t, b = int(timestep), int(block)
        if b not in wanted_blocks:
            return
        if lo is not None and not lo <= t <= hi:
            return
        if (t, b) in captured:
            raise CaptureError(f"duplicate attention for timestep {t}, block {b}")
        if t not in timestep_order:
            timestep_order.append(t)
        captured[(t, b)] = _head_average(scores, size, config.kind)

    pipeline.run(config.prompt, on_attention)

    if not timestep_order:
        raise CaptureError("run produced no attention within the configured ranges")
    missing = [
        (t, b) for t in timestep_order for b in config.blocks if (t, b) not in captured
    ]
    if missing:
        t, b = missing[0]
        raise MissingBlockError(
            f"block {b} produced no attention at timestep {t} "
            f"({len(missing)} captures missing in total)"
        )

    timesteps = tuple(timestep_order)
    payload = np.empty((len(timesteps), len(config.blocks), size, size), dtype=np.float32)
    for ti, t in enumerate(timesteps):
        for bi, b in enumerate(config.blocks):
            payload[ti, bi] = captured[(t, b)].astype(np.float32)
    write_attention_dump(
        config.output_path,
        n=n,
        m=m,
        kind=config.kind,
        timesteps=timesteps,
        blocks=config.blocks,
        token_labels=tokens,
        subject_groups=groups,
        payload=payload,
        heads_averaged=True,
    )
    return config.output_path
