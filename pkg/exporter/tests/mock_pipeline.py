"""Deterministic mock pipeline standing in for a DiT denoiser."""

from __future__ import annotations

import numpy as np


class MockDiTPipeline:
    """Duck-typed stand-in emitting seeded joint attention logits.

    ``logits_for(timestep, block)`` is pure, so tests can recompute
    exactly what the hook saw.
    """

    def __init__(
        self,
        image_tokens: int = 16,
        heads: int = 8,
        num_steps: int = 28,
        num_blocks: int = 24,
        seed: int = 0,
        skip: tuple[tuple[int, int], ...] = (),
    ):
        self.image_token_count = image_tokens
        self.heads = heads
        self.num_steps = num_steps
        self.block_indices = tuple(range(num_blocks))
        self.seed = seed
        self.skip = set(skip)

    def tokenize(self, prompt: str) -> list[str]:
        return prompt.lower().split()

    def logits_for(self, timestep: int, block: int, prompt: str) -> np.ndarray:
        size = self.image_token_count + len(self.tokenize(prompt))
        rng = np.random.default_rng([self.seed, timestep, block])
        return rng.standard_normal((self.heads, size, size))

    def run(self, prompt: str, on_attention) -> None:
        for t in range(self.num_steps):
            for b in self.block_indices:
                if (t, b) in self.skip:
                    continue
                on_attention(t, b, self.logits_for(t, b, prompt))
