"""Capture joint attention from DiT-style pipelines into dump files.

The exporter side of the attention-dump format: hook a diffusion
pipeline, average heads per (timestep, block), and write a container
file that downstream scoring tools read.  The pipeline interface is
duck-typed (see ``capture``); the writer implements the wire format
independently, so this package has no dependency on any consumer.
"""

from .capture import capture_run, resolve_subject_tokens
from .config import DEFAULT_BLOCKS, KIND_RAW_LOGITS, KIND_SOFTMAXED, HookConfig
from .dumpfile import FORMAT_VERSION, write_attention_dump
from .errors import (
    CaptureError,
    ConfigError,
    ExporterError,
    MissingBlockError,
    TokenNotFoundError,
)

__all__ = [
    "DEFAULT_BLOCKS",
    "FORMAT_VERSION",
    "KIND_RAW_LOGITS",
    "KIND_SOFTMAXED",
    "HookConfig",
    "capture_run",
    "resolve_subject_tokens",
    "write_attention_dump",
    "ExporterError",
    "ConfigError",
    "TokenNotFoundError",
    "MissingBlockError",
    "CaptureError",
]

__version__ = "0.1.0"
