"""Writer for the attention-dump wire format.

The format is one UTF-8 JSON manifest line terminated by ``\\n`` followed
by a contiguous little-endian float32 payload of shape
``(timesteps, blocks, n+m, n+m)`` in C order.  The manifest fields, in
canonical serialization order:

    format_version, n, m, heads_averaged, kind, timesteps, blocks,
    token_labels, subject_groups

This module implements the format from its documentation on purpose: the
exporter talks to consumers only through files, so the writer must stand
on its own.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .errors import CaptureError

__all__ = ["FORMAT_VERSION", "write_attention_dump"]

FORMAT_VERSION = 1


def write_attention_dump(
    path: str,
    *,
    n: int,
    m: int,
    kind: str,
    timesteps: tuple[int, ...],
    blocks: tuple[int, ...],
    token_labels: tuple[str, ...],
    subject_groups: dict[str, tuple[int, ...]],
    payload: np.ndarray,
    heads_averaged: bool = True,
) -> None:
    """Write one dump atomically (temp file, fsync, rename)."""
    size = n + m
    expected = (len(timesteps), len(blocks), size, size)
    arr = np.asarray(payload, dtype="<f4")
    if arr.shape != expected:
        raise CaptureError(f"payload shape {arr.shape} does not match {expected}")
    if not np.all(np.isfinite(arr)):
        raise CaptureError("payload contains non-finite values")
    if len(token_labels) != m:
        raise CaptureError(f"expected {m} token labels, got {len(token_labels)}")
    manifest = {
        "format_version": FORMAT_VERSION,
        "n": int(n),
        "m": int(m),
        "heads_averaged": bool(heads_averaged),
        "kind": str(kind),
        "timesteps": [int(t) for t in timesteps],
        "blocks": [int(b) for b in blocks],
        "token_labels": [str(s) for s in token_labels],
        "subject_groups": {str(k): [int(i) for i in v] for k, v in subject_groups.items()},
    }
    header = json.dumps(manifest, separators=(",", ":")).encode("utf-8") + b"\n"
    body = np.ascontiguousarray(arr).tobytes()
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(body)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp_path, path)
    except BaseException:
        try:
            os.unlink(tmp_path)
        except OSError:
            pass
        raise
