"""Single-file container for captured joint attention matrices.

A dump is a UTF-8 JSON manifest line terminated by ``\\n`` followed by a
contiguous little-endian float32 payload.  The manifest declares:

    format_version   always 1 for this format
    n, m             image and prompt token counts
    heads_averaged   whether attention heads were averaged at capture
    kind             "raw_logits" or "softmaxed"
    timesteps        captured timestep labels, in payload order
    blocks           captured block labels, in payload order
    token_labels     one human-readable label per prompt token
    subject_groups   ordered mapping of subject id -> prompt token indices

The payload stores ``len(timesteps) * len(blocks)`` matrices of shape
``(n+m, n+m)``, timestep-major then block-major, and its byte length must
equal that count times ``(n+m)^2 * 4`` exactly.  Writes are atomic
(temp file then rename) and re-serialize manifests in canonical field
order, so write(read(path)) reproduces a written file byte for byte.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DataError,
    DumpFormatError,
    DumpSizeError,
    DumpVersionError,
)
from .extraction import _KINDS, JointAttentionMatrix

__all__ = [
    "FORMAT_VERSION",
    "DumpManifest",
    "AttentionDump",
    "read_dump",
    "write_dump",
]

FORMAT_VERSION = 1

_MANIFEST_FIELDS = (
    "format_version",
    "n",
    "m",
    "heads_averaged",
    "kind",
    "timesteps",
    "blocks",
    "token_labels",
    "subject_groups",
)


@dataclass(frozen=True)
class DumpManifest:
    """Typed view of the manifest line."""

    n: int
    m: int
    heads_averaged: bool
    kind: str
    timesteps: tuple[int, ...]
    blocks: tuple[int, ...]
    token_labels: tuple[str, ...]
    subject_groups: dict[str, tuple[int, ...]] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def __post_init__(self) -> None:
        if self.format_version != FORMAT_VERSION:
            raise DumpVersionError(
                f"unsupported format version {self.format_version}, expected {FORMAT_VERSION}"
            )
        if self.n < 1 or self.m < 1:
            raise DumpFormatError(f"need n >= 1 and m >= 1, got n={self.n}, m={self.m}")
        if self.kind not in _KINDS:
            raise DumpFormatError(f"unknown attention kind {self.kind!r}")
        timesteps = tuple(int(t) for t in self.timesteps)
        blocks = tuple(int(b) for b in self.blocks)
        if not timesteps:
            raise DumpFormatError("dump must cover at least one timestep")
        if not blocks:
            raise DumpFormatError("dump must cover at least one block")
        if len(set(timesteps)) != len(timesteps):
            raise DumpFormatError("timestep labels repeat")
        if len(set(blocks)) != len(blocks):
            raise DumpFormatError("block labels repeat")
        labels = tuple(str(s) for s in self.token_labels)
        if len(labels) != self.m:
            raise DumpFormatError(
                f"expected {self.m} token labels, got {len(labels)}"
            )
        groups: dict[str, tuple[int, ...]] = {}
        seen: set[int] = set()
        for name, indices in self.subject_groups.items():
            idx = tuple(int(i) for i in indices)
            if not idx:
                raise DumpFormatError(f"subject group {name!r} is empty")
            for i in idx:
                if not 0 <= i < self.m:
                    raise DumpFormatError(
                        f"subject group {name!r} references token {i}, outside [0, {self.m})"
                    )
                if i in seen:
                    raise DumpFormatError(f"token {i} belongs to more than one subject group")
                seen.add(i)
            groups[str(name)] = idx
        object.__setattr__(self, "timesteps", timesteps)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "token_labels", labels)
        object.__setattr__(self, "subject_groups", groups)

    @property
    def matrix_size(self) -> int:
        return self.n + self.m

    @property
    def payload_shape(self) -> tuple[int, int, int, int]:
        size = self.matrix_size
        return (len(self.timesteps), len(self.blocks), size, size)

    def to_json_line(self) -> bytes:
        payload = {
            "format_version": self.format_version,
            "n": self.n,
            "m": self.m,
            "heads_averaged": self.heads_averaged,
            "kind": self.kind,
            "timesteps": list(self.timesteps),
            "blocks": list(self.blocks),
            "token_labels": list(self.token_labels),
            "subject_groups": {k: list(v) for k, v in self.subject_groups.items()},
        }
        return json.dumps(payload, separators=(",", ":")).encode("utf-8") + b"\n"

    @classmethod
    def from_json_dict(cls, raw: dict) -> "DumpManifest":
        if not isinstance(raw, dict):
            raise DumpFormatError("manifest line is not a JSON object")
        missing = [k for k in _MANIFEST_FIELDS if k not in raw]
        if missing:
            raise DumpFormatError(f"manifest is missing fields: {missing}")
        extra = [k for k in raw if k not in _MANIFEST_FIELDS]
        if extra:
            raise DumpFormatError(f"manifest carries unknown fields: {extra}")
        version = raw["format_version"]
        if not isinstance(version, int) or isinstance(version, bool):
            raise DumpFormatError(f"format_version must be an integer, got {version!r}")
        if version != FORMAT_VERSION:
            raise DumpVersionError(
                f"unsupported format version {version}, expected {FORMAT_VERSION}"
            )
        try:
            return cls(
                n=int(raw["n"]),
                m=int(raw["m"]),
                heads_averaged=bool(raw["heads_averaged"]),
                kind=str(raw["kind"]),
                timesteps=tuple(raw["timesteps"]),
                blocks=tuple(raw["blocks"]),
                token_labels=tuple(raw["token_labels"]),
                subject_groups={k: tuple(v) for k, v in raw["subject_groups"].items()},
                format_version=version,
            )
        except (TypeError, ValueError) as exc:
            raise DumpFormatError(f"manifest field has a wrong type: {exc}") from exc


@dataclass(frozen=True, eq=False)
class AttentionDump:
    """A manifest plus its (T, B, n+m, n+m) float32 payload."""

    manifest: DumpManifest
    payload: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.payload, dtype=np.float32)
        expected = self.manifest.payload_shape
        if arr.shape != expected:
            raise DataError(f"payload shape {arr.shape} does not match manifest {expected}")
        arr = np.ascontiguousarray(arr).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "payload", arr)

    def has(self, timestep: int, block: int) -> bool:
        return timestep in self.manifest.timesteps and block in self.manifest.blocks

    def matrix(self, timestep: int, block: int) -> JointAttentionMatrix:
        """Matrix for a (timestep, block) label pair."""
        man = self.manifest
        if timestep not in man.timesteps:
            raise DataError(f"timestep {timestep} not present in dump")
        if block not in man.blocks:
            raise DataError(f"block {block} not present in dump")
        ti = man.timesteps.index(timestep)
        bi = man.blocks.index(block)
        return JointAttentionMatrix(
            data=self.payload[ti, bi].astype(np.float64),
            n=man.n,
            m=man.m,
            kind=man.kind,
            block_index=block,
            timestep=timestep,
        )

    def prompt_groups(self) -> list[tuple[str, tuple[int, ...]]]:
        """Subject groups in manifest order."""
        return list(self.manifest.subject_groups.items())


def write_dump(dump: AttentionDump, path: str) -> None:
    """Serialize a dump atomically (temp file, fsync, rename).

    Rejects non-finite payloads; a partially written file is never left
    at ``path``.
    """
    if not np.all(np.isfinite(dump.payload)):
        raise DataError("dump payload contains non-finite values")
    header = dump.manifest.to_json_line()
    body = np.ascontiguousarray(dump.payload, dtype="<f4").tobytes()
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


def read_dump(path: str) -> AttentionDump:
    """Parse and validate a dump file.

    Raises ``DumpFormatError`` for a malformed manifest,
    ``DumpVersionError`` for an unsupported version, and
    ``DumpSizeError`` when the payload length disagrees with the
    manifest.
    """
    with open(path, "rb") as fh:
        header = fh.readline()
        if not header.endswith(b"\n"):
            raise DumpFormatError("dump has no manifest line terminator")
        try:
            raw = json.loads(header.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DumpFormatError(f"manifest line is not valid JSON: {exc}") from exc
        manifest = DumpManifest.from_json_dict(raw)
        body = fh.read()
    expected = int(np.prod(manifest.payload_shape)) * 4
    if len(body) != expected:
        raise DumpSizeError(
            f"payload holds {len(body)} bytes, manifest implies {expected}"
        )
    payload = np.frombuffer(body, dtype="<f4").reshape(manifest.payload_shape)
    return AttentionDump(manifest, payload)
