"""Attention bundle files: a JSON manifest plus a packed binary payload.

Payload layout: magic bytes ``ATNB``, then version, sample_count, L, H, n
as unsigned 32-bit little-endian integers, followed by
sample_count * L * H * n * n IEEE-754 binary32 little-endian values in
row-major (sample, layer, head, row, col) order.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .attention import AttentionStack, validate_stack_tensor
from .errors import BadBundle, DimensionMismatch

MAGIC = b"ATNB"
VERSION = 1
MANIFEST_NAME = "manifest.json"
PAYLOAD_NAME = "attention.bin"
_HEADER = struct.Struct("<4sIIIII")


@dataclass
class Bundle:
    """In-memory bundle: (N, L, H, n, n) tensor plus per-sample metadata."""

    tensor: np.ndarray
    sample_ids: list[str]
    labels: list[int] | None = None

    @property
    def sample_count(self) -> int:
        return self.tensor.shape[0]

    @property
    def layers(self) -> int:
        return self.tensor.shape[1]

    @property
    def heads(self) -> int:
        return self.tensor.shape[2]

    @property
    def n(self) -> int:
        return self.tensor.shape[3]

    def stack(self, sample_id: str) -> AttentionStack:
        try:
            index = self.sample_ids.index(sample_id)
        except ValueError:
            raise KeyError(f"unknown sample id {sample_id!r}") from None
        return AttentionStack(tensor=self.tensor[index], sample_id=sample_id)

    def __iter__(self) -> Iterator[AttentionStack]:
        for index, sid in enumerate(self.sample_ids):
            yield AttentionStack(tensor=self.tensor[index], sample_id=sid)


def write_bundle(
    directory: str | Path,
    tensor: np.ndarray,
    sample_ids: Sequence[str],
    labels: Sequence[int] | None = None,
) -> Path:
    """Write manifest + payload; the tensor is stored as binary32."""
    tensor = np.asarray(tensor, dtype=float)
    if tensor.ndim != 5 or tensor.shape[3] != tensor.shape[4]:
        raise DimensionMismatch(f"expected (N, L, H, n, n) tensor, got {tensor.shape}")
    if tensor.shape[0] != len(sample_ids):
        raise DimensionMismatch("sample_ids must align with the tensor's first axis")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    count, layers, heads, n, _ = tensor.shape
    manifest = {
        "version": VERSION,
        "sample_count": count,
        "L": layers,
        "H": heads,
        "n": n,
        "sample_ids": [str(s) for s in sample_ids],
    }
    if labels is not None:
        manifest["labels"] = [int(v) for v in labels]
    (directory / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    header = _HEADER.pack(MAGIC, VERSION, count, layers, heads, n)
    payload = tensor.astype("<f4").tobytes(order="C")
    (directory / PAYLOAD_NAME).write_bytes(header + payload)
    return directory


def read_manifest(directory: str | Path) -> dict:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise BadBundle(f"missing {MANIFEST_NAME} in {directory}")
    return json.loads(path.read_text())


def read_bundle(directory: str | Path, validate: bool = True) -> Bundle:
    """Read a bundle; rejects manifest/payload disagreement and bad rows."""
    directory = Path(directory)
    manifest = read_manifest(directory)
    payload_path = directory / PAYLOAD_NAME
    if not payload_path.exists():
        raise BadBundle(f"missing {PAYLOAD_NAME} in {directory}")
    blob = payload_path.read_bytes()
    if len(blob) < _HEADER.size:
        raise BadBundle("payload truncated before header end")
    magic, version, count, layers, heads, n = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise BadBundle(f"bad magic bytes {magic!r}")
    if version != VERSION:
        raise BadBundle(f"unsupported payload version {version}")
    for key, value in (("sample_count", count), ("L", layers), ("H", heads), ("n", n)):
        if int(manifest.get(key, -1)) != value:
            raise BadBundle(f"manifest {key}={manifest.get(key)} disagrees with payload {value}")
    if int(manifest["version"]) != version:
        raise BadBundle("manifest version disagrees with payload")
    sample_ids = [str(s) for s in manifest["sample_ids"]]
    if len(sample_ids) != count:
        raise BadBundle("manifest sample_ids length disagrees with sample_count")
    expected = count * layers * heads * n * n
    values = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size)
    if values.size != expected:
        raise BadBundle(f"payload holds {values.size} values, expected {expected}")
    tensor = values.astype(float).reshape(count, layers, heads, n, n)
    if validate:
        for index, sid in enumerate(sample_ids):
            validate_stack_tensor(tensor[index], where=f"sample {sid}")
    labels = manifest.get("labels")
    if labels is not None:
        labels = [int(v) for v in labels]
        if len(labels) != count:
            raise BadBundle("manifest labels length disagrees with sample_count")
    return Bundle(tensor=tensor, sample_ids=sample_ids, labels=labels)


def validate_bundle(directory: str | Path) -> dict:
    """Full validation pass; returns a short summary on success."""
    bundle = read_bundle(directory, validate=True)
    return {
        "sample_count": bundle.sample_count,
        "L": bundle.layers,
        "H": bundle.heads,
        "n": bundle.n,
        "ok": True,
    }
