"""Write workbench attention bundles from a user-supplied model callback.

The adapter stays framework-agnostic: the caller provides a function that
returns the per-layer, per-head attention tensor for one input series (and
optionally a prediction function). Output follows the bundle wire format:
a JSON manifest next to a binary payload of magic bytes "ATNB", five
unsigned 32-bit little-endian header fields (version, sample_count, L, H,
n) and binary32 little-endian values in row-major (sample, layer, head,
row, col) order.
"""
from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

MAGIC = b"ATNB"
VERSION = 1
ROW_SUM_TOL = 1e-4
_HEADER = struct.Struct("<4sIIIII")


class ExportError(Exception):
    pass


class ShapeMismatch(ExportError):
    pass


class NonStochasticRows(ExportError):
    pass


AttentionFn = Callable[[np.ndarray], np.ndarray]
PredictFn = Callable[[np.ndarray], int]


@dataclass
class ExportJob:
    """One export run: where the data lives and how to query the model."""

    attention_fn: AttentionFn
    dataset_path: str | Path
    bundle_dir: str | Path
    predict_fn: PredictFn | None = None
    predictions_path: str | Path | None = None


def read_dataset(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Series file: one row per sample, integer label first, values after."""
    text = Path(path).read_text().strip()
    delimiter = "\t" if "\t" in text.splitlines()[0] else ","
    series, labels = [], []
    for row in csv.reader(text.splitlines(), delimiter=delimiter):
        cells = [c for c in row if c.strip() != ""]
        if not cells:
            continue
        labels.append(int(float(cells[0])))
        series.append([float(c) for c in cells[1:]])
    lengths = {len(s) for s in series}
    if len(lengths) != 1:
        raise ShapeMismatch(f"{path}: rows have differing lengths {sorted(lengths)}")
    return np.asarray(series, dtype=float), np.asarray(labels, dtype=int)


def validate_attention(tensor: np.ndarray, n: int, where: str) -> np.ndarray:
    tensor = np.asarray(tensor, dtype=float)
    if tensor.ndim != 4 or tensor.shape[2] != n or tensor.shape[3] != n:
        raise ShapeMismatch(f"{where}: expected (L, H, {n}, {n}), got {tensor.shape}")
    if not np.isfinite(tensor).all():
        raise NonStochasticRows(f"{where}: non-finite attention values")
    if tensor.min() < -1e-6 or tensor.max() > 1.0 + 1e-6:
        raise NonStochasticRows(f"{where}: attention values outside [0, 1]")
    deviation = float(np.abs(tensor.sum(axis=3) - 1.0).max())
    if deviation > ROW_SUM_TOL:
        raise NonStochasticRows(f"{where}: row sums deviate from 1 by up to {deviation:.3g}")
    return tensor


def export(job: ExportJob) -> dict:
    """Run the callback over every row, validate, and write the bundle.

    Returns a summary dict (sample_count, L, H, n, written paths).
    """
    series, _ = read_dataset(job.dataset_path)
    count, n = series.shape
    tensors: list[np.ndarray] = []
    predictions: list[int] = []
    shape = None
    for index in range(count):
        tensor = validate_attention(job.attention_fn(series[index]), n, f"sample {index}")
        if shape is None:
            shape = tensor.shape
        elif tensor.shape != shape:
            raise ShapeMismatch(
                f"sample {index}: shape {tensor.shape} differs from first sample {shape}"
            )
        tensors.append(tensor)
        if job.predict_fn is not None:
            predictions.append(int(job.predict_fn(series[index])))

    layers, heads = shape[0], shape[1]
    bundle_dir = Path(job.bundle_dir)
    bundle_dir.mkdir(parents=True, exist_ok=True)
    sample_ids = [str(i) for i in range(count)]
    manifest = {
        "version": VERSION,
        "sample_count": count,
        "L": int(layers),
        "H": int(heads),
        "n": int(n),
        "sample_ids": sample_ids,
    }
    (bundle_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    header = _HEADER.pack(MAGIC, VERSION, count, layers, heads, n)
    payload = np.stack(tensors).astype("<f4").tobytes(order="C")
    (bundle_dir / "attention.bin").write_bytes(header + payload)

    summary = {
        "sample_count": count,
        "L": int(layers),
        "H": int(heads),
        "n": int(n),
        "bundle": str(bundle_dir),
    }
    if job.predictions_path is not None:
        if job.predict_fn is None:
            raise ExportError("predictions_path set but no predict_fn supplied")
        with Path(job.predictions_path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample_id", "predicted"])
            for sid, predicted in zip(sample_ids, predictions):
                writer.writerow([sid, predicted])
        summary["predictions"] = str(job.predictions_path)
    return summary
