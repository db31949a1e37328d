"""Fit-on-train standardization and per-point SAX discretization.

Raw series are standardized with mean/std fitted on the train split only,
cut into equal-width bins over the standardized train range, and every bin
is mapped to an evenly spaced value in [-1, 1]. The mapped values double as
the model input and as the vocabulary of the global representations.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import BadParams, EmptyTrainSet, LengthMismatch, NonFiniteValue

SPLITS = ("train", "val", "test")


def mapped_values(symbol_count: int) -> np.ndarray:
    """Evenly spaced symbol values over [-1, 1], e.g. S=3 -> [-1, 0, 1]."""
    if symbol_count < 2:
        raise BadParams(f"symbol_count must be >= 2, got {symbol_count}")
    return np.linspace(-1.0, 1.0, symbol_count)


@dataclass(frozen=True)
class SaxCodec:
    """Frozen discretizer: standardization parameters plus bin edges.

    ``breakpoints`` are the S-1 ascending cut values in standardized space;
    bins are half-open [lo, hi) with the last bin closed, and out-of-range
    values clamp to the outermost bins.
    """

    symbol_count: int
    mean: float
    std: float
    breakpoints: np.ndarray
    mapped_values: np.ndarray

    def to_json(self) -> str:
        doc = {
            "symbol_count": self.symbol_count,
            "mean": self.mean,
            "std": self.std,
            "breakpoints": [float(b) for b in self.breakpoints],
            "mapped_values": [float(v) for v in self.mapped_values],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SaxCodec":
        doc = json.loads(text)
        return cls(
            symbol_count=int(doc["symbol_count"]),
            mean=float(doc["mean"]),
            std=float(doc["std"]),
            breakpoints=np.asarray(doc["breakpoints"], dtype=float),
            mapped_values=np.asarray(doc["mapped_values"], dtype=float),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SaxCodec":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class SymbolizedSeries:
    """A discretized series: symbol indices plus their mapped values."""

    symbols: np.ndarray
    values: np.ndarray
    label: int | None = None
    sample_id: str | None = None

    def __len__(self) -> int:
        return len(self.symbols)


@dataclass
class RawDataset:
    """Equal-length univariate series with labels and split markers."""

    series: np.ndarray
    labels: np.ndarray
    split: np.ndarray
    sample_ids: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.series = np.asarray(self.series, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        self.split = np.asarray(self.split, dtype=object)
        if self.series.ndim != 2 or self.series.shape[1] < 2:
            raise BadParams("series must be a 2-D array with length >= 2")
        if len(self.labels) != len(self.series) or len(self.split) != len(self.series):
            raise LengthMismatch("labels/split must align with series rows")
        if not np.isfinite(self.series).all():
            raise NonFiniteValue("dataset contains non-finite values")
        unknown = set(self.split) - set(SPLITS)
        if unknown:
            raise BadParams(f"unknown split markers: {sorted(unknown)}")
        if not (self.split == "train").any():
            raise EmptyTrainSet("train partition is empty")
        if not self.sample_ids:
            self.sample_ids = [str(i) for i in range(len(self.series))]

    @property
    def n(self) -> int:
        return self.series.shape[1]

    @property
    def classes(self) -> list[int]:
        return sorted(int(c) for c in np.unique(self.labels))

    def rows(self, split: str) -> np.ndarray:
        """Indices of the rows belonging to one split."""
        return np.flatnonzero(self.split == split)


def fit_codec(train_series: Sequence[Sequence[float]] | np.ndarray, symbol_count: int) -> SaxCodec:
    """Fit standardization and uniform bin edges on train data only.

    Mean and std are global over all train values; the standardized train
    range [min, max] is divided into ``symbol_count`` equal-width bins.
    A zero std is replaced by 1.0 so constant series stay transformable; a
    collapsed value range is widened by one unit on each side, which sends
    a constant series to the middle bin.
    """
    if symbol_count < 2:
        raise BadParams(f"symbol_count must be >= 2, got {symbol_count}")
    arr = np.asarray(train_series, dtype=float)
    if arr.size == 0:
        raise EmptyTrainSet("no train series supplied")
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise BadParams("train series must be equal-length sequences of length >= 2")
    if not np.isfinite(arr).all():
        raise NonFiniteValue("train data contains non-finite values")

    mean = float(arr.mean())
    std = float(arr.std())
    if std == 0.0:
        std = 1.0
    z = (arr - mean) / std
    lo, hi = float(z.min()), float(z.max())
    if hi - lo == 0.0:
        lo, hi = lo - 1.0, hi + 1.0
    edges = np.linspace(lo, hi, symbol_count + 1)
    return SaxCodec(
        symbol_count=symbol_count,
        mean=mean,
        std=std,
        breakpoints=edges[1:-1].copy(),
        mapped_values=mapped_values(symbol_count),
    )


def transform(
    codec: SaxCodec,
    series: Sequence[float] | np.ndarray,
    label: int | None = None,
    sample_id: str | None = None,
) -> SymbolizedSeries:
    """Assign each value its bin symbol and mapped value under a fitted codec."""
    x = np.asarray(series, dtype=float)
    if not np.isfinite(x).all():
        raise NonFiniteValue("series contains non-finite values")
    z = (x - codec.mean) / codec.std
    symbols = np.searchsorted(codec.breakpoints, z, side="right")
    return SymbolizedSeries(
        symbols=symbols.astype(np.int64),
        values=codec.mapped_values[symbols],
        label=label,
        sample_id=sample_id,
    )


def symbolize_dataset(codec: SaxCodec, data: RawDataset) -> list[SymbolizedSeries]:
    return [
        transform(codec, data.series[i], label=int(data.labels[i]), sample_id=data.sample_ids[i])
        for i in range(len(data.series))
    ]


def _sniff_delimiter(first_line: str) -> str:
    return "\t" if "\t" in first_line else ","


def read_series_file(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read one series per row: integer label first, then the values."""
    path = Path(path)
    text = path.read_text().strip()
    if not text:
        raise EmptyTrainSet(f"{path} is empty")
    delim = _sniff_delimiter(text.splitlines()[0])
    series, labels = [], []
    for row in csv.reader(text.splitlines(), delimiter=delim):
        cells = [c for c in row if c.strip() != ""]
        if not cells:
            continue
        label = float(cells[0])
        if label != int(label):
            raise BadParams(f"{path}: non-integer label {cells[0]!r}")
        labels.append(int(label))
        series.append([float(c) for c in cells[1:]])
    lengths = {len(s) for s in series}
    if len(lengths) != 1:
        raise LengthMismatch(f"{path}: rows have differing lengths {sorted(lengths)}")
    return np.asarray(series, dtype=float), np.asarray(labels, dtype=int)


def write_series_file(path: str | Path, series: np.ndarray, labels: np.ndarray) -> None:
    path = Path(path)
    delim = "\t" if path.suffix.lower() == ".tsv" else ","
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delim)
        for label, row in zip(labels, series):
            writer.writerow([int(label)] + [repr(float(v)) for v in row])


def load_dataset(
    train_path: str | Path,
    test_path: str | Path | None = None,
    val_path: str | Path | None = None,
) -> RawDataset:
    """Assemble a dataset from per-split files, rows ordered train, val, test."""
    parts: list[tuple[str, np.ndarray, np.ndarray]] = []
    train_series, train_labels = read_series_file(train_path)
    parts.append(("train", train_series, train_labels))
    if val_path is not None:
        parts.append(("val", *read_series_file(val_path)))
    if test_path is not None:
        parts.append(("test", *read_series_file(test_path)))
    series = np.concatenate([p[1] for p in parts], axis=0)
    labels = np.concatenate([p[2] for p in parts], axis=0)
    split = np.concatenate([np.full(len(p[1]), p[0], dtype=object) for p in parts])
    return RawDataset(series=series, labels=labels, split=split)
