"""Synthetic datasets for exercising the pipeline without real recordings.

"trend" contrasts a slowly falling against a suddenly falling class,
"counting" enumerates all binary sequences labelled by their number of
ones, and "counting-binary" collapses those labels to a two-class split.
"""
from __future__ import annotations

from typing import Mapping

import numpy as np

from .errors import BadParams
from .sax import RawDataset

FIXTURE_KINDS = ("trend", "counting", "counting-binary")


def _counting_rows(length: int) -> np.ndarray:
    """All 2^length binary sequences in ascending bit order."""
    count = 2**length
    codes = np.arange(count, dtype=np.int64)[:, None]
    bits = (codes >> np.arange(length - 1, -1, -1)) & 1
    return bits.astype(float)


def _counting_split(total: int, rng: np.random.Generator) -> np.ndarray:
    """30/20/50 split markers. Test and val take floor(0.5*N) and
    floor(0.2*N); train takes the remainder (308/204/512 for N=1024)."""
    test_size = int(np.floor(0.5 * total))
    val_size = int(np.floor(0.2 * total))
    train_size = total - test_size - val_size
    markers = np.concatenate(
        [
            np.full(train_size, "train", dtype=object),
            np.full(val_size, "val", dtype=object),
            np.full(test_size, "test", dtype=object),
        ]
    )
    rng.shuffle(markers)
    return markers


def _gen_counting(params: Mapping, seed: int, binary: bool) -> RawDataset:
    length = int(params.get("length", 10))
    if length < 2 or length > 20:
        raise BadParams(f"counting length must be in [2, 20], got {length}")
    series = _counting_rows(length)
    ones = series.sum(axis=1).astype(int)
    if binary:
        threshold = int(params.get("threshold", 5))
        labels = (ones >= threshold).astype(int)
    else:
        labels = ones
    rng = np.random.default_rng(seed)
    split = _counting_split(len(series), rng)
    return RawDataset(series=series, labels=labels, split=split)


def _slow_fall(n: int, rng: np.random.Generator, noise: float) -> np.ndarray:
    return np.linspace(1.0, -1.0, n) + rng.normal(0.0, noise, size=n)


def _sudden_fall(n: int, rng: np.random.Generator, noise: float) -> np.ndarray:
    change = rng.integers(int(0.55 * n), int(0.8 * n) + 1)
    fall_len = max(2, int(0.15 * n))
    x = np.full(n, 1.0)
    fall_end = min(n, change + fall_len)
    x[change:fall_end] = np.linspace(1.0, -1.0, fall_end - change + 1)[1:]
    x[fall_end:] = -1.0
    return x + rng.normal(0.0, noise, size=n)


def _gen_trend(params: Mapping, seed: int) -> RawDataset:
    n = int(params.get("n", 30))
    train_per_class = int(params.get("train_per_class", 30))
    test_per_class = int(params.get("test_per_class", 30))
    noise = float(params.get("noise", 0.08))
    if n < 8:
        raise BadParams(f"trend fixture needs n >= 8, got {n}")
    if train_per_class < 1 or test_per_class < 0:
        raise BadParams("per-class sample counts must be positive")
    rng = np.random.default_rng(seed)
    series, labels, split = [], [], []
    for marker, per_class in (("train", train_per_class), ("test", test_per_class)):
        for label, gen in ((0, _slow_fall), (1, _sudden_fall)):
            for _ in range(per_class):
                series.append(gen(n, rng, noise))
                labels.append(label)
                split.append(marker)
    return RawDataset(
        series=np.asarray(series), labels=np.asarray(labels), split=np.asarray(split, dtype=object)
    )


def gen_fixture(kind: str, params: Mapping | None = None, seed: int = 0) -> RawDataset:
    """Build one of the synthetic datasets, deterministic under the seed."""
    params = params or {}
    if kind == "trend":
        return _gen_trend(params, seed)
    if kind == "counting":
        return _gen_counting(params, seed, binary=False)
    if kind == "counting-binary":
        return _gen_counting(params, seed, binary=True)
    raise BadParams(f"unknown fixture kind {kind!r}; expected one of {FIXTURE_KINDS}")
