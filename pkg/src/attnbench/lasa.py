"""Threshold-based local abstraction of a symbolized series.

Two thresholds split the per-position attention vector into high, medium
and low regions: highly attended points are kept verbatim, each maximal
run of medium points collapses to its center position with the run's
median value, and everything else is dropped. Linear interpolation turns
an abstraction back into a validation-ready series with masked ends.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .attention import Lava
from .errors import BadParams, EmptyBatch, LengthMismatch, ZeroDivisor
from .sax import SymbolizedSeries

PROVENANCE_HIGH = "high"
PROVENANCE_MEDIUM_CENTER = "medium_center"
PROVENANCE_MEDIUM_ABSORBED = "medium_absorbed"
PROVENANCE_DROPPED = "dropped"


@dataclass(frozen=True)
class ThresholdSpec:
    """Tuning divisors for the two cut thresholds.

    mode "avg" divides the vector mean, mode "max" the vector maximum.
    A negative s2 disables dropping entirely (t2 becomes -inf).
    """

    mode: str
    s1: float
    s2: float

    def __post_init__(self) -> None:
        if self.mode not in ("avg", "max"):
            raise BadParams(f"mode must be 'avg' or 'max', got {self.mode!r}")


@dataclass(frozen=True)
class Abstraction:
    """Kept points plus per-position provenance and the reduction ratio."""

    kept: tuple[tuple[int, float], ...]
    provenance: tuple[str, ...]
    reduction: float
    t1: float
    t2: float
    sample_id: str | None = None
    combo: str | None = None

    @property
    def n(self) -> int:
        return len(self.provenance)


@dataclass(frozen=True)
class ValidationSeries:
    """Interpolated series with a mask marking the defined positions."""

    values: np.ndarray
    mask: np.ndarray


def resolve_thresholds(lava: Lava | np.ndarray | Sequence[float], spec: ThresholdSpec) -> tuple[float, float]:
    """Turn tuning divisors into concrete (t1, t2) for one attention vector."""
    vector = np.asarray(lava.vector if isinstance(lava, Lava) else lava, dtype=float)
    if vector.size == 0:
        raise BadParams("attention vector is empty")
    base = float(vector.mean()) if spec.mode == "avg" else float(vector.max())
    if spec.s1 == 0:
        raise ZeroDivisor("s1 must not be 0")
    if spec.s2 == 0:
        raise ZeroDivisor("s2 must not be 0")
    t1 = base / spec.s1
    t2 = float("-inf") if spec.s2 < 0 else base / spec.s2
    if t1 < t2:
        raise BadParams(f"resolved t1 ({t1}) is below t2 ({t2})")
    return t1, t2


def _medium_runs(tags: np.ndarray) -> list[tuple[int, int]]:
    """Maximal contiguous [start, end] index runs of medium positions."""
    runs = []
    start = None
    for i, tag in enumerate(tags):
        if tag == "medium":
            if start is None:
                start = i
        elif start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(tags) - 1))
    return runs


def _lower_median(values: np.ndarray) -> float:
    ordered = np.sort(values)
    return float(ordered[(len(ordered) - 1) // 2])


def abstract(
    x: SymbolizedSeries,
    lava: Lava | np.ndarray | Sequence[float],
    t1: float,
    t2: float,
    combo: str | None = None,
) -> Abstraction:
    """Partition positions by attention and collapse the medium runs.

    a > t1 keeps the point verbatim; t2 < a <= t1 marks it medium, and each
    maximal medium run becomes one point at floor((start+end)/2) carrying
    the run's lower median value; a <= t2 drops the point.
    """
    vector = np.asarray(lava.vector if isinstance(lava, Lava) else lava, dtype=float)
    n = len(x.values)
    if len(vector) != n:
        raise LengthMismatch(f"attention vector length {len(vector)} != series length {n}")
    if t1 < t2:
        raise BadParams(f"t1 ({t1}) must be >= t2 ({t2})")
    if combo is None and isinstance(lava, Lava):
        combo = lava.combo.render()

    raw_tags = np.where(vector > t1, "high", np.where(vector > t2, "medium", "dropped"))
    provenance = [PROVENANCE_DROPPED] * n
    kept: list[tuple[int, float]] = []
    for i in np.flatnonzero(raw_tags == "high"):
        provenance[i] = PROVENANCE_HIGH
        kept.append((int(i), float(x.values[i])))
    for start, end in _medium_runs(raw_tags):
        center = (start + end) // 2
        for i in range(start, end + 1):
            provenance[i] = PROVENANCE_MEDIUM_ABSORBED
        provenance[center] = PROVENANCE_MEDIUM_CENTER
        kept.append((center, _lower_median(x.values[start : end + 1])))
    kept.sort(key=lambda pair: pair[0])

    return Abstraction(
        kept=tuple(kept),
        provenance=tuple(provenance),
        reduction=(n - len(kept)) / n,
        t1=float(t1),
        t2=float(t2),
        sample_id=x.sample_id,
        combo=combo,
    )


def interpolate(a: Abstraction, n: int | None = None) -> ValidationSeries:
    """Linearly fill between kept points; the unreachable ends stay masked."""
    n = a.n if n is None else n
    values = np.zeros(n)
    mask = np.zeros(n, dtype=bool)
    if not a.kept:
        return ValidationSeries(values=values, mask=mask)
    for pos, val in a.kept:
        values[pos] = val
        mask[pos] = True
    for (p1, v1), (p2, v2) in zip(a.kept, a.kept[1:]):
        for i in range(p1 + 1, p2):
            values[i] = v1 + (v2 - v1) * (i - p1) / (p2 - p1)
            mask[i] = True
    return ValidationSeries(values=values, mask=mask)


def reduction_stats(batch: Iterable[Abstraction]) -> tuple[float, float]:
    """Mean and population std of the per-sample reduction ratios."""
    reductions = np.asarray([a.reduction for a in batch], dtype=float)
    if reductions.size == 0:
        raise EmptyBatch("no abstractions supplied")
    return float(reductions.mean()), float(reductions.std())


def abstraction_record(a: Abstraction) -> dict:
    return {
        "sample_id": a.sample_id,
        "combo": a.combo,
        "t1": a.t1,
        "t2": a.t2,
        "kept": [[pos, val] for pos, val in a.kept],
        "provenance": list(a.provenance),
        "reduction": a.reduction,
    }


def write_abstractions_jsonl(path: str | Path, abstractions: Iterable[Abstraction]) -> None:
    with Path(path).open("w") as fh:
        for a in abstractions:
            fh.write(json.dumps(abstraction_record(a), sort_keys=True) + "\n")


def write_validation_csv(
    path: str | Path,
    series: Sequence[ValidationSeries],
    sample_ids: Sequence[str] | None = None,
    labels: Sequence[int] | None = None,
) -> None:
    """One row per sample: id, label, n value columns, n 0/1 mask columns."""
    if not series:
        raise EmptyBatch("no validation series supplied")
    n = len(series[0].values)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sample_id", "label"]
            + [f"v{i}" for i in range(n)]
            + [f"mask{i}" for i in range(n)]
        )
        for idx, vs in enumerate(series):
            sid = sample_ids[idx] if sample_ids is not None else str(idx)
            label = labels[idx] if labels is not None else ""
            writer.writerow(
                [sid, label]
                + [repr(float(v)) for v in vs.values]
                + [int(m) for m in vs.mask]
            )
