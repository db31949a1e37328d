"""Complexity measures and explanation-quality measurements.

The complexity suite quantifies how simple a series is: line-stretch
length (ce), singular-value entropy (svden), the two template-matching
entropies (apen, sampen) and the slope-change count (trend_shifts).
The explanation side measures prediction agreement between two models
and the consistency of aggregated attention matrices across folds.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    InsufficientSamples,
    LengthMismatch,
    EmptyResults,
    TooShort,
    UndefinedSampEn,
)


def ce(x: Sequence[float] | np.ndarray) -> float:
    """Stretched-line length sqrt(sum of squared steps); 0 for a constant.

    Callers are expected to pass z-normalized data when comparing series.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise TooShort(f"ce needs at least 2 points, got {x.size}")
    return float(np.sqrt(np.sum(np.diff(x) ** 2)))


def _embed(x: np.ndarray, order: int, delay: int) -> np.ndarray:
    rows = len(x) - (order - 1) * delay
    return np.column_stack([x[i * delay : i * delay + rows] for i in range(order)])


def svden(x: Sequence[float] | np.ndarray, m: int = 3, delay: int = 1) -> float:
    """Shannon entropy (natural log) of the normalized singular values of
    the sliding-window embedding matrix."""
    x = np.asarray(x, dtype=float)
    if len(x) <= (m - 1) * delay + 1:
        raise TooShort(f"svden needs more than {(m - 1) * delay + 1} points for m={m}")
    embedding = _embed(x, m, delay)
    singular = np.linalg.svd(embedding, compute_uv=False)
    # standard numerical-rank cutoff, so a rank-1 embedding scores exactly 0
    cutoff = singular.max() * max(embedding.shape) * np.finfo(float).eps
    singular = singular[singular > cutoff]
    total = singular.sum()
    if total == 0.0:
        return 0.0
    normalized = singular / total
    return float(-(normalized * np.log(normalized)).sum())


def _template_counts(x: np.ndarray, m: int, r: float, count: int, exclude_self: bool) -> np.ndarray:
    """Per-template counts of Chebyshev-close templates (distance < r)."""
    templates = _embed(x, m, 1)[:count]
    distances = np.abs(templates[:, None, :] - templates[None, :, :]).max(axis=2)
    matches = distances < r
    if exclude_self:
        np.fill_diagonal(matches, False)
    return matches.sum(axis=1)


def apen(x: Sequence[float] | np.ndarray, m: int = 2, r: float | None = None) -> float:
    """Approximate entropy: phi(m) - phi(m+1) with self-matches included.

    r defaults to 0.2 * std(x). Low values mean repetitive, predictable
    patterns; a constant series scores exactly 0.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n <= m + 1:
        raise TooShort(f"apen needs more than m+1={m + 1} points, got {n}")
    if r is None:
        r = 0.2 * float(x.std())
    if r <= 0:
        raise TooShort("tolerance r must be positive")

    def phi(order: int) -> float:
        count = n - order + 1
        c = _template_counts(x, order, r, count, exclude_self=False) / count
        return float(np.log(c).mean())

    return phi(m) - phi(m + 1)


def sampen(x: Sequence[float] | np.ndarray, m: int = 2, r: float | None = None) -> float:
    """Sample entropy: -ln(A/B) with self-matches excluded.

    Both template lengths use the same N-m start positions. Raises
    UndefinedSampEn when no matches exist at either length.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n <= m + 1:
        raise TooShort(f"sampen needs more than m+1={m + 1} points, got {n}")
    if r is None:
        r = 0.2 * float(x.std())
    if r <= 0:
        raise UndefinedSampEn("tolerance r must be positive")
    count = n - m
    b = _template_counts(x, m, r, count, exclude_self=True).sum()
    a = _template_counts(x, m + 1, r, count, exclude_self=True).sum()
    if a == 0 or b == 0:
        raise UndefinedSampEn("no matching templates; sample entropy is undefined")
    return float(-np.log(a / b))


def trend_shifts(x: Sequence[float] | np.ndarray, r: float = 0.001) -> int:
    """Count of consecutive slope changes of magnitude >= r (unit steps)."""
    x = np.asarray(x, dtype=float)
    if x.size < 3:
        raise TooShort(f"trend_shifts needs at least 3 points, got {x.size}")
    slopes = np.diff(x)
    return int((np.abs(np.diff(slopes)) >= r).sum())


def model_fidelity(pred_a: Sequence[int], pred_b: Sequence[int]) -> float:
    """Fraction of positions on which two predictors agree."""
    a = np.asarray(pred_a)
    b = np.asarray(pred_b)
    if a.size == 0:
        raise EmptyResults("no predictions supplied")
    if a.shape != b.shape:
        raise LengthMismatch(f"prediction lengths differ: {a.shape} vs {b.shape}")
    return float((a == b).mean())


def md(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean (Frobenius) distance between two equal-shape matrices."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatch(f"matrix shapes differ: {a.shape} vs {b.shape}")
    return float(np.sqrt(((a - b) ** 2).sum()))


@dataclass(frozen=True)
class ConsistencyReport:
    """Mean/std of the three fold-wise attention-matrix distances."""

    outer_distance: tuple[float, float]
    inner_fold_distance: tuple[float, float]
    inner_class_distance: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "outer_distance": {"mean": self.outer_distance[0], "std": self.outer_distance[1]},
            "inner_fold_distance": {
                "mean": self.inner_fold_distance[0],
                "std": self.inner_fold_distance[1],
            },
            "inner_class_distance": {
                "mean": self.inner_class_distance[0],
                "std": self.inner_class_distance[1],
            },
        }


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())


def consistency(
    folds: Sequence[Mapping[str, np.ndarray]],
    labels: Mapping[str, int],
    samples_per_class: int = 3,
) -> ConsistencyReport:
    """Distance statistics over per-fold aggregated attention matrices.

    Per class, up to ``samples_per_class`` sample ids (sorted, present in
    every fold) are compared: the same sample across folds (outer), samples
    of different classes within a fold (inner fold), and samples of the
    same class within a fold (inner class).
    """
    if len(folds) < 2:
        raise InsufficientSamples("need at least 2 folds")
    common = set(folds[0])
    for fold in folds[1:]:
        common &= set(fold)
    by_class: dict[int, list[str]] = {}
    for sid in sorted(common):
        if sid in labels:
            by_class.setdefault(int(labels[sid]), []).append(sid)
    if len(by_class) < 2:
        raise InsufficientSamples("need samples from at least 2 classes in every fold")
    sampled: list[str] = []
    for cls_label in sorted(by_class):
        ids = by_class[cls_label][:samples_per_class]
        if len(ids) < 2:
            raise InsufficientSamples(f"class {cls_label} has fewer than 2 shared samples")
        sampled.extend(ids)

    outer: list[float] = []
    inner_fold: list[float] = []
    inner_class: list[float] = []
    for sid in sampled:
        for f1 in range(len(folds)):
            for f2 in range(f1 + 1, len(folds)):
                outer.append(md(folds[f1][sid], folds[f2][sid]))
    for fold in folds:
        for i, sid_a in enumerate(sampled):
            for sid_b in sampled[i + 1 :]:
                distance = md(fold[sid_a], fold[sid_b])
                if labels[sid_a] == labels[sid_b]:
                    inner_class.append(distance)
                else:
                    inner_fold.append(distance)
    return ConsistencyReport(
        outer_distance=_mean_std(outer),
        inner_fold_distance=_mean_std(inner_fold),
        inner_class_distance=_mean_std(inner_class),
    )


@dataclass(frozen=True)
class ComplexityReport:
    """All complexity measures for one series; sampen may be undefined."""

    ce: float
    svden: float
    apen: float
    sampen: float | None
    trend_shifts: int
    data_reduction: float = 0.0

    def to_dict(self) -> dict:
        return {
            "ce": self.ce,
            "svden": self.svden,
            "apen": self.apen,
            "sampen": self.sampen,
            "trend_shifts": self.trend_shifts,
            "data_reduction": self.data_reduction,
        }


def complexity_report(
    x: Sequence[float] | np.ndarray, data_reduction: float = 0.0
) -> ComplexityReport:
    """Compute the whole suite; ce is taken over the z-normalized series."""
    x = np.asarray(x, dtype=float)
    std = float(x.std())
    z = (x - x.mean()) / (std if std > 0 else 1.0)
    r = 0.2 * std if std > 0 else 0.2
    try:
        sample_entropy = sampen(x, r=r)
    except UndefinedSampEn:
        sample_entropy = None
    return ComplexityReport(
        ce=ce(z),
        svden=svden(x),
        apen=apen(x, r=r),
        sampen=sample_entropy,
        trend_shifts=trend_shifts(x),
        data_reduction=data_reduction,
    )
