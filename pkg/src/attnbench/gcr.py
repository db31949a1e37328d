"""Per-class global coherence stores built from aggregated attention.

Every train sample routes its aggregated matrix entries into a per-class
store keyed by (from symbol, to symbol, from position, to position). The
full store ("fcam") keeps that four-way structure; summing out the from
symbol gives the column-reduced store ("ccam"); reducing the from position
with max/median/avg gives the per-symbol trend table ("gtm"). Classifying
an input sums its lookups and normalizes by the class's maximally
reachable score, taking the per-position maxima independently.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadParams,
    EmptyResults,
    EmptyTrain,
    EntropyDegenerate,
    LengthMismatch,
    UnfinalizedModel,
    UnknownClass,
    VocabularyMismatch,
)
from .attention import Lama
from .sax import SymbolizedSeries, mapped_values

SHAPES = ("fcam", "ccam", "gtm")
GVA_MODES = ("max", "median", "avg")
GSA_MODES = ("sum", "ravg")
PENALTY_MODES = ("none", "counting", "entropy")
SCORE_EPS = 1e-12

STORE_MANIFEST = "manifest.json"
STORE_PAYLOAD = "tensors.bin"


@dataclass(frozen=True)
class GcrVariant:
    """One point of the model grid: shape, aggregation and modifier."""

    shape: str = "fcam"
    gva: str | None = None
    gsa: str = "sum"
    penalty: str = "none"
    alpha: float = 1.0
    entropy_eps: float = 1e-12
    threshold_factor: float | None = None

    def __post_init__(self) -> None:
        if self.shape not in SHAPES:
            raise BadParams(f"shape must be one of {SHAPES}, got {self.shape!r}")
        if self.shape == "gtm":
            if self.gva not in GVA_MODES:
                raise BadParams(f"gtm needs gva in {GVA_MODES}, got {self.gva!r}")
        elif self.gva is not None:
            raise BadParams(f"gva only applies to gtm, got {self.gva!r} for {self.shape}")
        if self.gsa not in GSA_MODES:
            raise BadParams(f"gsa must be one of {GSA_MODES}, got {self.gsa!r}")
        if self.penalty not in PENALTY_MODES:
            raise BadParams(f"penalty must be one of {PENALTY_MODES}, got {self.penalty!r}")
        if self.threshold_factor is not None:
            if self.threshold_factor < 0:
                raise BadParams("threshold_factor must be >= 0")
            if self.penalty != "none":
                raise BadParams("penalty and threshold must not be combined")

    def key(self) -> str:
        shape = self.shape if self.gva is None else f"{self.shape}.{self.gva}"
        parts = [shape, self.gsa]
        if self.threshold_factor is not None:
            parts.append(f"t{self.threshold_factor:g}")
        if self.penalty != "none":
            suffix = "" if self.alpha == 1.0 else f"@{self.alpha:g}"
            parts.append(f"p{self.penalty}{suffix}")
        return "-".join(parts)

    def __str__(self) -> str:
        return self.key()

    @classmethod
    def parse(cls, key: str) -> "GcrVariant":
        parts = key.strip().lower().split("-")
        if len(parts) < 2:
            raise BadParams(f"cannot parse variant key {key!r}")
        shape, _, gva = parts[0].partition(".")
        kwargs: dict = {"shape": shape, "gva": gva or None, "gsa": parts[1]}
        try:
            for extra in parts[2:]:
                if extra.startswith("t"):
                    kwargs["threshold_factor"] = float(extra[1:])
                elif extra.startswith("p"):
                    mode, _, alpha = extra[1:].partition("@")
                    kwargs["penalty"] = mode
                    if alpha:
                        kwargs["alpha"] = float(alpha)
                else:
                    raise BadParams(f"cannot parse variant modifier {extra!r}")
        except ValueError as exc:
            raise BadParams(f"cannot parse variant key {key!r}: {exc}") from None
        return cls(**kwargs)


@dataclass(frozen=True)
class MembershipResult:
    """Per-class membership scores with the winning class and certainty."""

    scores: dict[int, float]
    predicted: int
    certainty: float
    margin: float
    sample_id: str | None = None


class GcrAccumulator:
    """Mutable build state; class counts must be known before the pass."""

    def __init__(
        self,
        variant: GcrVariant,
        symbol_count: int,
        n: int,
        classes: Sequence[int],
        class_counts: dict[int, int],
        total_count: int,
        threshold: float | None = None,
    ):
        self.variant = variant
        self.symbol_count = symbol_count
        self.n = n
        self.classes = [int(c) for c in classes]
        self.class_index = {c: i for i, c in enumerate(self.classes)}
        self.class_counts = dict(class_counts)
        self.total_count = total_count
        self.threshold = threshold
        shape = (len(self.classes), symbol_count, symbol_count, n, n)
        self.acc = np.zeros(shape)
        self.cnt = np.zeros(shape) if variant.gsa == "ravg" else None
        self._igrid, self._jgrid = np.indices((n, n))

    def _routed(self, matrix: np.ndarray, symbols: np.ndarray):
        u = np.broadcast_to(symbols[:, None], (self.n, self.n))
        v = np.broadcast_to(symbols[None, :], (self.n, self.n))
        if self.threshold is not None:
            keep = matrix >= self.threshold
            return u[keep], v[keep], self._igrid[keep], self._jgrid[keep], matrix[keep]
        return u.ravel(), v.ravel(), self._igrid.ravel(), self._jgrid.ravel(), matrix.ravel()

    def update(self, matrix: np.ndarray, symbols: np.ndarray, label: int) -> None:
        if label not in self.class_index:
            raise UnknownClass(f"label {label} not among model classes {self.classes}")
        if self.variant.penalty == "none":
            self.sum_update(matrix, symbols, label)
        else:
            self.penalty_update(matrix, symbols, label)

    def sum_update(self, matrix: np.ndarray, symbols: np.ndarray, label: int) -> None:
        ci = self.class_index[label]
        u, v, i, j, a = self._routed(matrix, symbols)
        self.acc[ci, u, v, i, j] += a
        if self.cnt is not None:
            self.cnt[ci, u, v, i, j] += 1.0

    def penalty_update(self, matrix: np.ndarray, symbols: np.ndarray, label: int) -> None:
        """Reward the sample's class at the routed cells, penalize the rest.

        counting: sub = a / class_count; reward = alpha * (|C|+1) * sub.
        entropy:  weight = max(-e ln e, eps) with e the class frequency;
                  reward = alpha * (|C|+1) * a / weight, sub = a * weight.
        """
        ci = self.class_index[label]
        u, v, i, j, a = self._routed(matrix, symbols)
        n_classes = len(self.classes)
        if self.variant.penalty == "counting":
            sub = a / self.class_counts[label]
            reward = self.variant.alpha * (n_classes + 1) * sub
        else:
            e = self.class_counts[label] / self.total_count
            weight = max(-e * math.log(e), self.variant.entropy_eps)
            if weight == 0.0:
                raise EntropyDegenerate(
                    "entropy weight is 0 for a pure class and entropy_eps is 0"
                )
            sub = a * weight
            reward = self.variant.alpha * (n_classes + 1) * a / weight
        self.acc[ci, u, v, i, j] += reward
        if self.cnt is not None:
            self.cnt[ci, u, v, i, j] += 1.0
        for di in range(n_classes):
            if di == ci:
                continue
            self.acc[di, u, v, i, j] -= sub
            if self.cnt is not None:
                self.cnt[di, u, v, i, j] += 1.0

    def finalize(self) -> "GcrModel":
        fcam = self.acc
        if self.cnt is not None:
            fcam = np.where(self.cnt > 0, self.acc / np.maximum(self.cnt, 1.0), 0.0)
        return GcrModel._from_fcam(
            fcam=fcam,
            variant=self.variant,
            symbol_count=self.symbol_count,
            n=self.n,
            classes=self.classes,
        )


@dataclass
class GcrModel:
    """Finalized per-class store with precomputed maximally reachable scores."""

    variant: GcrVariant
    symbol_count: int
    n: int
    classes: list[int]
    max_scores: np.ndarray
    fcam: np.ndarray | None = None
    ccam: np.ndarray | None = None
    gtm: np.ndarray | None = None
    score_table: np.ndarray | None = None
    finalized: bool = True
    _igrid: np.ndarray = field(init=False, repr=False)
    _jgrid: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._igrid, self._jgrid = np.indices((self.n, self.n))

    @classmethod
    def _from_fcam(
        cls,
        fcam: np.ndarray,
        variant: GcrVariant,
        symbol_count: int,
        n: int,
        classes: list[int],
    ) -> "GcrModel":
        ccam = fcam.sum(axis=1)
        if variant.shape == "fcam":
            max_scores = np.asarray([_seqsum(per_class.max(axis=(0, 1))) for per_class in fcam])
            return cls(variant, symbol_count, n, classes, max_scores, fcam=fcam)
        if variant.shape == "ccam":
            # Scoring goes through the average trend table: the double sum
            # over positions and its per-position maxima are both 1/n of the
            # ccam quantities, so the membership ratio is identical.
            table = ccam.mean(axis=2)
            max_scores = np.asarray([_seqsum(per_class.max(axis=0)) for per_class in table])
            return cls(
                variant, symbol_count, n, classes, max_scores, ccam=ccam, score_table=table
            )
        gtm = _reduce_gva(ccam, variant.gva)
        max_scores = np.asarray([_seqsum(per_class.max(axis=0)) for per_class in gtm])
        return cls(variant, symbol_count, n, classes, max_scores, gtm=gtm, score_table=gtm)

    def classify(self, x: SymbolizedSeries | np.ndarray) -> MembershipResult:
        return classify(self, x)


def _reduce_gva(ccam: np.ndarray, gva: str) -> np.ndarray:
    if gva == "max":
        return ccam.max(axis=2)
    if gva == "median":
        return np.median(ccam, axis=2)
    return ccam.mean(axis=2)


def _seqsum(values: np.ndarray) -> float:
    """Sum in strict element order (cumsum is sequential, unlike np.sum)."""
    flat = np.ravel(values)
    return float(np.cumsum(flat)[-1]) if flat.size else 0.0


def _count_classes(labels: Iterable[int], classes: Sequence[int]) -> dict[int, int]:
    counts = {int(c): 0 for c in classes}
    for label in labels:
        if int(label) not in counts:
            raise UnknownClass(f"label {label} not among classes {list(classes)}")
        counts[int(label)] += 1
    return counts


def build(
    samples: Sequence[tuple[SymbolizedSeries, Lama | np.ndarray, int]],
    variant: GcrVariant,
    symbol_count: int,
    classes: Sequence[int] | None = None,
) -> GcrModel:
    """Two-pass build: count classes (and the threshold base), then route."""
    if not samples:
        raise EmptyTrain("no train samples supplied")
    matrices: list[np.ndarray] = []
    symbol_rows: list[np.ndarray] = []
    labels: list[int] = []
    n = None
    for series, lama, label in samples:
        matrix = np.asarray(lama.matrix if isinstance(lama, Lama) else lama, dtype=float)
        if n is None:
            n = len(series.symbols)
        if len(series.symbols) != n or matrix.shape != (n, n):
            raise LengthMismatch("all samples must share the same length n")
        if series.symbols.min() < 0 or series.symbols.max() >= symbol_count:
            raise VocabularyMismatch("sample symbols exceed the vocabulary")
        matrices.append(matrix)
        symbol_rows.append(np.asarray(series.symbols, dtype=np.int64))
        labels.append(int(label))
    if classes is None:
        classes = sorted(set(labels))
    class_counts = _count_classes(labels, classes)
    if variant.penalty != "none" and any(c == 0 for c in class_counts.values()):
        raise EmptyTrain("penalty variants need at least one sample per class")

    threshold = None
    if variant.threshold_factor is not None:
        global_mean = float(np.mean([m.mean() for m in matrices]))
        threshold = variant.threshold_factor * global_mean

    accumulator = GcrAccumulator(
        variant=variant,
        symbol_count=symbol_count,
        n=n,
        classes=classes,
        class_counts=class_counts,
        total_count=len(labels),
        threshold=threshold,
    )
    for matrix, symbols, label in zip(matrices, symbol_rows, labels):
        accumulator.update(matrix, symbols, label)
    return accumulator.finalize()


def classify(model: GcrModel, x: SymbolizedSeries | np.ndarray) -> MembershipResult:
    """Sum the input's lookups per class and normalize by the class maximum."""
    if not model.finalized:
        raise UnfinalizedModel("model must be finalized before classification")
    symbols = np.asarray(x.symbols if isinstance(x, SymbolizedSeries) else x, dtype=np.int64)
    sample_id = x.sample_id if isinstance(x, SymbolizedSeries) else None
    if len(symbols) != model.n:
        raise LengthMismatch(f"input length {len(symbols)} != model length {model.n}")
    if symbols.min() < 0 or symbols.max() >= model.symbol_count:
        raise VocabularyMismatch("input symbols exceed the model vocabulary")

    scores: dict[int, float] = {}
    for ci, cls_label in enumerate(model.classes):
        if model.variant.shape == "fcam":
            looked_up = model.fcam[ci][
                symbols[:, None], symbols[None, :], model._igrid, model._jgrid
            ]
            value = _seqsum(looked_up)
        else:
            value = _seqsum(model.score_table[ci][symbols, np.arange(model.n)])
        max_score = float(model.max_scores[ci])
        scores[cls_label] = value / max_score if max_score > SCORE_EPS else float("-inf")

    predicted = model.classes[0]
    best = scores[predicted]
    for cls_label in model.classes[1:]:
        if scores[cls_label] > best:
            best = scores[cls_label]
            predicted = cls_label
    ordered = sorted(scores.values(), reverse=True)
    margin = ordered[0] - ordered[1] if len(ordered) > 1 else float("inf")
    return MembershipResult(
        scores=scores, predicted=predicted, certainty=best, margin=margin, sample_id=sample_id
    )


def classify_batch(
    model: GcrModel, xs: Sequence[SymbolizedSeries | np.ndarray]
) -> list[MembershipResult]:
    return [classify(model, x) for x in xs]


def _keep_count(total: int, fraction: float) -> int:
    # ceil with a tiny nudge so 0.2 * 10 style products stay exact
    return min(total, max(1, math.ceil(fraction * total - 1e-9)))


def certainty_filter(
    results: Sequence[MembershipResult], gold: Sequence[int], keep_fraction: float
) -> float:
    """Accuracy among the ceil(p*N) most certain predictions (stable order)."""
    if not results:
        raise EmptyResults("no classification results supplied")
    if not (0 < keep_fraction <= 1):
        raise BadParams(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    if len(gold) != len(results):
        raise LengthMismatch("gold labels must align with results")
    order = sorted(range(len(results)), key=lambda i: -results[i].certainty)
    kept = order[: _keep_count(len(results), keep_fraction)]
    hits = sum(1 for i in kept if results[i].predicted == int(gold[i]))
    return hits / len(kept)


def certainty_curve(
    results: Sequence[MembershipResult],
    gold: Sequence[int],
    steps: Sequence[int] = (100, 80, 50, 20, 10),
) -> dict[str, float]:
    return {str(step): certainty_filter(results, gold, step / 100.0) for step in steps}


def _primary_tensor(model: GcrModel) -> tuple[str, np.ndarray]:
    if model.variant.shape == "fcam":
        return "fcam", model.fcam
    if model.variant.shape == "ccam":
        return "ccam", model.ccam
    return "gtm", model.gtm


def save_store(model: GcrModel, directory: str | Path) -> Path:
    """Write manifest JSON plus the primary tensor as binary32 LE."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    kind, tensor = _primary_tensor(model)
    manifest = {
        "format_version": 1,
        "variant": model.variant.key(),
        "shape": model.variant.shape,
        "gva": model.variant.gva,
        "gsa": model.variant.gsa,
        "penalty": model.variant.penalty,
        "alpha": model.variant.alpha,
        "entropy_eps": model.variant.entropy_eps,
        "threshold_factor": model.variant.threshold_factor,
        "n": model.n,
        "symbol_count": model.symbol_count,
        "classes": model.classes,
        "vocabulary": [float(v) for v in mapped_values(model.symbol_count)],
        "max_scores": {str(c): float(s) for c, s in zip(model.classes, model.max_scores)},
        "tensor_kind": kind,
        "tensor_shape": list(tensor.shape),
    }
    (directory / STORE_MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    (directory / STORE_PAYLOAD).write_bytes(tensor.astype("<f4").tobytes(order="C"))
    return directory


def load_store(directory: str | Path) -> GcrModel:
    """Rebuild a model from a store; derived tables are recomputed."""
    directory = Path(directory)
    manifest = json.loads((directory / STORE_MANIFEST).read_text())
    variant = GcrVariant.parse(manifest["variant"])
    shape = tuple(manifest["tensor_shape"])
    values = np.frombuffer((directory / STORE_PAYLOAD).read_bytes(), dtype="<f4")
    if values.size != int(np.prod(shape)):
        raise BadParams("store payload size disagrees with manifest tensor_shape")
    tensor = values.astype(float).reshape(shape)
    classes = [int(c) for c in manifest["classes"]]
    kind = manifest["tensor_kind"]
    n = int(manifest["n"])
    symbol_count = int(manifest["symbol_count"])
    if kind == "fcam":
        max_scores = np.asarray([_seqsum(per_class.max(axis=(0, 1))) for per_class in tensor])
        return GcrModel(variant, symbol_count, n, classes, max_scores, fcam=tensor)
    if kind == "ccam":
        table = tensor.mean(axis=2)
        max_scores = np.asarray([_seqsum(per_class.max(axis=0)) for per_class in table])
        return GcrModel(
            variant, symbol_count, n, classes, max_scores, ccam=tensor, score_table=table
        )
    max_scores = np.asarray([_seqsum(per_class.max(axis=0)) for per_class in tensor])
    return GcrModel(variant, symbol_count, n, classes, max_scores, gtm=tensor, score_table=tensor)


def _symbol_labels(symbol_count: int) -> list[str]:
    return [f"{v:g}" for v in mapped_values(symbol_count)]


def heatmap_document(model: GcrModel, cls_label: int) -> dict:
    """Per-class heatmap payload with explicit axis labels.

    Positions are in natural index order (row/col 0 is the sequence start);
    renderers that want the origin bottom-left flip the row axis.
    """
    if cls_label not in model.classes:
        raise UnknownClass(f"class {cls_label} not in model classes {model.classes}")
    ci = model.classes.index(cls_label)
    labels = _symbol_labels(model.symbol_count)
    doc = {
        "format_version": 1,
        "variant": model.variant.key(),
        "class": cls_label,
        "n": model.n,
        "symbols": labels,
    }
    if model.variant.shape == "fcam":
        doc["kind"] = "fcam"
        doc["axes"] = {
            "tile_rows": "from_symbol",
            "tile_cols": "to_symbol",
            "rows": "from_position",
            "cols": "to_position",
        }
        doc["tiles"] = model.fcam[ci].tolist()
    elif model.variant.shape == "ccam":
        doc["kind"] = "ccam"
        doc["axes"] = {
            "tiles": "to_symbol",
            "rows": "from_position",
            "cols": "to_position",
        }
        doc["tiles"] = model.ccam[ci].tolist()
    else:
        doc["kind"] = "gtm"
        doc["axes"] = {"rows": "symbol", "cols": "position"}
        doc["matrix"] = model.gtm[ci].tolist()
    return doc


def heatmap_bytes(model: GcrModel, cls_label: int) -> bytes:
    """Canonical heatmap JSON bytes, shared by file export and HTTP."""
    return (json.dumps(heatmap_document(model, cls_label), sort_keys=True) + "\n").encode()
