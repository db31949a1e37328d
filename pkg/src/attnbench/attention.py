"""Attention computation and reduction to per-sample matrices and vectors.

A per-sample stack of (layers, heads, n, n) row-stochastic matrices is
reduced along the head and layer axes, in either order, with elementwise
max or sum. A third max/sum step turns the aggregated matrix into a
per-position vector. Averages are intentionally not offered: with a fixed
count per cell they only rescale the sum.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BadParams,
    DimensionMismatch,
    NonFiniteValue,
    NonStochasticRows,
    OddDimension,
)
from .sax import SymbolizedSeries

ROW_SUM_TOL = 1e-4

_STEP_NAMES = {"m": "max", "s": "sum", "max": "max", "sum": "sum"}


@dataclass(frozen=True)
class ComboTag:
    """Aggregation recipe, e.g. "hl-ms" = heads first (max), then layers (sum).

    ``step3`` is only present for vector reductions ("hl-msm").
    """

    order: str
    step1: str
    step2: str
    step3: str | None = None

    def __post_init__(self) -> None:
        if self.order not in ("hl", "lh"):
            raise BadParams(f"order must be 'hl' or 'lh', got {self.order!r}")
        for step in (self.step1, self.step2, self.step3):
            if step is not None and step not in ("max", "sum"):
                raise BadParams(f"steps must be 'max' or 'sum', got {step!r}")

    def render(self) -> str:
        short = "".join(s[0] for s in (self.step1, self.step2, self.step3) if s)
        return f"{self.order}-{short}"

    def __str__(self) -> str:
        return self.render()

    @property
    def matrix_tag(self) -> "ComboTag":
        """The two-step part of this combo (drops step3)."""
        return ComboTag(self.order, self.step1, self.step2)

    @classmethod
    def parse(cls, text: str, expect_step3: bool | None = None) -> "ComboTag":
        parts = text.strip().lower().split("-")
        if len(parts) < 2:
            raise BadParams(f"cannot parse combo tag {text!r}")
        order, rest = parts[0], parts[1:]
        if len(rest) == 1:
            steps = list(rest[0])
        else:
            steps = rest
        try:
            names = [_STEP_NAMES[s] for s in steps]
        except KeyError:
            raise BadParams(f"cannot parse combo tag {text!r}") from None
        if len(names) == 2:
            tag = cls(order, names[0], names[1])
        elif len(names) == 3:
            tag = cls(order, names[0], names[1], names[2])
        else:
            raise BadParams(f"combo tag {text!r} must have 2 or 3 steps")
        if expect_step3 is True and tag.step3 is None:
            raise BadParams(f"combo {text!r} needs a third (vector) step")
        if expect_step3 is False and tag.step3 is not None:
            raise BadParams(f"combo {text!r} must not carry a vector step")
        return tag


@dataclass(frozen=True)
class AttentionStack:
    """Per-sample (L, H, n, n) tensor of row-stochastic attention matrices."""

    tensor: np.ndarray
    sample_id: str | None = None

    @property
    def layers(self) -> int:
        return self.tensor.shape[0]

    @property
    def heads(self) -> int:
        return self.tensor.shape[1]

    @property
    def n(self) -> int:
        return self.tensor.shape[2]

    @classmethod
    def ingest(cls, tensor: np.ndarray, sample_id: str | None = None) -> "AttentionStack":
        """Validate an externally produced tensor; reject, never renormalize."""
        tensor = np.asarray(tensor, dtype=float)
        validate_stack_tensor(tensor, where=sample_id or "stack")
        return cls(tensor=tensor, sample_id=sample_id)


def validate_stack_tensor(tensor: np.ndarray, where: str = "stack", tol: float = ROW_SUM_TOL) -> None:
    if tensor.ndim != 4 or tensor.shape[2] != tensor.shape[3]:
        raise DimensionMismatch(f"{where}: expected shape (L, H, n, n), got {tensor.shape}")
    if not np.isfinite(tensor).all():
        raise NonFiniteValue(f"{where}: non-finite attention values")
    if tensor.min() < -1e-6 or tensor.max() > 1.0 + 1e-6:
        raise NonStochasticRows(f"{where}: attention values outside [0, 1]")
    row_sums = tensor.sum(axis=3)
    worst = float(np.abs(row_sums - 1.0).max())
    if worst > tol:
        raise NonStochasticRows(f"{where}: row sums deviate from 1 by up to {worst:.3g}")


@dataclass(frozen=True)
class Lama:
    """Aggregated n x n matrix for one sample."""

    matrix: np.ndarray
    combo: ComboTag
    sample_id: str | None = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class Lava:
    """Aggregated length-n vector for one sample (combo carries step3)."""

    vector: np.ndarray
    combo: ComboTag
    sample_id: str | None = None


@dataclass(frozen=True)
class MhaWeights:
    """Per-layer, per-head query/key projections, shape (L, H, d_model, d_k)."""

    wq: np.ndarray
    wk: np.ndarray

    def __post_init__(self) -> None:
        if self.wq.shape != self.wk.shape or self.wq.ndim != 4:
            raise DimensionMismatch(
                f"wq/wk must share shape (L, H, d_model, d_k), got {self.wq.shape} and {self.wk.shape}"
            )
        if not (np.isfinite(self.wq).all() and np.isfinite(self.wk).all()):
            raise NonFiniteValue("projection weights contain non-finite values")

    @property
    def layers(self) -> int:
        return self.wq.shape[0]

    @property
    def heads(self) -> int:
        return self.wq.shape[1]

    @property
    def d_model(self) -> int:
        return self.wq.shape[2]

    @property
    def d_k(self) -> int:
        return self.wq.shape[3]

    @classmethod
    def zeros(cls, layers: int, heads: int, d_model: int, d_k: int) -> "MhaWeights":
        shape = (layers, heads, d_model, d_k)
        return cls(wq=np.zeros(shape), wk=np.zeros(shape))

    @classmethod
    def random(
        cls, layers: int, heads: int, d_model: int, d_k: int, seed: int = 0, scale: float = 1.0
    ) -> "MhaWeights":
        rng = np.random.default_rng(seed)
        shape = (layers, heads, d_model, d_k)
        return cls(
            wq=rng.normal(0.0, scale, size=shape),
            wk=rng.normal(0.0, scale, size=shape),
        )


def positional_encoding(n: int, d_model: int) -> np.ndarray:
    """Sinusoidal position matrix: sin on even columns, cos on odd ones."""
    if n < 1:
        raise BadParams(f"n must be >= 1, got {n}")
    if d_model < 2 or d_model % 2 != 0:
        raise OddDimension(f"d_model must be even and >= 2, got {d_model}")
    pos = np.arange(n, dtype=float)[:, None]
    divisor = 10000.0 ** (2.0 * np.arange(d_model // 2, dtype=float) / d_model)
    pe = np.empty((n, d_model))
    pe[:, 0::2] = np.sin(pos / divisor)
    pe[:, 1::2] = np.cos(pos / divisor)
    return pe


def attention_matrix(q: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Row-wise softmax(q @ k.T / sqrt(d_k)); every row sums to 1."""
    q = np.asarray(q, dtype=float)
    k = np.asarray(k, dtype=float)
    if q.ndim != 2 or k.ndim != 2 or q.shape != k.shape:
        raise DimensionMismatch(f"q/k must share an (n, d_k) shape, got {q.shape} and {k.shape}")
    if q.shape[1] < 1:
        raise DimensionMismatch("d_k must be >= 1")
    if not (np.isfinite(q).all() and np.isfinite(k).all()):
        raise NonFiniteValue("attention inputs contain non-finite values")
    logits = q @ k.T / np.sqrt(q.shape[1])
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    return weights / weights.sum(axis=1, keepdims=True)


def forward_attention(
    x: SymbolizedSeries | np.ndarray, weights: MhaWeights, use_pe: bool = True
) -> AttentionStack:
    """Run a forward-only encoder pass and collect every attention matrix.

    The scalar inputs are broadcast across d_model (plus the positional
    encoding when enabled); each layer feeds the head-averaged,
    attention-weighted activations to the next. There is no FFN or norm:
    downstream consumers only read the attention matrices.
    """
    values = x.values if isinstance(x, SymbolizedSeries) else np.asarray(x, dtype=float)
    sample_id = x.sample_id if isinstance(x, SymbolizedSeries) else None
    n = len(values)
    state = np.repeat(np.asarray(values, dtype=float)[:, None], weights.d_model, axis=1)
    if use_pe:
        state = state + positional_encoding(n, weights.d_model)
    stack = np.empty((weights.layers, weights.heads, n, n))
    for layer in range(weights.layers):
        head_outputs = np.empty((weights.heads, n, weights.d_model))
        for head in range(weights.heads):
            att = attention_matrix(state @ weights.wq[layer, head], state @ weights.wk[layer, head])
            stack[layer, head] = att
            head_outputs[head] = att @ state
        state = head_outputs.mean(axis=0)
    return AttentionStack(tensor=stack, sample_id=sample_id)


def _reduce(arr: np.ndarray, step: str, axis: int) -> np.ndarray:
    if step == "max":
        return arr.max(axis=axis)
    return arr.sum(axis=axis)


def aggregate_lama(stack: AttentionStack, combo: ComboTag | str) -> Lama:
    """Reduce (L, H, n, n) to n x n: heads then layers for "hl", or reversed."""
    if isinstance(combo, str):
        combo = ComboTag.parse(combo)
    tensor = stack.tensor
    if combo.order == "hl":
        partial = _reduce(tensor, combo.step1, axis=1)
    else:
        partial = _reduce(tensor, combo.step1, axis=0)
    matrix = _reduce(partial, combo.step2, axis=0)
    return Lama(matrix=matrix, combo=combo.matrix_tag, sample_id=stack.sample_id)


def aggregate_lava(lama: Lama, step3: str) -> Lava:
    """Reduce an n x n matrix to a length-n vector by row max or row sum."""
    if step3 not in ("max", "sum"):
        raise BadParams(f"step3 must be 'max' or 'sum', got {step3!r}")
    vector = _reduce(lama.matrix, step3, axis=1)
    combo = ComboTag(lama.combo.order, lama.combo.step1, lama.combo.step2, step3)
    return Lava(vector=vector, combo=combo, sample_id=lama.sample_id)


def lava_from_stack(stack: AttentionStack, combo: ComboTag | str) -> Lava:
    """Convenience: full three-step reduction of a stack."""
    if isinstance(combo, str):
        combo = ComboTag.parse(combo, expect_step3=True)
    if combo.step3 is None:
        raise BadParams("combo must carry a third (vector) step")
    return aggregate_lava(aggregate_lama(stack, combo.matrix_tag), combo.step3)
