"""Workbench for attention-based abstraction and coherence analysis."""

from .attention import (
    AttentionStack,
    ComboTag,
    Lama,
    Lava,
    MhaWeights,
    aggregate_lama,
    aggregate_lava,
    attention_matrix,
    forward_attention,
    lava_from_stack,
    positional_encoding,
)
from .gcr import (
    GcrModel,
    GcrVariant,
    MembershipResult,
    build,
    certainty_curve,
    certainty_filter,
    classify,
)
from .lasa import Abstraction, ThresholdSpec, ValidationSeries, abstract, interpolate, resolve_thresholds
from .sax import RawDataset, SaxCodec, SymbolizedSeries, fit_codec, load_dataset, transform

__version__ = "0.1.0"

__all__ = [
    "Abstraction",
    "AttentionStack",
    "ComboTag",
    "GcrModel",
    "GcrVariant",
    "Lama",
    "Lava",
    "MembershipResult",
    "MhaWeights",
    "RawDataset",
    "SaxCodec",
    "SymbolizedSeries",
    "ThresholdSpec",
    "ValidationSeries",
    "abstract",
    "aggregate_lama",
    "aggregate_lava",
    "attention_matrix",
    "build",
    "certainty_curve",
    "certainty_filter",
    "classify",
    "fit_codec",
    "forward_attention",
    "interpolate",
    "lava_from_stack",
    "load_dataset",
    "positional_encoding",
    "resolve_thresholds",
    "transform",
]
