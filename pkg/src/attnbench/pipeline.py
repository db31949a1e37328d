"""Batch pipeline: symbolize, ingest attention, abstract, build, score.

A run is a pure function of its configuration: identical config and seed
produce byte-identical report bundles. Evaluation-stage failures (for
example an empty test split) are recorded in the report instead of
aborting the run, so earlier stage outputs survive.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import jsonschema
import numpy as np

from . import bundle as bundle_io
from . import gcr as gcr_mod
from . import lasa as lasa_mod
from . import metrics as metrics_mod
from . import sax as sax_mod
from .attention import (
    AttentionStack,
    ComboTag,
    MhaWeights,
    aggregate_lama,
    aggregate_lava,
    forward_attention,
)
from .errors import BadParams, EmptyBatch, WorkbenchError
from .fixtures import gen_fixture
from .sax import RawDataset, SymbolizedSeries

SCHEMA_VERSION = 1

DEFAULT_LASA_COMBOS = [f"hl-{a}{b}{c}" for a in "ms" for b in "ms" for c in "ms"]
DEFAULT_GCR_COMBOS = [f"hl-{a}{b}" for a in "ms" for b in "ms"]
DEFAULT_LASA_THRESHOLDS = [
    {"mode": "avg", "s1": 1.0, "s2": 1.2},
    {"mode": "avg", "s1": 0.8, "s2": 1.5},
    {"mode": "max", "s1": 2.0, "s2": 3.0},
    {"mode": "max", "s1": 1.8, "s2": -1.0},
]
DEFAULT_GCR_THRESHOLD_FACTORS = [1.0, 1.3, 1.6]
DEFAULT_GCR_PENALTIES = ["counting", "entropy"]


def default_gcr_variants(
    threshold_factors: Sequence[float] = (),
    penalties: Sequence[str] = (),
) -> list[str]:
    """The base model grid, optionally extended by modifier variants."""
    base = []
    for gsa in ("sum", "ravg"):
        base.append(f"fcam-{gsa}")
        for gva in ("max", "median", "avg"):
            base.append(f"gtm.{gva}-{gsa}")
    keys = list(base)
    keys += [f"{b}-t{t:g}" for t in threshold_factors for b in base]
    keys += [f"{b}-p{p}" for p in penalties for b in base]
    return keys


@dataclass
class ExperimentConfig:
    """Everything one pipeline run depends on."""

    output_dir: str
    symbol_count: int = 3
    seed: int = 0
    train_csv: str | None = None
    test_csv: str | None = None
    val_csv: str | None = None
    fixture: dict | None = None
    bundle: str | None = None
    synthetic_attention: dict | None = None
    lasa_combos: list[str] = field(default_factory=lambda: list(DEFAULT_LASA_COMBOS))
    lasa_thresholds: list[dict] = field(
        default_factory=lambda: [dict(t) for t in DEFAULT_LASA_THRESHOLDS]
    )
    gcr_combos: list[str] = field(default_factory=lambda: list(DEFAULT_GCR_COMBOS))
    gcr_variants: list[str] = field(
        default_factory=lambda: default_gcr_variants(
            DEFAULT_GCR_THRESHOLD_FACTORS, DEFAULT_GCR_PENALTIES
        )
    )
    baseline_predictions: str | None = None
    export_artifacts: bool = True

    def __post_init__(self) -> None:
        has_files = self.train_csv is not None
        if has_files == (self.fixture is not None):
            raise BadParams("exactly one of train_csv or fixture must be set")
        if (self.bundle is not None) == (self.synthetic_attention is not None):
            raise BadParams("exactly one of bundle or synthetic_attention must be set")
        for label, path in (
            ("train_csv", self.train_csv),
            ("test_csv", self.test_csv),
            ("val_csv", self.val_csv),
            ("bundle", self.bundle),
            ("baseline_predictions", self.baseline_predictions),
        ):
            if path is not None and not Path(path).exists():
                raise BadParams(f"{label} does not exist: {path}")
        for combo in self.lasa_combos:
            ComboTag.parse(combo, expect_step3=True)
        for combo in self.gcr_combos:
            ComboTag.parse(combo, expect_step3=False)
        for key in self.gcr_variants:
            gcr_mod.GcrVariant.parse(key)
        for spec in self.lasa_thresholds:
            lasa_mod.ThresholdSpec(**spec)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        return cls(**json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "output_dir": self.output_dir,
            "symbol_count": self.symbol_count,
            "seed": self.seed,
            "train_csv": self.train_csv,
            "test_csv": self.test_csv,
            "val_csv": self.val_csv,
            "fixture": self.fixture,
            "bundle": self.bundle,
            "synthetic_attention": self.synthetic_attention,
            "lasa_combos": self.lasa_combos,
            "lasa_thresholds": self.lasa_thresholds,
            "gcr_combos": self.gcr_combos,
            "gcr_variants": self.gcr_variants,
            "baseline_predictions": self.baseline_predictions,
            "export_artifacts": self.export_artifacts,
        }


class PipelineError(WorkbenchError):
    """Wraps a module error with the name of the failing stage."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return _json_safe(value.item())
    return value


def dump_json(doc: Any, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n")


def report_schema() -> dict:
    text = resources.files("attnbench").joinpath("schemas/report.schema.json").read_text()
    return json.loads(text)


def synthesize_attention(
    symbolized: Sequence[SymbolizedSeries], spec: Mapping, n: int
) -> np.ndarray:
    """Build an (N, L, H, n, n) tensor by running the forward-only encoder."""
    layers = int(spec.get("layers", 1))
    heads = int(spec.get("heads", 1))
    d_model = int(spec.get("d_model", 8))
    d_k = int(spec.get("d_k", 4))
    mode = spec.get("mode", "random")
    use_pe = bool(spec.get("use_pe", True))
    if mode == "zero":
        weights = MhaWeights.zeros(layers, heads, d_model, d_k)
    elif mode == "random":
        weights = MhaWeights.random(layers, heads, d_model, d_k, seed=int(spec.get("seed", 0)))
    else:
        raise BadParams(f"synthetic attention mode must be 'zero' or 'random', got {mode!r}")
    tensor = np.empty((len(symbolized), layers, heads, n, n))
    for idx, series in enumerate(symbolized):
        tensor[idx] = forward_attention(series, weights, use_pe=use_pe).tensor
    return tensor


def _read_predictions(path: str | Path) -> dict[str, int]:
    predictions: dict[str, int] = {}
    with Path(path).open() as fh:
        for row in csv.reader(fh):
            if not row or row[0] == "sample_id":
                continue
            predictions[row[0]] = int(float(row[1]))
    return predictions


def _complexity_means(reports: list[metrics_mod.ComplexityReport]) -> dict | None:
    if not reports:
        return None
    result: dict[str, Any] = {}
    for key in ("ce", "svden", "apen", "trend_shifts", "data_reduction"):
        values = [getattr(r, key) for r in reports]
        result[key] = {"mean": float(np.mean(values)), "std": float(np.std(values))}
    defined = [r.sampen for r in reports if r.sampen is not None]
    result["sampen"] = (
        {"mean": float(np.mean(defined)), "std": float(np.std(defined)), "defined": len(defined)}
        if defined
        else None
    )
    return result


def _delta(abstracted: dict | None, baseline: dict | None) -> dict | None:
    if not abstracted or not baseline:
        return None
    delta = {}
    for key in ("ce", "svden", "apen", "trend_shifts"):
        delta[key] = abstracted[key]["mean"] - baseline[key]["mean"]
    if abstracted.get("sampen") and baseline.get("sampen"):
        delta["sampen"] = abstracted["sampen"]["mean"] - baseline["sampen"]["mean"]
    else:
        delta["sampen"] = None
    return delta


def _sample_complexity(series: lasa_mod.ValidationSeries, reduction: float):
    defined = series.values[series.mask]
    if defined.size < 4:
        return None
    try:
        return metrics_mod.complexity_report(defined, data_reduction=reduction)
    except WorkbenchError:
        return None


def run_pipeline(config: ExperimentConfig) -> dict:
    """Execute every stage and write the report bundle; returns the report."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    # dataset stage
    try:
        if config.fixture is not None:
            data = gen_fixture(
                config.fixture.get("kind", "trend"),
                config.fixture.get("params", {}),
                seed=int(config.fixture.get("seed", config.seed)),
            )
        else:
            data = sax_mod.load_dataset(config.train_csv, config.test_csv, config.val_csv)
    except Exception as exc:  # noqa: BLE001 - stage boundary
        raise PipelineError("dataset", exc) from exc

    # symbolize stage
    try:
        codec = sax_mod.fit_codec(data.series[data.rows("train")], config.symbol_count)
        symbolized = sax_mod.symbolize_dataset(codec, data)
        (out / "codec.json").write_text(codec.to_json() + "\n")
    except Exception as exc:
        raise PipelineError("symbolize", exc) from exc

    # attention stage
    try:
        if config.bundle is not None:
            loaded = bundle_io.read_bundle(config.bundle)
            if loaded.n != data.n or loaded.sample_count != len(data.series):
                raise BadParams("bundle dimensions disagree with the dataset")
            tensor = loaded.tensor
            attention_source = "bundle"
        else:
            tensor = synthesize_attention(symbolized, config.synthetic_attention, data.n)
            attention_source = "synthetic"
        layers, heads = tensor.shape[1], tensor.shape[2]
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError("attention", exc) from exc

    baseline_predictions = None
    if config.baseline_predictions is not None:
        baseline_predictions = _read_predictions(config.baseline_predictions)

    train_rows = data.rows("train")
    test_rows = data.rows("test")

    report: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "config": config.to_dict(),
        "dataset": {
            "n": data.n,
            "classes": data.classes,
            "counts": {split: int((data.split == split).sum()) for split in sax_mod.SPLITS},
        },
        "attention": {"L": int(layers), "H": int(heads), "source": attention_source},
        "baseline": (
            {"predictions": config.baseline_predictions} if baseline_predictions else None
        ),
        "lasa": [],
        "gcr": [],
    }

    # aggregate stage: cache matrices per two-step combo
    try:
        matrix_combos = sorted(
            {ComboTag.parse(c).matrix_tag.render() for c in config.lasa_combos}
            | {ComboTag.parse(c).render() for c in config.gcr_combos}
        )
        lamas = {
            combo: [aggregate_lama(_stack(tensor, i, sid), combo) for i, sid in _rows(data)]
            for combo in matrix_combos
        }
    except Exception as exc:
        raise PipelineError("aggregate", exc) from exc

    # lasa stage
    try:
        for combo_text in config.lasa_combos:
            combo = ComboTag.parse(combo_text, expect_step3=True)
            lavas = [
                aggregate_lava(lamas[combo.matrix_tag.render()][i], combo.step3)
                for i in range(len(data.series))
            ]
            for threshold in config.lasa_thresholds:
                spec = lasa_mod.ThresholdSpec(**threshold)
                entry = {
                    "combo": combo.render(),
                    "threshold": dict(threshold),
                    "splits": {},
                    "exports": {},
                }
                abstractions: list[lasa_mod.Abstraction] = []
                validations: list[lasa_mod.ValidationSeries] = []
                for idx, series in enumerate(symbolized):
                    t1, t2 = lasa_mod.resolve_thresholds(lavas[idx], spec)
                    abstraction = lasa_mod.abstract(series, lavas[idx], t1, t2)
                    abstractions.append(abstraction)
                    validations.append(lasa_mod.interpolate(abstraction))
                for split in sax_mod.SPLITS:
                    rows = data.rows(split)
                    if rows.size == 0:
                        continue
                    split_abs = [abstractions[i] for i in rows]
                    mean, std = lasa_mod.reduction_stats(split_abs)
                    complexity = [
                        c
                        for i in rows
                        if (c := _sample_complexity(validations[i], abstractions[i].reduction))
                        is not None
                    ]
                    original = [
                        c
                        for i in rows
                        if (
                            c := _sample_complexity(
                                lasa_mod.ValidationSeries(
                                    values=symbolized[i].values,
                                    mask=np.ones(data.n, dtype=bool),
                                ),
                                0.0,
                            )
                        )
                        is not None
                    ]
                    abstracted_stats = _complexity_means(complexity)
                    original_stats = _complexity_means(original)
                    entry["splits"][split] = {
                        "count": int(rows.size),
                        "reduction": {"mean": mean, "std": std},
                        "complexity": abstracted_stats,
                        "complexity_delta": _delta(abstracted_stats, original_stats),
                    }
                if config.export_artifacts:
                    tag = f"{combo.render()}_{spec.mode}_{spec.s1:g}_{spec.s2:g}"
                    abs_path = out / "exports" / "abstractions" / f"{tag}.jsonl"
                    abs_path.parent.mkdir(parents=True, exist_ok=True)
                    lasa_mod.write_abstractions_jsonl(abs_path, abstractions)
                    val_path = out / "exports" / "validation" / f"{tag}.csv"
                    val_path.parent.mkdir(parents=True, exist_ok=True)
                    lasa_mod.write_validation_csv(
                        val_path,
                        validations,
                        sample_ids=data.sample_ids,
                        labels=[int(v) for v in data.labels],
                    )
                    entry["exports"] = {
                        "abstractions": str(abs_path.relative_to(out)),
                        "validation": str(val_path.relative_to(out)),
                    }
                report["lasa"].append(entry)
    except Exception as exc:
        raise PipelineError("lasa", exc) from exc

    # gcr stage: build on train, classify the test split
    for combo_text in config.gcr_combos:
        combo = ComboTag.parse(combo_text)
        for variant_key in config.gcr_variants:
            variant = gcr_mod.GcrVariant.parse(variant_key)
            entry: dict[str, Any] = {
                "combo": combo.render(),
                "variant": variant.key(),
                "error": None,
                "accuracy": None,
                "accuracy_delta": None,
                "fidelity": None,
                "certainty_curve": None,
                "exports": {},
            }
            try:
                train_samples = [
                    (
                        symbolized[i],
                        lamas[combo.render()][i],
                        int(data.labels[i]),
                    )
                    for i in train_rows
                ]
                model = gcr_mod.build(
                    train_samples, variant, config.symbol_count, classes=data.classes
                )
            except Exception as exc:
                entry["error"] = {"stage": "gcr-build", "type": type(exc).__name__, "detail": str(exc)}
                report["gcr"].append(entry)
                continue

            if config.export_artifacts:
                store_dir = out / "exports" / "gcr" / combo.render() / variant.key()
                gcr_mod.save_store(model, store_dir)
                heatmaps = {}
                for cls_label in model.classes:
                    hm_path = store_dir / f"heatmap_class_{cls_label}.json"
                    hm_path.write_bytes(gcr_mod.heatmap_bytes(model, cls_label))
                    heatmaps[str(cls_label)] = str(hm_path.relative_to(out))
                entry["exports"] = {
                    "store": str(store_dir.relative_to(out)),
                    "heatmaps": heatmaps,
                }

            try:
                if test_rows.size == 0:
                    raise EmptyBatch("test split is empty")
                results = [gcr_mod.classify(model, symbolized[i]) for i in test_rows]
                gold = [int(data.labels[i]) for i in test_rows]
                predicted = [r.predicted for r in results]
                entry["accuracy"] = metrics_mod.model_fidelity(predicted, gold)
                entry["certainty_curve"] = gcr_mod.certainty_curve(results, gold)
                if baseline_predictions is not None:
                    base = [
                        baseline_predictions.get(data.sample_ids[i]) for i in test_rows
                    ]
                    if all(b is not None for b in base):
                        entry["fidelity"] = metrics_mod.model_fidelity(predicted, base)
                        entry["accuracy_delta"] = entry["accuracy"] - metrics_mod.model_fidelity(
                            base, gold
                        )
            except WorkbenchError as exc:
                entry["error"] = {
                    "stage": "classify",
                    "type": type(exc).__name__,
                    "detail": str(exc),
                }
            report["gcr"].append(entry)

    jsonschema.validate(_json_safe(report), report_schema())
    dump_json(report, out / "report.json")
    return report


def _rows(data: RawDataset):
    return list(enumerate(data.sample_ids))


def _stack(tensor: np.ndarray, index: int, sample_id: str) -> AttentionStack:
    return AttentionStack(tensor=tensor[index], sample_id=sample_id)
