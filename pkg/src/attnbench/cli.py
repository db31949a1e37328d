"""Command-line entry points for the workbench."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import bundle as bundle_io
from . import gcr as gcr_mod
from . import lasa as lasa_mod
from . import metrics as metrics_mod
from . import sax as sax_mod
from .attention import AttentionStack, ComboTag, aggregate_lama, aggregate_lava
from .errors import WorkbenchError
from .fixtures import FIXTURE_KINDS, gen_fixture
from .pipeline import ExperimentConfig, dump_json, run_pipeline, synthesize_attention


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@click.group()
def main() -> None:
    """Attention abstraction and coherence workbench."""


@main.group()
def sax() -> None:
    """Fit and apply the symbol codec."""


@sax.command("fit")
@click.option("--train", "train_path", required=True, type=click.Path(exists=True))
@click.option("--symbols", "symbol_count", default=3, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def sax_fit(train_path: str, symbol_count: int, out_path: str) -> None:
    try:
        series, _ = sax_mod.read_series_file(train_path)
        codec = sax_mod.fit_codec(series, symbol_count)
    except WorkbenchError as exc:
        _fail(str(exc))
    codec.save(out_path)
    click.echo(f"codec written to {out_path}")


@sax.command("transform")
@click.option("--codec", "codec_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def sax_transform(codec_path: str, data_path: str, out_path: str) -> None:
    try:
        codec = sax_mod.SaxCodec.load(codec_path)
        series, labels = sax_mod.read_series_file(data_path)
        rows = [sax_mod.transform(codec, s) for s in series]
    except WorkbenchError as exc:
        _fail(str(exc))
    values = np.asarray([r.values for r in rows])
    sax_mod.write_series_file(out_path, values, labels)
    click.echo(f"symbolized values written to {out_path}")


@main.group()
def attn() -> None:
    """Generate and validate attention bundles."""


@attn.command("gen")
@click.option("--train", "train_path", required=True, type=click.Path(exists=True))
@click.option("--test", "test_path", type=click.Path(exists=True))
@click.option("--symbols", "symbol_count", default=3, show_default=True)
@click.option("--layers", default=1, show_default=True)
@click.option("--heads", default=1, show_default=True)
@click.option("--d-model", default=8, show_default=True)
@click.option("--d-k", default=4, show_default=True)
@click.option("--mode", type=click.Choice(["zero", "random"]), default="random", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--use-pe/--no-pe", default=True, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def attn_gen(
    train_path: str,
    test_path: str | None,
    symbol_count: int,
    layers: int,
    heads: int,
    d_model: int,
    d_k: int,
    mode: str,
    seed: int,
    use_pe: bool,
    out_dir: str,
) -> None:
    """Symbolize a dataset and run the forward-only encoder over it."""
    try:
        data = sax_mod.load_dataset(train_path, test_path)
        codec = sax_mod.fit_codec(data.series[data.rows("train")], symbol_count)
        symbolized = sax_mod.symbolize_dataset(codec, data)
        spec = {
            "layers": layers,
            "heads": heads,
            "d_model": d_model,
            "d_k": d_k,
            "mode": mode,
            "seed": seed,
            "use_pe": use_pe,
        }
        tensor = synthesize_attention(symbolized, spec, data.n)
        bundle_io.write_bundle(
            out_dir, tensor, data.sample_ids, labels=[int(v) for v in data.labels]
        )
    except WorkbenchError as exc:
        _fail(str(exc))
    click.echo(f"bundle written to {out_dir}")


@attn.command("validate")
@click.argument("bundle_dir", type=click.Path(exists=True))
def attn_validate(bundle_dir: str) -> None:
    try:
        summary = bundle_io.validate_bundle(bundle_dir)
    except WorkbenchError as exc:
        _fail(str(exc))
    click.echo(json.dumps(summary, sort_keys=True))


@main.command("lama")
@click.option("--bundle", "bundle_dir", required=True, type=click.Path(exists=True))
@click.option("--combo", required=True)
@click.option("--sample-id", required=True)
@click.option("--out", "out_path", type=click.Path())
def lama_cmd(bundle_dir: str, combo: str, sample_id: str, out_path: str | None) -> None:
    """Aggregate one sample's stack into a matrix (written or printed as JSON)."""
    try:
        tag = ComboTag.parse(combo, expect_step3=False)
        loaded = bundle_io.read_bundle(bundle_dir)
        lama = aggregate_lama(loaded.stack(sample_id), tag)
    except (WorkbenchError, KeyError) as exc:
        _fail(str(exc))
    doc = {"sample_id": sample_id, "combo": tag.render(), "matrix": lama.matrix.tolist()}
    if out_path:
        dump_json(doc, Path(out_path))
        click.echo(f"lama written to {out_path}")
    else:
        click.echo(json.dumps(doc, sort_keys=True))


@main.command("lasa")
@click.option("--bundle", "bundle_dir", required=True, type=click.Path(exists=True))
@click.option("--train", "train_path", required=True, type=click.Path(exists=True))
@click.option("--test", "test_path", type=click.Path(exists=True))
@click.option("--symbols", "symbol_count", default=3, show_default=True)
@click.option("--combo", required=True, help="three-step combo, e.g. hl-msm")
@click.option("--mode", type=click.Choice(["avg", "max"]), default="avg", show_default=True)
@click.option("--s1", default=1.0, show_default=True)
@click.option("--s2", default=1.2, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def lasa_cmd(
    bundle_dir: str,
    train_path: str,
    test_path: str | None,
    symbol_count: int,
    combo: str,
    mode: str,
    s1: float,
    s2: float,
    out_dir: str,
) -> None:
    """Abstract every sample and write the JSONL + validation CSV exports."""
    try:
        tag = ComboTag.parse(combo, expect_step3=True)
        spec = lasa_mod.ThresholdSpec(mode=mode, s1=s1, s2=s2)
        data = sax_mod.load_dataset(train_path, test_path)
        codec = sax_mod.fit_codec(data.series[data.rows("train")], symbol_count)
        symbolized = sax_mod.symbolize_dataset(codec, data)
        loaded = bundle_io.read_bundle(bundle_dir)
        if loaded.n != data.n or loaded.sample_count != len(data.series):
            _fail("bundle dimensions disagree with the dataset")
        abstractions = []
        validations = []
        for i, series in enumerate(symbolized):
            stack = AttentionStack(loaded.tensor[i], data.sample_ids[i])
            lava = aggregate_lava(aggregate_lama(stack, tag.matrix_tag), tag.step3)
            t1, t2 = lasa_mod.resolve_thresholds(lava, spec)
            abstraction = lasa_mod.abstract(series, lava, t1, t2)
            abstractions.append(abstraction)
            validations.append(lasa_mod.interpolate(abstraction))
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lasa_mod.write_abstractions_jsonl(out / "abstractions.jsonl", abstractions)
        lasa_mod.write_validation_csv(
            out / "validation.csv",
            validations,
            sample_ids=data.sample_ids,
            labels=[int(v) for v in data.labels],
        )
        mean, std = lasa_mod.reduction_stats(abstractions)
    except WorkbenchError as exc:
        _fail(str(exc))
    click.echo(f"reduction mean={mean:.4f} std={std:.4f}; exports in {out_dir}")


@main.group()
def gcr() -> None:
    """Build, apply and export global coherence stores."""


@gcr.command("build")
@click.option("--bundle", "bundle_dir", required=True, type=click.Path(exists=True))
@click.option("--train", "train_path", required=True, type=click.Path(exists=True))
@click.option("--symbols", "symbol_count", default=3, show_default=True)
@click.option("--combo", required=True, help="two-step combo, e.g. hl-ms")
@click.option("--variant", required=True, help="variant key, e.g. fcam-sum or gtm.avg-ravg")
@click.option("--out", "out_dir", required=True, type=click.Path())
def gcr_build(
    bundle_dir: str,
    train_path: str,
    symbol_count: int,
    combo: str,
    variant: str,
    out_dir: str,
) -> None:
    try:
        tag = ComboTag.parse(combo, expect_step3=False)
        parsed = gcr_mod.GcrVariant.parse(variant)
        data = sax_mod.load_dataset(train_path)
        codec = sax_mod.fit_codec(data.series[data.rows("train")], symbol_count)
        symbolized = sax_mod.symbolize_dataset(codec, data)
        loaded = bundle_io.read_bundle(bundle_dir)
        if loaded.n != data.n or loaded.sample_count != len(data.series):
            _fail("bundle dimensions disagree with the dataset")
        train_rows = data.rows("train")
        samples = [
            (
                symbolized[i],
                aggregate_lama(AttentionStack(loaded.tensor[i], data.sample_ids[i]), tag),
                int(data.labels[i]),
            )
            for i in train_rows
        ]
        model = gcr_mod.build(samples, parsed, symbol_count, classes=data.classes)
        gcr_mod.save_store(model, out_dir)
        codec.save(Path(out_dir) / "codec.json")
    except WorkbenchError as exc:
        _fail(str(exc))
    click.echo(f"store written to {out_dir}")


@gcr.command("classify")
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--codec", "codec_path", type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def gcr_classify(store_dir: str, data_path: str, codec_path: str | None, out_path: str) -> None:
    """Classify a series file; writes predictions CSV plus a scores JSON."""
    try:
        model = gcr_mod.load_store(store_dir)
        codec_file = Path(codec_path) if codec_path else Path(store_dir) / "codec.json"
        codec = sax_mod.SaxCodec.load(codec_file)
        series, labels = sax_mod.read_series_file(data_path)
        results = [
            gcr_mod.classify(model, sax_mod.transform(codec, row, sample_id=str(i)))
            for i, row in enumerate(series)
        ]
    except WorkbenchError as exc:
        _fail(str(exc))
    with Path(out_path).open("w") as fh:
        fh.write("sample_id,predicted\n")
        for i, result in enumerate(results):
            fh.write(f"{i},{result.predicted}\n")
    scores_path = Path(out_path).with_suffix(".scores.json")
    dump_json(
        [
            {
                "sample_id": str(i),
                "scores": {str(c): s for c, s in r.scores.items()},
                "predicted": r.predicted,
                "certainty": r.certainty,
            }
            for i, r in enumerate(results)
        ],
        scores_path,
    )
    accuracy = metrics_mod.model_fidelity([r.predicted for r in results], labels)
    click.echo(f"accuracy={accuracy:.4f}; predictions in {out_path}")


@gcr.command("export")
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def gcr_export(store_dir: str, out_dir: str) -> None:
    """Write per-class heatmap JSON files from a store."""
    try:
        model = gcr_mod.load_store(store_dir)
    except WorkbenchError as exc:
        _fail(str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for cls_label in model.classes:
        (out / f"heatmap_class_{cls_label}.json").write_bytes(
            gcr_mod.heatmap_bytes(model, cls_label)
        )
    click.echo(f"heatmaps for classes {model.classes} written to {out_dir}")


@main.command("metrics")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path())
def metrics_cmd(data_path: str, out_path: str | None) -> None:
    """Complexity report per series plus the aggregate mean/std."""
    try:
        series, labels = sax_mod.read_series_file(data_path)
        reports = [metrics_mod.complexity_report(row) for row in series]
    except WorkbenchError as exc:
        _fail(str(exc))
    per_sample = [
        {"sample_id": str(i), "label": int(labels[i]), **r.to_dict()}
        for i, r in enumerate(reports)
    ]
    aggregate = {}
    for key in ("ce", "svden", "apen", "trend_shifts"):
        values = [getattr(r, key) for r in reports]
        aggregate[key] = {"mean": float(np.mean(values)), "std": float(np.std(values))}
    defined = [r.sampen for r in reports if r.sampen is not None]
    aggregate["sampen"] = (
        {"mean": float(np.mean(defined)), "std": float(np.std(defined)), "defined": len(defined)}
        if defined
        else None
    )
    doc = {"samples": per_sample, "aggregate": aggregate}
    if out_path:
        dump_json(doc, Path(out_path))
        click.echo(f"metrics written to {out_path}")
    else:
        click.echo(json.dumps(doc, sort_keys=True, default=lambda v: None))


@main.group()
def pipeline() -> None:
    """Multi-stage batch runs."""


@pipeline.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def pipeline_run(config_path: str) -> None:
    try:
        config = ExperimentConfig.from_json(config_path)
        report = run_pipeline(config)
    except WorkbenchError as exc:
        _fail(str(exc))
    click.echo(f"report written to {Path(config.output_dir) / 'report.json'}")
    failures = [e for e in report["gcr"] if e["error"]]
    if failures:
        click.echo(f"note: {len(failures)} gcr entries recorded errors", err=True)


@main.group()
def fixture() -> None:
    """Synthetic dataset generation."""


@fixture.command("gen")
@click.option("--kind", type=click.Choice(list(FIXTURE_KINDS)), required=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--param", "params", multiple=True, help="key=value fixture parameter")
@click.option("--out", "out_dir", required=True, type=click.Path())
def fixture_gen(kind: str, seed: int, params: tuple[str, ...], out_dir: str) -> None:
    parsed: dict[str, float] = {}
    for item in params:
        key, _, value = item.partition("=")
        parsed[key] = float(value)
    try:
        data = gen_fixture(kind, parsed, seed=seed)
    except WorkbenchError as exc:
        _fail(str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for split in ("train", "val", "test"):
        rows = data.rows(split)
        if rows.size == 0:
            continue
        sax_mod.write_series_file(out / f"{split}.csv", data.series[rows], data.labels[rows])
    click.echo(f"{kind} fixture ({len(data.series)} series) written to {out_dir}")


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--debug", is_flag=True, default=False)
def serve_cmd(host: str, port: int, debug: bool) -> None:
    """Run the HTTP service for the interactive UI."""
    from .service import serve

    serve(host=host, port=port, debug=debug)


if __name__ == "__main__":
    main()
