"""Acceptance gate: one test per release criterion, at pinned tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS/FAIL
line per criterion.
"""
import functools
import hashlib
import itertools
import math
import time
from pathlib import Path

import numpy as np
import pytest

from attnbench.attention import (
    AttentionStack,
    ComboTag,
    Lama,
    aggregate_lama,
    aggregate_lava,
    attention_matrix,
)
from attnbench.fixtures import gen_fixture
from attnbench.gcr import (
    GcrVariant,
    MembershipResult,
    build,
    certainty_filter,
    classify,
)
from attnbench.lasa import ThresholdSpec, abstract, resolve_thresholds
from attnbench.metrics import (
    apen,
    ce,
    consistency,
    md,
    model_fidelity,
    sampen,
    svden,
    trend_shifts,
)
from attnbench.pipeline import ExperimentConfig, run_pipeline, synthesize_attention
from attnbench.sax import SymbolizedSeries, fit_codec, mapped_values, symbolize_dataset
from conftest import random_stack
from oracles import (
    abstraction_reference,
    apen_reference,
    gcr_build_loops,
    gcr_classify_loops,
    gtm_classify_loops,
    lama_loops,
    lava_loops,
    occupancy_counts,
    sampen_reference,
)


def criterion(name):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"[ACCEPTANCE] {name}: FAIL")
                raise
            print(f"[ACCEPTANCE] {name}: PASS")

        return wrapper

    return decorate


MATRIX_COMBOS = [
    ComboTag(order, s1, s2)
    for order in ("hl", "lh")
    for s1 in ("max", "sum")
    for s2 in ("max", "sum")
]


@criterion("aggregation-oracle")
def test_aggregation_oracle():
    rng = np.random.default_rng(2024)
    started = time.perf_counter()
    for _ in range(200):
        layers = int(rng.integers(1, 4))
        heads = int(rng.integers(1, 4))
        n = int(rng.integers(2, 7))
        stack = random_stack(rng, layers, heads, n)
        for combo in MATRIX_COMBOS:
            expected = lama_loops(stack.tensor, combo.order, combo.step1, combo.step2)
            lama = aggregate_lama(stack, combo)
            assert np.array_equal(lama.matrix, expected), combo.render()
            for step3 in ("max", "sum"):
                assert np.array_equal(
                    aggregate_lava(lama, step3).vector, lava_loops(expected, step3)
                )
        hl_mm = aggregate_lama(stack, ComboTag("hl", "max", "max")).matrix
        lh_mm = aggregate_lama(stack, ComboTag("lh", "max", "max")).matrix
        assert np.array_equal(hl_mm, lh_mm)
        hl_ss = aggregate_lama(stack, ComboTag("hl", "sum", "sum")).matrix
        lh_ss = aggregate_lama(stack, ComboTag("lh", "sum", "sum")).matrix
        # sums commute up to float association order
        assert np.allclose(hl_ss, lh_ss, rtol=1e-12, atol=0)
    assert time.perf_counter() - started < 5.0


@criterion("attention-math")
def test_attention_math():
    rng = np.random.default_rng(2025)
    for _ in range(1000):
        n = int(rng.integers(2, 9))
        d_k = int(rng.integers(1, 5))
        out = attention_matrix(rng.normal(size=(n, d_k)), rng.normal(size=(n, d_k)))
        assert np.abs(out.sum(axis=1) - 1.0).max() <= 1e-6
    uniform = attention_matrix(np.zeros((4, 3)), np.zeros((4, 3)))
    assert np.array_equal(uniform, np.full((4, 4), 0.25))


@criterion("lasa-worked-example")
def test_lasa_worked_example():
    lava = np.asarray([0.1, 0.2, 0.3, 0.4])
    x = SymbolizedSeries(symbols=np.asarray([0, 1, 1, 2]), values=np.asarray([-1.0, 0.0, 0.0, 1.0]))
    t1, t2 = resolve_thresholds(lava, ThresholdSpec("avg", 1.0, 1.2))
    out = abstract(x, lava, t1, t2)
    assert {pos for pos, _ in out.kept} == {2, 3}
    assert out.reduction == 0.5

    # degenerate thresholds
    assert abstract(x, lava, -math.inf, -math.inf).reduction == 0.0
    fully_dropped = abstract(x, lava, 1.0, float(lava.max()))
    assert fully_dropped.reduction == 1.0 and fully_dropped.kept == ()

    # medium-run center/median rules, exhaustively vs the reference
    t1, t2 = 2.5, 1.5
    level = {"H": 3.0, "M": 2.0, "D": 1.0}
    for n in range(1, 9):
        values = np.asarray([((i * 3) % 7) - 3.0 for i in range(n)])
        probe = SymbolizedSeries(symbols=np.zeros(n, dtype=int), values=values)
        for pattern in itertools.product("HMD", repeat=n):
            vec = np.asarray([level[p] for p in pattern])
            got = abstract(probe, vec, t1, t2)
            assert [(p, v) for p, v in got.kept] == abstraction_reference(values, vec, t1, t2)


@criterion("complexity-suite")
def test_complexity_suite():
    started = time.perf_counter()
    constant = [3.7] * 24
    assert ce(constant) == 0.0
    assert svden(constant) == 0.0
    assert apen(constant, m=2, r=0.2) == 0.0
    assert sampen(constant, m=2, r=0.2) == 0.0
    assert trend_shifts(constant) == 0
    assert trend_shifts(np.linspace(-2, 7, 40), r=0.001) == 0

    rng = np.random.default_rng(2026)
    for _ in range(50):
        n = int(rng.integers(10, 41))
        x = rng.normal(size=n)
        r = 0.2 * float(x.std())
        assert abs(apen(x, m=2, r=r) - apen_reference(x, 2, r)) <= 1e-9
        expected = sampen_reference(x, 2, r)
        if expected is None:
            with pytest.raises(Exception):
                sampen(x, m=2, r=r)
        else:
            assert abs(sampen(x, m=2, r=r) - expected) <= 1e-9
    assert time.perf_counter() - started < 10.0


@criterion("gcr-correctness")
def test_gcr_correctness():
    rng = np.random.default_rng(2027)
    variants = [
        GcrVariant(shape="fcam", gsa="sum"),
        GcrVariant(shape="fcam", gsa="ravg"),
        GcrVariant(shape="gtm", gva="max", gsa="sum"),
        GcrVariant(shape="gtm", gva="median", gsa="sum"),
        GcrVariant(shape="gtm", gva="avg", gsa="ravg"),
        GcrVariant(shape="fcam", gsa="sum", penalty="counting"),
        GcrVariant(shape="fcam", gsa="sum", penalty="entropy"),
        GcrVariant(shape="fcam", gsa="sum", threshold_factor=1.1),
    ]
    for trial in range(16):
        n = int(rng.integers(2, 7))
        symbol_count = int(rng.integers(2, 5))
        n_classes = int(rng.integers(1, 4))
        n_samples = int(rng.integers(n_classes, 11))
        classes = list(range(n_classes))
        samples = []
        for idx in range(n_samples):
            symbols = rng.integers(0, symbol_count, size=n)
            label = idx % n_classes
            series = SymbolizedSeries(
                symbols=symbols, values=mapped_values(symbol_count)[symbols], label=label
            )
            samples.append((series, rng.uniform(size=(n, n)), label))
        loop_samples = [(s.symbols, m, lab) for s, m, lab in samples]
        variant = variants[trial % len(variants)]
        model = build(samples, variant, symbol_count, classes=classes)
        fcam, ccam, gtm = gcr_build_loops(loop_samples, variant, symbol_count, classes)
        probe = rng.integers(0, symbol_count, size=n)
        result = classify(model, probe)
        if variant.shape == "fcam":
            for ci, c in enumerate(classes):
                for u in range(symbol_count):
                    for v in range(symbol_count):
                        assert np.array_equal(model.fcam[ci, u, v], fcam[c][u][v])
            expected = gcr_classify_loops(fcam, classes, symbol_count, n, probe)
        else:
            for ci, c in enumerate(classes):
                for v in range(symbol_count):
                    assert np.array_equal(model.gtm[ci, v], gtm[c][v])
            expected = gtm_classify_loops(gtm, classes, symbol_count, n, probe)
        for c in classes:
            assert result.scores[c] == expected[c]
        if variant.penalty == "none":
            for score in result.scores.values():
                assert -1e-12 <= score <= 1.0 + 1e-12

    # ccam scores equal avg-gtm scores exactly
    samples = []
    for idx in range(8):
        symbols = rng.integers(0, 3, size=5)
        series = SymbolizedSeries(symbols=symbols, values=mapped_values(3)[symbols])
        samples.append((series, rng.uniform(size=(5, 5)), idx % 2))
    ccam_model = build(samples, GcrVariant(shape="ccam"), 3, classes=[0, 1])
    gtm_model = build(samples, GcrVariant(shape="gtm", gva="avg"), 3, classes=[0, 1])
    for _ in range(10):
        probe = rng.integers(0, 3, size=5)
        assert classify(ccam_model, probe).scores == classify(gtm_model, probe).scores

    # rescaling every train matrix by a positive factor leaves scores unchanged
    for variant in (GcrVariant(shape="fcam"), GcrVariant(shape="gtm", gva="avg", gsa="ravg")):
        base = build(samples, variant, 3, classes=[0, 1])
        scaled = build([(s, 4.0 * m, lab) for s, m, lab in samples], variant, 3, classes=[0, 1])
        for _ in range(5):
            probe = rng.integers(0, 3, size=5)
            assert classify(base, probe).scores == classify(scaled, probe).scores

    # zero threshold factor is bit-identical to the unthresholded build
    plain = build(samples, GcrVariant(shape="fcam"), 3, classes=[0, 1])
    gated = build(samples, GcrVariant(shape="fcam", threshold_factor=0.0), 3, classes=[0, 1])
    assert np.array_equal(plain.fcam, gated.fcam)
    assert np.array_equal(plain.max_scores, gated.max_scores)


@criterion("gcr-end-to-end")
def test_gcr_end_to_end():
    started = time.perf_counter()
    data = gen_fixture("trend", {"n": 24, "train_per_class": 25, "test_per_class": 25}, seed=5)
    codec = fit_codec(data.series[data.rows("train")], 3)
    symbolized = symbolize_dataset(codec, data)
    tensor = synthesize_attention(
        symbolized, {"layers": 1, "heads": 1, "d_model": 4, "d_k": 2, "mode": "zero"}, data.n
    )
    assert np.array_equal(tensor, np.full_like(tensor, 1.0 / data.n))

    combo = ComboTag.parse("hl-ss")
    train_rows = data.rows("train")
    samples = [
        (
            symbolized[i],
            aggregate_lama(AttentionStack(tensor[i], str(i)), combo),
            int(data.labels[i]),
        )
        for i in train_rows
    ]
    model = build(samples, GcrVariant(shape="gtm", gva="avg", gsa="sum"), 3, classes=data.classes)

    counts = occupancy_counts(
        [symbolized[i].symbols for i in train_rows],
        [int(data.labels[i]) for i in train_rows],
        3,
        data.classes,
    )
    # uniform attention: every routed entry is 1/n, so the accumulated trend
    # table is exactly the per-position occurrence count scaled by 1/n
    for ci, c in enumerate(data.classes):
        assert np.allclose(model.gtm[ci], counts[c] / data.n, atol=1e-12)

    test_rows = data.rows("test")
    predictions = [classify(model, symbolized[i]).predicted for i in test_rows]
    gold = [int(data.labels[i]) for i in test_rows]
    accuracy = model_fidelity(predictions, gold)
    assert accuracy >= 0.9, f"held-out accuracy {accuracy}"
    assert time.perf_counter() - started < 30.0


@criterion("counting-fixture")
def test_counting_fixture():
    data = gen_fixture("counting", seed=0)
    assert len(data.series) == 2**10
    assert data.classes == list(range(11))
    counts = {split: int((data.split == split).sum()) for split in ("train", "val", "test")}
    assert counts == {"train": 308, "val": 204, "test": 512}


@criterion("metrics")
def test_metrics():
    rng = np.random.default_rng(2028)
    for _ in range(500):
        a = rng.normal(size=(4, 4))
        b = rng.normal(size=(4, 4))
        c = rng.normal(size=(4, 4))
        assert md(a, a) == 0.0
        assert md(a, b) >= 0.0
        assert abs(md(a, b) - md(b, a)) <= 1e-12
        assert md(a, c) <= md(a, b) + md(b, c) + 1e-9
    labels = rng.integers(0, 3, size=40)
    assert model_fidelity(labels, labels) == 1.0
    fold = {f"s{i}": rng.uniform(size=(3, 3)) for i in range(6)}
    fold_labels = {f"s{i}": i % 2 for i in range(6)}
    report = consistency([fold, {k: v.copy() for k, v in fold.items()}], fold_labels)
    assert report.outer_distance == (0.0, 0.0)


@criterion("certainty-contract")
def test_certainty_contract():
    rng = np.random.default_rng(2029)
    predictions = rng.integers(0, 2, size=40)
    gold = rng.integers(0, 2, size=40)
    results = [
        MembershipResult(scores={0: 0.5}, predicted=int(p), certainty=float(c), margin=0.0)
        for p, c in zip(predictions, rng.uniform(size=40))
    ]
    plain_accuracy = float((predictions == gold).mean())
    assert certainty_filter(results, gold, 1.0) == plain_accuracy

    # a fixture where the top-20% most certain predictions are correct
    n = 30
    top = int(0.2 * n)
    certainties = np.concatenate([np.linspace(0.99, 0.9, top), np.full(n - top, 0.1)])
    gold = [1] * n
    predicted = [1] * top + [0] * (n - top)
    results = [
        MembershipResult(scores={0: 0.0}, predicted=p, certainty=float(c), margin=0.0)
        for p, c in zip(predicted, certainties)
    ]
    assert certainty_filter(results, gold, 0.2) == 1.0
    assert certainty_filter(results, gold, 1.0) == pytest.approx(top / n)


@criterion("pipeline-determinism")
def test_pipeline_determinism(tmp_path):
    def run(out_dir):
        config = ExperimentConfig(
            output_dir=str(out_dir),
            symbol_count=3,
            fixture={
                "kind": "trend",
                "params": {"n": 16, "train_per_class": 6, "test_per_class": 6},
                "seed": 13,
            },
            synthetic_attention={
                "layers": 2,
                "heads": 2,
                "d_model": 4,
                "d_k": 2,
                "mode": "random",
                "seed": 3,
            },
            lasa_combos=["hl-msm", "hl-sss"],
            lasa_thresholds=[{"mode": "avg", "s1": 1.0, "s2": 1.2}, {"mode": "max", "s1": 1.8, "s2": -1.0}],
            gcr_combos=["hl-ms", "hl-ss"],
            gcr_variants=["fcam-sum", "gtm.avg-ravg", "fcam-sum-t1.3", "gtm.max-sum-pcounting"],
        )
        run_pipeline(config)
        digests = {}
        for path in sorted(Path(out_dir).rglob("*")):
            if path.is_file():
                digests[str(path.relative_to(out_dir))] = hashlib.sha256(
                    path.read_bytes()
                ).hexdigest()
        return digests

    first = run(tmp_path / "out")
    second = run(tmp_path / "out")
    assert first == second
