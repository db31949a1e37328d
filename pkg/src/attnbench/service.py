"""HTTP service powering the interactive tuning and exploration UI.

All numeric work is delegated to the library modules; responses are pure
functions of the session state version, so a client can discard stale
answers by comparing versions.
"""
from __future__ import annotations

import itertools
import threading
from pathlib import Path
from typing import Any

import numpy as np
from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from . import bundle as bundle_io
from . import gcr as gcr_mod
from . import lasa as lasa_mod
from . import metrics as metrics_mod
from . import sax as sax_mod
from .attention import AttentionStack, ComboTag, Lama, aggregate_lama, aggregate_lava
from .errors import BadParams, UnknownClass, WorkbenchError
from .fixtures import gen_fixture
from .pipeline import _json_safe, synthesize_attention


class FixtureSpec(BaseModel):
    kind: str = "trend"
    params: dict = Field(default_factory=dict)
    seed: int = 0


class DatasetSpec(BaseModel):
    train_csv: str | None = None
    test_csv: str | None = None
    val_csv: str | None = None
    fixture: FixtureSpec | None = None


class AttentionSpec(BaseModel):
    bundle: str | None = None
    synthetic: dict | None = None


class SessionRequest(BaseModel):
    symbol_count: int = 3
    dataset: DatasetSpec
    attention: AttentionSpec


class LasaRequest(BaseModel):
    combo: str
    mode: str = "avg"
    s1: float = 1.0
    s2: float = 1.2
    sample_ids: list[str] | None = None
    split: str | None = None


class GcrBuildRequest(BaseModel):
    variants: list[str]
    combos: list[str]


class ClassifyRequest(BaseModel):
    combo: str
    split: str | None = "test"
    sample_ids: list[str] | None = None


class Session:
    """One loaded dataset + attention tensor plus caches keyed by combo."""

    def __init__(self, session_id: str, request: SessionRequest):
        self.id = session_id
        self.version = 1
        self.lock = threading.Lock()
        ds = request.dataset
        if ds.fixture is not None:
            self.data = gen_fixture(ds.fixture.kind, ds.fixture.params, seed=ds.fixture.seed)
        elif ds.train_csv:
            self.data = sax_mod.load_dataset(ds.train_csv, ds.test_csv, ds.val_csv)
        else:
            raise BadParams("dataset needs either files or a fixture spec")
        self.codec = sax_mod.fit_codec(
            self.data.series[self.data.rows("train")], request.symbol_count
        )
        self.symbolized = sax_mod.symbolize_dataset(self.codec, self.data)
        att = request.attention
        if att.bundle is not None:
            loaded = bundle_io.read_bundle(att.bundle)
            if loaded.n != self.data.n or loaded.sample_count != len(self.data.series):
                raise BadParams("bundle dimensions disagree with the dataset")
            self.tensor = loaded.tensor
        elif att.synthetic is not None:
            self.tensor = synthesize_attention(self.symbolized, att.synthetic, self.data.n)
        else:
            raise BadParams("attention needs either a bundle path or a synthetic spec")
        self.index_of = {sid: i for i, sid in enumerate(self.data.sample_ids)}
        self._lama_cache: dict[str, list[np.ndarray]] = {}
        self.models: dict[tuple[str, str], gcr_mod.GcrModel] = {}

    def sample_index(self, sample_id: str) -> int:
        if sample_id not in self.index_of:
            raise KeyError(sample_id)
        return self.index_of[sample_id]

    def lamas(self, combo: ComboTag) -> list[np.ndarray]:
        key = combo.matrix_tag.render()
        with self.lock:
            if key not in self._lama_cache:
                self._lama_cache[key] = [
                    aggregate_lama(AttentionStack(self.tensor[i], sid), combo.matrix_tag).matrix
                    for i, sid in enumerate(self.data.sample_ids)
                ]
            return self._lama_cache[key]

    def rows_for(self, split: str | None, sample_ids: list[str] | None) -> list[int]:
        if sample_ids is not None:
            return [self.sample_index(sid) for sid in sample_ids]
        if split is None:
            return list(range(len(self.data.series)))
        return [int(i) for i in self.data.rows(split)]


def _http_error(exc: Exception) -> HTTPException:
    if isinstance(exc, HTTPException):
        return exc
    if isinstance(exc, (KeyError, UnknownClass)):
        return HTTPException(status_code=404, detail=str(exc))
    if isinstance(exc, (WorkbenchError, OSError, ValueError)):
        return HTTPException(status_code=400, detail=str(exc))
    return HTTPException(status_code=500, detail=str(exc))


def create_app(debug: bool = False) -> FastAPI:
    app = FastAPI(title="attnbench", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    sessions: dict[str, Session] = {}
    counter = itertools.count(1)

    def get_session(session_id: str) -> Session:
        if session_id not in sessions:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return sessions[session_id]

    @app.post("/sessions", status_code=201)
    def create_session(request: SessionRequest) -> dict:
        try:
            session = Session(f"s{next(counter)}", request)
        except Exception as exc:
            raise _http_error(exc) from exc
        sessions[session.id] = session
        return _session_info(session)

    @app.get("/sessions/{session_id}")
    def session_info(session_id: str) -> dict:
        return _session_info(get_session(session_id))

    def _session_info(session: Session) -> dict:
        data = session.data
        return {
            "id": session.id,
            "version": session.version,
            "n": data.n,
            "L": int(session.tensor.shape[1]),
            "H": int(session.tensor.shape[2]),
            "classes": data.classes,
            "symbol_count": session.codec.symbol_count,
            "samples": {
                split: [data.sample_ids[i] for i in data.rows(split)]
                for split in sax_mod.SPLITS
            },
            "models": sorted(f"{c}/{v}" for c, v in session.models),
        }

    @app.get("/sessions/{session_id}/samples/{sample_id}/lama")
    def get_lama(session_id: str, sample_id: str, combo: str = Query(...)) -> dict:
        session = get_session(session_id)
        try:
            tag = ComboTag.parse(combo, expect_step3=False)
            index = session.sample_index(sample_id)
            matrix = session.lamas(tag)[index]
            if debug:
                fresh = aggregate_lama(
                    AttentionStack(session.tensor[index], sample_id), tag
                ).matrix
                assert np.array_equal(matrix, fresh), "lama cache is incoherent"
        except Exception as exc:
            raise _http_error(exc) from exc
        return {
            "sample_id": sample_id,
            "combo": tag.render(),
            "version": session.version,
            "matrix": matrix.tolist(),
        }

    @app.get("/sessions/{session_id}/samples/{sample_id}/lava")
    def get_lava(
        session_id: str,
        sample_id: str,
        combo: str = Query(...),
        step3: str = Query("sum"),
    ) -> dict:
        session = get_session(session_id)
        try:
            tag = ComboTag.parse(combo)
            index = session.sample_index(sample_id)
            lava = aggregate_lava(
                Lama(session.lamas(tag)[index], tag.matrix_tag, sample_id), step3
            )
        except Exception as exc:
            raise _http_error(exc) from exc
        return {
            "sample_id": sample_id,
            "combo": lava.combo.render(),
            "version": session.version,
            "vector": lava.vector.tolist(),
        }

    @app.post("/sessions/{session_id}/lasa")
    def post_lasa(session_id: str, request: LasaRequest) -> dict:
        session = get_session(session_id)
        try:
            combo = ComboTag.parse(request.combo, expect_step3=True)
            spec = lasa_mod.ThresholdSpec(mode=request.mode, s1=request.s1, s2=request.s2)
            rows = session.rows_for(request.split, request.sample_ids)
            matrices = session.lamas(combo)
            samples = []
            abstractions = []
            for index in rows:
                lava = aggregate_lava(
                    Lama(matrices[index], combo.matrix_tag, session.data.sample_ids[index]),
                    combo.step3,
                )
                t1, t2 = lasa_mod.resolve_thresholds(lava, spec)
                abstraction = lasa_mod.abstract(session.symbolized[index], lava, t1, t2)
                abstractions.append(abstraction)
                validation = lasa_mod.interpolate(abstraction)
                defined = validation.values[validation.mask]
                complexity = None
                if defined.size >= 4:
                    try:
                        complexity = metrics_mod.complexity_report(
                            defined, data_reduction=abstraction.reduction
                        ).to_dict()
                    except WorkbenchError:
                        complexity = None
                samples.append(
                    {
                        "sample_id": session.data.sample_ids[index],
                        "original": session.symbolized[index].values.tolist(),
                        "lava": lava.vector.tolist(),
                        "t1": t1,
                        "t2": t2,
                        "kept": [[pos, val] for pos, val in abstraction.kept],
                        "provenance": list(abstraction.provenance),
                        "reduction": abstraction.reduction,
                        "interpolated": {
                            "values": validation.values.tolist(),
                            "mask": validation.mask.tolist(),
                        },
                        "complexity": complexity,
                    }
                )
            mean, std = lasa_mod.reduction_stats(abstractions)
        except Exception as exc:
            raise _http_error(exc) from exc
        return _json_safe(
            {
                "combo": combo.render(),
                "threshold": {"mode": spec.mode, "s1": spec.s1, "s2": spec.s2},
                "version": session.version,
                "samples": samples,
                "reduction": {"mean": mean, "std": std},
            }
        )

    @app.post("/sessions/{session_id}/gcr", status_code=201)
    def build_gcr(session_id: str, request: GcrBuildRequest) -> dict:
        session = get_session(session_id)
        built = []
        try:
            train_rows = [int(i) for i in session.data.rows("train")]
            for combo_text in request.combos:
                combo = ComboTag.parse(combo_text, expect_step3=False)
                matrices = session.lamas(combo)
                for variant_key in request.variants:
                    variant = gcr_mod.GcrVariant.parse(variant_key)
                    samples = [
                        (
                            session.symbolized[i],
                            matrices[i],
                            int(session.data.labels[i]),
                        )
                        for i in train_rows
                    ]
                    model = gcr_mod.build(
                        samples,
                        variant,
                        session.codec.symbol_count,
                        classes=session.data.classes,
                    )
                    with session.lock:
                        session.models[(combo.render(), variant.key())] = model
                        session.version += 1
                    built.append(f"{combo.render()}/{variant.key()}")
        except Exception as exc:
            raise _http_error(exc) from exc
        return {"version": session.version, "built": sorted(built)}

    def _get_model(session: Session, variant: str, combo: str) -> gcr_mod.GcrModel:
        try:
            variant_key = gcr_mod.GcrVariant.parse(variant).key()
            combo_key = ComboTag.parse(combo, expect_step3=False).render()
        except WorkbenchError as exc:
            raise _http_error(exc) from exc
        model = session.models.get((combo_key, variant_key))
        if model is None:
            raise HTTPException(
                status_code=409,
                detail=f"model {combo_key}/{variant_key} is not built in this session",
            )
        return model

    @app.get("/sessions/{session_id}/gcr/{variant}/heatmap")
    def gcr_heatmap(
        session_id: str,
        variant: str,
        cls: int = Query(..., alias="class"),
        combo: str = Query(...),
    ) -> Response:
        session = get_session(session_id)
        model = _get_model(session, variant, combo)
        try:
            payload = gcr_mod.heatmap_bytes(model, cls)
        except Exception as exc:
            raise _http_error(exc) from exc
        return Response(content=payload, media_type="application/json")

    @app.post("/sessions/{session_id}/gcr/{variant}/classify")
    def gcr_classify(session_id: str, variant: str, request: ClassifyRequest) -> dict:
        session = get_session(session_id)
        model = _get_model(session, variant, request.combo)
        try:
            rows = session.rows_for(request.split, request.sample_ids)
            results = [gcr_mod.classify(model, session.symbolized[i]) for i in rows]
            gold = [int(session.data.labels[i]) for i in rows]
            memberships = [
                {
                    "sample_id": session.data.sample_ids[i],
                    "scores": {str(c): s for c, s in result.scores.items()},
                    "predicted": result.predicted,
                    "certainty": result.certainty,
                    "margin": result.margin,
                    "label": label,
                }
                for i, result, label in zip(rows, results, gold)
            ]
            accuracy = metrics_mod.model_fidelity([r.predicted for r in results], gold)
        except Exception as exc:
            raise _http_error(exc) from exc
        return _json_safe(
            {
                "version": session.version,
                "memberships": memberships,
                "accuracy": accuracy,
            }
        )

    @app.get("/sessions/{session_id}/certainty-curve")
    def certainty_curve(
        session_id: str,
        variant: str = Query(...),
        combo: str = Query(...),
        steps: str = Query("80,50,20,10"),
        split: str = Query("test"),
    ) -> dict:
        session = get_session(session_id)
        model = _get_model(session, variant, combo)
        try:
            parsed_steps = [int(s) for s in steps.split(",") if s.strip()]
            if any(not (0 < s <= 100) for s in parsed_steps):
                raise BadParams("steps must be percentages in (0, 100]")
            rows = session.rows_for(split, None)
            results = [gcr_mod.classify(model, session.symbolized[i]) for i in rows]
            gold = [int(session.data.labels[i]) for i in rows]
            curve = gcr_mod.certainty_curve(results, gold, steps=parsed_steps)
        except Exception as exc:
            raise _http_error(exc) from exc
        return {"version": session.version, "split": split, "curve": curve}

    ui_dir = Path(__file__).resolve().parent.parent.parent / "frontend"
    if (ui_dir / "index.html").is_file() and (ui_dir / "dist").is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(host: str = "127.0.0.1", port: int = 8000, debug: bool = False) -> None:
    import uvicorn

    uvicorn.run(create_app(debug=debug), host=host, port=port)
