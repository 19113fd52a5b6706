"""HTTP API over the store, scorer, predictor, and designer.

Every endpoint is a thin adapter over the corresponding library call: the
JSON payload equals the library result, so the API surface can be tested
field-for-field against direct calls. Mutations go through the store's
single writer, which makes concurrent review actions safe: the loser of an
accept race gets a 409.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .designer import DesignSpec, FallbackEngine, run_design
from .errors import DiveError
from .evaluate import score_extraction
from .formula import FormulaError, canonical_formula, parse_formula
from .predictor import GBDTModel, SchemaMismatch, load_model
from .predictor import predict as predict_capacity
from .records import ValidationFailure, record_to_dict, validate_record
from .store import (
    BadBinEdges,
    CorrectionRejected,
    QueryFilter,
    RecordStore,
    ReviewConflict,
    UnknownId,
)


class BindFailure(DiveError):
    pass


class StoreOpenFailure(DiveError):
    pass


@dataclass
class ApiConfig:
    store_path: str
    host: str = "127.0.0.1"
    port: int = 8380
    model_path: str | None = None
    static_dir: str | None = None
    manifest_dir: str | None = None
    auth_token: str | None = None


def _error(status: int, code: str, message: str, details=None) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "details": details},
    )


def _record_payload(record_id: int, record) -> dict:
    return {"id": record_id, **record_to_dict(record)}


def _load_manifest_blocks(manifest_dir: str | None) -> dict[str, list[dict]]:
    """doi -> descriptive blocks, pulled from pipeline run manifests."""
    blocks: dict[str, list[dict]] = {}
    if not manifest_dir:
        return blocks
    root = Path(manifest_dir)
    if not root.is_dir():
        return blocks
    for path in sorted(root.glob("*.json")):
        try:
            manifest = json.loads(path.read_text("utf-8"))
        except (OSError, json.JSONDecodeError):
            continue
        doi = manifest.get("doi")
        if doi and manifest.get("descriptive_blocks"):
            blocks.setdefault(doi, []).extend(manifest["descriptive_blocks"])
    return blocks


def create_app(config: ApiConfig, store: RecordStore | None = None,
               model: GBDTModel | None = None) -> FastAPI:
    try:
        store = store if store is not None else RecordStore(config.store_path, create=False)
    except DiveError as exc:
        raise StoreOpenFailure(str(exc)) from exc
    if model is None and config.model_path:
        model = load_model(config.model_path)

    app = FastAPI(title="dive", docs_url=None, redoc_url=None)
    app.state.store = store
    app.state.model = model
    app.state.config = config

    async def check_auth(request: Request):
        if config.auth_token:
            header = request.headers.get("authorization", "")
            if header != f"Bearer {config.auth_token}":
                return False
        return True

    @app.middleware("http")
    async def auth_middleware(request: Request, call_next):
        if not await check_auth(request):
            return _error(401, "unauthorized", "missing or invalid bearer token")
        return await call_next(request)

    @app.get("/records")
    def list_records(element: str | None = None, cap_min: float | None = None,
                     cap_max: float | None = None, t_min: float | None = None,
                     t_max: float | None = None, material_class: str | None = None,
                     doi: str | None = None, status: str | None = None):
        try:
            f = QueryFilter(
                material_class=material_class,
                element_contains=set(filter(None, element.split(","))) if element else None,
                capacity_lo=cap_min, capacity_hi=cap_max,
                temperature_lo=t_min, temperature_hi=t_max,
                doi=doi, review_status=status,
            )
        except ValueError as exc:
            return _error(400, "bad_filter", str(exc))
        return [_record_payload(rid, r) for rid, r in store.query(f)]

    @app.get("/records/{record_id}")
    def get_record(record_id: int):
        try:
            return _record_payload(record_id, store.get(record_id))
        except UnknownId as exc:
            return _error(404, "unknown_id", str(exc))

    @app.get("/review/queue")
    def review_queue(limit: int = 50, offset: int = 0):
        blocks = _load_manifest_blocks(config.manifest_dir)
        items = []
        for rid, r in store.pending()[offset:offset + limit]:
            items.append({
                **_record_payload(rid, r),
                "context": blocks.get(r.provenance.doi) or None,
            })
        return {"items": items, "total_pending": len(store.pending())}

    @app.post("/review/{record_id}")
    async def review(record_id: int, request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _error(400, "bad_json", "request body must be JSON")
        action = body.get("action")
        reviewer = str(body.get("reviewer") or "anonymous")
        if action not in ("accept", "reject", "correct"):
            return _error(400, "bad_action", f"unknown review action {action!r}")
        try:
            updated = store.set_review(record_id, action, reviewer, corrected=body.get("record"))
        except UnknownId as exc:
            return _error(404, "unknown_id", str(exc))
        except ReviewConflict as exc:
            return _error(409, "review_conflict", str(exc))
        except CorrectionRejected as exc:
            return _error(400, "validation_failure", str(exc),
                          details=[{"field": f, "reason": r} for f, r in exc.failure.issues])
        except ValueError as exc:
            return _error(400, "bad_request", str(exc))
        return _record_payload(record_id, updated)

    @app.get("/stats/histogram")
    def stats_histogram(edges: str):
        try:
            bin_edges = [float(e) for e in edges.split(",") if e != ""]
        except ValueError:
            return _error(400, "bad_edges", f"cannot parse edges {edges!r}")
        try:
            return {"edges": bin_edges, "counts": store.capacity_histogram(bin_edges)}
        except BadBinEdges as exc:
            return _error(400, "bad_edges", str(exc))

    @app.get("/stats/elements")
    def stats_elements(lo: float, hi: float):
        try:
            ranked = store.element_frequency(lo, hi)
        except ValueError as exc:
            return _error(400, "bad_range", str(exc))
        return {"lo": lo, "hi": hi, "elements": [{"element": e, "count": c} for e, c in ranked]}

    @app.get("/stats/dopants")
    def stats_dopants(base: str, k: int = 5):
        try:
            return {"base": base, "dopants": store.dopant_analysis(base, k)}
        except FormulaError as exc:
            return _error(400, "bad_formula", str(exc))
        except ValueError as exc:
            return _error(400, "bad_request", str(exc))

    @app.post("/predict")
    async def predict_endpoint(request: Request):
        if model is None:
            return _error(503, "model_unavailable", "no prediction model is loaded")
        body = await request.json()
        formula = str(body.get("formula") or "")
        try:
            composition = parse_formula(formula)
            value = predict_capacity(model, composition)
        except FormulaError as exc:
            return _error(400, "bad_formula", str(exc))
        except SchemaMismatch as exc:
            return _error(503, "model_unavailable", str(exc))
        return {
            "formula": formula,
            "canonical_formula": canonical_formula(composition),
            "predicted_capacity_wt_pct": value,
        }

    @app.post("/design")
    async def design_endpoint(request: Request):
        if model is None:
            return _error(503, "model_unavailable", "no prediction model is loaded")
        body = await request.json()
        try:
            spec = DesignSpec.from_dict(body.get("spec") or body)
        except (KeyError, TypeError, ValueError) as exc:
            return _error(400, "bad_spec", str(exc))
        trace = run_design(spec, FallbackEngine(spec), model, store)
        return trace.to_dict()

    @app.post("/score")
    async def score_endpoint(request: Request):
        body = await request.json()
        lists: dict[str, list] = {}
        for side in ("gold", "pred"):
            raw = body.get(side)
            if not isinstance(raw, list):
                return _error(400, "bad_request", f"{side} must be a list of records")
            validated, problems = [], []
            for i, item in enumerate(raw):
                result = validate_record(item)
                if isinstance(result, ValidationFailure):
                    problems.append({"index": i, "side": side,
                                     "issues": [{"field": f, "reason": r} for f, r in result.issues]})
                else:
                    validated.append(result)
            if problems:
                return _error(400, "validation_failure", f"invalid {side} records", details=problems)
            lists[side] = validated
        return score_extraction(lists["gold"], lists["pred"]).to_dict()

    if config.static_dir:
        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="ui")

    return app


def serve(config: ApiConfig, store: RecordStore | None = None,
          model: GBDTModel | None = None):
    """Run the API with uvicorn; returns only on shutdown."""
    import uvicorn

    app = create_app(config, store=store, model=model)
    try:
        uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    except OSError as exc:
        raise BindFailure(f"cannot bind {config.host}:{config.port}: {exc}") from exc
