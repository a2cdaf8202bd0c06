"""HTTP auditing service: archived model versions, predictions on demand,
counterfactual explanations, and an append-only audit log.

Every registered bundle is immutable and content-hashed; predictions and
counterfactual queries are answered by the archived version they name, so a
query against version 1 keeps returning version-1 answers after version 2
ships. Each request/response pair is appended to a per-model JSON-lines log
whose records can be replayed against the archive to re-derive every answer.

Storage layout under the data directory:

    models/<model_id>/v<version>.json   registered bundles (content-addressed)
    audit/<model_id>.jsonl              append-only audit records
"""

from __future__ import annotations

import json
import threading
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .bundle import ModelBundle
from .search import CfQuery, dependence_flags, solve_clamped, solve_diverse
from .text import render

DEFAULT_RESTART_CAP = 32


class RegistryError(ValueError):
    pass


class UnknownModelError(KeyError):
    pass


class Registry:
    """File-backed, versioned model store; records never change once written."""

    def __init__(self, data_dir):
        self.root = Path(data_dir) / "models"
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._cache: dict[tuple[str, int], ModelBundle] = {}

    def _model_dir(self, model_id: str) -> Path:
        safe = model_id.replace("/", "_")
        return self.root / safe

    def versions(self, model_id: str) -> list[int]:
        d = self._model_dir(model_id)
        if not d.exists():
            return []
        return sorted(int(p.stem[1:]) for p in d.glob("v*.json"))

    def register(self, bundle_doc: dict, model_id: str | None = None) -> tuple[str, int]:
        try:
            bundle = ModelBundle.from_doc(bundle_doc, verify_hash=True)
        except ValueError as e:
            raise RegistryError(str(e)) from None
        if model_id is None:
            model_id = bundle_doc["content_hash"][:12]
        with self._lock:
            version = (self.versions(model_id) or [0])[-1] + 1
            record = {
                "model_id": model_id,
                "version": version,
                "created_at": datetime.now(timezone.utc).isoformat(),
                "bundle": bundle_doc,
            }
            d = self._model_dir(model_id)
            d.mkdir(parents=True, exist_ok=True)
            path = d / f"v{version}.json"
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(record))
            tmp.rename(path)
            self._cache[(model_id, version)] = bundle
        return model_id, version

    def record(self, model_id: str, version: int) -> dict:
        path = self._model_dir(model_id) / f"v{version}.json"
        if not path.exists():
            raise UnknownModelError(f"{model_id} v{version}")
        return json.loads(path.read_text())

    def bundle(self, model_id: str, version: int) -> ModelBundle:
        key = (model_id, int(version))
        if key not in self._cache:
            doc = self.record(model_id, version)["bundle"]
            self._cache[key] = ModelBundle.from_doc(doc, verify_hash=True)
        return self._cache[key]

    def list_models(self) -> list[dict]:
        out = []
        if not self.root.exists():
            return out
        for d in sorted(self.root.iterdir()):
            if not d.is_dir():
                continue
            for version in self.versions(d.name):
                rec = self.record(d.name, version)
                schema = rec["bundle"]["schema"]
                out.append({
                    "model_id": rec["model_id"],
                    "version": rec["version"],
                    "created_at": rec["created_at"],
                    "content_hash": rec["bundle"]["content_hash"],
                    "features": [f["name"] for f in schema["features"]],
                    "target": schema["target"],
                })
        return out


class AuditLog:
    """Append-only JSON-lines log with a monotone record id per model."""

    def __init__(self, data_dir):
        self.root = Path(data_dir) / "audit"
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._next_id: dict[str, int] = {}
        self._registry_lock = threading.Lock()

    def _path(self, model_id: str) -> Path:
        return self.root / f"{model_id.replace('/', '_')}.jsonl"

    def _lock_for(self, model_id: str) -> threading.Lock:
        with self._registry_lock:
            if model_id not in self._locks:
                self._locks[model_id] = threading.Lock()
                existing = self.read(model_id)
                self._next_id[model_id] = existing[-1]["record_id"] + 1 if existing else 1
            return self._locks[model_id]

    def append(self, model_id: str, version: int, kind: str,
               request: dict, response: dict) -> int:
        lock = self._lock_for(model_id)
        with lock:
            record_id = self._next_id[model_id]
            record = {
                "record_id": record_id,
                "model_id": model_id,
                "version": version,
                "kind": kind,
                "request": request,
                "response": response,
                "timestamp": datetime.now(timezone.utc).isoformat(),
            }
            with self._path(model_id).open("a") as fh:
                fh.write(json.dumps(record) + "\n")
            self._next_id[model_id] = record_id + 1
        return record_id

    def read(self, model_id: str, after: int = 0) -> list[dict]:
        path = self._path(model_id)
        if not path.exists():
            return []
        records = [json.loads(line) for line in path.read_text().splitlines() if line]
        return [r for r in records if r["record_id"] > after]


# -- pure request handlers (shared by the endpoints and audit replay) ---------


def answer_predict(bundle: ModelBundle, request: dict) -> dict:
    x = bundle.validate_point(request["x"])
    return {"score": float(bundle.predict(x))}


def answer_counterfactual(bundle: ModelBundle, request: dict) -> dict:
    x = bundle.validate_point(request["x_original"])
    query = CfQuery(
        x_original=x,
        target_score=float(request["target_score"]),
        distance=bundle.distance_spec(request.get("distance", "l1mad")),
        locked_features=frozenset(request.get("locked_features", [])),
        n_restarts=int(request.get("n_restarts", 4)),
        n_diverse=int(request.get("n_diverse", 1)),
        tolerance_eps=float(request.get("tolerance_eps", 0.01)),
        cap_to_training_range=bool(request.get("cap_to_training_range", False)),
        rng_seed=int(request.get("rng_seed", 0)),
    )
    space = bundle.space()
    if request.get("clamp_categoricals"):
        result = solve_clamped(bundle.model, query, space)
        cfs = [result] if result.converged else result
    else:
        cfs = solve_diverse(bundle.model, query, space)

    if not isinstance(cfs, list):  # NotConverged
        return {"converged": False, "failure": cfs.to_doc(), "query": query.to_doc()}

    phrase = request.get("outcome_phrase")
    ordered = sorted(cfs, key=lambda c: c.distance_value)
    explanations = [
        render(cf, bundle.schema,
               phrase if phrase is not None else f"a score of {cf.achieved_score:.2f}",
               subject_id=i)
        for i, cf in enumerate(ordered, start=1)
    ]
    report = dependence_flags(ordered, bundle.schema)
    return {
        "converged": True,
        "counterfactuals": [cf.to_doc() for cf in ordered],
        "explanations": [e.to_doc() for e in explanations],
        "dependence": {"flags": report.flags, "caveat": report.caveat},
        "query": query.to_doc(),
    }


def replay_audit(data_dir, model_id: str) -> tuple[int, list[int]]:
    """Recompute every logged response against the archived models.

    Returns (records checked, record_ids that no longer reproduce). An empty
    second element means the log fully replays.
    """
    registry = Registry(data_dir)
    log = AuditLog(data_dir)
    handlers = {"predict": answer_predict, "counterfactual": answer_counterfactual}
    mismatched = []
    records = log.read(model_id)
    for rec in records:
        bundle = registry.bundle(rec["model_id"], rec["version"])
        fresh = handlers[rec["kind"]](bundle, rec["request"])
        if json.loads(json.dumps(fresh)) != rec["response"]:
            mismatched.append(rec["record_id"])
    return len(records), mismatched


# -- HTTP layer ----------------------------------------------------------------


class RegisterBody(BaseModel):
    bundle: dict
    model_id: str | None = None


class PredictBody(BaseModel):
    x: list[float]


class CounterfactualBody(BaseModel):
    x_original: list[float]
    target_score: float
    distance: str = "l1mad"
    locked_features: list[str] = Field(default_factory=list)
    n_restarts: int = 4
    n_diverse: int = 1
    tolerance_eps: float = 0.01
    cap_to_training_range: bool = False
    clamp_categoricals: bool = False
    rng_seed: int = 0
    outcome_phrase: str | None = None


def _error(status: int, code: str, message: str, detail=None):
    return HTTPException(status_code=status, detail={
        "code": code, "message": message, "detail": detail,
    })


def create_app(data_dir, restart_cap: int = DEFAULT_RESTART_CAP) -> FastAPI:
    app = FastAPI(title="recourse audit service")
    registry = Registry(data_dir)
    audit = AuditLog(data_dir)
    app.state.registry = registry
    app.state.audit = audit

    @app.exception_handler(HTTPException)
    async def structured_errors(request: Request, exc: HTTPException):
        detail = exc.detail
        if not isinstance(detail, dict) or "code" not in detail:
            detail = {"code": "error", "message": str(exc.detail), "detail": None}
        return JSONResponse(status_code=exc.status_code, content=detail)

    def load_bundle(model_id: str, version: int) -> ModelBundle:
        try:
            return registry.bundle(model_id, version)
        except UnknownModelError:
            raise _error(404, "not_found", f"no model {model_id} version {version}")

    @app.post("/models", status_code=201)
    def register_model(body: RegisterBody):
        try:
            model_id, version = registry.register(body.bundle, body.model_id)
        except RegistryError as e:
            code = "hash_mismatch" if "hash" in str(e) else "invalid_bundle"
            raise _error(400, code, str(e))
        return {"model_id": model_id, "version": version}

    @app.get("/models")
    def list_models():
        return {"models": registry.list_models()}

    @app.get("/models/{model_id}/{version}")
    def get_model(model_id: str, version: int):
        try:
            return registry.record(model_id, version)
        except UnknownModelError:
            raise _error(404, "not_found", f"no model {model_id} version {version}")

    @app.post("/models/{model_id}/{version}/predict")
    def predict(model_id: str, version: int, body: PredictBody):
        bundle = load_bundle(model_id, version)
        request = body.model_dump()
        try:
            response = answer_predict(bundle, request)
        except ValueError as e:
            raise _error(400, "invalid_request", str(e))
        record_id = audit.append(model_id, version, "predict", request, response)
        return {**response, "record_id": record_id}

    @app.post("/models/{model_id}/{version}/counterfactuals")
    def counterfactuals(model_id: str, version: int, body: CounterfactualBody):
        bundle = load_bundle(model_id, version)
        if body.n_restarts > restart_cap:
            raise _error(400, "invalid_request",
                         f"n_restarts above the service cap of {restart_cap}")
        request = body.model_dump()
        try:
            response = answer_counterfactual(bundle, request)
        except ValueError as e:
            raise _error(400, "invalid_request", str(e))
        record_id = audit.append(model_id, version, "counterfactual", request, response)
        return {**response, "record_id": record_id}

    @app.get("/models/{model_id}/{version}/audit")
    def audit_records(model_id: str, version: int, after: int = 0):
        load_bundle(model_id, version)
        records = [r for r in audit.read(model_id, after=after)
                   if r["version"] == version]
        return {"records": records}

    return app
