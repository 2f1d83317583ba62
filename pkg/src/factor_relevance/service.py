"""Read-only HTTP front end.

The rule set and clusterings are loaded once when the app is built and never
mutated; restart the process to serve a new model. Routes::

    GET  /model/summary
    GET  /explain/global?clustering=<name>&normalize=<mode>
    POST /explain/local   (body: one patient record object)
    POST /explain/batch   (body: list of patient record objects)

Errors are returned as ``{"error": <code>, "detail": <message>}``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from .exceptions import FactorRelevanceError, NoActivationError
from .model_io import (
    Clustering,
    RuleSet,
    identity_clustering,
    load_clusterings,
    load_rules,
    record_from_mapping,
    validate_against,
)
from .relevance import NORMALIZE_MODES, explain_global, explain_local
from .report import batch_profiles

ENV_PREFIX = "FACTOR_RELEVANCE_"


@dataclass(frozen=True)
class ServiceConfig:
    rules: str
    factors: str | None = None
    clustering: str | None = None
    normalize: str = "literal"
    strict: bool = True
    host: str = "127.0.0.1"
    port: int = 8000

    @classmethod
    def load(cls, path=None, env=None, **overrides) -> "ServiceConfig":
        """Merge a JSON config file, ``FACTOR_RELEVANCE_*`` variables and
        explicit keyword overrides, later sources winning."""
        values = {}
        if path is not None:
            values.update(json.loads(Path(path).read_text(encoding="utf-8")))
        env = os.environ if env is None else env
        for f in fields(cls):
            raw = env.get(ENV_PREFIX + f.name.upper())
            if raw is not None:
                values[f.name] = raw
        values.update({k: v for k, v in overrides.items() if v is not None})
        unknown = set(values) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError("unknown config keys: " + ", ".join(sorted(unknown)))
        if "rules" not in values:
            raise ValueError("config needs a rules path")
        if isinstance(values.get("strict"), str):
            values["strict"] = values["strict"].strip().lower() in ("1", "true", "yes", "on")
        if "port" in values:
            values["port"] = int(values["port"])
        return cls(**values)


class ServiceError(Exception):
    def __init__(self, status: int, code: str, detail: str, **extra):
        super().__init__(detail)
        self.status = status
        self.code = code
        self.detail = detail
        self.extra = extra

    def payload(self) -> dict:
        return {"error": self.code, "detail": self.detail, **self.extra}


class ExplanationService:
    """Request handling independent of the web framework.

    Every clustering is validated against the rule set at construction
    (strictly unless ``strict=False``). The 1:1 ``technical`` clustering is
    always available unless the factors file defines its own.
    """

    def __init__(self, ruleset: RuleSet, clusterings=(), default_clustering=None,
                 normalize="literal", strict=True):
        if normalize not in NORMALIZE_MODES:
            raise ValueError(f"normalize must be one of {NORMALIZE_MODES}")
        self.ruleset = ruleset
        table = {}
        for c in clusterings:
            table[c.name] = validate_against(ruleset, c, strict=strict).clustering
        table.setdefault("technical", identity_clustering(ruleset))
        self.clusterings: dict[str, Clustering] = table
        if default_clustering is None:
            default_clustering = next(iter(table))
        if default_clustering not in table:
            raise ValueError(f"default clustering {default_clustering!r} not loaded")
        self.default_clustering = default_clustering
        self.normalize = normalize

    @classmethod
    def from_config(cls, config: ServiceConfig) -> "ExplanationService":
        ruleset = load_rules(config.rules)
        clusterings = load_clusterings(config.factors).values() if config.factors else ()
        return cls(ruleset, clusterings, config.clustering, config.normalize, config.strict)

    def _resolve(self, clustering, normalize):
        name = clustering or self.default_clustering
        if name not in self.clusterings:
            raise ServiceError(404, "unknown_clustering", f"no clustering named {name!r}")
        mode = normalize or self.normalize
        if mode not in NORMALIZE_MODES:
            raise ServiceError(
                400, "bad_normalize", f"normalize must be one of {', '.join(NORMALIZE_MODES)}"
            )
        return self.clusterings[name], mode

    @staticmethod
    def _decode(body: bytes):
        if not body or not body.strip():
            raise ServiceError(400, "empty_body", "request body is empty")
        try:
            return json.loads(body)
        except (ValueError, UnicodeDecodeError) as exc:
            raise ServiceError(400, "malformed_json", str(exc)) from None

    @staticmethod
    def _record(obj, default_id):
        try:
            return record_from_mapping(obj, default_id)
        except FactorRelevanceError as exc:
            raise ServiceError(400, "malformed_record", str(exc)) from None

    def summary(self) -> dict:
        return {
            "rules": len(self.ruleset),
            "attributes": len(self.ruleset.attribute_universe),
            "classes": list(self.ruleset.class_labels),
            "total_coverage": self.ruleset.total_coverage,
            "clusterings": {name: len(c.factors) for name, c in self.clusterings.items()},
            "clustering": self.default_clustering,
            "normalize": self.normalize,
        }

    def explain_global(self, clustering=None, normalize=None) -> dict:
        c, mode = self._resolve(clustering, normalize)
        return explain_global(self.ruleset, c, mode).to_dict()

    def explain_local(self, body: bytes, clustering=None, normalize=None) -> dict:
        c, mode = self._resolve(clustering, normalize)
        obj = self._decode(body)
        if not isinstance(obj, dict) or not obj:
            raise ServiceError(400, "malformed_record", "body must be a non-empty JSON object")
        record = self._record(obj, "anonymous")
        try:
            return explain_local(self.ruleset, c, record, mode).to_dict()
        except NoActivationError as exc:
            raise ServiceError(422, "no_activation", str(exc), patient_id=exc.patient_id) from None

    def explain_batch(self, body: bytes, clustering=None, normalize=None) -> dict:
        c, mode = self._resolve(clustering, normalize)
        obj = self._decode(body)
        if not isinstance(obj, list):
            raise ServiceError(400, "malformed_batch", "body must be a JSON list of records")
        if not obj:
            raise ServiceError(400, "empty_batch", "batch needs at least one record")
        records = [self._record(o, f"row{i}") for i, o in enumerate(obj)]
        ids = [r.id for r in records]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise ServiceError(400, "duplicate_ids", "duplicate record ids: " + ", ".join(dupes))
        return batch_profiles(self.ruleset, c, records, mode).to_dict()


def create_app(service: ExplanationService | ServiceConfig):
    if isinstance(service, ServiceConfig):
        service = ExplanationService.from_config(service)

    app = FastAPI(title="factor-relevance", docs_url=None, redoc_url=None, openapi_url=None)
    app.state.service = service

    @app.exception_handler(ServiceError)
    async def _service_error(request, exc: ServiceError):
        return JSONResponse(exc.payload(), status_code=exc.status)

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(request, exc):
        code = {404: "not_found", 405: "method_not_allowed"}.get(exc.status_code, "http_error")
        return JSONResponse({"error": code, "detail": str(exc.detail)}, status_code=exc.status_code)

    @app.get("/model/summary")
    def summary():
        return JSONResponse(service.summary())

    @app.get("/explain/global")
    def global_(clustering: str | None = None, normalize: str | None = None):
        return JSONResponse(service.explain_global(clustering, normalize))

    @app.post("/explain/local")
    async def local(request: Request, clustering: str | None = None, normalize: str | None = None):
        body = await request.body()
        return JSONResponse(service.explain_local(body, clustering, normalize))

    @app.post("/explain/batch")
    async def batch(request: Request, clustering: str | None = None, normalize: str | None = None):
        body = await request.body()
        return JSONResponse(service.explain_batch(body, clustering, normalize))

    return app


def serve(config: ServiceConfig) -> None:  # pragma: no cover - blocking
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")

