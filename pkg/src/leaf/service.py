"""REST layer: request validation, model registry, generation and export.

Error responses always carry a stable machine-readable code and the request
id: ``{"error": {"code": ..., "message": ..., "fields": [...]}, "request_id": ...}``.
"""

from __future__ import annotations

import asyncio
import logging
import time
import uuid
from typing import Literal

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field, model_validator

from . import __version__
from .distractors import SemanticNeighborIndex, demo_semantic_index, normalize_option
from .errors import CheckpointError, EmptyInputError, GenerationError
from .exports import canonical_json, to_gift
from .pipeline import generate_mcqs
from .settings import Settings
from .textmodel import StubModel, TASK_DISTRACTOR, TASK_QG

logger = logging.getLogger(__name__)


class WireDistractor(BaseModel):
    text: str = Field(min_length=1)
    origin: Literal["model", "semantic"]
    similarity: float | None = Field(default=None, ge=0.0, le=1.0)


class WireMCQItem(BaseModel):
    question: str = Field(min_length=1)
    answer: str = Field(min_length=1)
    distractors: list[WireDistractor] = Field(min_length=1)
    passage_index: int = Field(default=0, ge=0)
    shortfall: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _distractor_rules(self):
        keys = [normalize_option(d.text) for d in self.distractors]
        if normalize_option(self.answer) in keys:
            raise ValueError("a distractor equals the answer")
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate distractors")
        return self


class GenerateRequest(BaseModel):
    text: str = Field(min_length=1, max_length=100_000)
    count: int = Field(ge=1, le=50)
    distractors_per_question: int = Field(default=3, ge=1, le=10)
    use_semantic_fallback: bool = True


class GenerateResponse(BaseModel):
    items: list[WireMCQItem]
    partial: bool
    warnings: list[str]
    request_id: str


class ExportRequest(BaseModel):
    items: list[WireMCQItem]
    format: Literal["json", "gift"]


class HealthResponse(BaseModel):
    status: str
    models: dict[str, bool]
    version: str


class ModelRegistry:
    """The handles the service was booted with; loaded once, never swapped."""

    def __init__(self, qg=None, distractor=None, fallback_index: SemanticNeighborIndex | None = None):
        self.qg = qg
        self.distractor = distractor
        self.fallback_index = fallback_index

    @property
    def ready(self) -> bool:
        return self.qg is not None and self.distractor is not None


def _load_registry(settings: Settings) -> ModelRegistry:
    if settings.stub_models:
        logger.info("stub mode: serving deterministic scripted models")
        return ModelRegistry(
            StubModel(TASK_QG), StubModel(TASK_DISTRACTOR), demo_semantic_index()
        )
    from .textmodel import load_handle

    qg = distractor = index = None
    if settings.qg_model_dir:
        try:
            qg = load_handle(settings.qg_model_dir)
        except CheckpointError as exc:
            logger.warning("qg model not loaded: %s", exc)
    if settings.distractor_model_dir:
        try:
            distractor = load_handle(settings.distractor_model_dir)
        except CheckpointError as exc:
            logger.warning("distractor model not loaded: %s", exc)
    if settings.semantic_index_path:
        try:
            index = SemanticNeighborIndex.load(settings.semantic_index_path)
        except (OSError, KeyError, ValueError) as exc:
            logger.warning("semantic index not loaded: %s", exc)
    return ModelRegistry(qg, distractor, index)


def _error_body(request: Request, code: str, message: str, fields=None) -> dict:
    body = {
        "error": {"code": code, "message": message},
        "request_id": getattr(request.state, "request_id", ""),
    }
    if fields:
        body["error"]["fields"] = fields
    return body


def create_app(settings: Settings | None = None, *, models: ModelRegistry | None = None) -> FastAPI:
    """Build the application; tests inject a stubbed ``models`` registry."""
    settings = settings or Settings()
    registry = models if models is not None else _load_registry(settings)

    app = FastAPI(title="leaf", version=__version__)
    app.state.registry = registry
    app.state.settings = settings

    if settings.cors_origin:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=[o.strip() for o in settings.cors_origin.split(",")],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.middleware("http")
    async def request_context(request: Request, call_next):
        request.state.request_id = uuid.uuid4().hex
        start = time.perf_counter()
        response = await call_next(request)
        logger.info(
            '{"request_id": "%s", "method": "%s", "path": "%s", "status": %d, "duration_ms": %.1f}',
            request.state.request_id, request.method, request.url.path,
            response.status_code, (time.perf_counter() - start) * 1000,
        )
        response.headers["x-request-id"] = request.state.request_id
        return response

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        fields = [
            {"loc": [str(part) for part in e["loc"]], "message": e["msg"]}
            for e in exc.errors()
        ]
        return JSONResponse(
            status_code=400,
            content=_error_body(request, "validation_error", "request validation failed", fields),
        )

    @app.exception_handler(EmptyInputError)
    async def on_empty_input(request: Request, exc: EmptyInputError):
        return JSONResponse(status_code=422, content=_error_body(request, "empty_input", str(exc)))

    @app.exception_handler(GenerationError)
    async def on_generation_error(request: Request, exc: GenerationError):
        return JSONResponse(
            status_code=500, content=_error_body(request, "generation_failed", str(exc))
        )

    @app.get("/api/v1/health", response_model=HealthResponse)
    async def health():
        loaded = {"qg": registry.qg is not None, "distractor": registry.distractor is not None}
        return HealthResponse(
            status="ok" if all(loaded.values()) else "degraded",
            models=loaded,
            version=__version__,
        )

    @app.post("/api/v1/generate", response_model=GenerateResponse)
    async def generate(request: Request, body: GenerateRequest):
        if not registry.ready:
            return JSONResponse(
                status_code=503,
                content=_error_body(request, "models_not_loaded", "generation models are not loaded"),
            )

        def run():
            return generate_mcqs(
                {"qg": registry.qg, "distractor": registry.distractor},
                registry.fallback_index,
                body.text,
                body.count,
                k=body.distractors_per_question,
                use_semantic_fallback=body.use_semantic_fallback,
            )

        loop = asyncio.get_running_loop()
        try:
            items = await asyncio.wait_for(
                loop.run_in_executor(None, run), timeout=settings.request_timeout_s
            )
        except asyncio.TimeoutError:
            return JSONResponse(
                status_code=504,
                content=_error_body(
                    request, "timeout",
                    f"generation exceeded {settings.request_timeout_s:.0f} s",
                ),
            )
        warnings = []
        partial = len(items) < body.count
        if partial:
            warnings.append(f"returned {len(items)} of {body.count} requested questions")
        short = sum(1 for item in items if item.shortfall)
        if short:
            warnings.append(f"{short} question(s) have fewer than the requested distractors")
        return GenerateResponse(
            items=[item.to_wire() for item in items],
            partial=partial,
            warnings=warnings,
            request_id=request.state.request_id,
        )

    @app.post("/api/v1/export")
    async def export(request: Request, body: ExportRequest):
        items = [item.model_dump() for item in body.items]
        if body.format == "gift":
            payload, media, filename = to_gift(items), "text/plain; charset=utf-8", "quiz.gift"
        else:
            payload, media, filename = canonical_json({"items": items}), "application/json", "quiz.json"
        return Response(
            content=payload,
            media_type=media,
            headers={"Content-Disposition": f'attachment; filename="{filename}"'},
        )

    return app
