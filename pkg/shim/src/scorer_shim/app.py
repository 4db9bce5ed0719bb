"""FastAPI application exposing the scoring wire protocol.

Stateless request handling; malformed requests get 400 with a
machine-readable error body, provider failures get 500, and concurrency
beyond the configured bound gets 429 with a retry-after hint.
"""

from __future__ import annotations

import threading

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .models import (
    Health,
    InfillRequest,
    InfillResult,
    NextRequest,
    NextResult,
    SCHEMA_VERSION,
    SeqRequest,
    SeqResult,
)
from .providers import truncate_top_k, view_from_parts


def error_body(code: str, message: str) -> dict:
    return {"error": {"code": code, "message": message}}


def create_app(provider, max_concurrency: int = 16) -> FastAPI:
    app = FastAPI(title="scorer-shim", version="0.1.0")
    gate = threading.BoundedSemaphore(max_concurrency)

    @app.exception_handler(RequestValidationError)
    async def invalid_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content=error_body("invalid_request", str(exc.errors()[:3])))

    @app.exception_handler(Exception)
    async def model_failure(request: Request, exc: Exception):
        return JSONResponse(status_code=500, content=error_body("model_failure", str(exc)))

    def guarded(fn):
        if not gate.acquire(blocking=False):
            return JSONResponse(
                status_code=429,
                content=error_body("overloaded", "too many concurrent requests"),
                headers={"retry-after": "1"},
            )
        try:
            return fn()
        except ValueError as exc:
            return JSONResponse(status_code=400, content=error_body("invalid_payload", str(exc)))
        finally:
            gate.release()

    @app.post("/v1/causal/next")
    def causal_next(request: NextRequest):
        def work():
            results = []
            for item in request.items:
                tokens, logprobs, tail = truncate_top_k(
                    provider.next_distribution(item.context), request.top_k
                )
                results.append(NextResult(tokens=tokens, logprobs=logprobs, tail_mass=tail))
            return {
                "schema": SCHEMA_VERSION,
                "model_id": provider.model_id,
                "results": [r.model_dump() for r in results],
            }

        return guarded(work)

    @app.post("/v1/causal/seq")
    def causal_seq(request: SeqRequest):
        def work():
            results = [
                SeqResult(logprob=provider.sequence_logprob(item.context, item.continuation))
                for item in request.items
            ]
            return {
                "schema": SCHEMA_VERSION,
                "model_id": provider.model_id,
                "results": [r.model_dump() for r in results],
            }

        return guarded(work)

    @app.post("/v1/infill")
    def infill(request: InfillRequest):
        def work():
            results = []
            for item in request.items:
                view = view_from_parts(item.visible, item.spans, item.mask_fraction)
                out = InfillResult(logprob=provider.infill_logprob(view, item.condition))
                if item.include_unconditional:
                    out.unconditional_logprob = provider.infill_logprob(view, None)
                results.append(out)
            return {
                "schema": SCHEMA_VERSION,
                "model_id": provider.model_id,
                "results": [r.model_dump(exclude_none=True) for r in results],
            }

        return guarded(work)

    @app.get("/v1/health")
    def health():
        return Health(status="ok", model_id=provider.model_id, stub=provider.stub).model_dump(by_alias=True)

    return app
