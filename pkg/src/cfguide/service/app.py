"""HTTP/JSON API for the review loop.

Endpoints:
  POST /v1/answer                      one {question, visual_ref} or {"batch": [...]}
  GET  /v1/items?status=&page=         entropy-descending summaries
  GET  /v1/items/{id}                  full item
  POST /v1/items/{id}/annotation       {reference_text, spans, editor}
  POST /v1/items/{id}/regenerate       optional GuidanceConfig body
  POST /v1/items/{id}/deliver
  GET  /v1/export                      JSONL event log + metrics header

Errors are {code, message, detail}. A static review UI is mounted at /ui when
configured.
"""

import os

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from cfguide.annotation import ExpertAnnotation, HighlightSpan
from cfguide.errors import ConflictError, ContractViolation, NotFoundError
from cfguide.guidance import GuidanceConfig


def _error(status, code, message, detail=None):
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "detail": detail},
    )


def create_app(engine, static_dir=None, auth_token=None, show_initial_answer=True):
    app = FastAPI(title="cfguide review service")

    @app.middleware("http")
    async def check_auth(request: Request, call_next):
        if auth_token and request.url.path.startswith("/v1"):
            if request.headers.get("X-Auth-Token") != auth_token:
                return _error(401, "unauthorized", "missing or wrong auth token")
        return await call_next(request)

    @app.exception_handler(NotFoundError)
    async def not_found(request, exc):
        return _error(404, "not_found", str(exc))

    @app.exception_handler(ConflictError)
    async def conflict(request, exc):
        return _error(409, "conflict", str(exc))

    @app.exception_handler(ContractViolation)
    async def invalid(request, exc):
        return _error(422, "validation", str(exc))

    def _item_payload(item):
        data = item.to_dict()
        if not show_initial_answer and item.status == "pending":
            data["initial_answer"] = None
            data["initial_token_probs"] = []
        return data

    @app.post("/v1/answer")
    async def answer(request: Request):
        body = await request.json()
        if "batch" in body:
            items = engine.answer_batch(body["batch"])
            return {"items": [_item_payload(i) for i in items]}
        item = engine.answer(body["question"], body.get("visual_ref"))
        return _item_payload(item)

    @app.get("/v1/items")
    async def list_items(status: str = None, page: int = 0, page_size: int = 50):
        return {"items": engine.list_items(status, page, page_size)}

    @app.get("/v1/items/{item_id}")
    async def get_item(item_id: str):
        return _item_payload(engine.store.get(item_id))

    @app.post("/v1/items/{item_id}/annotation")
    async def annotate(item_id: str, request: Request):
        body = await request.json()
        annotation = ExpertAnnotation(
            reference_text=body["reference_text"],
            spans=[HighlightSpan(s[0], s[1], s[2] if len(s) > 2 else "expert")
                   for s in body.get("spans", [])],
            editor=body.get("editor", "unknown"),
        )
        return _item_payload(engine.submit_annotation(item_id, annotation))

    @app.post("/v1/items/{item_id}/regenerate")
    async def regenerate(item_id: str, request: Request):
        raw = await request.body()
        cfg = None
        if raw:
            body = await request.json()
            if body:
                cfg = GuidanceConfig.from_dict(body)
        return _item_payload(engine.regenerate(item_id, cfg))

    @app.post("/v1/items/{item_id}/deliver")
    async def deliver(item_id: str):
        return _item_payload(engine.deliver(item_id))

    @app.get("/v1/export")
    async def export():
        return PlainTextResponse(engine.export_session(), media_type="application/jsonl")

    if static_dir and os.path.isdir(static_dir):
        app.mount("/ui", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def create_app_from_config(config):
    engine = config.build_engine()
    return create_app(
        engine,
        static_dir=config.static_dir,
        auth_token=config.auth_token,
        show_initial_answer=config.show_initial_answer,
    )
