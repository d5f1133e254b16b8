"""FastAPI app serving the scoring wire protocol.

POST /v1/match_scores  {"pairs": [{"comment", "key_point", "topic"}]} -> {"scores": [...]}
POST /v1/quality       {"items": [{"text", "topic"}]}                 -> {"scores": [...]}

Batches are capped at 64 entries, matching what well-behaved clients send.
Errors are flat {"code", "message"} objects.
"""

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from kpa_scorer.models import Model

MAX_BATCH = 64


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


def _require_strings(entry: dict, fields: tuple[str, ...], where: str) -> list[str]:
    values = []
    for f in fields:
        v = entry.get(f)
        if not isinstance(v, str):
            raise ValueError(f"{where}: field {f!r} must be a string")
        values.append(v)
    return values


def create_app(model: Model) -> FastAPI:
    app = FastAPI(title="kpa-scorer")
    app.state.model = model

    @app.exception_handler(RequestValidationError)
    async def on_validation(request: Request, exc: RequestValidationError):
        return _error(400, "bad_request", "malformed request body")

    def parse_batch(body: dict, key: str, fields: tuple[str, ...]) -> list[list[str]]:
        batch = body.get(key)
        if not isinstance(batch, list):
            raise ValueError(f"body must carry a {key!r} list")
        if len(batch) > MAX_BATCH:
            raise ValueError(f"batch of {len(batch)} exceeds the {MAX_BATCH}-entry cap")
        out = []
        for i, entry in enumerate(batch):
            if not isinstance(entry, dict):
                raise ValueError(f"{key}[{i}] must be an object")
            out.append(_require_strings(entry, fields, f"{key}[{i}]"))
        return out

    @app.post("/v1/match_scores")
    async def match_scores(body: dict):
        try:
            pairs = parse_batch(body, "pairs", ("comment", "key_point", "topic"))
        except ValueError as exc:
            return _error(400, "bad_request", str(exc))
        scores = [model.match_score(c, k, t) for c, k, t in pairs]
        return {"scores": scores}

    @app.post("/v1/quality")
    async def quality(body: dict):
        try:
            items = parse_batch(body, "items", ("text", "topic"))
        except ValueError as exc:
            return _error(400, "bad_request", str(exc))
        scores = [model.quality_score(text, topic) for text, topic in items]
        return {"scores": scores}

    @app.get("/v1/health")
    async def health():
        return {"status": "ok", "model": model.kind}

    return app
