"""FastAPI application serving the question-synthesis wire protocol.

Endpoints mirror the client contract exactly: five POST verbs under
``/v1/``, a health probe, and an optional decomposition translator.
Schema violations and postcondition failures answer 422 with an
``{"error", "detail"}`` body; disabled verbs answer 501.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .config import DISABLED, HostConfig, VERBS, OPTIONAL_VERBS
from .engines import EngineError, build_engine

MASK = "[MASK]"
QG_ENT_DECODE_ATTEMPTS = 3


class QgAnsRequest(BaseModel):
    context: str
    answer: str
    temperature: float | None = None


class QgEntRequest(BaseModel):
    context: str
    entity: str
    temperature: float | None = None


class DescribeRequest(BaseModel):
    row: str
    entity: str
    temperature: float | None = None


class FillMaskRequest(BaseModel):
    text: str
    hint: str = "OTHER"


class PerplexityRequest(BaseModel):
    text: str


class QdmrRequest(BaseModel):
    steps: list[str]


def _error(status: int, error: str, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": error, "detail": detail})


def create_app(config: HostConfig | None = None) -> FastAPI:
    config = config or HostConfig.default()
    app = FastAPI(title="mhqg model host", version="0.1.0")

    engines: dict[str, object] = {}
    for verb in VERBS + OPTIONAL_VERBS:
        spec = config.models.get(verb, DISABLED)
        if spec == DISABLED:
            continue
        engines[verb] = build_engine(spec, config.decode_seed, config.max_input_tokens)

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return _error(422, "invalid_request", str(exc.errors()[:3]))

    def guard(verb: str, *texts: str) -> JSONResponse | None:
        if verb not in engines:
            return _error(501, "verb_disabled", f"{verb} is not configured")
        for text in texts:
            if not text:
                return _error(422, "invalid_request", "empty input")
            if len(text.split()) > config.max_input_tokens:
                return _error(422, "input_too_long",
                              f"inputs are capped at {config.max_input_tokens} tokens")
        return None

    @app.get("/healthz")
    def healthz():
        return {"ok": True, "verbs": sorted(engines)}

    @app.post("/v1/qg_ans")
    def qg_ans(body: QgAnsRequest):
        if (fail := guard("qg_ans", body.context, body.answer)) is not None:
            return fail
        if body.answer not in body.context:
            return _error(422, "precondition", "answer must occur in the context")
        try:
            question = engines["qg_ans"].qg_ans(body.context, body.answer,
                                                temperature=body.temperature)
        except EngineError as exc:
            return _error(422, "generation_failed", str(exc))
        if not question.endswith("?") or body.answer.lower() in question.lower():
            return _error(422, "postcondition", "question leaks the answer or lacks '?'")
        return {"question": question}

    @app.post("/v1/qg_ent")
    def qg_ent(body: QgEntRequest):
        if (fail := guard("qg_ent", body.context, body.entity)) is not None:
            return fail
        if body.entity not in body.context:
            return _error(422, "precondition", "entity must occur in the context")
        # decode up to three times before giving up on entity containment
        last = ("", "")
        for _ in range(QG_ENT_DECODE_ATTEMPTS):
            try:
                question, answer = engines["qg_ent"].qg_ent(
                    body.context, body.entity, temperature=body.temperature)
            except EngineError as exc:
                return _error(422, "generation_failed", str(exc))
            last = (question, answer)
            if body.entity.lower() in question.lower() and answer in body.context:
                return {"question": question, "answer": answer}
        return _error(422, "postcondition",
                      f"entity missing from question after retries: {last[0]!r}")

    @app.post("/v1/describe")
    def describe(body: DescribeRequest):
        if (fail := guard("describe", body.row, body.entity)) is not None:
            return fail
        if body.entity not in body.row:
            return _error(422, "precondition", "entity must occur in the row")
        try:
            sentence = engines["describe"].describe(body.row, body.entity,
                                                    temperature=body.temperature)
        except EngineError as exc:
            return _error(422, "generation_failed", str(exc))
        if body.entity not in sentence:
            return _error(422, "postcondition", "description does not mention the entity")
        import re
        if re.search(r"[.!?] [A-Z0-9]", sentence):
            return _error(422, "postcondition", "description must be one sentence")
        return {"sentence": sentence}

    @app.post("/v1/fill_mask")
    def fill_mask(body: FillMaskRequest):
        if (fail := guard("fill_mask", body.text)) is not None:
            return fail
        if body.text.count(MASK) != 1:
            return _error(422, "precondition", "text must contain exactly one [MASK]")
        try:
            fill = engines["fill_mask"].fill_mask(body.text, body.hint)
        except EngineError as exc:
            return _error(422, "generation_failed", str(exc))
        if not fill or len(fill.split()) > 2:
            return _error(422, "postcondition", "fill must be one or two words")
        return {"fill": fill}

    @app.post("/v1/perplexity")
    def perplexity(body: PerplexityRequest):
        if (fail := guard("perplexity", body.text)) is not None:
            return fail
        try:
            score = engines["perplexity"].perplexity(body.text)
        except EngineError as exc:
            return _error(422, "generation_failed", str(exc))
        if not score > 0 or score != score or score in (float("inf"),):
            return _error(422, "postcondition", "score must be finite and positive")
        return {"score": score}

    @app.post("/v1/qdmr2q")
    def qdmr2q(body: QdmrRequest):
        if "qdmr2q" not in engines:
            return _error(501, "verb_disabled", "qdmr2q is not configured")
        if not body.steps:
            return _error(422, "precondition", "steps must be non-empty")
        try:
            question = engines["qdmr2q"].qdmr2q(body.steps)
        except EngineError as exc:
            return _error(422, "generation_failed", str(exc))
        return {"question": question}

    return app
