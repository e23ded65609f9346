"""HTTP transport: the scorer wire protocol as a FastAPI app."""
from __future__ import annotations

from typing import Any

from fastapi import FastAPI, Query
from pydantic import BaseModel

from .session import ModelSession


class ScoreBatch(BaseModel):
    requests: list[dict[str, Any]]


class MaskDebugRequest(BaseModel):
    id: str
    tokens: list[str]
    mask_index: int
    candidates: list[str] = []


def create_app(session: ModelSession) -> FastAPI:
    app = FastAPI(title="masked-word scorer", version="0.1.0")

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/info")
    def info() -> dict:
        return {
            "model_id": session.model_id,
            "vocab_hash": session.vocab_hash(),
            "lowercase": session.lowercase,
            "batch_size": session.batch_size,
        }

    @app.get("/vocab")
    def vocab(words: str = Query(default="")) -> dict[str, bool]:
        wanted = [w for w in words.split(",") if w]
        return session.contains(wanted)

    @app.post("/score")
    def score(batch: ScoreBatch) -> dict:
        return {"responses": session.score_batch(batch.requests)}

    @app.post("/debug/mask")
    def debug_mask(request: MaskDebugRequest) -> dict:
        payload = request.model_dump()
        if not payload["candidates"]:
            # candidates are irrelevant to masking; fill a valid placeholder
            payload["candidates"] = ["a", "b"]
        return session.debug_mask(payload)

    return app
