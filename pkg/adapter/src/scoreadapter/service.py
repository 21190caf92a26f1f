"""FastAPI app implementing the remote-scorer wire contract.

    POST /score/frame     {frame_feature, entity: {id, name, type}, prompt} -> {score}
    POST /score/relation  {frame_feature, context, subject, relation, candidate, prompt} -> {score}
    POST /score/qa        {frame_feature, context, question, options} -> {scores}
    GET  /health          -> {status, model_ids}

The service is stateless across requests; identical requests always get
identical responses, whatever the interleaving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field, field_validator

from .models import ModelLoadError, ScoringModel, load_model


@dataclass
class AdapterConfig:
    model: str = "embedlex-v1"
    anchors_path: str | None = None
    device: str = "cpu"
    max_batch: int = 32
    host: str = "127.0.0.1"
    port: int = 8099


class EntityRef(BaseModel):
    id: str
    name: str = ""
    type: str = ""


def _check_finite(values: list[float]) -> list[float]:
    if not values:
        raise ValueError("must not be empty")
    if any(not math.isfinite(v) for v in values):
        raise ValueError("must contain only finite numbers")
    return values


class FrameRequest(BaseModel):
    frame_feature: list[float]
    entity: EntityRef
    prompt: str = ""

    _finite = field_validator("frame_feature")(classmethod(lambda cls, v: _check_finite(v)))


class RelationRequest(BaseModel):
    frame_feature: list[float]
    context: str = ""
    subject: str
    relation: str
    candidate: str
    prompt: str = ""

    _finite = field_validator("frame_feature")(classmethod(lambda cls, v: _check_finite(v)))


class QaRequest(BaseModel):
    frame_feature: list[float]
    context: str = ""
    question: str
    options: list[str] = Field(min_length=1)

    _finite = field_validator("frame_feature")(classmethod(lambda cls, v: _check_finite(v)))


class ScoreResponse(BaseModel):
    score: float = Field(ge=0.0, le=1.0)


class ScoresResponse(BaseModel):
    scores: list[float]


def create_app(config: AdapterConfig | None = None) -> FastAPI:
    config = config or AdapterConfig()
    app = FastAPI(title="scoreadapter", version="0.1.0")
    app.state.config = config
    app.state.model = None
    app.state.load_error = None
    try:
        app.state.model = load_model(config.model, config.anchors_path)
    except ModelLoadError as exc:
        app.state.load_error = str(exc)

    def model_or_503() -> ScoringModel:
        if app.state.model is None:
            raise HTTPException(status_code=503, detail=f"model not loaded: {app.state.load_error}")
        return app.state.model

    @app.get("/health")
    def health():
        if app.state.model is None:
            return {"status": "error", "model_ids": [], "error": app.state.load_error}
        return {"status": "ok", "model_ids": [app.state.model.model_id]}

    @app.post("/score/frame", response_model=ScoreResponse)
    def score_frame(request: FrameRequest):
        model = model_or_503()
        score = model.score_frame(
            request.frame_feature,
            request.entity.id,
            request.entity.name,
            request.entity.type,
            request.prompt,
        )
        return ScoreResponse(score=score)

    @app.post("/score/relation", response_model=ScoreResponse)
    def score_relation(request: RelationRequest):
        model = model_or_503()
        score = model.score_relation(
            request.frame_feature,
            request.context,
            request.subject,
            request.relation,
            request.candidate,
            request.prompt,
        )
        return ScoreResponse(score=score)

    @app.post("/score/qa", response_model=ScoresResponse)
    def score_qa(request: QaRequest):
        model = model_or_503()
        scores = model.score_qa(
            request.frame_feature, request.context, request.question, request.options
        )
        return ScoresResponse(scores=[min(1.0, max(0.0, s)) for s in scores])

    return app
