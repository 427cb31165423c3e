"""HTTP scoring service.

POST /score {question, path, step_spans: [[start, end], ...]}
    -> {path_score, step_scores} with one step score per span.
GET /health -> {"status": "ok"}

Serving is stateless over a read-only model: identical requests return
identical scores.  Bad spans (out of bounds, unordered, overlapping) are
rejected with a 400.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .model import ScorerModel


class ScoreRequest(BaseModel):
    question: str
    path: str
    step_spans: list[tuple[int, int]] = Field(default_factory=list)


class ScoreResponse(BaseModel):
    path_score: float
    step_scores: list[float]


def _validate_spans(spans: list[tuple[int, int]], path_length: int) -> None:
    previous_end = 0
    for start, end in spans:
        if start < 0 or end > path_length:
            raise HTTPException(status_code=400, detail=f"span ({start}, {end}) out of bounds")
        if start > end:
            raise HTTPException(status_code=400, detail=f"span ({start}, {end}) is inverted")
        if start < previous_end:
            raise HTTPException(
                status_code=400,
                detail=f"span ({start}, {end}) overlaps or precedes an earlier span",
            )
        previous_end = end


def create_app(model: ScorerModel) -> FastAPI:
    app = FastAPI(title="verifier-service")
    model.eval()

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/score", response_model=ScoreResponse)
    def score(request: ScoreRequest) -> ScoreResponse:
        _validate_spans(request.step_spans, len(request.path))
        path_score, step_scores = model.score(
            request.question, request.path, list(request.step_spans)
        )
        return ScoreResponse(path_score=path_score, step_scores=step_scores)

    return app
