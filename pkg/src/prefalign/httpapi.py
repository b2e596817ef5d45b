"""JSON/HTTP interface over the session store.

Endpoints: POST /sessions; GET /sessions/{id}; POST /sessions/{id}/evaluate;
GET /sessions/{id}/history; POST /sessions/{id}/train; GET /sessions/{id}/pairs.
Errors are JSON objects {code, message, detail}. Responses in control-condition
sessions never carry an alignment score.
"""

from __future__ import annotations

from dataclasses import asdict, replace
from typing import Any

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .core import DatasetError
from .dataio import load_preferences
from .service import (
    Condition,
    Iteration,
    Session,
    SessionStore,
    TrainResult,
    UnknownSessionError,
    dataset_from_payload,
)
from .trainer import LossKind, OptimizerKind, TrainConfig


class CreateSessionBody(BaseModel):
    condition: str
    gamma: float = 1.0
    dataset: dict[str, Any] | None = None
    preferences_file: str | None = None
    display_limit: int | None = None
    scoring_limit: int | None = None
    subset_seed: int = 0


class EvaluateBody(BaseModel):
    weights: list[float]


class TrainBody(BaseModel):
    config: dict[str, Any] = Field(default_factory=dict)
    grid_learning_rates: list[float] | None = None
    grid_batch_sizes: list[int] | None = None


def _error(status: int, code: str, message: str, detail: str = "") -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "detail": detail},
    )


def iteration_payload(it: Iteration, condition: Condition) -> dict:
    out = {
        "index": it.index,
        "weights": list(it.weights),
        "accuracy": it.accuracy,
        "submitted_at": it.submitted_at,
        "per_pair": [asdict(p) for p in it.per_pair],
    }
    if condition is Condition.ALIGNMENT:
        if it.tac is not None:
            out["tac"] = it.tac
        if it.warning is not None:
            out["warning"] = it.warning
    return out


def session_payload(session: Session) -> dict:
    return {
        "id": session.id,
        "condition": session.condition.value,
        "gamma": session.gamma,
        "created_at": session.created_at,
        "num_pairs": len(session.dataset.records),
        "num_display_pairs": (
            len(session.display_indices)
            if session.display_indices is not None
            else len(session.dataset.records)
        ),
        "num_scoring_pairs": (
            len(session.scoring_indices)
            if session.scoring_indices is not None
            else len(session.dataset.records)
        ),
        "dim": session.dataset.dim,
        "iteration_count": len(session.iterations),
        "train_count": len(session.train_results),
    }


def train_payload(result: TrainResult) -> dict:
    out = asdict(result)
    out["grid_cell"] = list(result.grid_cell) if result.grid_cell else None
    return out


def config_from_json(obj: dict[str, Any]) -> TrainConfig:
    cfg = TrainConfig()
    known = dict(obj)
    if "loss_kind" in known:
        known["loss_kind"] = LossKind(known["loss_kind"])
    if "optimizer" in known:
        known["optimizer"] = OptimizerKind(known["optimizer"])
    try:
        return replace(cfg, **known)
    except TypeError as exc:
        raise ValueError(f"unknown training option: {exc}") from exc


def create_app(store: SessionStore) -> FastAPI:
    app = FastAPI(title="prefalign tuning service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(UnknownSessionError)
    async def _unknown(request: Request, exc: UnknownSessionError):
        return _error(404, "unknown-session", "no such session", str(exc))

    @app.exception_handler(ValueError)
    async def _bad_value(request: Request, exc: ValueError):
        code = "invalid-dataset" if isinstance(exc, DatasetError) else "invalid-request"
        return _error(400, code, str(exc))

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        try:
            condition = Condition(body.condition)
        except ValueError:
            return _error(400, "unknown-condition", f"unknown condition {body.condition!r}")
        if (body.dataset is None) == (body.preferences_file is None):
            return _error(
                400,
                "invalid-request",
                "provide exactly one of 'dataset' or 'preferences_file'",
            )
        try:
            if body.dataset is not None:
                dataset = dataset_from_payload(body.dataset)
            else:
                dataset = load_preferences(body.preferences_file)
        except (KeyError, TypeError) as exc:
            return _error(400, "invalid-dataset", "malformed dataset payload", str(exc))
        except ValueError as exc:
            return _error(400, "invalid-dataset", str(exc))
        session = store.create_session(
            dataset,
            condition,
            body.gamma,
            display_limit=body.display_limit,
            scoring_limit=body.scoring_limit,
            subset_seed=body.subset_seed,
        )
        return session_payload(session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return session_payload(store.get(session_id))

    @app.post("/sessions/{session_id}/evaluate")
    def evaluate(session_id: str, body: EvaluateBody):
        session = store.get(session_id)
        iteration = store.evaluate(session_id, body.weights)
        return iteration_payload(iteration, session.condition)

    @app.get("/sessions/{session_id}/history")
    def history(session_id: str):
        return store.history(session_id)

    @app.post("/sessions/{session_id}/train")
    def auto_train(session_id: str, body: TrainBody):
        config = config_from_json(body.config)
        try:
            result = store.auto_train(
                session_id,
                config,
                grid_learning_rates=body.grid_learning_rates,
                grid_batch_sizes=body.grid_batch_sizes,
            )
        except UnknownSessionError:
            raise
        except Exception as exc:
            return _error(400, "training-failed", f"[train] {type(exc).__name__}", str(exc))
        return train_payload(result)

    @app.get("/sessions/{session_id}/pairs")
    def pairs(session_id: str, weights: str | None = None, all_pairs: bool = False):
        parsed = None
        if weights:
            try:
                parsed = [float(x) for x in weights.split(",")]
            except ValueError:
                return _error(400, "invalid-request", f"bad weights query {weights!r}")
        return store.pair_summaries(session_id, parsed, all_pairs=all_pairs)

    return app
