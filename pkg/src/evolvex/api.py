"""Read-only HTTP JSON service exposing forecasts to the companion UI.

All state is loaded and the four-stage forecast precomputed before the
server binds; every endpoint is a pure read over that immutable state, so
repeated calls return identical bodies for a fixed checkpoint.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware

from .graphgen import TemporalDataset, split_dataset
from .metrics import to_simplex
from .model import EvolutionModel
from .predict import EvolutionForecast, rank_candidates, rollout

MAX_STAGE = 4


@dataclass
class ServeState:
    conditioning: TemporalDataset
    model: EvolutionModel
    forecast: EvolutionForecast


def build_state(ds: TemporalDataset, model: EvolutionModel) -> ServeState:
    """Split off the horizon, roll the model forward, freeze the result."""
    horizon = min(MAX_STAGE, ds.n_steps - 1)
    conditioning, _ = split_dataset(ds, horizon)
    return ServeState(
        conditioning=conditioning,
        model=model,
        forecast=rollout(conditioning, model, MAX_STAGE),
    )


def _country(state: ServeState, user: int) -> str:
    profile = state.conditioning.profiles[user]
    return state.conditioning.vocabularies["location"][profile.location]


def _cumulative_adjacency(state: ServeState, stage: int) -> np.ndarray:
    """Known graph at a stage: conditioning edges plus earlier predicted edges."""
    adj = state.conditioning.snapshots[-1].adjacency.astype(bool)
    for s in range(1, stage):
        adj = adj | state.forecast.stage(s).predicted_edges
    return adj


def create_app(state: ServeState | None = None,
               static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="evolvex forecast service", version="1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET"],
        allow_headers=["*"],
    )
    app.state.serve_state = state

    def current() -> ServeState:
        st = app.state.serve_state
        if st is None:
            raise HTTPException(status_code=503, detail="service is still loading")
        return st

    def parse_stage(raw: str) -> int:
        try:
            stage = int(raw)
        except ValueError:
            raise HTTPException(status_code=400,
                                detail=f"stage must be an integer, got {raw!r}")
        if not 1 <= stage <= MAX_STAGE:
            raise HTTPException(status_code=400,
                                detail=f"stage must be in [1, {MAX_STAGE}], got {stage}")
        return stage

    def require_user(st: ServeState, user: int) -> int:
        if not 0 <= user < st.conditioning.n_users:
            raise HTTPException(status_code=404, detail=f"unknown user {user}")
        return user

    @app.get("/api/users")
    def list_users() -> list[dict]:
        st = current()
        vocab = st.conditioning.vocabularies
        return [
            {
                "id": i,
                "age": p.age,
                "gender": vocab["gender"][p.gender],
                "occupation": vocab["occupation"][p.occupation],
                "country": vocab["location"][p.location],
            }
            for i, p in enumerate(st.conditioning.profiles)
        ]

    @app.get("/api/users/{user}/suggestions")
    def suggestions(user: int, stage: str = Query("1")) -> list[dict]:
        st = current()
        require_user(st, user)
        s = parse_stage(stage)
        known = _cumulative_adjacency(st, s)
        stage_forecast = st.forecast.stage(s)
        ranked = rank_candidates(user, stage_forecast.edge_probs, 10,
                                 exclude_existing=True, adjacency=known)
        return [
            {
                "id": j,
                "confidence": float(stage_forecast.edge_probs[user, j]),
                "country": _country(st, j),
            }
            for j in ranked
        ]

    @app.get("/api/users/{user}/map")
    def country_map(user: int, stage: str = Query("1")) -> dict:
        st = current()
        require_user(st, user)
        s = parse_stage(stage)
        known = _cumulative_adjacency(st, s)
        stage_forecast = st.forecast.stage(s)
        base = st.conditioning.snapshots[-1].adjacency
        current_conns = [
            {"id": int(j), "country": _country(st, int(j))}
            for j in np.flatnonzero(base[user])
        ]
        ranked = rank_candidates(user, stage_forecast.edge_probs, 10,
                                 exclude_existing=True, adjacency=known)
        predicted = [
            {
                "id": j,
                "country": _country(st, j),
                "confidence": float(stage_forecast.edge_probs[user, j]),
            }
            for j in ranked
        ]
        return {"current": current_conns, "predicted": predicted}

    @app.get("/api/users/{user}/activities")
    def activities(user: int) -> dict:
        st = current()
        require_user(st, user)
        history = []
        steps = []
        for snap in st.conditioning.snapshots:
            counts = snap.post_counts()[user].astype(np.float64)
            total = counts.sum()
            history.append((counts / total if total > 0 else counts).tolist())
            steps.append(snap.step)
        predicted = [
            {
                "stage": s,
                "probs": to_simplex(st.forecast.stage(s).activity_probs[user])[0].tolist(),
            }
            for s in range(1, len(st.forecast.stages) + 1)
        ]
        return {
            "categories": list(st.conditioning.category_vocabulary),
            "steps": steps,
            "history": history,
            "predicted": predicted,
        }

    if static_dir and os.path.isdir(static_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
