"""HTTP API over a loaded graph snapshot and an optional model checkpoint.

The server is stateless and read-only: every endpoint works off immutable
state loaded at startup, so concurrent requests need no locking and
identical requests return identical payloads (given fixed seed params).
Errors follow one schema: {"status": int, "code": str, "message": str}.
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse

from . import queries
from .classifier import TASKS, CheckpointBundle, forward, LabeledInstance, load_checkpoint, softmax
from .errors import ArtGraphError, NotFoundError, ValidationError
from .queries import resolve_entity
from .graph import PropertyGraph
from .schema import NodeLabel

# Client-side routes that must serve the single-page app on hard reloads.
SPA_ROUTES = ("/", "/entity/{rest:path}", "/queries")


def _error_response(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"status": status, "code": code, "message": message},
    )


def _entity_card(graph: PropertyGraph, nid: int) -> dict:
    node = graph.nodes[nid]
    return {"id": nid, "label": node.label.value, "name": node.name, "props": node.props}


def _parse_id(raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"not a numeric entity id: {raw!r}") from None


def create_app(
    graph: PropertyGraph,
    checkpoint: CheckpointBundle | str | Path | None = None,
    static_dir: str | Path | None = None,
    cors_origins: list[str] | None = None,
) -> FastAPI:
    if isinstance(checkpoint, (str, Path)):
        checkpoint = load_checkpoint(checkpoint)

    app = FastAPI(title="artgraph", version="0.1.0", docs_url="/api/docs", openapi_url="/api/openapi.json")
    if cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=cors_origins,
            allow_methods=["GET", "POST"],
            allow_headers=["*"],
        )

    @app.exception_handler(ValidationError)
    async def _validation_handler(request: Request, exc: ValidationError):
        return _error_response(400, "validation", str(exc))

    @app.exception_handler(RequestValidationError)
    async def _request_validation_handler(request: Request, exc: RequestValidationError):
        return _error_response(400, "validation", str(exc.errors()[:3]))

    @app.exception_handler(NotFoundError)
    async def _not_found_handler(request: Request, exc: NotFoundError):
        return _error_response(404, "not_found", str(exc))

    @app.exception_handler(ArtGraphError)
    async def _internal_handler(request: Request, exc: ArtGraphError):
        return _error_response(500, "internal", str(exc))

    @app.get("/api/home")
    def home(seed: int = 0, n: int = 6):
        artists = queries.random_entities(graph, NodeLabel.ARTIST, n, seed)
        artworks = queries.random_entities(graph, NodeLabel.ARTWORK, n, seed + 1)
        return {
            "artists": [_entity_card(graph, nid) for nid in artists],
            "artworks": [_entity_card(graph, nid) for nid in artworks],
        }

    @app.get("/api/entity/{entity_id}")
    def entity(entity_id: str):
        return queries.entity_profile(graph, _parse_id(entity_id)).to_dict()

    @app.get("/api/stats")
    def stats():
        return graph.stats().to_dict()

    @app.get("/api/queries/influence")
    def influence(
        from_: str = Query(alias="from"),
        to: str = Query(),
        max_depth: int = 3,
    ):
        src = resolve_entity(graph, from_, (NodeLabel.ARTIST,))
        dst = resolve_entity(graph, to, (NodeLabel.ARTIST,))
        started = time.perf_counter()
        paths = queries.influence_paths(graph, src, dst, max_depth)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        return {
            "from": _entity_card(graph, src),
            "to": _entity_card(graph, dst),
            "max_depth": max_depth,
            "paths": [
                {
                    "nodes": [_entity_card(graph, nid) for nid in p.nodes],
                    "edge_types": [t.value for t in p.edge_types],
                }
                for p in paths
            ],
            "elapsed_ms": round(elapsed_ms, 3),
        }

    @app.get("/api/queries/displaced")
    def displaced():
        started = time.perf_counter()
        report = queries.artworks_displaced(graph)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        return {
            "rows": [
                {
                    "artwork": _entity_card(graph, row.artwork),
                    "completed_country": _entity_card(graph, row.completed_country),
                    "stored_country": _entity_card(graph, row.stored_country),
                }
                for row in report.rows
            ],
            "skipped": report.skipped,
            "elapsed_ms": round(elapsed_ms, 3),
        }

    @app.get("/api/queries/at_location")
    def at_location(place: str):
        nid = resolve_entity(
            graph, place, (NodeLabel.GALLERY, NodeLabel.CITY, NodeLabel.COUNTRY)
        )
        started = time.perf_counter()
        artworks = queries.artworks_at_location(graph, nid)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        return {
            "place": _entity_card(graph, nid),
            "artworks": [_entity_card(graph, a) for a in artworks],
            "elapsed_ms": round(elapsed_ms, 3),
        }

    @app.post("/api/predict")
    def predict_endpoint(visual: list[float], k: int = 5):
        if checkpoint is None:
            return _error_response(503, "no_model", "no checkpoint loaded")
        config = checkpoint.config
        if len(visual) != config.visual_dim:
            raise ValidationError(
                f"expected {config.visual_dim} floats, got {len(visual)}"
            )
        if k < 1:
            raise ValidationError("k must be >= 1")
        instance = LabeledInstance(0, np.asarray(visual, dtype=np.float64), (0, 0, 0))
        trace = forward([instance], checkpoint.params, config)
        vocab = checkpoint.label_vocab or {}
        out = {}
        for task in TASKS:
            probs = softmax(trace.logits[task][0])
            names = vocab.get(task) or [str(i) for i in range(len(probs))]
            top = np.argsort(-probs)[: min(k, len(probs))]
            out[task] = [
                {"class": int(i), "name": names[int(i)], "probability": float(probs[i])}
                for i in top
            ]
        return {"mode": config.mode, "topk": out}

    if static_dir is not None:
        static_dir = Path(static_dir)
        index = static_dir / "index.html"

        @app.get("/assets/{rest:path}")
        def assets(rest: str):
            target = (static_dir / rest).resolve()
            if not target.is_file() or static_dir.resolve() not in target.parents:
                return _error_response(404, "not_found", f"no asset {rest!r}")
            return FileResponse(target)

        for route in SPA_ROUTES:

            @app.get(route, include_in_schema=False)
            def spa(rest: str = ""):
                return FileResponse(index)

    return app
