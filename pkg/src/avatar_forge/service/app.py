"""FastAPI application exposing the session API over an asset library."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Union

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles

from ..assets.library import AssetLibrary, scan_library
from ..retarget import UnmappedBoneError
from ..shape import ShapeError
from .schemas import (
    AssetInfo,
    CreateSessionRequest,
    FrameRequest,
    MotionRequest,
    MotionResponse,
    MutationResponse,
    SessionInfo,
    ShapeRequest,
    ShapeResponse,
)
from .sessions import (
    DEFAULT_TTL_SECONDS,
    InvalidStateError,
    Session,
    SessionStore,
    UnknownAssetError,
    UnknownSessionError,
)


def _session_info(session: Session) -> SessionInfo:
    basis = session.body.basis
    motion = None
    if session.motion is not None:
        motion = {
            "asset_id": session.motion.asset_id,
            "frame_count": session.motion.clip.frame_count,
            "frame_time": session.motion.clip.frame_time,
            "warnings": session.motion.warnings,
        }
    return SessionInfo(
        id=session.id,
        revision=session.revision,
        body=session.body_id,
        attribute_names=list(basis.attribute_names),
        weight_bounds=[(float(lo), float(hi)) for lo, hi in basis.weight_bounds],
        weights=[float(w) for w in session.weights],
        garments=sorted(session.garments),
        motion=motion,
        frame=session.frame,
    )


def create_app(
    library: Union[AssetLibrary, str, Path],
    session_ttl: float = DEFAULT_TTL_SECONDS,
    ui_dir: Optional[Path] = None,
) -> FastAPI:
    if not isinstance(library, AssetLibrary):
        library = scan_library(library)
    store = SessionStore(library, ttl_seconds=session_ttl)
    app = FastAPI(title="avatar-forge", version="0.1.0")
    app.state.store = store

    def get_session(session_id: str) -> Session:
        try:
            return store.get(session_id)
        except UnknownSessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None

    @app.get("/assets", response_model=list[AssetInfo])
    def list_assets():
        return [
            AssetInfo(
                id=e.id,
                kind=e.kind,
                name=e.name,
                textures={k: str(v.name) for k, v in e.textures.items()},
                has_thumbnail=e.thumbnail is not None,
            )
            for e in library.entries
        ]

    @app.post("/sessions", response_model=SessionInfo, status_code=201)
    def create_session(request: Optional[CreateSessionRequest] = None):
        body_id = request.body if request is not None else None
        try:
            session = store.create(body_id)
        except UnknownAssetError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        return _session_info(session)

    @app.get("/sessions/{session_id}", response_model=SessionInfo)
    def read_session(session_id: str):
        return _session_info(get_session(session_id))

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        try:
            store.drop(session_id)
        except UnknownSessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        return Response(status_code=204)

    @app.put("/sessions/{session_id}/shape", response_model=ShapeResponse)
    def set_shape(session_id: str, request: ShapeRequest):
        session = get_session(session_id)
        values = request.weights
        expected = session.body.basis.attribute_count
        problems = []
        if len(values) != expected:
            problems.append(
                {"field": "weights", "reason": f"expected {expected} values, got {len(values)}"}
            )
        else:
            for i, v in enumerate(values):
                if not np.isfinite(v):
                    problems.append({"field": f"weights[{i}]", "reason": "must be finite"})
        if problems:
            raise HTTPException(status_code=422, detail=problems)
        try:
            applied = store.set_shape(session, values)
        except ShapeError as exc:
            raise HTTPException(status_code=422, detail=[{"field": "weights", "reason": str(exc)}]) from None
        return ShapeResponse(applied=[float(v) for v in applied], revision=session.revision)

    @app.post("/sessions/{session_id}/garments/{garment_id}", response_model=MutationResponse)
    def attach_garment(session_id: str, garment_id: str):
        session = get_session(session_id)
        try:
            store.attach_garment(session, garment_id)
        except UnknownAssetError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        except InvalidStateError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        return MutationResponse(revision=session.revision)

    @app.delete("/sessions/{session_id}/garments/{garment_id}", response_model=MutationResponse)
    def detach_garment(session_id: str, garment_id: str):
        session = get_session(session_id)
        try:
            store.detach_garment(session, garment_id)
        except InvalidStateError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        return MutationResponse(revision=session.revision)

    @app.post("/sessions/{session_id}/motion", response_model=MotionResponse)
    def load_motion(session_id: str, request: MotionRequest):
        session = get_session(session_id)
        try:
            loaded = store.load_motion(session, request.asset_id)
        except UnknownAssetError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        except UnmappedBoneError as exc:
            raise HTTPException(
                status_code=409, detail={"error": str(exc), "missing": list(exc.missing)}
            ) from None
        return MotionResponse(
            revision=session.revision,
            frame_count=loaded.clip.frame_count,
            frame_time=loaded.clip.frame_time,
            warnings=loaded.warnings,
        )

    @app.put("/sessions/{session_id}/frame", response_model=MutationResponse)
    def set_frame(session_id: str, request: FrameRequest):
        session = get_session(session_id)
        try:
            store.set_frame(session, request.index)
        except InvalidStateError as exc:
            raise HTTPException(
                status_code=422, detail=[{"field": "index", "reason": str(exc)}]
            ) from None
        return MutationResponse(revision=session.revision)

    @app.get("/sessions/{session_id}/geometry")
    def get_geometry(session_id: str):
        session = get_session(session_id)
        payload = store.evaluate_payload(session)
        return Response(
            content=payload,
            media_type="application/octet-stream",
            headers={"X-Avatar-Revision": str(session.revision)},
        )

    @app.get("/sessions/{session_id}/geometry/layout")
    def get_layout(session_id: str):
        return store.topology(get_session(session_id))

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
