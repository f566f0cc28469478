"""Pydantic request/response models for the session API."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class CreateSessionRequest(BaseModel):
    body: Optional[str] = Field(default=None, description="body-basis asset id; defaults to the first in the library")


class ShapeRequest(BaseModel):
    weights: list[float]


class FrameRequest(BaseModel):
    index: int


class MotionRequest(BaseModel):
    asset_id: str


class AssetInfo(BaseModel):
    id: str
    kind: str
    name: str
    textures: dict[str, str] = {}
    has_thumbnail: bool = False


class MotionState(BaseModel):
    asset_id: str
    frame_count: int
    frame_time: float
    warnings: list[str] = []


class SessionInfo(BaseModel):
    id: str
    revision: int
    body: str
    attribute_names: list[str]
    weight_bounds: list[tuple[float, float]]
    weights: list[float]
    garments: list[str]
    motion: Optional[MotionState] = None
    frame: int = 0


class ShapeResponse(BaseModel):
    applied: list[float]
    revision: int


class MutationResponse(BaseModel):
    revision: int


class MotionResponse(BaseModel):
    revision: int
    frame_count: int
    frame_time: float
    warnings: list[str]
