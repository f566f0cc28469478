"""In-memory session state and the engine calls behind each endpoint.

Sessions are mutated under a per-session lock so concurrent writers
serialize and the revision counter never skips. The service adds no math of
its own: geometry is exactly the offline pipeline (shape, retarget, skin)
for the session's current state.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..assets.library import AssetLibrary, load_body, load_garment, load_motion
from ..bvh import MotionClip
from ..geometry import joint_world_positions, skeleton_signature
from ..retarget import RetargetedMotion, build_retarget_map, retarget_clip
from ..shape import apply_shape
from ..skinning import skin_mesh, transfer_weights
from .payload import pack_geometry

DEFAULT_TTL_SECONDS = 30 * 60


class SessionError(Exception):
    pass


class UnknownSessionError(SessionError):
    pass


class UnknownAssetError(SessionError):
    pass


class InvalidStateError(SessionError):
    pass


@dataclass
class LoadedMotion:
    asset_id: str
    clip: MotionClip
    motion: RetargetedMotion
    warnings: list


@dataclass
class Session:
    id: str
    body_id: str
    body: object  # BodyAsset
    weights: np.ndarray
    garments: dict = field(default_factory=dict)  # id -> (mesh, binding)
    motion: Optional[LoadedMotion] = None
    frame: int = 0
    revision: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    last_used: float = field(default_factory=time.monotonic)


class SessionStore:
    """Thread-safe session registry with idle eviction."""

    def __init__(self, library: AssetLibrary, ttl_seconds: float = DEFAULT_TTL_SECONDS):
        self.library = library
        self.ttl = ttl_seconds
        self._sessions: dict = {}
        self._registry_lock = threading.Lock()
        self._bodies: dict = {}
        self._garments: dict = {}
        self._clips: dict = {}

    # Asset caches -------------------------------------------------------

    def _body(self, asset_id: str):
        if asset_id not in self._bodies:
            try:
                entry = self.library.get(asset_id)
            except KeyError:
                raise UnknownAssetError(f"no body asset {asset_id!r}") from None
            self._bodies[asset_id] = load_body(entry)
        return self._bodies[asset_id]

    def _garment(self, asset_id: str):
        if asset_id not in self._garments:
            try:
                entry = self.library.get(asset_id)
            except KeyError:
                raise UnknownAssetError(f"no garment asset {asset_id!r}") from None
            self._garments[asset_id] = load_garment(entry)
        return self._garments[asset_id]

    def _clip(self, asset_id: str) -> MotionClip:
        if asset_id not in self._clips:
            try:
                entry = self.library.get(asset_id)
            except KeyError:
                raise UnknownAssetError(f"no motion asset {asset_id!r}") from None
            self._clips[asset_id] = load_motion(entry)
        return self._clips[asset_id]

    # Session lifecycle --------------------------------------------------

    def _evict_idle(self) -> None:
        now = time.monotonic()
        stale = [sid for sid, s in self._sessions.items() if now - s.last_used > self.ttl]
        for sid in stale:
            del self._sessions[sid]

    def create(self, body_id: Optional[str] = None) -> Session:
        if body_id is None:
            bodies = self.library.by_kind("body-basis")
            if not bodies:
                raise UnknownAssetError("library has no body-basis asset")
            body_id = bodies[0].id
        body = self._body(body_id)
        session = Session(
            id=uuid.uuid4().hex,
            body_id=body_id,
            body=body,
            weights=np.zeros(body.basis.attribute_count),
        )
        with self._registry_lock:
            self._evict_idle()
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._registry_lock:
            self._evict_idle()
            session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSessionError(f"no session {session_id!r}")
        session.last_used = time.monotonic()
        return session

    def drop(self, session_id: str) -> None:
        with self._registry_lock:
            if session_id not in self._sessions:
                raise UnknownSessionError(f"no session {session_id!r}")
            del self._sessions[session_id]

    # Mutations (caller guarantees nothing; we lock per session) ---------

    def set_shape(self, session: Session, values) -> np.ndarray:
        basis = session.body.basis
        with session.lock:
            clamped = basis.clamp(values)
            session.weights = clamped.values.copy()
            session.revision += 1
            return session.weights.copy()

    def attach_garment(self, session: Session, garment_id: str) -> None:
        asset = self._garment(garment_id)
        with session.lock:
            if garment_id in session.garments:
                raise InvalidStateError(f"garment {garment_id!r} already attached")
            binding = asset.binding
            if binding is None:
                binding = transfer_weights(
                    session.body.basis.rest_mesh, session.body.binding, asset.mesh
                )
            if skeleton_signature(binding.bind_skeleton) != skeleton_signature(
                session.body.skeleton
            ):
                raise InvalidStateError(
                    f"garment {garment_id!r} is bound to a different skeleton"
                )
            session.garments[garment_id] = (asset.mesh, binding)
            session.revision += 1

    def detach_garment(self, session: Session, garment_id: str) -> None:
        with session.lock:
            if garment_id not in session.garments:
                raise InvalidStateError(f"garment {garment_id!r} is not attached")
            del session.garments[garment_id]
            session.revision += 1

    def load_motion(self, session: Session, asset_id: str) -> LoadedMotion:
        clip = self._clip(asset_id)
        # May raise UnmappedBoneError; surfaced as a 409 by the API layer.
        rmap = build_retarget_map(clip.skeleton, session.body.skeleton)
        motion = retarget_clip(clip, session.body.skeleton, rmap)
        warnings = [
            f"target joint {session.body.skeleton.joints[t].name!r} has no source; held at rest"
            for t in rmap.unmapped_target
        ]
        with session.lock:
            session.motion = LoadedMotion(
                asset_id=asset_id, clip=clip, motion=motion, warnings=warnings
            )
            session.frame = 0
            session.revision += 1
            return session.motion

    def set_frame(self, session: Session, index: int) -> None:
        with session.lock:
            if session.motion is None:
                raise InvalidStateError("no motion loaded")
            if not 0 <= index < session.motion.clip.frame_count:
                raise InvalidStateError(
                    f"frame {index} out of range 0..{session.motion.clip.frame_count - 1}"
                )
            session.frame = index
            session.revision += 1

    # Evaluation ---------------------------------------------------------

    def evaluate_payload(self, session: Session) -> bytes:
        with session.lock:
            return evaluate_geometry(
                session.body,
                session.weights,
                sorted(session.garments.items()),
                session.motion.motion if session.motion else None,
                session.frame,
                session.revision,
            )

    def topology(self, session: Session) -> dict:
        with session.lock:
            sections = [
                {
                    "kind": "body",
                    "name": "body",
                    "vertex_count": session.body.basis.rest_mesh.vertex_count,
                    "triangles": session.body.basis.rest_mesh.triangulated().tolist(),
                }
            ]
            for gid, (mesh, _) in sorted(session.garments.items()):
                sections.append(
                    {
                        "kind": "garment",
                        "name": gid,
                        "vertex_count": mesh.vertex_count,
                        "triangles": mesh.triangulated().tolist(),
                    }
                )
            sections.append(
                {
                    "kind": "joints",
                    "name": "joints",
                    "joint_count": len(session.body.skeleton),
                    "names": list(session.body.skeleton.names),
                    "parents": [
                        -1 if j.parent is None else j.parent
                        for j in session.body.skeleton.joints
                    ],
                }
            )
            return {"layout_version": 1, "revision": session.revision, "sections": sections}


def evaluate_geometry(
    body,
    weights,
    garments,
    motion: Optional[RetargetedMotion],
    frame: int,
    revision: int,
) -> bytes:
    """The offline pipeline: shape, pose lookup, skinning, packing.

    Shared by the service and by equivalence tests; both sides must produce
    bit-identical bytes for identical state.
    """
    basis = body.basis
    body_mesh = apply_shape(basis, basis.clamp(weights))
    if motion is not None:
        pose = motion.poses[frame]
    else:
        from ..geometry import Pose

        pose = Pose.identity(len(body.skeleton))
    posed_body = skin_mesh(body_mesh, body.binding, pose)
    posed_garments = [(gid, skin_mesh(mesh, binding, pose)) for gid, (mesh, binding) in garments]
    joints = joint_world_positions(body.skeleton, pose)
    return pack_geometry(revision, posed_body, posed_garments, joints)
