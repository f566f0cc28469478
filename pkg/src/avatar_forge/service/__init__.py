from .app import create_app
from .payload import LAYOUT_VERSION, pack_geometry, unpack_geometry
from .sessions import SessionStore, evaluate_geometry

__all__ = [
    "LAYOUT_VERSION",
    "SessionStore",
    "create_app",
    "evaluate_geometry",
    "pack_geometry",
    "unpack_geometry",
]
