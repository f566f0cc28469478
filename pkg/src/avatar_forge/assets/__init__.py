from .formats import (
    AssetFormatError,
    binding_from_doc,
    binding_to_doc,
    load_binding,
    load_skeleton,
    save_binding,
    save_skeleton,
    skeleton_from_doc,
    skeleton_to_doc,
)
from .gltf import GltfExportError, export_glb, write_glb
from .library import (
    AssetEntry,
    AssetLibrary,
    BodyAsset,
    CatalogueError,
    load_body,
    load_garment,
    load_motion,
    scan_library,
)
from .obj import ObjParseError, export_obj, import_obj

__all__ = [
    "AssetEntry",
    "AssetFormatError",
    "AssetLibrary",
    "BodyAsset",
    "CatalogueError",
    "GltfExportError",
    "ObjParseError",
    "binding_from_doc",
    "binding_to_doc",
    "export_glb",
    "export_obj",
    "import_obj",
    "load_binding",
    "load_body",
    "load_garment",
    "load_motion",
    "load_skeleton",
    "save_binding",
    "save_skeleton",
    "scan_library",
    "skeleton_from_doc",
    "skeleton_to_doc",
    "write_glb",
]
