"""JSON document forms for skeletons, skin bindings and garment manifests."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..geometry import Joint, Skeleton
from ..skinning import SkinBinding


class AssetFormatError(ValueError):
    pass


def skeleton_to_doc(skeleton: Skeleton) -> dict:
    return {
        "joints": [
            {
                "name": j.name,
                "parent": j.parent,
                "offset": [float(x) for x in j.rest_offset],
                "end_site": None if j.end_site is None else [float(x) for x in j.end_site],
            }
            for j in skeleton.joints
        ]
    }


def skeleton_from_doc(doc: dict) -> Skeleton:
    try:
        joints = tuple(
            Joint(
                name=str(j["name"]),
                parent=None if j["parent"] is None else int(j["parent"]),
                rest_offset=np.asarray(j["offset"], dtype=np.float64),
                end_site=None if j.get("end_site") is None else np.asarray(j["end_site"]),
            )
            for j in doc["joints"]
        )
    except (KeyError, TypeError) as exc:
        raise AssetFormatError(f"malformed skeleton document: {exc}") from None
    return Skeleton(joints)


def binding_to_doc(binding: SkinBinding) -> dict:
    return {
        "skeleton": skeleton_to_doc(binding.bind_skeleton),
        "influences": [
            [[j, w] for j, w in entries] for entries in binding.influences()
        ],
    }


def binding_from_doc(doc: dict) -> SkinBinding:
    try:
        skeleton = skeleton_from_doc(doc["skeleton"])
        influences = doc["influences"]
    except (KeyError, TypeError) as exc:
        raise AssetFormatError(f"malformed binding document: {exc}") from None
    return SkinBinding.from_influences(influences, skeleton)


def save_binding(binding: SkinBinding, path) -> None:
    Path(path).write_text(json.dumps(binding_to_doc(binding), indent=2, sort_keys=True) + "\n")


def load_binding(path) -> SkinBinding:
    return binding_from_doc(json.loads(Path(path).read_text()))


def save_skeleton(skeleton: Skeleton, path) -> None:
    Path(path).write_text(json.dumps(skeleton_to_doc(skeleton), indent=2, sort_keys=True) + "\n")


def load_skeleton(path) -> Skeleton:
    return skeleton_from_doc(json.loads(Path(path).read_text()))
