"""Procedural meshes used by the demo library and test fixtures."""

from __future__ import annotations

import numpy as np

from .geometry import Mesh, compute_vertex_normals


def icosphere(subdivisions: int = 2, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> Mesh:
    """Closed triangle sphere: an icosahedron subdivided and reprojected.

    Each subdivision quadruples the face count (20 * 4**s faces).
    """
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = [
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.asarray(v, dtype=np.float64) for v in verts]
    verts = [v / np.linalg.norm(v) for v in verts]

    for _ in range(subdivisions):
        midpoint_cache: dict = {}
        new_faces = []

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in midpoint_cache:
                mid = verts[i] + verts[j]
                verts.append(mid / np.linalg.norm(mid))
                midpoint_cache[key] = len(verts) - 1
            return midpoint_cache[key]

        for (i, j, k) in faces:
            ij, jk, ki = midpoint(i, j), midpoint(j, k), midpoint(k, i)
            new_faces += [(i, ij, ki), (j, jk, ij), (k, ki, jk), (ij, jk, ki)]
        faces = new_faces

    center = np.asarray(center, dtype=np.float64)
    positions = np.asarray(verts) * radius + center
    normals = compute_vertex_normals(positions, faces)
    return Mesh(vertices=positions, faces=tuple(faces), normals=normals)


def tube(
    radius: float,
    y_start: float,
    y_end: float,
    rings: int = 4,
    segments: int = 16,
    center_xz=(0.0, 0.0),
    radius_end: float | None = None,
) -> Mesh:
    """Open quad cylinder along Y, optionally tapered; used for garments."""
    if rings < 2 or segments < 3:
        raise ValueError("tube needs at least 2 rings and 3 segments")
    radius_end = radius if radius_end is None else radius_end
    cx, cz = center_xz
    verts = []
    for r in range(rings):
        t = r / (rings - 1)
        y = y_start + t * (y_end - y_start)
        ring_radius = radius + t * (radius_end - radius)
        for s in range(segments):
            angle = 2.0 * np.pi * s / segments
            verts.append((cx + ring_radius * np.cos(angle), y, cz + ring_radius * np.sin(angle)))
    faces = []
    for r in range(rings - 1):
        for s in range(segments):
            a = r * segments + s
            b = r * segments + (s + 1) % segments
            c = (r + 1) * segments + (s + 1) % segments
            d = (r + 1) * segments + s
            faces.append((a, b, c, d))
    positions = np.asarray(verts)
    uvs = np.zeros((len(verts), 2))
    for r in range(rings):
        for s in range(segments):
            uvs[r * segments + s] = (s / segments, r / (rings - 1))
    normals = compute_vertex_normals(positions, faces)
    return Mesh(vertices=positions, faces=tuple(faces), normals=normals, uvs=uvs)


def quad(size: float = 1.0) -> Mesh:
    """Unit XY quad, handy as a minimal fixture."""
    half = size / 2.0
    verts = np.array(
        [(-half, -half, 0.0), (half, -half, 0.0), (half, half, 0.0), (-half, half, 0.0)]
    )
    uvs = np.array([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
    normals = np.tile((0.0, 0.0, 1.0), (4, 1))
    return Mesh(vertices=verts, faces=((0, 1, 2, 3),), normals=normals, uvs=uvs)
