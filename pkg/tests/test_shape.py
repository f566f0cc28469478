import numpy as np
import pytest

from avatar_forge.geometry import Mesh
from avatar_forge.shape import (
    BlendShapeBasis,
    ShapeError,
    ShapeWeights,
    apply_shape,
    basis_from_json,
    basis_to_json,
    build_attribute_basis,
    load_basis,
    save_basis,
)


def grid_mesh(n_side=5, scale=1.0):
    xs, ys = np.meshgrid(np.linspace(0, 1, n_side), np.linspace(0, 1, n_side))
    verts = np.stack([xs.ravel() * scale, ys.ravel() * scale, np.zeros(n_side * n_side)], axis=1)
    faces = []
    for r in range(n_side - 1):
        for c in range(n_side - 1):
            a = r * n_side + c
            faces.append((a, a + 1, a + n_side + 1, a + n_side))
    return Mesh(vertices=verts, faces=tuple(faces))


def random_basis(rng, n=100, m=7):
    verts = rng.normal(size=(n, 3))
    faces = tuple((i, i + 1, i + 2) for i in range(0, n - 2, 3))
    rest = Mesh(vertices=verts, faces=faces)
    fields = rng.normal(size=(m, n, 3))
    bounds = np.tile((-2.0, 2.0), (m, 1))
    names = tuple(f"attr{k}" for k in range(m))
    return BlendShapeBasis(rest, fields, names, bounds)


def covariance_pca_oracle(samples, rest):
    """Dense-covariance route: top eigenvector of the 3n x 3n covariance."""
    centered = np.stack([m.vertices.reshape(-1) - rest.vertices.reshape(-1) for m in samples])
    cov = centered.T @ centered
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    direction = eigenvectors[:, -1]
    errors = []
    for row in centered:
        proj = row @ direction
        errors.append(np.linalg.norm(row - proj * direction))
    return direction, np.asarray(errors)


class TestApplyShape:
    def test_zero_weights_reproduce_rest(self, rng):
        basis = random_basis(rng)
        out = apply_shape(basis, basis.zero_weights())
        assert np.array_equal(out.vertices, basis.rest_mesh.vertices)

    def test_uniform_field_shift(self):
        rest = grid_mesh()
        field = np.tile((0.0, 1.0, 0.0), (rest.vertex_count, 1))[None]
        basis = BlendShapeBasis(rest, field, ("up",), [(-3.0, 3.0)])
        out = apply_shape(basis, ShapeWeights([2.0]))
        assert np.allclose(out.vertices, rest.vertices + (0.0, 2.0, 0.0), atol=0)

    def test_matches_per_vertex_loop_oracle(self, rng):
        basis = random_basis(rng, n=100, m=7)
        alpha = rng.uniform(-2, 2, size=7)
        out = apply_shape(basis, ShapeWeights(alpha))
        expected = np.empty_like(basis.rest_mesh.vertices)
        for i in range(100):
            acc = basis.rest_mesh.vertices[i].copy()
            for k in range(7):
                acc = acc + alpha[k] * basis.attributes[k, i]
            expected[i] = acc
        assert np.allclose(out.vertices, expected, atol=1e-12)

    def test_linearity(self, rng):
        basis = random_basis(rng)
        for _ in range(50):
            alpha = rng.uniform(-1, 1, size=7)
            beta = rng.uniform(-1, 1, size=7)
            a = apply_shape(basis, ShapeWeights(alpha)).vertices
            b = apply_shape(basis, ShapeWeights(beta)).vertices
            ab = apply_shape(basis, ShapeWeights(alpha + beta)).vertices
            assert np.allclose(a + b - basis.rest_mesh.vertices, ab, atol=1e-9)

    def test_topology_invariance(self, rng):
        rest = grid_mesh()
        uvs = rng.random(size=(rest.vertex_count, 2))
        rest = Mesh(vertices=rest.vertices, faces=rest.faces, uvs=uvs)
        field = rng.normal(size=(1, rest.vertex_count, 3))
        basis = BlendShapeBasis(rest, field, ("x",), [(-1.0, 1.0)])
        out = apply_shape(basis, ShapeWeights([0.5]))
        assert out.faces == rest.faces
        assert np.array_equal(out.uvs, rest.uvs)
        assert out.normals is not None

    def test_weight_count_mismatch(self, rng):
        basis = random_basis(rng)
        with pytest.raises(ShapeError, match="attributes"):
            apply_shape(basis, ShapeWeights([0.0] * 3))

    def test_clamp(self, rng):
        basis = random_basis(rng)  # bounds (-2, 2)
        clamped = basis.clamp([5.0, -5.0, 0.5, 0, 0, 0, 0])
        assert np.allclose(clamped.values[:3], [2.0, -2.0, 0.5])


class TestBuildAttributeBasis:
    def test_rank_one_pair_exact_reconstruction(self, rng):
        rest = grid_mesh()
        d = rng.normal(size=(rest.vertex_count, 3))
        plus = rest.with_vertices(rest.vertices + d, recompute_normals=False)
        minus = rest.with_vertices(rest.vertices - d, recompute_normals=False)
        basis = build_attribute_basis([("bulge", [plus, minus])], rest)
        field = basis.attributes[0]
        # field is parallel to d
        cosine = np.dot(field.ravel(), d.ravel()) / (
            np.linalg.norm(field) * np.linalg.norm(d)
        )
        assert abs(abs(cosine) - 1) < 1e-12
        lo, hi = basis.weight_bounds[0]
        assert np.isclose(lo, -1) and np.isclose(hi, 1)
        recon_hi = apply_shape(basis, ShapeWeights([hi])).vertices
        recon_lo = apply_shape(basis, ShapeWeights([lo])).vertices
        options = (plus.vertices, minus.vertices)
        assert any(np.allclose(recon_hi, o, atol=1e-9) for o in options)
        assert any(np.allclose(recon_lo, o, atol=1e-9) for o in options)

    def test_recovers_generative_direction(self, rng):
        rest = grid_mesh()
        d = rng.normal(size=(rest.vertex_count, 3))
        d /= np.linalg.norm(d)
        samples = []
        for t in (-1.0, -0.5, 0.5, 1.0):
            noise = rng.normal(scale=1e-6, size=d.shape)
            samples.append(rest.with_vertices(rest.vertices + t * d + noise, recompute_normals=False))
        basis = build_attribute_basis([("axis", samples)], rest)
        direction = basis.attributes[0].ravel()
        direction = direction / np.linalg.norm(direction)
        angle = np.arccos(np.clip(abs(np.dot(direction, d.ravel())), -1, 1))
        assert angle < 1e-3

    def test_matches_dense_covariance_oracle(self, rng):
        rest = grid_mesh(4)  # n = 16 <= 50
        samples = [
            rest.with_vertices(rest.vertices + rng.normal(scale=0.1, size=rest.vertices.shape),
                               recompute_normals=False)
            for _ in range(6)
        ]
        basis = build_attribute_basis([("freeform", samples)], rest)
        direction = basis.attributes[0].ravel()
        direction = direction / np.linalg.norm(direction)
        centered = np.stack([m.vertices.ravel() - rest.vertices.ravel() for m in samples])
        ours = np.asarray([np.linalg.norm(row - (row @ direction) * direction) for row in centered])
        _, oracle = covariance_pca_oracle(samples, rest)
        assert np.allclose(ours, oracle, atol=1e-6)

    def test_field_direction_unit_times_scale(self, rng):
        rest = grid_mesh()
        d = rng.normal(size=rest.vertices.shape)
        plus = rest.with_vertices(rest.vertices + d, recompute_normals=False)
        minus = rest.with_vertices(rest.vertices - d, recompute_normals=False)
        basis = build_attribute_basis([("f", [plus, minus])], rest)
        scale = np.linalg.norm(basis.attributes[0])
        unit = basis.attributes[0] / scale
        assert abs(np.linalg.norm(unit) - 1) < 1e-9

    def test_zero_variance_error_names_attribute(self):
        rest = grid_mesh()
        with pytest.raises(ShapeError, match="flatattr"):
            build_attribute_basis([("flatattr", [rest, rest])], rest)

    def test_topology_mismatch_error(self, rng):
        rest = grid_mesh(5)
        other = grid_mesh(4)
        with pytest.raises(ShapeError, match="topology"):
            build_attribute_basis([("broken", [rest, other])], rest)

    def test_requires_two_samples(self):
        rest = grid_mesh()
        with pytest.raises(ShapeError, match="at least 2"):
            build_attribute_basis([("single", [rest])], rest)

    def test_deterministic_sign(self, rng):
        rest = grid_mesh()
        d = rng.normal(size=rest.vertices.shape)
        samples = [rest.with_vertices(rest.vertices + t * d, recompute_normals=False) for t in (1, -1)]
        a = build_attribute_basis([("s", samples)], rest)
        b = build_attribute_basis([("s", list(reversed(samples)))], rest)
        assert np.allclose(a.attributes, b.attributes, atol=1e-12)


class TestBasisIO:
    def test_binary_round_trip(self, rng, tmp_path):
        basis = random_basis(rng, n=40, m=3)
        path = tmp_path / "demo.avbasis"
        save_basis(basis, path)
        loaded = load_basis(path)
        assert loaded.attribute_names == basis.attribute_names
        assert np.allclose(loaded.rest_mesh.vertices, basis.rest_mesh.vertices, atol=1e-6)
        assert loaded.rest_mesh.faces == basis.rest_mesh.faces
        assert np.allclose(loaded.attributes, basis.attributes, atol=1e-6)
        # float32 content round-trips exactly
        save_basis(loaded, path)
        second = load_basis(path)
        assert np.array_equal(second.attributes, loaded.attributes)
        assert np.array_equal(second.rest_mesh.vertices, loaded.rest_mesh.vertices)

    def test_json_form_lossless(self, rng, tmp_path):
        basis = random_basis(rng, n=20, m=2)
        path = tmp_path / "b.avbasis"
        save_basis(basis, path)
        loaded = load_basis(path)
        round_tripped = basis_from_json(basis_to_json(loaded))
        assert np.array_equal(round_tripped.attributes, loaded.attributes)
        assert np.array_equal(round_tripped.rest_mesh.vertices, loaded.rest_mesh.vertices)
        assert round_tripped.attribute_names == loaded.attribute_names

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.avbasis"
        path.write_bytes(b"NOTABASIS")
        with pytest.raises(ShapeError, match="magic"):
            load_basis(path)

    def test_truncated_file(self, rng, tmp_path):
        basis = random_basis(rng, n=10, m=2)
        path = tmp_path / "b.avbasis"
        save_basis(basis, path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(ShapeError, match="truncated"):
            load_basis(path)
