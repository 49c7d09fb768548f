"""Mesh parsing, validation, boundary detection, and gradient operators."""

import numpy as np
import pytest

import sketchfem as sf
from sketchfem.errors import MeshFormatError, ValidationError

# single reference triangle: vertex 0 at origin, unit legs
TRI_TEXT = """\
# triangle
2 3 1
0 0
1 0
0 1
0 1 2
"""

SQUARE4_FINGERPRINT = ("0b0d28e226af6bb4743e4c8888902a20"
                       "aa02d1aa195a81064f700fd642f32e64")


def test_parse_single_triangle():
    mesh = sf.parse_mesh(TRI_TEXT)
    assert mesh.dim == 2
    assert mesh.n_vertices == 3
    assert mesh.n_elements == 1
    # every vertex of a single triangle is boundary
    assert mesh.boundary_mask.all()
    assert mesh.n_interior == 0


def test_parse_rejects_garbage():
    with pytest.raises(MeshFormatError):
        sf.parse_mesh("not a mesh")
    with pytest.raises(MeshFormatError):
        sf.parse_mesh("2 3 1\n0 0\n1 0\n0 1\n0 1\n")  # short element row
    with pytest.raises(MeshFormatError):
        sf.parse_mesh(TRI_TEXT + "0 1 2\n")  # extra trailing element


def test_parse_rejects_bad_indices():
    bad = TRI_TEXT.replace("0 1 2", "0 1 3")
    with pytest.raises((MeshFormatError, ValidationError)):
        sf.parse_mesh(bad)


def test_degenerate_element_rejected():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(ValidationError, match="degenerate"):
        sf.mesh_from_arrays(2, verts, np.array([[0, 1, 2]]))


def test_repeated_vertex_rejected():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValidationError):
        sf.mesh_from_arrays(2, verts, np.array([[0, 1, 1]]))


def test_square4_shape_and_boundary(square4):
    # 5x5 grid: 25 vertices, 32 triangles, 3x3 interior block
    assert square4.n_vertices == 25
    assert square4.n_elements == 32
    assert square4.n_interior == 9
    on_edge = ((square4.vertices[:, 0] % 1.0 == 0)
               | (square4.vertices[:, 1] % 1.0 == 0))
    assert np.array_equal(square4.boundary_mask, on_edge)
    assert np.all(np.diff(square4.interior) > 0)


def test_fingerprint_frozen(square4):
    assert square4.fingerprint.hex() == SQUARE4_FINGERPRINT


def test_fingerprint_ignores_formatting(square4, tmp_path):
    # whitespace and comments do not change the canonical content hash
    path = tmp_path / "m.txt"
    sf.write_mesh(square4, path)
    text = path.read_text()
    mangled = "# a comment\n" + text.replace(" ", "   ")
    reparsed = sf.parse_mesh(mangled)
    assert reparsed.fingerprint == square4.fingerprint


def test_write_parse_roundtrip(jittered10, tmp_path):
    path = tmp_path / "j.txt"
    sf.write_mesh(jittered10, path)
    back = sf.load_mesh(path)
    assert back.fingerprint == jittered10.fingerprint
    np.testing.assert_array_equal(back.elements, jittered10.elements)
    np.testing.assert_allclose(back.vertices, jittered10.vertices, rtol=0,
                               atol=0)


def test_arrays_are_frozen(square4):
    with pytest.raises(ValueError):
        square4.vertices[0, 0] = 99.0


def test_element_volumes_shoelace(jittered10):
    vols = sf.element_volumes(jittered10)
    tri = jittered10.vertices[jittered10.elements]
    # shoelace formula as the independent area oracle
    x, y = tri[:, :, 0], tri[:, :, 1]
    area = 0.5 * np.abs(x[:, 0] * (y[:, 1] - y[:, 2])
                        + x[:, 1] * (y[:, 2] - y[:, 0])
                        + x[:, 2] * (y[:, 0] - y[:, 1]))
    np.testing.assert_allclose(vols, area, rtol=1e-13)
    # jitter moves only interior vertices, so the [-1, 1]^2 area survives
    assert abs(vols.sum() - 4.0) < 1e-12


def test_tet_volume_oracle():
    mesh = sf.cube_mesh(2)
    vols = sf.element_volumes(mesh)
    # Kuhn subdivision: 6 m^3 congruent tets fill the unit cube
    np.testing.assert_allclose(vols, 1.0 / 48.0, rtol=1e-13)


def test_gradient_reproduces_affine_fields():
    # exact P1 gradients: D applied to an affine vertex field is constant
    for seed, mesh in ((0, sf.jittered_square_mesh(7, seed=11)),
                       (1, sf.cube_mesh(3))):
        rng = np.random.default_rng(seed)
        grad = sf.gradient_operator(mesh)
        a = rng.standard_normal(mesh.dim)
        g = mesh.vertices @ a + 0.7
        per_elem = (grad.d_full @ g).reshape(mesh.n_elements, mesh.dim)
        np.testing.assert_allclose(per_elem, np.tile(a, (mesh.n_elements, 1)),
                                   atol=1e-12)


def test_interior_operator_matches_masked_full(jittered10, jittered10_grad):
    g = np.random.default_rng(5).standard_normal(jittered10.n_vertices)
    g[jittered10.boundary_mask] = 0.0
    full = jittered10_grad.d_full @ g
    interior = jittered10_grad.d @ g[jittered10.interior]
    np.testing.assert_allclose(interior, full, atol=1e-14)


def test_non_manifold_rejected():
    # three triangles sharing one edge
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0],
                      [-1.0, 1.0]])
    elems = np.array([[0, 1, 2], [0, 1, 3], [0, 1, 4]])
    with pytest.raises(ValidationError):
        sf.mesh_from_arrays(2, verts, elems)
