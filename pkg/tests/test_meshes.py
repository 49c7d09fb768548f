"""Built-in mesh generators."""

import numpy as np
import pytest

import sketchfem as sf
from sketchfem.errors import ValidationError


def test_square_counts():
    for m in (1, 2, 5):
        mesh = sf.square_mesh(m)
        assert mesh.n_vertices == (m + 1) ** 2
        assert mesh.n_elements == 2 * m * m
        assert mesh.n_interior == (m - 1) ** 2


def test_square_requires_positive_m():
    with pytest.raises(ValidationError):
        sf.square_mesh(0)


def test_jitter_keeps_boundary_and_topology():
    base = sf.square_mesh(6)
    jit = sf.jittered_square_mesh(6, amplitude=0.25, seed=4)
    np.testing.assert_array_equal(base.elements, jit.elements)
    np.testing.assert_array_equal(base.boundary_mask, jit.boundary_mask)
    np.testing.assert_allclose(jit.vertices[jit.boundary_mask],
                               base.vertices[base.boundary_mask])
    moved = np.linalg.norm(jit.vertices - base.vertices, axis=1)
    assert moved[~jit.boundary_mask].min() > 0
    # deterministic in the seed
    again = sf.jittered_square_mesh(6, amplitude=0.25, seed=4)
    assert again.fingerprint == jit.fingerprint
    other = sf.jittered_square_mesh(6, amplitude=0.25, seed=5)
    assert other.fingerprint != jit.fingerprint


def test_disk_radius_and_area():
    mesh = sf.disk_mesh(8, radius=2.0, center=(1.0, -1.0))
    r = np.linalg.norm(mesh.vertices - np.array([1.0, -1.0]), axis=1)
    assert r.max() <= 2.0 + 1e-12
    # polygon area approaches pi r^2 from below
    area = sf.element_volumes(mesh).sum()
    assert 0.95 * np.pi * 4.0 < area < np.pi * 4.0


def test_cube_counts_and_volume():
    mesh = sf.cube_mesh(3, lo=-1.0, hi=1.0)
    assert mesh.n_vertices == 4 ** 3
    assert mesh.n_elements == 6 * 27
    assert mesh.n_interior == 2 ** 3
    assert abs(sf.element_volumes(mesh).sum() - 8.0) < 1e-12


def test_graded_cube_matches_uniform_at_gamma_one():
    a = sf.cube_mesh(3, 0.0, 1.0)
    b = sf.graded_cube(3, gamma=1.0, lo=0.0, hi=1.0)
    np.testing.assert_allclose(a.vertices, b.vertices, atol=1e-15)
    np.testing.assert_array_equal(a.elements, b.elements)


def test_graded_cube_concentrates_volume():
    mesh = sf.graded_cube(8, point=(0.5, 0.5, 0.5), gamma=3.0)
    vols = sf.element_volumes(mesh)
    assert abs(vols.sum() - 8.0) < 1e-12
    # cells near the grading point are far smaller than the coarsest ones
    centroids = mesh.centroids()
    dist = np.linalg.norm(centroids - 0.5, axis=1)
    assert vols[np.argmin(dist)] < 1e-4 * vols.max()
    assert vols[dist < 0.5].mean() < 0.1 * vols[dist > 1.2].mean()


def test_graded_cube_validation():
    with pytest.raises(ValidationError):
        sf.graded_cube(4, gamma=0.5)
    with pytest.raises(ValidationError):
        sf.graded_cube(4, point=(2.0, 0.0, 0.0))
    with pytest.raises(ValidationError):
        sf.graded_cube(4, point=(0.0, 0.0))
