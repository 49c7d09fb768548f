"""Stiffness and load assembly against independent element-loop oracles."""

import numpy as np
import pytest

import sketchfem as sf
from sketchfem.errors import ValidationError


def dense_stiffness_oracle(mesh, p):
    """Textbook element loop: A_ij = sum_l vol_l p_l grad(phi_i).grad(phi_j)."""
    d = mesh.dim
    vols = sf.element_volumes(mesh)
    a = np.zeros((mesh.n_vertices, mesh.n_vertices))
    for l, elem in enumerate(mesh.elements):
        coords = mesh.vertices[elem]
        e = (coords[1:] - coords[0]).T
        # rows of e^-1 are the barycentric gradients of vertices 1..d
        inv = np.linalg.inv(e)
        grads = np.vstack([-inv.sum(axis=0), inv])  # (d+1, d)
        a[np.ix_(elem, elem)] += vols[l] * p[l] * (grads @ grads.T)
    idx = mesh.interior
    return a[np.ix_(idx, idx)]


def test_stiffness_matches_element_loop(jittered10, jittered10_grad):
    rng = np.random.default_rng(0)
    p = rng.uniform(0.5, 3.0, jittered10.n_elements)
    field = sf.scaling_vector(jittered10, p)
    a = sf.assemble_stiffness(jittered10_grad, field).toarray()
    oracle = dense_stiffness_oracle(jittered10, p)
    np.testing.assert_allclose(a, oracle, rtol=0, atol=1e-12 * np.abs(oracle).max())


def test_stiffness_matches_element_loop_3d():
    mesh = sf.cube_mesh(3)
    grad = sf.gradient_operator(mesh)
    p = np.random.default_rng(1).uniform(0.1, 10.0, mesh.n_elements)
    a = sf.assemble_stiffness(grad, sf.scaling_vector(mesh, p)).toarray()
    oracle = dense_stiffness_oracle(mesh, p)
    np.testing.assert_allclose(a, oracle, rtol=0, atol=1e-12 * np.abs(oracle).max())


def test_five_point_stencil(square4, square4_grad):
    # uniform right-triangle mesh with p = 1 gives the classic stencil
    a = sf.assemble_stiffness(square4_grad,
                              sf.scaling_vector(square4, np.ones(32))).toarray()
    assert np.allclose(np.diag(a), 4.0, atol=1e-12)
    offdiag = a[~np.eye(9, dtype=bool)]
    assert set(np.round(np.unique(offdiag), 12)) == {-1.0, 0.0}
    assert np.allclose(a, a.T, atol=0)


def test_stiffness_exact_symmetry_and_psd(jittered10, jittered10_grad):
    p = sf.uniform_field(jittered10.n_elements, 0.1, 100.0, 7)
    a = sf.assemble_stiffness(jittered10_grad,
                              sf.scaling_vector(jittered10, p))
    diff = (a - a.T).toarray()
    assert np.abs(diff).max() == 0.0
    eigs = np.linalg.eigvalsh(a.toarray())
    assert eigs.min() > 0


def test_stiffness_linear_in_p(jittered10, jittered10_grad):
    rng = np.random.default_rng(2)
    p1 = rng.uniform(0.5, 2.0, jittered10.n_elements)
    p2 = rng.uniform(0.5, 2.0, jittered10.n_elements)
    a1 = sf.assemble_stiffness(jittered10_grad,
                               sf.scaling_vector(jittered10, p1)).toarray()
    a2 = sf.assemble_stiffness(jittered10_grad,
                               sf.scaling_vector(jittered10, p2)).toarray()
    a12 = sf.assemble_stiffness(jittered10_grad,
                                sf.scaling_vector(jittered10, p1 + p2)).toarray()
    np.testing.assert_allclose(a12, a1 + a2, atol=1e-12 * np.abs(a12).max())


def test_quadratic_form_identity(jittered10, jittered10_grad):
    # v' A v = sum_l z_l |(D v)_l|^2, the sketch's row-sum form
    p = sf.uniform_field(jittered10.n_elements, 0.1, 100.0, 9)
    field = sf.scaling_vector(jittered10, p)
    a = sf.assemble_stiffness(jittered10_grad, field)
    v = np.random.default_rng(3).standard_normal(jittered10.n_interior)
    dv = (jittered10_grad.d @ v).reshape(jittered10.n_elements, jittered10.dim)
    direct = (field.z * (dv ** 2).sum(axis=1)).sum()
    assert abs(v @ (a @ v) - direct) < 1e-12 * abs(direct)


def test_parameter_field_rejects_bad_values(jittered10):
    k = jittered10.n_elements
    with pytest.raises(ValidationError):
        sf.scaling_vector(jittered10, np.zeros(k))
    with pytest.raises(ValidationError):
        sf.scaling_vector(jittered10, np.full(k, -1.0))
    with pytest.raises(ValidationError):
        sf.scaling_vector(jittered10, np.full(k, np.nan))
    with pytest.raises(ValidationError):
        sf.scaling_vector(jittered10, np.ones(k - 1))


def test_load_vector_uniform_forcing(square4):
    # each interior vertex of the uniform mesh touches 6 triangles:
    # b_v = 6 * vol / 3 = 6 * 0.03125 / 3 = 0.0625
    load = sf.assemble_load(square4, np.ones(square4.n_elements))
    np.testing.assert_allclose(load.b, 0.0625, rtol=0, atol=1e-15)
    # total mass equals the integral of f over the domain
    assert abs(load.b_full.sum() - 1.0) < 1e-14


def test_load_vector_oracle(jittered10):
    rng = np.random.default_rng(4)
    f = rng.uniform(-2.0, 2.0, jittered10.n_elements)
    load = sf.assemble_load(jittered10, f)
    vols = sf.element_volumes(jittered10)
    b_full = np.zeros(jittered10.n_vertices)
    for l, elem in enumerate(jittered10.elements):
        b_full[elem] += f[l] * vols[l] / 3.0
    np.testing.assert_allclose(load.b_full, b_full, atol=1e-13)
    np.testing.assert_allclose(load.b, b_full[jittered10.interior], atol=1e-13)


def test_reduced_load_matches_projection(bundle10, jittered10):
    load = sf.assemble_load(jittered10, sf.ball_forcing(jittered10))
    rl = sf.reduced_load(bundle10.basis, load)
    np.testing.assert_allclose(rl, bundle10.basis.T @ load.b, atol=1e-13)
    np.testing.assert_allclose(rl, bundle10.reduced_load, atol=1e-13)
