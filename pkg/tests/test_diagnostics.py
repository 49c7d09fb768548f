"""Reference solver, error metrics, bounds, and the benchmark harness."""

import dataclasses
import math

import numpy as np
import pytest

import sketchfem as sf
from sketchfem.diagnostics import (CSV_COLUMNS, BenchmarkResult, ErrorReport,
                                   relative_l2_error)
from sketchfem.errors import ValidationError

EXPECTED_HEADER = ("rho,c,time_s,dedup_ratio,proj_err,sketch_dev,reg_err,"
                   "total_err,kappa_A,kappa_G,bound41,bound42,bound43,retries")


def test_reference_solve_residual(jittered10, jittered10_grad):
    p = sf.uniform_field(jittered10.n_elements, 0.1, 100.0, 2)
    a = sf.assemble_stiffness(jittered10_grad,
                              sf.scaling_vector(jittered10, p))
    b = sf.assemble_load(jittered10, sf.ball_forcing(jittered10)).b
    u = sf.reference_solve(a, b)
    assert np.linalg.norm(a @ u - b) <= 1e-10 * np.linalg.norm(b)


def test_projection_error_orthogonal_split():
    rng = np.random.default_rng(0)
    psi, _ = np.linalg.qr(rng.standard_normal((30, 5)))
    u = rng.standard_normal(30)
    err = sf.projection_error(psi, u)
    # Pythagoras: ||u||^2 = ||Pi u||^2 + (err ||u||)^2
    inplane = np.linalg.norm(psi.T @ u)
    assert abs(err ** 2 + (inplane / np.linalg.norm(u)) ** 2 - 1.0) < 1e-12
    assert sf.projection_error(psi, psi @ rng.standard_normal(5)) < 1e-12
    assert sf.projection_error(psi, np.zeros(30)) == 0.0


def test_sketch_deviation_dense_oracle():
    rng = np.random.default_rng(1)
    m = rng.standard_normal((6, 6))
    g = m @ m.T + 6 * np.eye(6)
    e = rng.standard_normal((6, 6)) * 0.05
    gh = g + (e + e.T) / 2
    dev = sf.sketch_deviation(g, gh)
    oracle = np.linalg.norm(np.linalg.solve(gh, g) - np.eye(6), 2)
    assert abs(dev - oracle) < 1e-10
    assert sf.sketch_deviation(g, g) < 1e-12
    assert math.isinf(sf.sketch_deviation(g, np.zeros((6, 6))))


def test_condition_number_dense_vs_sparse(jittered10, jittered10_grad):
    p = sf.uniform_field(jittered10.n_elements, 0.5, 2.0, 3)
    a = sf.assemble_stiffness(jittered10_grad,
                              sf.scaling_vector(jittered10, p))
    dense = np.linalg.cond(a.toarray())
    assert abs(sf.condition_number(a) - dense) < 1e-6 * dense
    # force the iterative path and compare
    assert abs(sf.condition_number(a, dense_cutoff=1) - dense) < 1e-4 * dense


def test_epsilon_inverts_plan():
    for rho, beta in ((10, 1.0), (50, 0.5)):
        for eps in (0.1, 0.3):
            c = sf.plan_sample_size(rho, eps, beta)
            back = sf.epsilon_for(c, rho, beta)
            assert back <= eps  # c is rounded up, so it buys at least eps
            assert back > 0.95 * eps


def test_theorem_bounds_formulas():
    g = np.diag([1.0, 4.0])          # kappa(G) = 4
    a = np.diag([1.0, 9.0])          # kappa(A) = 9
    b41, b42, b43 = sf.theorem_bounds(g, a, 0.3, 0.1)
    assert abs(b41 - 2.0 * 0.3 / 0.7) < 1e-12
    assert abs(b42 - 4.0 * 0.1) < 1e-12
    assert abs(b43 - ((1.0 + 0.1 * 3.0) * b41 + b42)) < 1e-12
    b41v, _, b43v = sf.theorem_bounds(g, a, 1.0, 0.1)
    assert math.isinf(b41v) and math.isinf(b43v)


def test_beta_quality_bounds(bundle10, jittered10, jittered10_grad):
    # q built from the leverage of x itself has quality exactly 1
    rng = np.random.default_rng(4)
    x = rng.standard_normal((60, 5))
    scores = sf.leverage_scores(x)
    q = sf.sampling_distribution(scores, 5)
    assert abs(sf.beta_quality(q, x) - 1.0) < 1e-10
    # offline q against a random query field stays in (0, 1]
    p = sf.uniform_field(jittered10.n_elements, 0.1, 100.0, 5)
    xq = (np.sqrt(np.repeat(jittered10_grad.volumes * p, 2))[:, None]
          * (jittered10_grad.d @ bundle10.basis))
    beta = sf.beta_quality(bundle10.q, xq)
    assert 0 < beta <= 1.0


def _hand_row():
    return ErrorReport(rho=10, c=1000, time_s=0.00123456, dedup_ratio=0.25,
                       proj_err=0.1, sketch_dev=0.5, reg_err=0.05,
                       total_err=0.12, kappa_A=123.456, kappa_G=7.89,
                       bound41=1.5, bound42=2.5, bound43=4.0, retries=0)


def test_report_csv_frozen_format():
    result = BenchmarkResult(rows=[_hand_row()], singular_count=0,
                             reference_median_s=0.0, online_median_s=0.0)
    expected = (EXPECTED_HEADER + "\n"
                "10,1000,0.00123456,0.25,0.1,0.5,0.05,0.12,123.456,7.89,"
                "1.5,2.5,4,0\n"
                "MEAN,1000,0.00123456,0.25,0.1,0.5,0.05,0.12,123.456,7.89,"
                "1.5,2.5,4,0\n")
    assert sf.report_csv(result) == expected
    assert ",".join(CSV_COLUMNS) == EXPECTED_HEADER


def test_singular_rows_excluded_from_means():
    good = _hand_row()
    bad = ErrorReport(rho=10, c=1000, time_s=0.001, dedup_ratio=math.nan,
                      proj_err=0.1, sketch_dev=math.inf, reg_err=math.inf,
                      total_err=math.inf, kappa_A=1.0, kappa_G=1.0,
                      bound41=1.0, bound42=1.0, bound43=1.0, retries=4)
    result = BenchmarkResult(rows=[good, bad], singular_count=1,
                             reference_median_s=0.0, online_median_s=0.0)
    means = result.mean_values()
    assert means["sketch_dev"] == good.sketch_dev
    csv = sf.report_csv(result)
    assert "inf" in csv and "nan" in csv
    assert csv.count("\n") == 4  # header + 2 rows + MEAN


def test_run_benchmark_rows_and_determinism(bundle10):
    spec = sf.FieldSpec(kind="uniform", params={"lo": 0.1, "hi": 100.0})
    a = sf.run_benchmark(bundle10, spec, n_queries=4, c=500, seed=9)
    b = sf.run_benchmark(bundle10, spec, n_queries=4, c=500, seed=9)
    assert len(a.rows) == 4
    for ra, rb in zip(a.rows, b.rows):
        for name in CSV_COLUMNS:
            if name == "time_s":
                continue
            va, vb = getattr(ra, name), getattr(rb, name)
            assert va == vb or (math.isnan(va) and math.isnan(vb))
    # threads must not change results either
    c = sf.run_benchmark(bundle10, spec, n_queries=4, c=500, seed=9, threads=2)
    for ra, rc in zip(a.rows, c.rows):
        assert ra.sketch_dev == rc.sketch_dev
        assert ra.total_err == rc.total_err


def test_run_benchmark_rejects_wrong_forcing(bundle10):
    spec = sf.FieldSpec(kind="uniform", params={"lo": 0.5, "hi": 2.0})
    with pytest.raises(ValidationError, match="forcing"):
        sf.run_benchmark(bundle10, spec, n_queries=1, c=500, seed=0,
                         forcing="uniform")


def test_run_benchmark_requires_attached_bundle(bundle10):
    detached = dataclasses.replace(bundle10, mesh=None, gradient=None,
                                   sampler=None)
    spec = sf.FieldSpec(kind="uniform", params={})
    with pytest.raises(ValidationError):
        sf.run_benchmark(detached, spec, n_queries=1, c=100, seed=0)


def _l2_mass_oracle(mesh, vertex_values):
    """Exact L2 norm of a P1 field via the element mass matrix.

    Independent of the quadrature code path: integral over each triangle is
    v' M v with M = vol/12 * [[2,1,1],[1,2,1],[1,1,2]].
    """
    vols = sf.element_volumes(mesh)
    v = vertex_values[mesh.elements]  # (k, 3)
    sq = (v ** 2).sum(axis=1)
    cross = v[:, 0] * v[:, 1] + v[:, 1] * v[:, 2] + v[:, 0] * v[:, 2]
    return math.sqrt(((vols / 6.0) * (sq + cross)).sum())


def test_relative_l2_error_affine_oracle():
    # with an affine exact field both the difference and the field are P1,
    # so the degree-two quadrature is exact and must match the mass-matrix
    # evaluation to rounding
    mesh = sf.jittered_square_mesh(6, seed=8)
    rng = np.random.default_rng(6)
    coef = rng.standard_normal(2)

    def affine(pts):
        return pts @ coef + 0.4

    exact_vals = affine(mesh.vertices)
    u_h = exact_vals.copy()
    u_h[mesh.boundary_mask] = 0.0  # what the error metric reconstructs
    err = relative_l2_error(mesh, u_h[mesh.interior], affine)
    oracle = (_l2_mass_oracle(mesh, u_h - exact_vals)
              / _l2_mass_oracle(mesh, exact_vals))
    assert abs(err - oracle) < 1e-12


def test_relative_l2_error_simple_cases():
    mesh = sf.square_mesh(6)
    # zero interpolant against constant 1: relative error is exactly 1
    err = relative_l2_error(mesh, np.zeros(mesh.n_interior),
                            lambda pts: np.ones(len(pts)))
    assert abs(err - 1.0) < 1e-12
    with pytest.raises(ValidationError):
        relative_l2_error(sf.cube_mesh(2), np.zeros(1), lambda pts: pts[:, 0])
