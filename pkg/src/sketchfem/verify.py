"""Self-contained oracle checks behind the ``verify`` subcommand.

Each check recomputes a quantity with an independent, usually brute-force
method on a small built-in mesh (n <= 400) and compares against the library
path.  Stochastic checks use fixed seeds, so the whole battery is
deterministic.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._rng import make_rng
from .assembly import ParameterField, assemble_load, assemble_stiffness, reduced_load
from .diagnostics import (projection_error, reference_solve,
                          relative_l2_error, run_benchmark, sketch_deviation,
                          theorem_bounds)
from .errors import SketchSingularError
from .fields import (FieldSpec, ball_forcing, discontinuous_field,
                     lognormal_field, matern_covariance, uniform_field)
from .mesh import element_volumes, gradient_operator, mesh_from_arrays
from .meshes import cube_mesh, disk_mesh, jittered_square_mesh, square_mesh
from .reduction import (build_offline_bundle, compute_basis,
                        cross_leverage_matrix, laplacian, leverage_scores,
                        reweighted_leverage, sampling_distribution)
from .sketch import (build_sampling_table, build_sketch, draw_samples,
                     exact_sample_tab, plan_sample_size, query, solve_reduced,
                     tabulate)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _single_triangle():
    return mesh_from_arrays(2,
                            [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
                            [[0, 1, 2]])


# ---------------------------------------------------------------- mesh


def check_boundary_classification():
    """Facet-incidence boundary detection vs a dict-based recount."""
    mesh = square_mesh(4)
    incidence = defaultdict(int)
    for el in mesh.elements:
        el = [int(v) for v in el]
        for omit in range(3):
            facet = tuple(sorted(v for i, v in enumerate(el) if i != omit))
            incidence[facet] += 1
    boundary = set()
    for facet, count in incidence.items():
        if count == 1:
            boundary.update(facet)
    expected = np.zeros(mesh.n_vertices, dtype=bool)
    expected[list(boundary)] = True
    ok = (expected == mesh.boundary_mask).all() and mesh.n_interior == 9
    return ok, f"4x4 square: {mesh.n_interior} interior vertices (want 9)"


def check_single_triangle_boundary():
    mesh = _single_triangle()
    ok = mesh.n_interior == 0 and mesh.boundary_mask.all()
    return ok, "single triangle has no interior vertices"


def check_volumes():
    """Determinant volumes on hand meshes and a partition of the square."""
    tri = _single_triangle()
    v1 = element_volumes(tri)[0]
    mesh = square_mesh(5)
    total = element_volumes(mesh).sum()
    ok = abs(v1 - 0.5) < 1e-15 and abs(total - 1.0) < 1e-12
    return ok, f"reference triangle volume {v1}, square total {total:.15f}"


def check_reference_gradients():
    mesh = _single_triangle()
    grad = gradient_operator(mesh)
    dense = grad.d_full.toarray()
    expected = np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
    ok = np.abs(dense - expected).max() < 1e-15
    return ok, "reference triangle gradients are (-1,-1), (1,0), (0,1)"


def check_affine_reconstruction():
    """D applied to nodal values of an affine function returns its slope."""
    worst = 0.0
    for seed, builder in ((0, lambda: jittered_square_mesh(6, seed=3)),
                          (1, lambda: cube_mesh(3))):
        mesh = builder()
        rng = make_rng(seed, stream=11)
        slope = rng.standard_normal(mesh.dim)
        values = mesh.vertices @ slope + 0.7
        grads = (gradient_operator(mesh).d_full @ values).reshape(-1, mesh.dim)
        worst = max(worst, float(np.abs(grads - slope).max()))
    return worst < 1e-12, f"affine gradient reconstruction error {worst:.2e}"


# ---------------------------------------------------------------- assembly


def check_stiffness_element_loop():
    """Triple-product assembly vs the classical element loop."""
    mesh = jittered_square_mesh(6, seed=5)
    grad = gradient_operator(mesh)
    p = uniform_field(mesh.n_elements, 0.1, 100.0, make_rng(5, stream=11))
    a = assemble_stiffness(grad, ParameterField.from_volumes(grad.volumes, p))

    nv = mesh.n_vertices
    dense = np.zeros((nv, nv))
    vols = element_volumes(mesh)
    for ell, el in enumerate(mesh.elements):
        coords = mesh.vertices[el]
        e = coords[1:] - coords[0]
        ginv = np.linalg.inv(e)
        g = np.zeros((mesh.dim + 1, mesh.dim))
        g[1:] = ginv.T
        g[0] = -g[1:].sum(axis=0)
        local = vols[ell] * p[ell] * (g @ g.T)
        for i, vi in enumerate(el):
            for j, vj in enumerate(el):
                dense[vi, vj] += local[i, j]
    dense = dense[np.ix_(mesh.interior, mesh.interior)]
    diff = np.abs(a.toarray() - dense).max()
    scale = np.abs(dense).max()
    ok = diff <= 1e-12 * scale
    return ok, f"element-loop stiffness mismatch {diff:.2e} (scale {scale:.2e})"


def check_five_point_stencil():
    """Unit diffusion on the structured square gives the 4 / -1 stencil."""
    m = 6
    mesh = square_mesh(m)
    grad = gradient_operator(mesh)
    ones = ParameterField.from_volumes(grad.volumes,
                                       np.ones(mesh.n_elements))
    a = assemble_stiffness(grad, ones).toarray()
    # Interior vertex ids follow the (m+1)-stride grid ordering.
    idx = {int(v): i for i, v in enumerate(mesh.interior)}
    centre = (m + 1) * (m // 2) + m // 2
    row = a[idx[centre]]
    neighbours = [centre - 1, centre + 1, centre - (m + 1), centre + (m + 1)]
    diag_ok = abs(row[idx[centre]] - 4.0) < 1e-12
    nb_ok = all(abs(row[idx[v]] + 1.0) < 1e-12 for v in neighbours)
    corners = [centre - m, centre + m, centre - m - 2, centre + m + 2]
    corner_ok = all(abs(row[idx[v]]) < 1e-12 for v in corners if v in idx)
    ok = diag_ok and nb_ok and corner_ok
    return ok, f"stencil row: diag {row[idx[centre]]:.12f}, off {row[idx[centre - 1]]:.12f}"


def check_load_vector():
    tri = _single_triangle()
    load = assemble_load(tri, np.ones(1))
    single_ok = np.abs(load.b_full - 1.0 / 6.0).max() < 1e-15
    mesh = jittered_square_mesh(5, seed=9)
    f = uniform_field(mesh.n_elements, 0.5, 2.0, make_rng(2, stream=11))
    total = assemble_load(mesh, f).b_full.sum()
    expected = (f * element_volumes(mesh)).sum()
    partition_ok = abs(total - expected) < 1e-12 * abs(expected)
    return (single_ok and partition_ok,
            f"triangle vertex loads 1/6; lumped mass total error "
            f"{abs(total - expected):.2e}")


def check_reduced_load():
    mesh = square_mesh(6)
    grad = gradient_operator(mesh)
    bundle = build_offline_bundle(mesh, grad, 8, np.ones(mesh.n_elements))
    load = assemble_load(mesh, np.ones(mesh.n_elements))
    dense = np.array([bundle.basis[:, j] @ load.b for j in range(8)])
    diff = np.abs(dense - reduced_load(bundle.basis, load)).max()
    return diff < 1e-13, f"reduced load vs per-column dot products: {diff:.2e}"


# ---------------------------------------------------------------- reduction


def check_eigensolver_agreement():
    """Sparse shift-invert path spans the same space as dense eigh."""
    mesh = square_mesh(12)
    delta = laplacian(gradient_operator(mesh))
    rho = 10
    psi_dense, vals_dense = compute_basis(delta, rho)
    psi_sparse, vals_sparse = compute_basis(delta, rho, dense_cutoff=1)
    angles = scipy.linalg.subspace_angles(psi_dense, psi_sparse)
    worst_angle = float(angles.max()) if angles.size else 0.0
    val_diff = np.abs(vals_dense - vals_sparse).max()
    ok = worst_angle < 1e-6 and val_diff < 1e-8 * max(1.0, vals_dense[-1])
    return ok, (f"principal angle {worst_angle:.2e}, "
                f"eigenvalue mismatch {val_diff:.2e}")


def check_leverage_oracle():
    """SVD leverage scores vs the Gram-inverse definition."""
    rng = make_rng(4, stream=11)
    x = rng.standard_normal((60, 7))
    scores = leverage_scores(x)
    gram_inv = np.linalg.inv(x.T @ x)
    direct = np.einsum("ij,jk,ik->i", x, gram_inv, x)
    diff = np.abs(scores - direct).max()
    sum_ok = abs(scores.sum() - 7) < 1e-8
    dup = np.vstack([x, x[:3]])
    dup_scores = leverage_scores(dup)
    dup_ok = np.abs(dup_scores[:3] - dup_scores[60:]).max() < 1e-10
    ok = diff < 1e-10 and sum_ok and dup_ok
    return ok, (f"Gram-inverse mismatch {diff:.2e}, sum {scores.sum():.9f}, "
                f"duplicated rows agree to {np.abs(dup_scores[:3] - dup_scores[60:]).max():.2e}")


def check_sampling_distribution():
    scores = np.array([0.5, 0.5, 1.0])
    q = sampling_distribution(scores, 2)
    ok = np.abs(q - [0.25, 0.25, 0.5]).max() < 1e-15 and abs(q.sum() - 1) < 1e-15
    return ok, f"q = {q.tolist()}"


def check_reweighting():
    """Closed-form leverage updates vs full recomputation after scaling."""
    rng = make_rng(6, stream=11)
    worst = 0.0
    for _ in range(20):
        x = rng.standard_normal((40, 5))
        i = int(rng.integers(0, 40))
        gamma = float(rng.uniform(0.05, 3.0))
        _, updated = reweighted_leverage(x, i, gamma)
        y = x.copy()
        y[i] *= math.sqrt(gamma)
        direct = leverage_scores(y)
        worst = max(worst, float(np.abs(updated - direct).max()))
        if abs(updated.sum() - 5) > 1e-8:
            return False, f"trace not preserved: {updated.sum():.9f}"
    return worst < 1e-10, f"worst closed-form vs recompute gap {worst:.2e}"


def check_cross_leverage():
    rng = make_rng(7, stream=11)
    x = rng.standard_normal((30, 4))
    cross = cross_leverage_matrix(x)
    scores = leverage_scores(x)
    identity = np.abs((cross**2).sum(axis=1) - scores).max()
    sym = np.abs(cross - cross.T).max()
    ok = identity < 1e-8 and sym < 1e-12
    return ok, f"sum_j ell_ij^2 vs ell_i gap {identity:.2e}"


def check_laplacian_eigenvalue_trend():
    """Scaled smallest eigenvalue converges monotonically under refinement."""
    target = 2 * math.pi**2
    ratios = []
    for m in (8, 12, 16):
        mesh = square_mesh(m)
        delta = laplacian(gradient_operator(mesh))
        _, vals = compute_basis(delta, 1)
        h = 1.0 / m
        ratios.append(vals[0] / h**2 / target)
    gaps = [abs(r - 1.0) for r in ratios]
    ok = gaps[0] > gaps[1] > gaps[2] and gaps[2] < 0.05
    return ok, f"lambda_min/(h^2 2 pi^2) = {[f'{r:.4f}' for r in ratios]}"


# ---------------------------------------------------------------- sketch


def check_alias_degenerate():
    sampler = build_sampling_table(np.array([1.0, 0.0, 0.0]))
    draws = draw_samples(sampler, 10_000, 3)
    return (draws == 0).all(), "q = (1,0,0) only ever draws row 0"


def check_alias_frequencies():
    """Uniform q: empirical frequencies within 3 sigma; chi-square on a
    random q at the 0.1 % level; zero-probability rows never drawn."""
    m, c = 10, 100_000
    sampler = build_sampling_table(np.full(m, 1.0 / m))
    uniform_counts = np.bincount(draw_samples(sampler, c, 11), minlength=m)
    sigma = math.sqrt(c * (1 / m) * (1 - 1 / m))
    uniform_dev = np.abs(uniform_counts - c / m).max()
    uniform_ok = uniform_dev <= 3 * sigma

    rng = make_rng(12, stream=11)
    q = rng.random(12)
    q[[2, 7]] = 0.0
    q /= q.sum()
    counts = np.bincount(draw_samples(build_sampling_table(q), c, 13),
                         minlength=12)
    zero_ok = counts[2] == 0 and counts[7] == 0
    live = q > 0
    chi2 = ((counts[live] - c * q[live]) ** 2 / (c * q[live])).sum()
    # chi-square 99.9 % quantile, 9 degrees of freedom
    chi2_ok = chi2 < 27.877
    ok = uniform_ok and zero_ok and chi2_ok
    return ok, (f"uniform max dev {uniform_dev:.0f} (3 sigma {3 * sigma:.0f}), "
                f"chi2 {chi2:.2f} (limit 27.88)")


def check_tabulate_counts():
    rng = make_rng(14, stream=11)
    draws = rng.integers(0, 50, size=2_000)
    tab = tabulate(draws)
    counter = Counter(int(i) for i in draws)
    ok = (tab.c == 2_000
          and list(tab.rows) == sorted(counter)
          and all(counter[int(r)] == int(n)
                  for r, n in zip(tab.rows, tab.counts)))
    return ok, f"{tab.c_prime} distinct rows match a Counter recount"


def _small_problem(rho=6, m=8, seed=21):
    mesh = square_mesh(m, lo=-1.0, hi=1.0)
    grad = gradient_operator(mesh)
    bundle = build_offline_bundle(mesh, grad, rho, ball_forcing(mesh))
    p = uniform_field(mesh.n_elements, 0.1, 100.0, make_rng(seed, stream=11))
    field = ParameterField.from_volumes(grad.volumes, p)
    a = assemble_stiffness(grad, field)
    gram = bundle.basis.T @ (a @ bundle.basis)
    gram = (gram + gram.T) * 0.5
    return mesh, grad, bundle, field, a, gram


def check_sketch_three_forms():
    """Frequency form vs naive inverse-probability sum vs S-matrix form."""
    mesh, grad, bundle, field, _, _ = _small_problem()
    c = 4_000
    rng = make_rng(31, stream=11)
    draws = draw_samples(bundle.sampler, c, rng)
    tab = tabulate(draws)
    system = build_sketch(grad, bundle.basis, field.z, tab, bundle.q)

    x = np.sqrt(np.repeat(field.z, grad.dim))[:, None] * \
        np.asarray(grad.d @ bundle.basis)
    naive = np.zeros((bundle.rho, bundle.rho))
    for j in draws:
        row = x[j]
        naive += np.outer(row, row) / bundle.q[j]
    naive /= c

    s = np.zeros((x.shape[0], c))
    for col, j in enumerate(draws):
        s[j, col] = 1.0 / math.sqrt(c * bundle.q[j])
    sform = x.T @ s @ s.T @ x

    scale = np.abs(system.gram).max()
    d1 = np.abs(system.gram - naive).max() / scale
    d2 = np.abs(system.gram - sform).max() / scale
    ok = d1 < 1e-12 and d2 < 1e-12
    return ok, f"frequency vs naive {d1:.2e}, vs S-form {d2:.2e}"


def check_sketch_exact_tab():
    """Forced full coverage with uniform q reproduces G exactly."""
    mesh, grad, bundle, field, _, gram = _small_problem()
    tab = exact_sample_tab(bundle.kd)
    q = np.full(bundle.kd, 1.0 / bundle.kd)
    system = build_sketch(grad, bundle.basis, field.z, tab, q)
    diff = np.abs(system.gram - gram).max() / np.abs(gram).max()
    return diff < 1e-12, f"forced-exact Ghat vs G relative gap {diff:.2e}"


def check_solve_reduced():
    rng = make_rng(33, stream=11)
    m = rng.standard_normal((6, 6))
    gram = m @ m.T + 6 * np.eye(6)
    rhs = rng.standard_normal(6)
    r = solve_reduced(gram, rhs)
    diff = np.linalg.norm(np.linalg.solve(gram, rhs) - r)
    singular = np.outer(np.ones(3), np.ones(3))
    try:
        solve_reduced(singular, np.ones(3))
        raised = False
    except SketchSingularError:
        raised = True
    return (diff < 1e-10 and raised,
            f"dense-solve agreement {diff:.2e}, singular raises: {raised}")


def check_query_convergence():
    """rho = n and a generous budget approximate the exact solution."""
    mesh = square_mesh(5, lo=-1.0, hi=1.0)
    grad = gradient_operator(mesh)
    bundle = build_offline_bundle(mesh, grad, mesh.n_interior,
                                  ball_forcing(mesh))
    p = uniform_field(mesh.n_elements, 0.1, 100.0, make_rng(40, stream=11))
    field = ParameterField.from_volumes(grad.volumes, p)
    a = assemble_stiffness(grad, field)
    u_exact = reference_solve(a, assemble_load(mesh, ball_forcing(mesh)).b)
    res = query(bundle, p, 1_000_000, seed=41)
    rel = np.linalg.norm(res.u - u_exact) / np.linalg.norm(u_exact)
    return rel < 0.05, f"relative error {rel:.4f} at c = 1e6, rho = n"


def check_query_exact_path():
    """Forced-exact sampling at rho = n recovers the reference solution."""
    mesh = square_mesh(5, lo=-1.0, hi=1.0)
    grad = gradient_operator(mesh)
    bundle = build_offline_bundle(mesh, grad, mesh.n_interior,
                                  ball_forcing(mesh))
    p = uniform_field(mesh.n_elements, 0.1, 100.0, make_rng(42, stream=11))
    field = ParameterField.from_volumes(grad.volumes, p)
    a = assemble_stiffness(grad, field)
    u_exact = reference_solve(a, assemble_load(mesh, ball_forcing(mesh)).b)
    res = query(bundle, p, 10, seed=0, force_exact=True)
    rel = np.linalg.norm(res.u - u_exact) / np.linalg.norm(u_exact)
    return rel < 1e-8, f"forced-exact relative error {rel:.2e}"


def check_unbiasedness():
    """Mean sketch matches G; Frobenius MSE halves when c doubles."""
    mesh, grad, bundle, field, _, gram = _small_problem(rho=5, m=6)
    trials = 200

    def mse(c, base_seed):
        total = 0.0
        for t in range(trials):
            rng = make_rng(base_seed + t, stream=11)
            tab = tabulate(draw_samples(bundle.sampler, c, rng))
            system = build_sketch(grad, bundle.basis, field.z, tab, bundle.q)
            total += np.linalg.norm(system.gram - gram, "fro") ** 2
        return total / trials

    ratio = mse(600, 100) / mse(1200, 500)
    ok = 1.3 < ratio < 2.9
    return ok, f"MSE(c)/MSE(2c) = {ratio:.3f} over {trials} trials"


def check_plan_sample_size():
    """Re-evaluate the ceiling formula independently."""
    cases = [(50, 0.1, 1.0), (50, 0.1, 0.5), (10, 0.3, 1.0)]
    for rho, eps, beta in cases:
        m = 15.0 * rho
        expected = math.ceil(m * math.log(m) / (beta * eps**2))
        got = plan_sample_size(rho, eps, beta)
        if got != expected:
            return False, f"plan({rho}, {eps}, {beta}) = {got} != {expected}"
    halved = plan_sample_size(50, 0.1, 0.5)
    full = plan_sample_size(50, 0.1, 1.0)
    ok = halved in (2 * full - 1, 2 * full)
    return ok, f"c(beta=1) = {full}, c(beta=0.5) = {halved}"


# ---------------------------------------------------------------- fields


def check_matern_exponential():
    """nu = 1/2 must reduce to the exponential covariance."""
    rng = make_rng(50, stream=11)
    worst = 0.0
    for _ in range(20):
        x, y = rng.standard_normal((2, 3))
        m_diag = rng.uniform(0.1, 2.0, size=3)
        var = rng.uniform(0.2, 3.0)
        r = math.sqrt((((x - y) ** 2) / m_diag).sum())
        expected = var * math.exp(-r)
        got = matern_covariance(x, y, 0.5, m_diag, var)
        worst = max(worst, abs(got - expected) / var)
    return worst < 1e-12, f"worst relative gap to var*exp(-r): {worst:.2e}"


def check_matern_psd():
    mesh = square_mesh(5)
    pts = mesh.centroids()
    cov = np.array([[matern_covariance(a, b, 7.5, 0.04, 1.0) for b in pts]
                    for a in pts])
    sym = np.abs(cov - cov.T).max()
    diag = np.abs(np.diag(cov) - 1.0).max()
    min_eig = scipy.linalg.eigvalsh(cov)[0]
    norm = np.abs(cov).max()
    ok = sym < 1e-14 and diag < 1e-12 and min_eig > -1e-8 * norm
    return ok, (f"C(x,x) gap {diag:.2e}, symmetry {sym:.2e}, "
                f"min eigenvalue {min_eig:.2e}")


def check_lognormal_kl():
    """Sample covariance of log p over 2,000 draws vs the Matern kernel."""
    mesh = square_mesh(4)
    pts = mesh.centroids()
    draws = 2_000
    logs = np.empty((draws, mesh.n_elements))
    for t in range(draws):
        logs[t] = np.log(lognormal_field(mesh, 3.5, 0.04, 1.0,
                                         seed_or_rng=make_rng(t, stream=11)))
    rng = make_rng(55, stream=11)
    worst = 0.0
    for _ in range(5):
        i, j = rng.integers(0, mesh.n_elements, size=2)
        expected = matern_covariance(pts[i], pts[j], 3.5, 0.04, 1.0)
        sample = np.cov(logs[:, i], logs[:, j])[0, 1]
        # standard error of a covariance estimate from iid gaussian pairs
        se = math.sqrt((1.0 + expected**2) / draws)
        worst = max(worst, abs(sample - expected) / se)
    ok = worst < 3.0
    var_zero = lognormal_field(mesh, 3.5, 0.04, 0.0)
    ok = ok and np.abs(var_zero - 1.0).max() == 0.0
    return ok, f"worst |sample - C| = {worst:.2f} standard errors"


def check_discontinuous_field():
    mesh = cube_mesh(2, lo=-1.0, hi=1.0)
    p = discontinuous_field(mesh, seed_or_rng=make_rng(60, stream=11))
    centroids = mesh.centroids()
    expected = (9.1 + np.sign(centroids[:, 0]) + 3 * np.sign(centroids[:, 1])
                + 5 * np.sign(centroids[:, 2]))
    noise = p - expected
    in_range = (p > 0.0999).all() and (p < 18.2001).all()
    noise_ok = (noise >= 0).all() and (noise <= 0.1).all()
    octants = len(np.unique(np.round(expected, 9)))
    ok = in_range and noise_ok and octants == 8
    return ok, (f"8 octant levels, noise in [0, 0.1], "
                f"range [{p.min():.3f}, {p.max():.3f}]")


def check_ball_forcing():
    cube = cube_mesh(8, lo=-1.0, hi=1.0)
    f = ball_forcing(cube)
    dist = np.linalg.norm(cube.centroids() - np.array([-0.5, 0.0, 0.0]),
                          axis=1)
    match = ((f == 5.0) == (dist <= 0.3)).all() and f.max() == 5.0
    outside = ball_forcing(square_mesh(4))  # unit square misses the ball
    ok = match and (outside == 0.0).all()
    return ok, (f"{int((f > 0).sum())} forced elements on the cube, "
                f"0 on the unit square")


# ---------------------------------------------------------------- diagnostics


def check_reference_solve():
    mesh, grad, bundle, field, a, _ = _small_problem()
    b = assemble_load(mesh, ball_forcing(mesh)).b
    u = reference_solve(a, b)
    dense = np.linalg.solve(a.toarray(), b)
    diff = np.linalg.norm(u - dense) / np.linalg.norm(dense)
    return diff < 1e-10, f"sparse vs dense solve gap {diff:.2e}"


def check_disk_poisson():
    """Analytic Poisson solution on the unit disk under refinement."""
    errors = []
    for rings in (3, 6, 12):
        mesh = disk_mesh(rings)
        grad = gradient_operator(mesh)
        ones = ParameterField.from_volumes(grad.volumes,
                                           np.ones(mesh.n_elements))
        a = assemble_stiffness(grad, ones)
        b = assemble_load(mesh, np.ones(mesh.n_elements)).b
        u = reference_solve(a, b)
        exact = lambda xy: (1.0 - (xy**2).sum(axis=1)) / 4.0
        errors.append(relative_l2_error(mesh, u, exact))
    ok = errors[0] > errors[1] > errors[2] and errors[2] < 0.04
    return ok, "relative L2 errors " + ", ".join(f"{e:.4f}" for e in errors)


def check_projection_error():
    rng = make_rng(70, stream=11)
    basis, _ = np.linalg.qr(rng.standard_normal((40, 6)))
    u = rng.standard_normal(40)
    direct = np.linalg.norm(u - basis @ basis.T @ u) / np.linalg.norm(u)
    got = projection_error(basis, u)
    in_span = projection_error(basis, basis @ rng.standard_normal(6))
    ok = abs(direct - got) < 1e-12 and in_span < 1e-12
    return ok, f"projector oracle gap {abs(direct - got):.2e}"


def check_sketch_deviation_oracle():
    g = np.diag([2.0, 8.0])
    ghat = np.diag([4.0, 4.0])
    got = sketch_deviation(g, ghat)
    ok = abs(got - 1.0) < 1e-12
    singular = sketch_deviation(g, np.zeros((2, 2)))
    ok = ok and math.isinf(singular)
    return ok, f"diag oracle gives {got:.6f} (want 1), singular -> inf"


def check_error_identity_and_bounds():
    """Reduced-error identity, its norm bound, and the a priori bounds."""
    mesh, grad, bundle, field, a, gram = _small_problem(rho=8, m=8)
    b = assemble_load(mesh, ball_forcing(mesh)).b
    u_opt = reference_solve(a, b)
    rhs = bundle.basis.T @ b
    u_reg = bundle.basis @ np.linalg.solve(gram, rhs)
    proj = projection_error(bundle.basis, u_opt)

    # Query-specific exact leverage scores make beta = 1.
    x = np.sqrt(np.repeat(field.z, grad.dim))[:, None] * \
        np.asarray(grad.d @ bundle.basis)
    q = sampling_distribution(leverage_scores(x), bundle.rho)
    sampler = build_sampling_table(q)
    eps = 0.4
    c = plan_sample_size(bundle.rho, eps, 1.0)
    b41, b42, b43 = theorem_bounds(gram, a, eps, proj)

    reg_bound_ok = np.linalg.norm(u_opt - u_reg) <= \
        b42 * np.linalg.norm(u_opt) * (1 + 1e-12) + 1e-300
    trials, identity_worst, covered, bound21 = 200, 0.0, 0, True
    total_ok = True
    for t in range(trials):
        rng = make_rng(1000 + t, stream=11)
        tab = tabulate(sampler.draw(rng, c))
        system = build_sketch(grad, bundle.basis, field.z, tab, q)
        try:
            r = solve_reduced(system.gram, rhs)
        except SketchSingularError:
            continue
        u_hat = bundle.basis @ r
        dev = sketch_deviation(gram, system.gram)
        reg_err = (np.linalg.norm(u_hat - u_reg)
                   / np.linalg.norm(u_reg))
        identity = bundle.basis @ (
            np.linalg.solve(system.gram, gram @ (bundle.basis.T @ u_reg))
            - bundle.basis.T @ u_reg)
        identity_worst = max(identity_worst,
                             float(np.linalg.norm((u_hat - u_reg) - identity)
                                   / np.linalg.norm(u_reg)))
        if reg_err > dev * (1 + 1e-9):
            bound21 = False
        if reg_err <= b41:
            covered += 1
        total = np.linalg.norm(u_hat - u_opt) / np.linalg.norm(u_opt)
        if total > b43 * (1 + 1e-12):
            total_ok = False
    coverage = covered / trials
    ok = (reg_bound_ok and bound21 and identity_worst < 1e-10
          and coverage >= 0.995 and total_ok)
    return ok, (f"identity gap {identity_worst:.2e}, reg<=dev always "
                f"{bound21}, bound41 coverage {coverage:.3f}")


def check_benchmark_trend():
    """Mean total error decreases as the sample budget grows."""
    mesh = square_mesh(10, lo=-1.0, hi=1.0)
    grad = gradient_operator(mesh)
    bundle = build_offline_bundle(mesh, grad, 10, ball_forcing(mesh))
    spec = FieldSpec(kind="uniform", params={"lo": 0.1, "hi": 100.0})
    means = []
    for c in (500, 2_000, 8_000):
        result = run_benchmark(bundle, spec, n_queries=40, c=c, seed=77)
        means.append(result.mean_values()["total_err"])
    ok = means[0] > means[1] > means[2]
    return ok, "mean total_err " + " > ".join(f"{m:.4f}" for m in means)


CHECKS = [
    ("mesh.boundary_classification", check_boundary_classification),
    ("mesh.single_triangle_boundary", check_single_triangle_boundary),
    ("mesh.volumes", check_volumes),
    ("mesh.reference_gradients", check_reference_gradients),
    ("mesh.affine_reconstruction", check_affine_reconstruction),
    ("assembly.element_loop_oracle", check_stiffness_element_loop),
    ("assembly.five_point_stencil", check_five_point_stencil),
    ("assembly.load_vector", check_load_vector),
    ("assembly.reduced_load", check_reduced_load),
    ("reduction.eigensolver_agreement", check_eigensolver_agreement),
    ("reduction.leverage_oracle", check_leverage_oracle),
    ("reduction.sampling_distribution", check_sampling_distribution),
    ("reduction.reweighting", check_reweighting),
    ("reduction.cross_leverage", check_cross_leverage),
    ("reduction.laplacian_eigenvalue_trend", check_laplacian_eigenvalue_trend),
    ("sketch.alias_degenerate", check_alias_degenerate),
    ("sketch.alias_frequencies", check_alias_frequencies),
    ("sketch.tabulate_counts", check_tabulate_counts),
    ("sketch.three_forms", check_sketch_three_forms),
    ("sketch.exact_tab", check_sketch_exact_tab),
    ("sketch.solve_reduced", check_solve_reduced),
    ("sketch.query_convergence", check_query_convergence),
    ("sketch.query_exact_path", check_query_exact_path),
    ("sketch.unbiasedness", check_unbiasedness),
    ("sketch.plan_sample_size", check_plan_sample_size),
    ("fields.matern_exponential", check_matern_exponential),
    ("fields.matern_psd", check_matern_psd),
    ("fields.lognormal_kl", check_lognormal_kl),
    ("fields.discontinuous", check_discontinuous_field),
    ("fields.ball_forcing", check_ball_forcing),
    ("diagnostics.reference_solve", check_reference_solve),
    ("diagnostics.disk_poisson", check_disk_poisson),
    ("diagnostics.projection_error", check_projection_error),
    ("diagnostics.sketch_deviation", check_sketch_deviation_oracle),
    ("diagnostics.identity_and_bounds", check_error_identity_and_bounds),
    ("diagnostics.benchmark_trend", check_benchmark_trend),
]


def run_verify():
    """Run every check; returns a list of CheckResult."""
    results = []
    for name, fn in CHECKS:
        try:
            passed, detail = fn()
        except Exception as exc:  # a crash is a failure, not an abort
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append(CheckResult(name=name, passed=bool(passed),
                                   detail=detail))
    return results
