"""Error diagnostics: reference solves, deviations, bounds, benchmarks.

Every benchmark run reports, per query, the projection error of the exact
solution onto the reduced basis, the sketch deviation ||Ghat^-1 G - I||,
the regression error against the exact reduced solution, the total error
against the full solution, both condition numbers, and the a priori bounds
they enter.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields as dc_fields

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._rng import STREAM_FIELD, make_rng, query_seed
from .assembly import ParameterField, assemble_load, assemble_stiffness
from .errors import NumericalError, SketchSingularError, ValidationError
from .fields import forcing_field, generate_field
from .sketch import query

REFERENCE_RESIDUAL_TOL = 1e-10
DENSE_CONDITION_CUTOFF = 500

CSV_COLUMNS = ("rho", "c", "time_s", "dedup_ratio", "proj_err", "sketch_dev",
               "reg_err", "total_err", "kappa_A", "kappa_G", "bound41",
               "bound42", "bound43", "retries")


def reference_solve(a, b):
    """Exact interior solution by sparse LU, with a residual guarantee."""
    b = np.asarray(b, dtype=np.float64)
    lu = spla.splu(a.tocsc())
    u = lu.solve(b)
    scale = np.linalg.norm(b)
    residual = np.linalg.norm(a @ u - b)
    if residual > REFERENCE_RESIDUAL_TOL * max(scale, 1e-300):
        u = u + lu.solve(b - a @ u)
        residual = np.linalg.norm(a @ u - b)
        if residual > REFERENCE_RESIDUAL_TOL * max(scale, 1e-300):
            raise NumericalError(
                f"reference solve residual {residual:.3e} exceeds tolerance")
    return u


def projection_error(psi, u):
    """Relative distance of u from the span of the basis columns."""
    u = np.asarray(u, dtype=np.float64)
    norm = np.linalg.norm(u)
    if norm == 0:
        return 0.0
    coeff = psi.T @ u
    return float(np.linalg.norm(u - psi @ coeff) / norm)


def sketch_deviation(gram_exact, gram_sketch):
    """Spectral norm of Ghat^-1 G - I; infinite when Ghat is singular."""
    try:
        factor = scipy.linalg.cho_factor(gram_sketch, lower=True,
                                         check_finite=False)
        m = scipy.linalg.cho_solve(factor, gram_exact, check_finite=False)
    except scipy.linalg.LinAlgError:
        return math.inf
    m -= np.eye(gram_exact.shape[0])
    return float(np.linalg.norm(m, 2))


def condition_number(a, dense_cutoff=DENSE_CONDITION_CUTOFF, tol=1e-6):
    """Spectral condition number of a symmetric positive definite matrix.

    Dense below ``dense_cutoff``; otherwise extreme eigenvalues from Lanczos
    iterations (shift-invert for the smallest) with relative tolerance
    ``tol``.
    """
    n = a.shape[0]
    if not sp.issparse(a):
        vals = scipy.linalg.eigvalsh(np.asarray(a))
        return float(vals[-1] / vals[0])
    if n <= dense_cutoff:
        vals = scipy.linalg.eigvalsh(a.toarray())
        return float(vals[-1] / vals[0])
    v0 = np.full(n, 1.0 / np.sqrt(n))
    top = spla.eigsh(a, k=1, which="LA", tol=tol, v0=v0,
                     return_eigenvectors=False)[0]
    bottom = spla.eigsh(a, k=1, sigma=0.0, which="LM", tol=tol, v0=v0,
                        return_eigenvectors=False)[0]
    return float(top / bottom)


def epsilon_for(c, rho, beta):
    """Invert the sample-size rule: the epsilon a budget of c draws buys."""
    m = 15.0 * rho
    return math.sqrt(m * math.log(m) / (beta * c))


def theorem_bounds(gram_exact, a, epsilon, proj_err,
                   kappa_g=None, kappa_a=None):
    """A priori bounds on regression, projection, and total relative error.

    Returns (bound41, bound42, bound43):
        bound41 = sqrt(kappa(G)) eps / (1 - eps)          [regression]
        bound42 = (1 + sqrt(kappa(A))) proj_err           [exact reduced]
        bound43 = (1 + proj_err sqrt(kappa(A))) bound41 + bound42
    For epsilon >= 1 the regression bound is vacuous and reported infinite.
    """
    if kappa_g is None:
        kappa_g = condition_number(gram_exact)
    if kappa_a is None:
        kappa_a = condition_number(a)
    if epsilon >= 1.0:
        b41 = math.inf
    else:
        b41 = math.sqrt(kappa_g) * epsilon / (1.0 - epsilon)
    root_ka = math.sqrt(kappa_a)
    b42 = (1.0 + root_ka) * proj_err
    b43 = (1.0 + proj_err * root_ka) * b41 + b42
    return b41, b42, b43


def beta_quality(q, x):
    """Exact coverage constant beta of q for the leverage scores of x.

    Largest beta with q_i >= beta * ell_i(x) / rho for all rows; 0 when a
    row with positive leverage has zero probability.  Small instances only:
    materializes the scores of x.
    """
    from .reduction import leverage_scores

    scores = leverage_scores(x)
    rho = x.shape[1]
    q = np.asarray(q, dtype=np.float64)
    active = scores > 0
    if not active.any():
        return 1.0
    ratios = rho * q[active] / scores[active]
    return float(min(1.0, ratios.min()))


@dataclass
class ErrorReport:
    """One benchmark row; field order matches the CSV columns."""

    rho: int
    c: int
    time_s: float
    dedup_ratio: float
    proj_err: float
    sketch_dev: float
    reg_err: float
    total_err: float
    kappa_A: float
    kappa_G: float
    bound41: float
    bound42: float
    bound43: float
    retries: int

    @property
    def singular(self):
        return math.isinf(self.sketch_dev)


@dataclass
class BenchmarkResult:
    rows: list
    singular_count: int
    reference_median_s: float
    online_median_s: float

    def mean_values(self):
        """Column means over non-singular rows (None when empty)."""
        good = [r for r in self.rows if not r.singular]
        if not good:
            return None
        names = [f.name for f in dc_fields(ErrorReport)]
        return {name: float(np.mean([getattr(r, name) for r in good]))
                for name in names}


def _format_value(name, value, mean_row=False):
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    if name in ("rho", "c", "retries") and not mean_row:
        return str(int(value))
    return f"{float(value):.6g}"


def report_csv(result: BenchmarkResult):
    """Render the benchmark as CSV: header, one row per run, a MEAN row."""
    lines = [",".join(CSV_COLUMNS)]
    for row in result.rows:
        lines.append(",".join(_format_value(name, getattr(row, name))
                              for name in CSV_COLUMNS))
    means = result.mean_values()
    if means is not None:
        mean_fields = ["MEAN"] + [
            _format_value(name, means[name], mean_row=True)
            for name in CSV_COLUMNS[1:]]
        lines.append(",".join(mean_fields))
    return "\n".join(lines) + "\n"


def _symmetrized_reduced_gram(a, psi):
    gram = psi.T @ (a @ psi)
    return (gram + gram.T) * 0.5


def run_benchmark(bundle, field_spec, n_queries, c, seed,
                  epsilon=None, beta=0.5, forcing="ball", threads=1,
                  force_exact=False):
    """Run a stream of sketched queries with full diagnostics.

    Query t draws its field and its sketch from streams keyed by
    seed XOR t, so results are independent of execution order and thread
    count.  Singular queries are recorded with infinite deviation and
    excluded from means.  ``epsilon`` defaults to the value the sample
    budget c buys at the given beta, and feeds the reported bounds.
    """
    if bundle.mesh is None or bundle.gradient is None:
        raise ValidationError("bundle is not attached to a mesh")
    if n_queries < 1:
        raise ValidationError("need at least one query")
    mesh = bundle.mesh
    grad = bundle.gradient
    psi = bundle.basis
    rho = bundle.rho
    kd = bundle.kd
    eps = epsilon_for(c, rho, beta) if epsilon is None else float(epsilon)

    f = forcing_field(mesh, forcing)
    load = assemble_load(mesh, f)
    b = load.b
    check = np.linalg.norm(psi.T @ b - bundle.reduced_load)
    if check > 1e-10 * max(1.0, np.linalg.norm(b)):
        raise ValidationError(
            f"forcing {forcing!r} is inconsistent with the bundle's reduced "
            f"load (deviation {check:.3e}); use the offline forcing")

    def one_query(t):
        seed_t = query_seed(seed, t)
        p = generate_field(field_spec, mesh,
                           make_rng(seed_t, stream=STREAM_FIELD))
        field = ParameterField.from_volumes(grad.volumes, p)

        t0 = time.perf_counter()
        a = assemble_stiffness(grad, field)
        u_opt = reference_solve(a, b)
        t_ref = time.perf_counter() - t0

        gram = _symmetrized_reduced_gram(a, psi)
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
        u_reg = psi @ scipy.linalg.cho_solve(factor, bundle.reduced_load,
                                             check_finite=False)
        proj = projection_error(psi, u_opt)
        kappa_a = condition_number(a)
        kappa_g = condition_number(gram)
        b41, b42, b43 = theorem_bounds(gram, a, eps, proj,
                                       kappa_g=kappa_g, kappa_a=kappa_a)
        try:
            res = query(bundle, p, c, seed_t, force_exact=force_exact)
        except SketchSingularError as exc:
            row = ErrorReport(rho=rho, c=c, time_s=exc.elapsed_s,
                              dedup_ratio=math.nan, proj_err=proj,
                              sketch_dev=math.inf, reg_err=math.inf,
                              total_err=math.inf, kappa_A=kappa_a,
                              kappa_G=kappa_g, bound41=b41, bound42=b42,
                              bound43=b43, retries=exc.retries)
            return row, t_ref
        dev = sketch_deviation(gram, res.gram)
        norm_reg = np.linalg.norm(u_reg)
        norm_opt = np.linalg.norm(u_opt)
        reg_err = (np.linalg.norm(res.u - u_reg) / norm_reg
                   if norm_reg > 0 else 0.0)
        total_err = (np.linalg.norm(res.u - u_opt) / norm_opt
                     if norm_opt > 0 else 0.0)
        row = ErrorReport(rho=rho, c=res.c, time_s=res.elapsed_s,
                          dedup_ratio=res.c_prime / kd, proj_err=proj,
                          sketch_dev=dev, reg_err=float(reg_err),
                          total_err=float(total_err), kappa_A=kappa_a,
                          kappa_G=kappa_g, bound41=b41, bound42=b42,
                          bound43=b43, retries=res.retries)
        return row, t_ref

    workers = threads if threads and threads > 0 else (os.cpu_count() or 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one_query, range(n_queries)))
    else:
        outcomes = [one_query(t) for t in range(n_queries)]

    rows = [row for row, _ in outcomes]
    ref_times = [t for _, t in outcomes]
    good_times = [r.time_s for r in rows if not r.singular]
    return BenchmarkResult(
        rows=rows,
        singular_count=sum(r.singular for r in rows),
        reference_median_s=float(np.median(ref_times)),
        online_median_s=float(np.median(good_times)) if good_times
        else math.nan)


def relative_l2_error(mesh, u_interior, exact_fn):
    """Relative L2 distance between the P1 interpolant and a smooth field.

    Uses the degree-two edge-midpoint quadrature on triangles; 2-D meshes
    only.  ``exact_fn`` maps an (m, 2) coordinate array to values.
    """
    if mesh.dim != 2:
        raise ValidationError("L2 quadrature implemented for 2-D meshes")
    u_full = np.zeros(mesh.n_vertices)
    u_full[mesh.interior] = u_interior
    from .mesh import element_volumes

    vols = element_volumes(mesh)
    tri = mesh.elements
    err_sq = 0.0
    norm_sq = 0.0
    pairs = ((0, 1), (1, 2), (2, 0))
    for (i, j) in pairs:
        mids = 0.5 * (mesh.vertices[tri[:, i]] + mesh.vertices[tri[:, j]])
        uh = 0.5 * (u_full[tri[:, i]] + u_full[tri[:, j]])
        ue = exact_fn(mids)
        err_sq += (vols / 3.0 * (uh - ue) ** 2).sum()
        norm_sq += (vols / 3.0 * ue**2).sum()
    return float(math.sqrt(err_sq / norm_sq))
