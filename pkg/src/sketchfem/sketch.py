"""Online sketched solves: sampling, sketch assembly, reduced solve.

For a query field with scaling z the sketched Gram matrix is

    Ghat = Xhat^T Xhat,    Xhat = M Zhat D_(J) Psi,

where J holds the distinct rows of c iid draws from the sampling
distribution q, M_jj^2 = count_j / (c q_j) undoes the sampling bias, and
Zhat_jj^2 is the z value at row j.  Ghat is an unbiased estimator of
G = Psi^T A Psi for every admissible field.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._rng import STREAM_SKETCH, make_rng
from .assembly import ParameterField
from .errors import SketchSingularError, ValidationError

SOLVE_RESIDUAL_TOL = 1e-10
MAX_RETRIES = 3


class AliasSampler:
    """Walker alias table: constant-time draws from a discrete distribution.

    Build is O(m); each draw needs one uniform integer and one uniform float.
    Cells with zero probability can never be drawn because their acceptance
    threshold is zero and their alias points at a positive-probability cell.
    """

    def __init__(self, q):
        q = np.ascontiguousarray(q, dtype=np.float64)
        if q.ndim != 1 or q.size == 0:
            raise ValidationError("distribution must be a nonempty vector")
        if (q < 0).any() or not np.isfinite(q).all():
            raise ValidationError("distribution entries must be finite and >= 0")
        if abs(q.sum() - 1.0) > 1e-9:
            raise ValidationError(f"distribution sums to {q.sum():.12f}, not 1")
        m = q.size
        scaled = q * m
        prob = np.ones(m)
        alias = np.arange(m)
        small = [i for i in range(m) if scaled[i] < 1.0]
        large = [i for i in range(m) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            l = large.pop()
            prob[s] = scaled[s]
            alias[s] = l
            scaled[l] -= 1.0 - scaled[s]
            (small if scaled[l] < 1.0 else large).append(l)
        # Leftovers differ from 1 only by accumulated rounding.
        for i in small:
            prob[i] = 1.0
        for i in large:
            prob[i] = 1.0
        self.size = m
        self.q = q
        self._prob = prob
        self._alias = alias

    def draw(self, rng, count):
        """Vectorized draws; consumes (integers, floats) in a fixed order."""
        idx = rng.integers(0, self.size, size=count)
        u = rng.random(count)
        return np.where(u < self._prob[idx], idx, self._alias[idx])


def build_sampling_table(q) -> AliasSampler:
    """Precompute the constant-time sampling table for q."""
    return AliasSampler(q)


def draw_samples(sampler: AliasSampler, c, seed_or_rng):
    """c iid row indices from the sampler, bit-reproducible for a fixed seed."""
    if c < 1:
        raise ValidationError(f"sample count must be >= 1, got {c}")
    rng = (seed_or_rng if isinstance(seed_or_rng, np.random.Generator)
           else make_rng(seed_or_rng, stream=STREAM_SKETCH))
    return sampler.draw(rng, int(c))


@dataclass(frozen=True)
class SampleTab:
    """Deduplicated sample: sorted distinct rows with their frequencies."""

    rows: np.ndarray     # (c_prime,) sorted distinct row indices
    counts: np.ndarray   # (c_prime,) frequencies, sum = c
    c: int               # number of raw draws
    seed: int | None = None

    @property
    def c_prime(self):
        return self.rows.shape[0]


def tabulate(indices, seed=None) -> SampleTab:
    """Collapse raw draws into (distinct rows, frequencies)."""
    indices = np.asarray(indices)
    rows, counts = np.unique(indices, return_counts=True)
    return SampleTab(rows=rows.astype(np.int64), counts=counts,
                     c=int(indices.size), seed=seed)


def exact_sample_tab(kd) -> SampleTab:
    """Degenerate tab hitting every row once; with uniform q the sketch
    weights are exactly one and Ghat reproduces G.  Diagnostic device."""
    return SampleTab(rows=np.arange(kd, dtype=np.int64),
                     counts=np.ones(kd, dtype=np.int64), c=int(kd))


@dataclass(frozen=True)
class SketchSystem:
    """Sketched reduced system for one query field."""

    xhat: np.ndarray       # (c_prime, rho)
    gram: np.ndarray       # (rho, rho)
    weights: np.ndarray    # (c_prime,) M diagonal, M^2 = counts / (c q)
    z_sampled: np.ndarray  # (c_prime,) z values at the sampled rows


def build_sketch(grad, psi, z, tab: SampleTab, q) -> SketchSystem:
    """Assemble Xhat and Ghat from a tabulated sample.

    Parameters
    ----------
    grad : GradientOperator
    psi : ndarray, shape (n, rho)
    z : ndarray, shape (k,)
        Query scaling vector (volumes times field values).
    tab : SampleTab
    q : ndarray, shape (kd,)
        Distribution the sample was drawn from.

    Cost is O(c_prime * rho) plus the draw itself; the full operator is
    never densified.
    """
    rows = tab.rows
    if rows.size and (rows[0] < 0 or rows[-1] >= grad.n_rows):
        raise ValidationError("sampled row index out of range")
    q_rows = np.asarray(q)[rows]
    if (q_rows <= 0).any():
        raise ValidationError("sample hit a zero-probability row")
    z = np.asarray(z, dtype=np.float64)
    z_rows = z[rows // grad.dim]
    if (z_rows <= 0).any():
        raise ValidationError("query scaling must be positive")
    weights = np.sqrt(tab.counts / (tab.c * q_rows))
    xhat = (weights * np.sqrt(z_rows))[:, None] * (grad.d[rows] @ psi)
    gram = xhat.T @ xhat
    gram = (gram + gram.T) * 0.5
    return SketchSystem(xhat=xhat, gram=gram, weights=weights,
                        z_sampled=z_rows)


def solve_reduced(gram, rhs):
    """Solve Ghat r = rhs by Cholesky; non-positive pivots are singular.

    One step of iterative refinement keeps the residual within
    1e-10 * ||rhs|| on ill-conditioned but invertible systems.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
        r = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SketchSingularError(f"sketched system is singular: {exc}") from None
    tol = SOLVE_RESIDUAL_TOL * np.linalg.norm(rhs)
    residual = np.linalg.norm(gram @ r - rhs)
    if residual > tol:
        r = r + scipy.linalg.cho_solve(factor, rhs - gram @ r,
                                       check_finite=False)
        residual = np.linalg.norm(gram @ r - rhs)
        if residual > tol:
            raise SketchSingularError(
                f"reduced solve residual {residual:.3e} exceeds tolerance; "
                f"sketch is numerically singular")
    return r


@dataclass(frozen=True)
class QueryResult:
    """Outcome of one online solve."""

    r: np.ndarray         # (rho,) reduced coefficients
    u: np.ndarray         # (n,) lifted solution Psi r
    gram: np.ndarray      # (rho, rho) sketched Gram matrix
    c: int                # raw draws
    c_prime: int          # distinct rows
    seed: int
    retries: int
    elapsed_s: float      # sampling through reduced solve


def query(bundle, p, c, seed, max_retries=MAX_RETRIES, force_exact=False):
    """Algorithm: sample rows, build the sketch, solve the reduced system.

    Retries with derived sub-streams up to ``max_retries`` times when the
    sketch comes out singular; raises SketchSingularError after the last
    attempt.  ``force_exact`` replaces sampling with the deterministic
    full-coverage tab (testing and diagnostics only).

    The reported time covers sampling through the reduced solve; lifting
    u = Psi r is excluded, matching the usual reduced-order usage where
    only functionals of r are needed.
    """
    if bundle.gradient is None or bundle.sampler is None:
        raise ValidationError("bundle is not attached to a mesh")
    grad = bundle.gradient
    field = ParameterField.from_volumes(grad.volumes, p)
    rho = bundle.rho

    start = time.perf_counter()
    retries = 0
    last_error = None
    for attempt in range(max_retries + 1):
        if force_exact:
            tab = exact_sample_tab(bundle.kd)
            q_eff = np.full(bundle.kd, 1.0 / bundle.kd)
        else:
            rng = make_rng(seed, stream=STREAM_SKETCH, attempt=attempt)
            tab = tabulate(draw_samples(bundle.sampler, c, rng), seed=seed)
            q_eff = bundle.q
        if tab.c_prime < rho:
            last_error = SketchSingularError(
                f"sample covers {tab.c_prime} rows < rho = {rho}")
            retries = attempt + 1
            continue
        system = build_sketch(grad, bundle.basis, field.z, tab, q_eff)
        try:
            r = solve_reduced(system.gram, bundle.reduced_load)
        except SketchSingularError as exc:
            last_error = exc
            retries = attempt + 1
            continue
        elapsed = time.perf_counter() - start
        return QueryResult(r=r, u=bundle.basis @ r, gram=system.gram,
                           c=tab.c, c_prime=tab.c_prime, seed=int(seed),
                           retries=attempt, elapsed_s=elapsed)
    elapsed = time.perf_counter() - start
    raise SketchSingularError(
        f"sketch stayed singular after {max_retries} retries: {last_error}",
        retries=retries, elapsed_s=elapsed)


def plan_sample_size(rho, epsilon, beta=0.5):
    """Sample count c = ceil(15 rho ln(15 rho) / (beta epsilon^2)).

    ``beta`` quantifies how well the offline distribution covers the query's
    own leverage scores (1 = exact); 0.5 is a robust default.
    """
    if rho < 1:
        raise ValidationError(f"rho must be >= 1, got {rho}")
    if not 0 < epsilon < 1:
        raise ValidationError(f"epsilon must be in (0, 1), got {epsilon}")
    if not 0 < beta <= 1:
        raise ValidationError(f"beta must be in (0, 1], got {beta}")
    m = 15.0 * rho
    return int(math.ceil(m * math.log(m) / (beta * epsilon * epsilon)))
