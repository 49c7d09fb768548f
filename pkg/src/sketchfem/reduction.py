"""Offline reduction: Laplacian eigenbasis and leverage-score sampling.

The reduced basis Psi collects eigenvectors of the parameter-free operator
Delta = D^T diag(vol (x) 1_d) D for the rho smallest eigenvalues, stored in
ascending eigenvalue order.  Sampling probabilities come from the leverage
scores of X_Delta = diag(sqrt(vol (x) 1_d)) D Psi, one score per gradient
row, normalized by rho.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import ParameterField, assemble_load, assemble_stiffness, reduced_load
from .errors import (FingerprintMismatchError, NumericalError,
                     RankDeficiencyError, ValidationError)
from .mesh import GradientOperator, Mesh, gradient_operator

# Below this size a dense symmetric eigensolve is both faster and simpler
# than shift-invert Lanczos.
DENSE_EIGEN_CUTOFF = 800

EIG_RESIDUAL_TOL = 1e-8


def laplacian(grad: GradientOperator):
    """Parameter-free stiffness Delta (diffusion field identically one)."""
    ones = ParameterField.from_volumes(grad.volumes, np.ones_like(grad.volumes))
    return assemble_stiffness(grad, ones)


def compute_basis(delta, rho, dense_cutoff=DENSE_EIGEN_CUTOFF):
    """Orthonormal eigenvectors of the rho smallest Laplacian eigenvalues.

    Parameters
    ----------
    delta : sparse matrix, shape (n, n)
        Symmetric positive definite interior Laplacian.
    rho : int
        Basis size, 1 <= rho <= n.

    Returns
    -------
    psi : ndarray, shape (n, rho)
        Eigenvectors, columns ordered by ascending eigenvalue.
    eigenvalues : ndarray, shape (rho,)
    """
    n = delta.shape[0]
    if not 1 <= rho <= n:
        raise ValidationError(f"rho must be in [1, {n}], got {rho}")
    if n <= dense_cutoff or rho > n - 2:
        dense = delta.toarray() if sp.issparse(delta) else np.asarray(delta)
        vals, vecs = scipy.linalg.eigh(dense, subset_by_index=(0, rho - 1))
    else:
        # Shift-invert Lanczos with a fixed start vector for reproducibility.
        v0 = np.full(n, 1.0 / np.sqrt(n))
        vals, vecs = spla.eigsh(delta.tocsc(), k=rho, sigma=0.0,
                                which="LM", v0=v0)
    order = np.argsort(vals)
    vals = np.ascontiguousarray(vals[order])
    vecs = np.ascontiguousarray(vecs[:, order])

    residual = delta @ vecs - vecs * vals
    worst = float(np.linalg.norm(residual, axis=0).max())
    if worst > EIG_RESIDUAL_TOL:
        raise NumericalError(
            f"eigensolver residual {worst:.3e} exceeds {EIG_RESIDUAL_TOL:.0e}")
    return vecs, vals


def leverage_scores(x):
    """Row leverage scores of a tall full-column-rank matrix.

    Computed from the thin SVD: the score of row i is the squared norm of
    row i of the left singular factor.  Scores land in [0, 1] and sum to the
    number of columns.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < x.shape[1]:
        raise ValidationError(f"expected a tall matrix, got shape {x.shape}")
    u, s, _ = np.linalg.svd(x, full_matrices=False)
    tol = s[0] * max(x.shape) * np.finfo(np.float64).eps if s.size else 0.0
    rank = int((s > tol).sum())
    if rank < x.shape[1]:
        raise RankDeficiencyError(
            f"matrix has numerical rank {rank} < {x.shape[1]} columns")
    scores = np.einsum("ij,ij->i", u, u)
    return np.clip(scores, 0.0, 1.0)


def cross_leverage_matrix(x):
    """Dense matrix of cross leverage scores U U^T (small instances only)."""
    x = np.asarray(x, dtype=np.float64)
    u, _, _ = np.linalg.svd(x, full_matrices=False)
    return u @ u.T


def sampling_distribution(scores, rho):
    """Leverage scores scaled by 1/rho and renormalized to unit sum."""
    scores = np.asarray(scores, dtype=np.float64)
    if (scores < 0).any():
        raise ValidationError("leverage scores must be nonnegative")
    total = scores.sum()
    if not np.isfinite(total) or total <= 0:
        raise ValidationError("leverage scores sum to zero")
    if abs(total - rho) > 1e-6 * max(1.0, rho):
        raise ValidationError(
            f"leverage scores sum to {total:.6f}, expected rho = {rho}")
    q = scores / rho
    return q / q.sum()


def reweighted_leverage(x, i, gamma):
    """Leverage scores after scaling row i of x by sqrt(gamma).

    Uses the rank-one update formulas: with ell_j the original scores and
    ell_ij the cross scores,

        ell_i' = gamma ell_i / (1 - (1 - gamma) ell_i)
        ell_j' = ell_j + (1 - gamma) ell_ij^2 / (1 - (1 - gamma) ell_i)

    Returns
    -------
    (ell_i_new, scores_new) : (float, ndarray)
    """
    x = np.asarray(x, dtype=np.float64)
    if not 0 <= i < x.shape[0]:
        raise ValidationError(f"row index {i} out of range")
    if gamma <= 0:
        raise ValidationError("gamma must be positive")
    u, s, _ = np.linalg.svd(x, full_matrices=False)
    if s.size and s[-1] <= s[0] * max(x.shape) * np.finfo(np.float64).eps:
        raise RankDeficiencyError("matrix is numerically rank deficient")
    scores = np.einsum("ij,ij->i", u, u)
    cross_i = u @ u[i]
    denom = 1.0 - (1.0 - gamma) * scores[i]
    if denom <= 0:
        raise NumericalError("reweighting denominator vanished")
    updated = scores + (1.0 - gamma) * cross_i**2 / denom
    ell_i_new = gamma * scores[i] / denom
    updated[i] = ell_i_new
    return float(ell_i_new), updated


@dataclass
class OfflineBundle:
    """Everything the online phase needs, plus runtime attachments.

    The persisted part is (basis, eigenvalues, leverage, q, reduced_load,
    mesh_fingerprint); mesh, gradient operator, and sampler are reattached
    from the mesh file after a fingerprint check.
    """

    basis: np.ndarray          # (n, rho)
    eigenvalues: np.ndarray    # (rho,)
    leverage: np.ndarray       # (kd,)
    q: np.ndarray              # (kd,)
    reduced_load: np.ndarray   # (rho,)
    mesh_fingerprint: bytes
    mesh: Mesh | None = None
    gradient: GradientOperator | None = None
    sampler: object | None = field(default=None, repr=False)

    @property
    def n(self):
        return self.basis.shape[0]

    @property
    def rho(self):
        return self.basis.shape[1]

    @property
    def kd(self):
        return self.q.shape[0]

    def attach(self, mesh: Mesh, grad: GradientOperator | None = None):
        """Bind the bundle to its mesh, verifying the content fingerprint."""
        from .sketch import build_sampling_table

        if mesh.fingerprint != self.mesh_fingerprint:
            raise FingerprintMismatchError(
                "bundle fingerprint does not match the mesh; rebuild the "
                "bundle or restore the original mesh file")
        grad = grad if grad is not None else gradient_operator(mesh)
        if grad.d.shape != (self.kd, self.n):
            raise ValidationError(
                f"gradient operator shape {grad.d.shape} does not match "
                f"bundle ({self.kd}, {self.n})")
        self.mesh = mesh
        self.gradient = grad
        self.sampler = build_sampling_table(self.q)
        return self


def scaled_basis_gradients(grad: GradientOperator, psi, z):
    """Rows of diag(sqrt(z (x) 1_d)) D Psi without forming the kd diagonal."""
    weights = np.sqrt(np.repeat(z, grad.dim))
    return weights[:, None] * (grad.d @ psi)


def build_offline_bundle(mesh: Mesh, grad: GradientOperator, rho, f):
    """Offline phase: eigenbasis, leverage distribution, reduced load.

    Parameters
    ----------
    mesh : Mesh
    grad : GradientOperator
        Operator built from ``mesh``.
    rho : int
        Reduced basis size.
    f : ndarray, shape (k,)
        Element forcing used for the persistent reduced load.
    """
    delta = laplacian(grad)
    psi, vals = compute_basis(delta, rho)
    x_delta = scaled_basis_gradients(grad, psi, grad.volumes)
    scores = leverage_scores(x_delta)
    q = sampling_distribution(scores, rho)
    load = assemble_load(mesh, f)
    bundle = OfflineBundle(basis=psi,
                           eigenvalues=vals,
                           leverage=scores,
                           q=q,
                           reduced_load=reduced_load(psi, load),
                           mesh_fingerprint=mesh.fingerprint)
    return bundle.attach(mesh, grad)


def validate_bundle(bundle, delta=None):
    """Check the bundle invariants; raises ValidationError on failure.

    With ``delta`` supplied also verifies that the basis diagonalizes it.
    """
    psi = bundle.basis
    gram = psi.T @ psi
    ortho = float(np.abs(gram - np.eye(bundle.rho)).max())
    if ortho > 1e-10:
        raise ValidationError(f"basis orthonormality defect {ortho:.3e}")
    if (np.diff(bundle.eigenvalues) < 0).any():
        raise ValidationError("eigenvalues are not ascending")
    if (bundle.leverage < 0).any() or (bundle.leverage > 1 + 1e-12).any():
        raise ValidationError("leverage scores outside [0, 1]")
    if abs(bundle.leverage.sum() - bundle.rho) > 1e-8 * max(1, bundle.rho):
        raise ValidationError(
            f"leverage scores sum to {bundle.leverage.sum():.9f}, "
            f"expected {bundle.rho}")
    if (bundle.q < 0).any():
        raise ValidationError("sampling distribution has negative entries")
    if abs(bundle.q.sum() - 1.0) > 1e-12:
        raise ValidationError("sampling distribution does not sum to one")
    if bundle.reduced_load.shape != (bundle.rho,):
        raise ValidationError("reduced load has wrong shape")
    if delta is not None:
        projected = psi.T @ (delta @ psi)
        off = projected - np.diag(np.diag(projected))
        if np.abs(off).max() > 1e-8:
            raise ValidationError(
                f"basis does not diagonalize the Laplacian "
                f"(off-diagonal {np.abs(off).max():.3e})")
    return True
