"""Stiffness and load assembly for piecewise-constant diffusion fields.

With gradient operator D, element volumes |Omega_ell| and field values
p_ell > 0, the interior stiffness matrix is the sparse triple product

    A = D^T diag(z (x) 1_d) D,        z_ell = |Omega_ell| p_ell,

which matches the classical element-loop assembly exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .mesh import GradientOperator, Mesh, element_volumes


@dataclass(frozen=True)
class ParameterField:
    """Element-wise diffusion values and their volume scaling z = |Omega| p."""

    p: np.ndarray   # (k,)
    z: np.ndarray   # (k,)

    @classmethod
    def from_volumes(cls, volumes, p):
        p = np.ascontiguousarray(p, dtype=np.float64)
        if p.shape != volumes.shape:
            raise ValidationError(
                f"field has {p.shape[0]} values for {volumes.shape[0]} elements")
        if not np.isfinite(p).all() or (p <= 0).any():
            raise ValidationError("field values must be finite and positive")
        return cls(p=p, z=volumes * p)

    def expanded(self, dim):
        """z (x) 1_d, the per-row scaling of the gradient operator."""
        return np.repeat(self.z, dim)


@dataclass(frozen=True)
class LoadVector:
    """Element forcing and its vertex-lumped load.

    ``b_full`` keeps the contribution f_ell |Omega_ell| / (d+1) accumulated at
    every vertex; ``b`` is its restriction to interior vertices.
    """

    f: np.ndarray       # (k,)
    b_full: np.ndarray  # (nv,)
    b: np.ndarray       # (n,)


def scaling_vector(mesh: Mesh, p) -> ParameterField:
    """Validate p and combine it with element volumes into z = |Omega| p."""
    return ParameterField.from_volumes(element_volumes(mesh), p)


def assemble_stiffness(grad: GradientOperator, field: ParameterField):
    """Interior stiffness A = D^T diag(z (x) 1_d) D as sorted CSR.

    The triple product is symmetrized exactly: (M + M^T)/2 leaves the value
    unchanged and removes the bit-level asymmetry of sparse matmul.
    """
    if field.z.shape[0] * grad.dim != grad.n_rows:
        raise ValidationError(
            f"field covers {field.z.shape[0]} elements, operator has "
            f"{grad.n_rows // grad.dim}")
    scaled = grad.d.multiply(field.expanded(grad.dim)[:, None]).tocsr()
    a = (grad.d.T @ scaled).tocsr()
    a = ((a + a.T) * 0.5).tocsr()
    a.sort_indices()
    return a


def assemble_load(mesh: Mesh, f) -> LoadVector:
    """Lumped load b_i = sum over elements containing i of f |Omega| / (d+1)."""
    f = np.ascontiguousarray(f, dtype=np.float64)
    if f.shape != (mesh.n_elements,):
        raise ValidationError(
            f"forcing has shape {f.shape}, expected ({mesh.n_elements},)")
    contrib = f * element_volumes(mesh) / (mesh.dim + 1)
    b_full = np.zeros(mesh.n_vertices)
    np.add.at(b_full, mesh.elements.ravel(),
              np.repeat(contrib, mesh.dim + 1))
    return LoadVector(f=f, b_full=b_full, b=b_full[mesh.interior].copy())


def reduced_load(psi, load):
    """Reduced right-hand side Psi^T b."""
    b = load.b if isinstance(load, LoadVector) else np.asarray(load, dtype=float)
    if b.shape[0] != psi.shape[0]:
        raise ValidationError(
            f"load has length {b.shape[0]}, basis has {psi.shape[0]} rows")
    return psi.T @ b
