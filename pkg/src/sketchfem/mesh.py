"""Simplicial meshes: parsing, validation, boundary detection, gradients.

A mesh is a conforming triangulation (d = 2) or tetrahedralization (d = 3)
of a polytopal domain.  Homogeneous Dirichlet conditions are imposed by
restricting operators to interior vertices; a vertex is boundary exactly
when it lies on a facet incident to a single element.

Text format (whitespace separated, ``#`` starts a comment):

    d nv k
    <nv lines of d vertex coordinates>
    <k lines of d+1 zero-based vertex indices>
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from math import factorial

import numpy as np
import scipy.sparse as sp

from .errors import MeshFormatError, ValidationError

# An element is degenerate when its volume falls below this fraction of
# bbox_diagonal ** d; well below any sane element but above rounding noise.
DEGENERACY_REL_TOL = 1e-14


@dataclass(frozen=True)
class Mesh:
    """Simplicial mesh with interior/boundary classification.

    ``interior`` lists global ids of interior vertices in ascending order;
    that order fixes the columns of every interior-restricted operator.
    All arrays are read-only so a mesh can be shared across threads.
    """

    dim: int
    vertices: np.ndarray       # (nv, d) float64
    elements: np.ndarray       # (k, d+1) int64
    boundary_mask: np.ndarray  # (nv,) bool
    interior: np.ndarray       # (n,) int64, ascending
    fingerprint: bytes         # 32-byte content hash

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @property
    def n_interior(self):
        return self.interior.shape[0]

    @property
    def n_boundary(self):
        return int(self.boundary_mask.sum())

    def centroids(self):
        """Element centroids, shape (k, d)."""
        return self.vertices[self.elements].mean(axis=1)


@dataclass(frozen=True)
class GradientOperator:
    """Per-element shape-function gradients as a sparse block map.

    Row block ``ell*d : (ell+1)*d`` of ``d_full`` holds the gradient
    components on element ``ell``; ``d`` keeps only interior-vertex columns.
    """

    dim: int
    d_full: sp.csr_matrix      # (k*d, nv)
    d: sp.csr_matrix           # (k*d, n)
    volumes: np.ndarray        # (k,)

    @property
    def n_rows(self):
        return self.d_full.shape[0]


def _freeze(arr):
    arr.setflags(write=False)
    return arr


def _mesh_fingerprint(dim, vertices, elements):
    h = hashlib.sha256()
    h.update(b"sketchfem-mesh-v1")
    h.update(np.int64([dim, vertices.shape[0], elements.shape[0]]).tobytes())
    h.update(np.ascontiguousarray(vertices, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(elements, dtype="<i8").tobytes())
    return h.digest()


def _facets(elements, dim):
    """All (k*(d+1), d) facets, each row sorted."""
    keep = [[j for j in range(dim + 1) if j != omit] for omit in range(dim + 1)]
    f = elements[:, keep]                      # (k, d+1, d)
    return np.sort(f.reshape(-1, dim), axis=1)


def _boundary_mask(dim, n_vertices, elements):
    facets = _facets(elements, dim)
    uniq, counts = np.unique(facets, axis=0, return_counts=True)
    if counts.max(initial=1) > 2:
        bad = uniq[counts > 2][0]
        raise ValidationError(
            f"facet {tuple(bad)} is shared by more than two elements")
    mask = np.zeros(n_vertices, dtype=bool)
    boundary_facets = uniq[counts == 1]
    if boundary_facets.size:
        mask[np.unique(boundary_facets)] = True
    return _freeze(mask)


def _edge_matrices(mesh):
    """Edge matrices E_ell with rows v_i - v_0, shape (k, d, d)."""
    coords = mesh.vertices[mesh.elements]          # (k, d+1, d)
    return coords[:, 1:, :] - coords[:, :1, :]


def _volume_tolerance(vertices, dim):
    span = vertices.max(axis=0) - vertices.min(axis=0)
    diag = float(np.linalg.norm(span))
    return DEGENERACY_REL_TOL * diag**dim


def mesh_from_arrays(dim, vertices, elements):
    """Build and validate a :class:`Mesh` from raw arrays."""
    if dim not in (2, 3):
        raise ValidationError(f"dimension must be 2 or 3, got {dim}")
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    elements = np.ascontiguousarray(elements, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != dim:
        raise ValidationError(
            f"vertex array must be (nv, {dim}), got {vertices.shape}")
    if elements.ndim != 2 or elements.shape[1] != dim + 1:
        raise ValidationError(
            f"element array must be (k, {dim + 1}), got {elements.shape}")
    if elements.shape[0] < 1:
        raise ValidationError("mesh has no elements")
    if not np.isfinite(vertices).all():
        raise ValidationError("vertex coordinates contain NaN or Inf")
    nv = vertices.shape[0]
    if elements.min(initial=0) < 0 or elements.max(initial=0) >= nv:
        raise ValidationError("element vertex index out of range")
    sorted_el = np.sort(elements, axis=1)
    if (np.diff(sorted_el, axis=1) == 0).any():
        bad = int(np.nonzero((np.diff(sorted_el, axis=1) == 0).any(axis=1))[0][0])
        raise ValidationError(f"element {bad} repeats a vertex")

    mask = _boundary_mask(dim, nv, elements)
    interior = _freeze(np.nonzero(~mask)[0].astype(np.int64))
    mesh = Mesh(dim=dim,
                vertices=_freeze(vertices),
                elements=_freeze(elements),
                boundary_mask=mask,
                interior=interior,
                fingerprint=_mesh_fingerprint(dim, vertices, elements))
    # Volume validation doubles as an orientation-independent degeneracy check.
    element_volumes(mesh)
    return mesh


def parse_mesh(text):
    """Parse the text format into a validated :class:`Mesh`."""
    tokens = []
    for line in text.splitlines():
        body = line.split("#", 1)[0]
        tokens.extend(body.split())
    if len(tokens) < 3:
        raise MeshFormatError("mesh file is missing the 'd nv k' header")
    try:
        dim, nv, k = (int(t) for t in tokens[:3])
    except ValueError as exc:
        raise MeshFormatError(f"malformed mesh header: {exc}") from None
    if dim not in (2, 3):
        raise MeshFormatError(f"dimension must be 2 or 3, got {dim}")
    if nv < dim + 1 or k < 1:
        raise MeshFormatError(f"implausible mesh sizes nv={nv} k={k}")
    need = 3 + nv * dim + k * (dim + 1)
    if len(tokens) != need:
        raise MeshFormatError(
            f"expected {need} tokens for d={dim} nv={nv} k={k}, "
            f"found {len(tokens)}")
    body = tokens[3:]
    try:
        vertices = np.array(body[:nv * dim], dtype=np.float64).reshape(nv, dim)
        elements = np.array(body[nv * dim:], dtype=np.int64).reshape(k, dim + 1)
    except ValueError as exc:
        raise MeshFormatError(f"malformed mesh body: {exc}") from None
    return mesh_from_arrays(dim, vertices, elements)


def load_mesh(path):
    """Load a mesh from a text file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise MeshFormatError(f"cannot read mesh file {path}: {exc}") from None
    return parse_mesh(text)


def write_mesh(mesh, path):
    """Write a mesh in the text format (full float64 precision)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{mesh.dim} {mesh.n_vertices} {mesh.n_elements}\n")
        for row in mesh.vertices:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")
        for row in mesh.elements:
            fh.write(" ".join(str(int(i)) for i in row) + "\n")


def element_volumes(mesh):
    """Simplex volumes |det E| / d!, validated against degeneracy."""
    edges = _edge_matrices(mesh)
    dets = np.linalg.det(edges)
    volumes = np.abs(dets) / factorial(mesh.dim)
    tol = _volume_tolerance(mesh.vertices, mesh.dim)
    if (volumes <= tol).any():
        bad = int(np.argmin(volumes))
        raise ValidationError(
            f"element {bad} is degenerate (volume {volumes[bad]:.3e} "
            f"<= tolerance {tol:.3e})")
    return volumes


def gradient_operator(mesh):
    """Assemble the sparse gradient operator of the P1 shape functions.

    For element ell with vertices v_0..v_d the local gradients satisfy
    E g_i = e_i for i >= 1 (E has rows v_i - v_0) and g_0 = -sum g_i.
    Row ell*d + a of the operator carries component a of the gradients.
    """
    d = mesh.dim
    k = mesh.n_elements
    volumes = element_volumes(mesh)
    edges = _edge_matrices(mesh)
    inv = np.linalg.inv(edges)                     # (k, d, d)
    grads = np.empty((k, d + 1, d))
    grads[:, 1:, :] = inv.transpose(0, 2, 1)       # g_i = column i-1 of E^-1
    grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)

    rows = (d * np.arange(k)[:, None, None]
            + np.arange(d)[None, None, :])         # (k, 1, d)
    rows = np.broadcast_to(rows, (k, d + 1, d))
    cols = np.broadcast_to(mesh.elements[:, :, None], (k, d + 1, d))
    d_full = sp.coo_matrix(
        (grads.ravel(), (rows.ravel(), cols.ravel())),
        shape=(k * d, mesh.n_vertices)).tocsr()
    d_full.sort_indices()
    d_int = d_full.tocsc()[:, mesh.interior].tocsr()
    d_int.sort_indices()
    return GradientOperator(dim=d, d_full=d_full, d=d_int,
                            volumes=_freeze(volumes))
