"""Built-in meshes for verification runs, tests, and benchmarks.

The package treats meshes as inputs; these generators exist so that the
``verify`` command and the examples are self-contained.  All generators are
deterministic for fixed arguments.
"""

import numpy as np

from ._rng import make_rng
from .errors import ValidationError
from .mesh import mesh_from_arrays


def square_mesh(m, lo=0.0, hi=1.0):
    """Structured triangulation of [lo, hi]^2 with m x m cells.

    Each cell is split along its lower-left to upper-right diagonal, which
    yields 2 m^2 right triangles, (m+1)^2 vertices and (m-1)^2 interior
    vertices.
    """
    if m < 1:
        raise ValidationError("m must be >= 1")
    ticks = np.linspace(lo, hi, m + 1)
    xx, yy = np.meshgrid(ticks, ticks, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return j * (m + 1) + i

    elements = []
    for j in range(m):
        for i in range(m):
            v00 = vid(i, j)
            v10 = vid(i + 1, j)
            v01 = vid(i, j + 1)
            v11 = vid(i + 1, j + 1)
            elements.append((v00, v10, v11))
            elements.append((v00, v11, v01))
    return mesh_from_arrays(2, vertices, np.array(elements))


def jittered_square_mesh(m, amplitude=0.25, lo=0.0, hi=1.0, seed=0):
    """Square mesh with interior vertices perturbed by a random offset.

    ``amplitude`` is the jitter radius as a fraction of the cell size; values
    below 0.3 keep every triangle non-degenerate.
    """
    base = square_mesh(m, lo, hi)
    h = (hi - lo) / m
    rng = make_rng(seed, stream=7)
    shift = (rng.random(base.vertices.shape) - 0.5) * (2 * amplitude * h)
    shift[base.boundary_mask] = 0.0
    return mesh_from_arrays(2, base.vertices + shift, base.elements)


def disk_mesh(rings, radius=1.0, center=(0.0, 0.0)):
    """Triangulation of a disk from concentric vertex rings.

    Ring j (1 <= j <= rings) carries 6 j vertices at radius j * radius/rings;
    the point set is triangulated with a Delaunay pass, which is well behaved
    for this layout because the domain is convex.
    """
    from scipy.spatial import Delaunay

    if rings < 1:
        raise ValidationError("rings must be >= 1")
    points = [np.zeros(2)]
    for j in range(1, rings + 1):
        r = radius * j / rings
        count = 6 * j
        angles = 2 * np.pi * np.arange(count) / count
        points.append(np.column_stack([r * np.cos(angles),
                                       r * np.sin(angles)]))
    vertices = np.vstack(points) + np.asarray(center, dtype=float)
    tri = Delaunay(vertices)
    return mesh_from_arrays(2, vertices, tri.simplices.astype(np.int64))


_KUHN_PERMS = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]


def _tet_grid(ticks_x, ticks_y, ticks_z):
    """Kuhn subdivision of the tensor grid spanned by the three tick arrays."""
    m = ticks_x.size - 1
    s = m + 1

    def vid(i, j, l):
        return (l * s + j) * s + i

    grid = np.stack(np.meshgrid(ticks_x, ticks_y, ticks_z, indexing="ij"),
                    axis=-1)
    # vid order: i fastest, then j, then l
    vertices = grid.transpose(2, 1, 0, 3).reshape(-1, 3)

    elements = []
    steps = np.eye(3, dtype=int)
    for l in range(m):
        for j in range(m):
            for i in range(m):
                base = np.array([i, j, l])
                for perm in _KUHN_PERMS:
                    corner = base.copy()
                    tet = [vid(*corner)]
                    for axis in perm:
                        corner = corner + steps[axis]
                        tet.append(vid(*corner))
                    elements.append(tet)
    return mesh_from_arrays(3, vertices, np.array(elements))


def cube_mesh(m, lo=0.0, hi=1.0):
    """Kuhn subdivision of [lo, hi]^3 into 6 m^3 tetrahedra."""
    if m < 1:
        raise ValidationError("m must be >= 1")
    ticks = np.linspace(lo, hi, m + 1)
    return _tet_grid(ticks, ticks, ticks)


def _graded_ticks(m, a, gamma):
    """m+1 monotone ticks on [0, 1] whose spacing shrinks toward a."""
    t = np.linspace(0.0, 1.0, m + 1)
    gap = np.abs(t - a)
    below = a - a * (gap / a) ** gamma if a > 0 else np.zeros_like(t)
    above = a + (1 - a) * (gap / (1 - a)) ** gamma if a < 1 else np.ones_like(t)
    return np.where(t < a, below, above)


def graded_cube(m, point=None, gamma=2.0, lo=-1.0, hi=1.0):
    """Tetrahedral cube mesh with cell sizes graded toward an interior point.

    Tick spacing along each axis shrinks polynomially (exponent ``gamma``)
    toward the matching coordinate of ``point`` (box center when omitted).
    gamma = 1 recovers the uniform cube_mesh; larger values concentrate both
    vertices and, through them, the low Laplacian eigenvectors near the point,
    which is what makes the sampling distribution strongly non-uniform in the
    benchmarks.
    """
    if m < 1:
        raise ValidationError("m must be >= 1")
    if gamma < 1.0:
        raise ValidationError("gamma must be >= 1")
    if point is None:
        point = (0.5 * (lo + hi),) * 3
    point = np.asarray(point, dtype=float)
    if point.shape != (3,):
        raise ValidationError("point must have 3 coordinates")
    if np.any(point <= lo) or np.any(point >= hi):
        raise ValidationError("point must lie strictly inside the box")
    ticks = []
    for coord in point:
        a = (coord - lo) / (hi - lo)
        ticks.append(lo + (hi - lo) * _graded_ticks(m, a, gamma))
    return _tet_grid(*ticks)
