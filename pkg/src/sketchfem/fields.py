"""Random diffusion fields and forcing terms, evaluated per element.

All fields are piecewise constant; random fields are evaluated at element
centroids.  Generators take an explicit ``numpy.random.Generator`` (or
seed) so benchmark streams stay reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.linalg

from ._rng import STREAM_FIELD, make_rng
from .errors import ValidationError

# Fraction of covariance energy kept by the default truncation rule.
KL_ENERGY_FRACTION = 0.999


def _as_rng(seed_or_rng, default_seed=0):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    seed = default_seed if seed_or_rng is None else seed_or_rng
    return make_rng(seed, stream=STREAM_FIELD)


def uniform_field(k, lo, hi, seed_or_rng=None):
    """k iid values from U([lo, hi]); lo = hi gives the constant field."""
    if not (0 < lo <= hi):
        raise ValidationError(f"need 0 < lo <= hi, got [{lo}, {hi}]")
    rng = _as_rng(seed_or_rng)
    return lo + (hi - lo) * rng.random(int(k))


def _kv_half_integer(nu, r):
    """Modified Bessel K_nu for half-integer nu >= 1/2 on positive r.

    Upward recurrence K_{v+1} = K_{v-1} + (2 v / r) K_v starting from
    K_{1/2} = K_{-1/2} = sqrt(pi / 2r) exp(-r); stable because K grows
    with the order.
    """
    steps = round(nu - 0.5)
    if abs(nu - 0.5 - steps) > 1e-12 or steps < 0:
        raise ValidationError(f"nu must be a half integer >= 1/2, got {nu}")
    k_prev = np.sqrt(np.pi / (2.0 * r)) * np.exp(-r)   # K_{-1/2}
    k_cur = k_prev.copy()                              # K_{+1/2}
    v = 0.5
    for _ in range(steps):
        k_prev, k_cur = k_cur, k_prev + (2.0 * v / r) * k_cur
        v += 1.0
    return k_cur


def matern_covariance(x, y, nu, m_diag, variance):
    """Whittle-Matern covariance between points x and y.

    C(x, y) = variance * 2^(1-nu) / Gamma(nu) * r^nu * K_nu(r) with the
    anisotropic distance r^2 = (x-y)^T diag(m_diag)^-1 (x-y).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m_diag = np.broadcast_to(np.asarray(m_diag, dtype=float), x.shape)
    if (m_diag <= 0).any():
        raise ValidationError("m_diag entries must be positive")
    r = math.sqrt(float(((x - y) ** 2 / m_diag).sum()))
    return variance * _matern_correlation(nu, np.array([r]))[0]


def _matern_correlation(nu, r):
    """Normalized correlation 2^(1-nu)/Gamma(nu) r^nu K_nu(r); 1 at r = 0."""
    r = np.asarray(r, dtype=np.float64)
    out = np.ones_like(r)
    positive = r > 1e-10
    rp = r[positive]
    if rp.size:
        scale = 2.0 ** (1.0 - nu) / math.gamma(nu)
        out[positive] = scale * rp**nu * _kv_half_integer(nu, rp)
    return out


def _matern_matrix(points, nu, m_diag, variance):
    points = np.asarray(points, dtype=np.float64)
    m_diag = np.broadcast_to(np.asarray(m_diag, dtype=float),
                             (points.shape[1],))
    if (m_diag <= 0).any():
        raise ValidationError("m_diag entries must be positive")
    scaled = points / np.sqrt(m_diag)
    diff = scaled[:, None, :] - scaled[None, :, :]
    r = np.sqrt((diff**2).sum(axis=2))
    return variance * _matern_correlation(nu, r)


def lognormal_field(mesh, nu, m_diag, variance, kl_modes=None,
                    seed_or_rng=None):
    """Lognormal Matern field exp(b) sampled via a truncated expansion.

    The Gaussian b is expanded in the eigenpairs of the centroid covariance
    matrix; modes are kept (largest eigenvalues first) until 99.9 % of the
    total energy is covered, or ``kl_modes`` caps the count.
    """
    if variance < 0:
        raise ValidationError("variance must be >= 0")
    k = mesh.n_elements
    if variance == 0:
        return np.ones(k)
    cov = _matern_matrix(mesh.centroids(), nu, m_diag, variance)
    vals, vecs = scipy.linalg.eigh(cov)
    vals = np.clip(vals[::-1], 0.0, None)     # descending, PSD-clipped
    vecs = vecs[:, ::-1]
    total = vals.sum()
    if total <= 0:
        return np.ones(k)
    cum = np.cumsum(vals)
    modes = int(np.searchsorted(cum, KL_ENERGY_FRACTION * total) + 1)
    if kl_modes is not None:
        modes = min(modes, int(kl_modes))
    modes = max(1, min(modes, k))
    rng = _as_rng(seed_or_rng)
    xi = rng.standard_normal(modes)
    b = vecs[:, :modes] @ (np.sqrt(vals[:modes]) * xi)
    return np.exp(b)


def discontinuous_field(mesh, seed_or_rng=None, offset=9.1,
                        weights=(1.0, 3.0, 5.0), noise=0.1):
    """Octant-wise constant field with a small uniform perturbation.

    p = offset + sum_a weights[a] * sign(centroid_a) + noise * U([0, 1]),
    using the first d weights in d dimensions.
    """
    centroids = mesh.centroids()
    rng = _as_rng(seed_or_rng)
    p = np.full(mesh.n_elements, float(offset))
    for axis in range(mesh.dim):
        p += weights[axis] * np.sign(centroids[:, axis])
    p += noise * rng.random(mesh.n_elements)
    if (p <= 0).any():
        raise ValidationError("discontinuous field is not positive; "
                              "check offset and weights")
    return p


BALL_CENTER = (-0.5, 0.0, 0.0)
BALL_RADIUS = 0.3
BALL_AMPLITUDE = 5.0


def ball_forcing(mesh, amplitude=BALL_AMPLITUDE, radius=BALL_RADIUS,
                 center=None):
    """Indicator forcing: f = amplitude inside the ball, 0 outside.

    The default ball sits at (-1/2, 0[, 0]) with radius 0.3; elements whose
    centroid falls inside get the full amplitude.
    """
    if center is None:
        center = BALL_CENTER[:mesh.dim]
    center = np.asarray(center, dtype=float)
    dist = np.linalg.norm(mesh.centroids() - center, axis=1)
    return np.where(dist <= radius, float(amplitude), 0.0)


def forcing_field(mesh, kind="ball"):
    """Named forcing choices for the offline phase."""
    if kind == "ball":
        return ball_forcing(mesh)
    if kind == "uniform":
        return np.ones(mesh.n_elements)
    raise ValidationError(f"unknown forcing kind {kind!r}")


@dataclass(frozen=True)
class FieldSpec:
    """Declarative description of a random field family.

    kinds: ``uniform`` (lo, hi), ``lognormal`` (nu, m_diag, variance,
    kl_modes), ``discontinuous`` (offset, weights, noise), ``constant``
    (value).
    """

    kind: str
    params: dict = dc_field(default_factory=dict)
    seed: int | None = None


def generate_field(spec: FieldSpec, mesh, seed_or_rng=None):
    """Draw one field realization on the mesh."""
    rng = _as_rng(seed_or_rng if seed_or_rng is not None else spec.seed)
    p = spec.params
    if spec.kind == "uniform":
        return uniform_field(mesh.n_elements, p.get("lo", 0.1),
                             p.get("hi", 100.0), rng)
    if spec.kind == "lognormal":
        return lognormal_field(mesh, p.get("nu", 7.5),
                               p.get("m_diag", 0.04),
                               p.get("variance", 1.0),
                               p.get("kl_modes"), rng)
    if spec.kind == "discontinuous":
        return discontinuous_field(mesh, rng, p.get("offset", 9.1),
                                   p.get("weights", (1.0, 3.0, 5.0)),
                                   p.get("noise", 0.1))
    if spec.kind == "constant":
        value = float(p.get("value", 1.0))
        if value <= 0:
            raise ValidationError("constant field value must be positive")
        return np.full(mesh.n_elements, value)
    raise ValidationError(f"unknown field kind {spec.kind!r}")
