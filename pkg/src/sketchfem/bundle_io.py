"""Binary container for offline bundles.

Layout (all little endian):

    bytes 0..7    magic "SKFEM01\\0"
    u64 n, rho, kd
    float64[n*rho]  basis, column major
    float64[rho]    eigenvalues
    float64[kd]     leverage scores
    float64[kd]     sampling distribution
    float64[rho]    reduced load
    bytes[32]       mesh fingerprint

Round trips are bit exact.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import BundleFormatError
from .mesh import Mesh
from .reduction import OfflineBundle, validate_bundle

MAGIC = b"SKFEM01\x00"
_HEADER = struct.Struct("<8sQQQ")
_FINGERPRINT_BYTES = 32


def _le_bytes(arr):
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def save_bundle(bundle: OfflineBundle, path):
    """Write the persistent part of a bundle."""
    n, rho, kd = bundle.n, bundle.rho, bundle.kd
    if len(bundle.mesh_fingerprint) != _FINGERPRINT_BYTES:
        raise BundleFormatError("mesh fingerprint must be 32 bytes")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, n, rho, kd))
        fh.write(np.asfortranarray(bundle.basis, dtype="<f8").tobytes(order="F"))
        fh.write(_le_bytes(bundle.eigenvalues))
        fh.write(_le_bytes(bundle.leverage))
        fh.write(_le_bytes(bundle.q))
        fh.write(_le_bytes(bundle.reduced_load))
        fh.write(bundle.mesh_fingerprint)


def load_bundle(path, mesh: Mesh | None = None) -> OfflineBundle:
    """Read a bundle; with ``mesh`` given, verify the fingerprint and attach.

    Raises BundleFormatError on bad magic, truncation, or invariant
    violations, and FingerprintMismatchError when the mesh does not match.
    """
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise BundleFormatError(f"cannot read bundle {path}: {exc}") from None
    if len(blob) < _HEADER.size:
        raise BundleFormatError("bundle file is shorter than its header")
    magic, n, rho, kd = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise BundleFormatError(f"bad magic {magic!r}; not a bundle file")
    counts = (n * rho, rho, kd, kd, rho)
    expected = (_HEADER.size + 8 * sum(counts) + _FINGERPRINT_BYTES)
    if len(blob) != expected:
        raise BundleFormatError(
            f"bundle truncated or padded: {len(blob)} bytes, "
            f"expected {expected}")
    offset = _HEADER.size
    arrays = []
    for count in counts:
        arrays.append(np.frombuffer(blob, dtype="<f8", count=count,
                                    offset=offset).astype(np.float64))
        offset += 8 * count
    basis = arrays[0].reshape((n, rho), order="F").copy()
    bundle = OfflineBundle(basis=basis,
                           eigenvalues=arrays[1],
                           leverage=arrays[2],
                           q=arrays[3],
                           reduced_load=arrays[4],
                           mesh_fingerprint=blob[offset:offset
                                                 + _FINGERPRINT_BYTES])
    try:
        validate_bundle(bundle)
    except Exception as exc:
        raise BundleFormatError(f"bundle fails invariants: {exc}") from None
    if mesh is not None:
        bundle.attach(mesh)
    return bundle
