"""Flat key=value run configuration for the online benchmark.

Example::

    # paths
    mesh = meshes/square.txt
    bundle = out/square.bundle
    output_csv = out/report.csv
    # run
    n_queries = 100
    seed = 42
    epsilon = 0.3        # or: c = 110335
    beta = 0.5
    forcing = ball
    threads = 1
    # field
    field = uniform
    field_lo = 0.1
    field_hi = 100
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError
from .fields import FieldSpec

_FIELD_KEYS = {
    "field_lo": ("lo", float),
    "field_hi": ("hi", float),
    "field_nu": ("nu", float),
    "field_m_diag": ("m_diag", float),
    "field_variance": ("variance", float),
    "field_kl_modes": ("kl_modes", int),
    "field_offset": ("offset", float),
    "field_noise": ("noise", float),
    "field_value": ("value", float),
}


@dataclass
class RunConfig:
    mesh_path: str
    bundle_path: str
    output_csv: str
    n_queries: int
    seed: int
    field: FieldSpec
    c: int | None = None
    epsilon: float | None = None
    beta: float = 0.5
    rho: int | None = None
    forcing: str = "ball"
    threads: int = 1


def _parse_pairs(text):
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _take(pairs, key, convert, default=None, required=False):
    if key not in pairs:
        if required:
            raise ConfigError(f"missing required key {key!r}")
        return default
    raw = pairs.pop(key)
    try:
        return convert(raw)
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {raw!r}") from None


def parse_config(text) -> RunConfig:
    """Parse and validate the key=value format."""
    pairs = _parse_pairs(text)
    mesh_path = _take(pairs, "mesh", str, required=True)
    bundle_path = _take(pairs, "bundle", str, required=True)
    output_csv = _take(pairs, "output_csv", str, required=True)
    n_queries = _take(pairs, "n_queries", int, required=True)
    seed = _take(pairs, "seed", int, default=0)
    c = _take(pairs, "c", int)
    epsilon = _take(pairs, "epsilon", float)
    beta = _take(pairs, "beta", float, default=0.5)
    rho = _take(pairs, "rho", int)
    forcing = _take(pairs, "forcing", str, default="ball")
    threads = _take(pairs, "threads", int, default=1)

    kind = _take(pairs, "field", str, default="uniform")
    params = {}
    for key in list(pairs):
        if key in _FIELD_KEYS:
            name, convert = _FIELD_KEYS[key]
            params[name] = _take(pairs, key, convert)
    if pairs:
        raise ConfigError(f"unknown keys: {', '.join(sorted(pairs))}")

    if n_queries < 1:
        raise ConfigError("n_queries must be >= 1")
    if c is None and epsilon is None:
        raise ConfigError("provide either c or epsilon")
    if c is not None and epsilon is not None:
        raise ConfigError("provide c or epsilon, not both")
    if c is not None and c < 1:
        raise ConfigError("c must be >= 1")
    if epsilon is not None and not 0 < epsilon < 1:
        raise ConfigError("epsilon must be in (0, 1)")
    if not 0 < beta <= 1:
        raise ConfigError("beta must be in (0, 1]")
    if threads < 0:
        raise ConfigError("threads must be >= 0 (0 = machine parallelism)")
    return RunConfig(mesh_path=mesh_path, bundle_path=bundle_path,
                     output_csv=output_csv, n_queries=n_queries, seed=seed,
                     field=FieldSpec(kind=kind, params=params),
                     c=c, epsilon=epsilon, beta=beta, rho=rho,
                     forcing=forcing, threads=threads)


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
