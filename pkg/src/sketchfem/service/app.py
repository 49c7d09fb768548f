"""FastAPI service exposing the offline build, online queries, benchmarks,
and the verification battery.

The service owns a small cache of loaded meshes and attached bundles keyed
by path, so a stream of queries against one bundle pays the load cost once.
All numerical errors surface as structured JSON with an error ``kind``;
validation problems map to 422, numerical failures to 409.
"""

from __future__ import annotations

import threading
import time

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..diagnostics import run_benchmark, report_csv, epsilon_for
from ..bundle_io import load_bundle, save_bundle
from ..errors import (NumericalError, SketchFemError, ValidationError)
from ..fields import FieldSpec, generate_field, forcing_field
from ..mesh import gradient_operator, load_mesh
from ..reduction import build_offline_bundle
from ..sketch import plan_sample_size, query
from ..verify import run_verify
from .schemas import (BenchmarkRequest, BenchmarkResponse, CheckModel,
                      ErrorResponse, HealthResponse, OfflineRequest,
                      OfflineResponse, QueryRequest, QueryResponse,
                      VerifyResponse)

app = FastAPI(title="sketchfem", version=__version__)

_cache_lock = threading.Lock()
_mesh_cache: dict[str, object] = {}
_bundle_cache: dict[tuple[str, str], object] = {}


def _get_mesh(path):
    with _cache_lock:
        mesh = _mesh_cache.get(path)
    if mesh is None:
        mesh = load_mesh(path)
        with _cache_lock:
            _mesh_cache[path] = mesh
    return mesh


def _get_bundle(bundle_path, mesh_path):
    key = (bundle_path, mesh_path)
    with _cache_lock:
        bundle = _bundle_cache.get(key)
    if bundle is None:
        bundle = load_bundle(bundle_path, _get_mesh(mesh_path))
        with _cache_lock:
            _bundle_cache[key] = bundle
    return bundle


def _evict(bundle_path):
    with _cache_lock:
        for key in [k for k in _bundle_cache if k[0] == bundle_path]:
            del _bundle_cache[key]


@app.exception_handler(SketchFemError)
async def _sketchfem_error(request: Request, exc: SketchFemError):
    status = 409 if isinstance(exc, NumericalError) else 422
    payload = ErrorResponse(kind=type(exc).__name__, error=str(exc))
    return JSONResponse(status_code=status, content=payload.model_dump())


@app.get("/health", response_model=HealthResponse)
def health():
    return HealthResponse(status="ok", version=__version__)


@app.post("/offline", response_model=OfflineResponse)
def offline(req: OfflineRequest):
    start = time.perf_counter()
    mesh = _get_mesh(req.mesh_path)
    if req.rho > mesh.n_interior:
        raise ValidationError(
            f"rho = {req.rho} exceeds the {mesh.n_interior} interior "
            f"vertices of the mesh")
    grad = gradient_operator(mesh)
    f = forcing_field(mesh, req.forcing)
    bundle = build_offline_bundle(mesh, grad, req.rho, f)
    save_bundle(bundle, req.bundle_path)
    _evict(req.bundle_path)
    with _cache_lock:
        _bundle_cache[(req.bundle_path, req.mesh_path)] = bundle
    return OfflineResponse(
        bundle_path=req.bundle_path,
        n=bundle.n, k=mesh.n_elements, kd=bundle.kd, rho=bundle.rho,
        eigenvalue_min=float(bundle.eigenvalues[0]),
        eigenvalue_max=float(bundle.eigenvalues[-1]),
        leverage_sum=float(bundle.leverage.sum()),
        elapsed_s=time.perf_counter() - start)


def _resolve_c(c, epsilon, beta, rho):
    if c is not None:
        return c, (epsilon_for(c, rho, beta) if epsilon is None else epsilon)
    if epsilon is not None:
        return plan_sample_size(rho, epsilon, beta), epsilon
    raise ValidationError("provide either c or epsilon")


@app.post("/query", response_model=QueryResponse)
def run_query(req: QueryRequest):
    bundle = _get_bundle(req.bundle_path, req.mesh_path)
    c, _ = _resolve_c(req.c, req.epsilon, req.beta, bundle.rho)
    if req.p is not None:
        p = np.asarray(req.p, dtype=float)
    elif req.field is not None:
        spec = FieldSpec(kind=req.field.kind, params=req.field.params())
        p = generate_field(spec, bundle.mesh, req.seed)
    else:
        raise ValidationError("provide p or a field spec")
    result = query(bundle, p, c, req.seed)
    return QueryResponse(
        r=result.r.tolist(),
        u=result.u.tolist() if req.include_solution else None,
        c=result.c, c_prime=result.c_prime, retries=result.retries,
        elapsed_s=result.elapsed_s)


@app.post("/benchmark", response_model=BenchmarkResponse)
def benchmark(req: BenchmarkRequest):
    bundle = _get_bundle(req.bundle_path, req.mesh_path)
    if req.rho is not None and req.rho != bundle.rho:
        raise ValidationError(
            f"config expects rho = {req.rho} but the bundle was built "
            f"with rho = {bundle.rho}")
    c, epsilon = _resolve_c(req.c, req.epsilon, req.beta, bundle.rho)
    spec = FieldSpec(kind=req.field.kind, params=req.field.params())
    result = run_benchmark(bundle, spec, req.n_queries, c, req.seed,
                           epsilon=epsilon, beta=req.beta,
                           forcing=req.forcing, threads=req.threads)
    return BenchmarkResponse(
        csv=report_csv(result),
        rows=len(result.rows),
        singular_count=result.singular_count,
        c=c, epsilon=epsilon,
        mean=result.mean_values(),
        reference_median_s=result.reference_median_s,
        online_median_s=result.online_median_s)


@app.post("/verify", response_model=VerifyResponse)
def verify():
    results = run_verify()
    return VerifyResponse(
        all_passed=all(r.passed for r in results),
        checks=[CheckModel(name=r.name, passed=r.passed, detail=r.detail)
                for r in results])
