"""Request and response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class OfflineRequest(BaseModel):
    mesh_path: str
    rho: int = Field(ge=1)
    bundle_path: str
    forcing: str = "ball"


class OfflineResponse(BaseModel):
    bundle_path: str
    n: int
    k: int
    kd: int
    rho: int
    eigenvalue_min: float
    eigenvalue_max: float
    leverage_sum: float
    elapsed_s: float


class FieldModel(BaseModel):
    kind: str = "uniform"
    lo: float | None = None
    hi: float | None = None
    nu: float | None = None
    m_diag: float | None = None
    variance: float | None = None
    kl_modes: int | None = None
    offset: float | None = None
    noise: float | None = None
    value: float | None = None

    def params(self):
        named = self.model_dump(exclude={"kind"}, exclude_none=True)
        return named


class QueryRequest(BaseModel):
    mesh_path: str
    bundle_path: str
    seed: int = 0
    c: int | None = Field(default=None, ge=1)
    epsilon: float | None = Field(default=None, gt=0, lt=1)
    beta: float = Field(default=0.5, gt=0, le=1)
    p: list[float] | None = None
    field: FieldModel | None = None
    include_solution: bool = False


class QueryResponse(BaseModel):
    r: list[float]
    u: list[float] | None = None
    c: int
    c_prime: int
    retries: int
    elapsed_s: float


class BenchmarkRequest(BaseModel):
    mesh_path: str
    bundle_path: str
    n_queries: int = Field(ge=1)
    seed: int = 0
    c: int | None = Field(default=None, ge=1)
    epsilon: float | None = Field(default=None, gt=0, lt=1)
    beta: float = Field(default=0.5, gt=0, le=1)
    rho: int | None = Field(default=None, ge=1)
    field: FieldModel = FieldModel()
    forcing: str = "ball"
    threads: int = Field(default=1, ge=0)


class BenchmarkResponse(BaseModel):
    csv: str
    rows: int
    singular_count: int
    c: int
    epsilon: float
    mean: dict[str, float] | None
    reference_median_s: float
    online_median_s: float


class CheckModel(BaseModel):
    name: str
    passed: bool
    detail: str


class VerifyResponse(BaseModel):
    all_passed: bool
    checks: list[CheckModel]


class ErrorResponse(BaseModel):
    kind: str
    error: str
