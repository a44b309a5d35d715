import hashlib
import json
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator


class NumericPolicy(BaseModel):
    """Every numeric knob of a run; embedded in reports so runs can be replayed"""

    model_config = ConfigDict(frozen=True)

    # circle minimum modulus
    grid_density: int = Field(default=4096, ge=16)
    grid_cap: int = Field(default=65536, ge=16)
    refine_candidates: int = Field(default=3, ge=1)
    bisection_width: float = Field(default=1e-10, gt=0.0)

    # self-similar quadrature
    quadrature_tol: float = Field(default=1e-10, gt=0.0)
    quadrature_pair_budget: int = Field(default=4_000_000, ge=1000)

    # taylor / model spaces
    taylor_threshold: float = Field(default=1e-9, gt=0.0)
    # relative Cholesky pivot below which a projected monomial counts as dependent
    gram_threshold: float = Field(default=1e-9, gt=0.0, lt=1.0)
    guard_factor: int = Field(default=4, ge=1)
    m_schedule: List[int] = Field(default_factory=lambda: [16, 32, 64])
    sarason_k: int = Field(default=256, ge=8)
    stabilization: float = Field(default=0.01, gt=0.0)

    # disk searches
    disk_radial: int = Field(default=96, ge=4)
    disk_angular: int = Field(default=128, ge=4)
    refine_xatol: float = Field(default=1e-10, gt=0.0)

    # matrices
    defect_tol: float = Field(default=1e-10, gt=0.0)
    contraction_tol: float = Field(default=1e-12, gt=0.0)
    innerness_radius: float = Field(default=1.0 - 1e-6, gt=0.0, lt=1.0)

    # hausdorff
    stages: int = Field(default=40, ge=1)
    witness_horizon: int = Field(default=60, ge=1)

    seed: int = 7
    tol: float = Field(default=1e-8, gt=0.0)
    battery_size: int = Field(default=100, ge=1)

    @field_validator("m_schedule")
    @classmethod
    def _nonempty_schedule(cls, schedule: List[int]) -> List[int]:
        if not schedule or any(m < 1 for m in schedule):
            raise ValueError("M schedule must be a nonempty list of positive sizes")
        return sorted(schedule)

    def doubled(self) -> "NumericPolicy":
        """Same policy with doubled grid densities"""
        return self.model_copy(
            update={
                "grid_density": 2 * self.grid_density,
                "grid_cap": 2 * self.grid_cap,
                "disk_radial": 2 * self.disk_radial,
                "disk_angular": 2 * self.disk_angular,
            }
        )


DEFAULT_POLICY = NumericPolicy()

Command = Literal[
    "eval", "mtheta", "deltan", "hausdorff", "epsilon", "modelspace", "sarason", "charfn", "verify"
]


class RunConfig(BaseModel):
    """Self-contained description of one run: descriptors are embedded, not referenced"""

    command: Command
    action: Optional[str] = None
    inner: Optional[Dict[str, Any]] = None
    measure: Optional[Dict[str, Any]] = None
    matrix: Optional[List[List[List[float]]]] = None
    set_name: Optional[str] = None
    n_values: List[int] = Field(default_factory=list)
    points: List[complex] = Field(default_factory=list)
    radii: List[float] = Field(default_factory=list)
    phi: Optional[List[complex]] = None
    checks: List[str] = Field(default_factory=lambda: ["all"])
    suite: List[str] = Field(default_factory=lambda: ["all"])
    policy: NumericPolicy = Field(default_factory=NumericPolicy)
    out: Optional[str] = None
    format: Literal["csv", "json"] = "csv"

    @model_validator(mode="after")
    def _positive_ns(self) -> "RunConfig":
        if any(n < 1 for n in self.n_values):
            raise ValueError("n values must be positive integers")
        return self

    def digest(self) -> str:
        payload = self.model_dump_json(exclude={"out", "format"})
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def inputs_digest(inputs: Any) -> str:
    payload = json.dumps(inputs, sort_keys=True, default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


class CheckRecord(BaseModel):
    name: str
    inputs_digest: str
    values: Dict[str, Any] = Field(default_factory=dict)
    inequality: str
    passed: bool
    tolerances: Dict[str, float] = Field(default_factory=dict)
    runtime_seconds: float = 0.0
    error: Optional[str] = None


class Report(BaseModel):
    config: RunConfig
    seed: int
    digest: str
    records: List[CheckRecord]
    tables: Dict[str, List[Dict[str, Any]]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _sorted(self) -> "Report":
        self.records.sort(key=lambda record: record.name)
        return self

    @computed_field
    @property
    def passed(self) -> bool:
        return all(record.passed for record in self.records)

    @property
    def failures(self) -> List[CheckRecord]:
        return [record for record in self.records if not record.passed]
