from typing import List, Optional

from pydantic import BaseModel, Field, model_validator

from models.circle_set_models import Cover
from models.measure_models import Arc


class MeasureFunction(BaseModel):
    """Gauge h with breakpoints 1 = t_0 > t_1 > ... > t_N > 0.

    On (t_n, t_{n-1}] the gauge is h(t) = min{2ⁿ t, 2ⁿ⁻¹ t_{n-1}}.
    stage_covers[n-1] is the cover used at stage n.
    """

    breakpoints: List[float]
    stage_covers: List[Cover]
    stage_generations: List[int]
    set_name: str

    @model_validator(mode="after")
    def _check_breakpoints(self) -> "MeasureFunction":
        t = self.breakpoints
        if not t or t[0] != 1.0:
            raise ValueError("breakpoints must start at t_0 = 1")
        for n in range(1, len(t)):
            if not 0.0 < t[n] <= t[n - 1] / 4.0:
                raise ValueError(f"t_{n} = {t[n]} violates t_{n-1} >= 4 t_{n}")
        if len(self.stage_covers) != len(t) - 1 or len(self.stage_generations) != len(t) - 1:
            raise ValueError("one cover per stage is required")
        return self

    @property
    def stages(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def last_breakpoint(self) -> float:
        return self.breakpoints[-1]


class EpsilonRow(BaseModel):
    n: int
    t_star: float
    t_star_next: float
    log_epsilon: float = Field(..., lt=0.0)
    epsilon: float
    u: float
    identity_residual: float


class EpsilonTable(BaseModel):
    rows: List[EpsilonRow]
    threshold_constant: float

    @property
    def epsilons(self) -> List[float]:
        return [row.epsilon for row in self.rows]

    def row(self, n: int) -> EpsilonRow:
        return self.rows[n - 1]


class WitnessRecord(BaseModel):
    n: int
    log_delta_n: float
    log_epsilon_sq: float
    is_witness: bool
    arc_mass: Optional[float] = None
    h_of_length: Optional[float] = None
    certified: Optional[bool] = None
    window: Optional[Arc] = None


class LiminfReport(BaseModel):
    horizon: int
    witnesses: List[int]
    records: List[WitnessRecord]
