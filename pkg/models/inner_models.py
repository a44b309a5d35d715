from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from models.measure_models import Arc, AtomicMeasure, SingularMeasure, measure_from_descriptor
from services.errors import DescriptorError


class BlaschkeZero(BaseModel):
    model_config = ConfigDict(frozen=True)

    zero: complex
    multiplicity: int = Field(default=1, ge=1)

    @field_validator("zero")
    @classmethod
    def _inside_disk(cls, zero: complex) -> complex:
        if not abs(zero) < 1.0:
            raise ValueError(f"Blaschke zero {zero} must lie in the open unit disk")
        return zero


class InnerFunction(BaseModel):
    """θ = constant · Π b_w(z)^mult · exp(-∫ (e^{it}+z)/(e^{it}-z) dν)

    Blaschke factors are normalized as b_w(z) = (|w|/w)(w - z)/(1 - conj(w) z),
    and b_0(z) = z.
    """

    model_config = ConfigDict(frozen=True)

    blaschke: List[BlaschkeZero] = Field(default_factory=list)
    singular: Optional[SingularMeasure] = None
    constant: complex = 1.0 + 0.0j

    @field_validator("constant")
    @classmethod
    def _unimodular(cls, constant: complex) -> complex:
        if abs(abs(constant) - 1.0) > 1e-12:
            raise ValueError(f"constant must be unimodular, got |c| = {abs(constant)}")
        return constant

    @property
    def measure(self):
        """The singular measure, or None when it is absent or zero"""
        if self.singular is None or self.singular.total_mass == 0.0:
            return None
        return self.singular

    @property
    def zeros(self) -> np.ndarray:
        """Zeros repeated by multiplicity"""
        return np.array([b.zero for b in self.blaschke for _ in range(b.multiplicity)], dtype=complex)

    @property
    def is_constant(self) -> bool:
        return not self.blaschke and self.measure is None

    @property
    def is_singular(self) -> bool:
        """Zero-free and non-constant"""
        return not self.blaschke and self.measure is not None

    @property
    def is_blaschke(self) -> bool:
        return bool(self.blaschke) and self.measure is None

    @property
    def degree(self) -> int:
        return sum(b.multiplicity for b in self.blaschke)

    @classmethod
    def atom(cls, weight: float, angle: float = 0.0) -> "InnerFunction":
        return cls(singular=AtomicMeasure(atoms=[(angle, weight)]))

    @classmethod
    def from_zeros(cls, zeros, constant: complex = 1.0 + 0.0j) -> "InnerFunction":
        return cls(blaschke=[BlaschkeZero(zero=complex(z)) for z in zeros], constant=constant)

    def with_singular(self, measure) -> "InnerFunction":
        return self.model_copy(update={"singular": measure})


def inner_from_descriptor(data: Dict[str, Any], location: str = "inner") -> InnerFunction:
    """Build an InnerFunction from {"blaschke": [[re, im, mult], ...], "singular": ..., "constant": [re, im]}"""
    if not isinstance(data, dict):
        raise DescriptorError("inner-function descriptor must be an object", location)
    if "type" in data and "singular" not in data and "blaschke" not in data:
        # a bare measure descriptor stands for its singular inner function
        return InnerFunction(singular=measure_from_descriptor(data, location))
    zeros = []
    for index, entry in enumerate(data.get("blaschke", [])):
        where = f"{location}.blaschke[{index}]"
        if not isinstance(entry, (list, tuple)) or len(entry) not in (2, 3):
            raise DescriptorError("zero must be [re, im] or [re, im, multiplicity]", where)
        try:
            zero = complex(float(entry[0]), float(entry[1]))
            multiplicity = int(entry[2]) if len(entry) == 3 else 1
            zeros.append(BlaschkeZero(zero=zero, multiplicity=multiplicity))
        except (TypeError, ValueError) as exc:
            raise DescriptorError(str(exc), where)
    singular = None
    if data.get("singular") is not None:
        singular = measure_from_descriptor(data["singular"], f"{location}.singular")
    constant = 1.0 + 0.0j
    if "constant" in data:
        try:
            re, im = data["constant"]
            constant = complex(float(re), float(im))
        except (TypeError, ValueError) as exc:
            raise DescriptorError(f"constant must be [re, im]: {exc}", f"{location}.constant")
    try:
        return InnerFunction(blaschke=zeros, singular=singular, constant=constant)
    except ValueError as exc:
        raise DescriptorError(str(exc), location)


class MinModulus(BaseModel):
    r: float
    value: float
    log_value: float
    argmin_angle: float
    grid_size: int


class DecayRecord(BaseModel):
    """δₙ(θ) = inf over the disk of max{|z|ⁿ, |θ(z)|}"""

    n: int = Field(..., ge=1)
    delta_n: float = Field(..., ge=0.0, lt=1.0)
    log_delta_n: float
    crossing_radius: float = Field(..., ge=0.0, lt=1.0)
    bracket_width: float = Field(..., ge=0.0)
    argmin: Optional[complex] = None
    method: Literal["crossing", "disk", "origin"]


class GapRecord(BaseModel):
    """Both sides of -log m_θ(1-η) ≥ (π+1)^-2 · sup ν(I)/|I|"""

    eta: float
    lhs: float
    rhs: float
    holds: bool
    window: Arc


class TaylorResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    coefficients: np.ndarray
    radius: float
    samples: int
    error_bound: float
    method: Literal["rational", "fft"]

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def value_at_zero(self) -> complex:
        return complex(self.coefficients[0])


def phase(z: complex) -> complex:
    """Unimodular factor |z|/z of a nonzero complex number"""
    return abs(z) / z if z != 0 else 1.0 + 0.0j

