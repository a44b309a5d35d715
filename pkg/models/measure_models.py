import math
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from services.errors import DescriptorError
from utils.circle_utils import TWO_PI, arc_segments, normalized_position, wrap_angle


class Arc(BaseModel):
    """Half-open arc [start, start + 2π·length) of the unit circle.

    The left endpoint is stored as a normalized position, so an arc started at an atom
    contains it exactly. Length is in normalized measure: the whole circle has length 1.
    """

    model_config = ConfigDict(frozen=True)

    position: float = Field(..., ge=0.0, lt=1.0)
    length: float = Field(..., gt=0.0, le=1.0)

    @field_validator("position", mode="before")
    @classmethod
    def _wrap_position(cls, value: Any) -> float:
        position = float(value) % 1.0
        return 0.0 if position >= 1.0 else position

    @classmethod
    def from_start(cls, start_angle: float, length: float) -> "Arc":
        return cls(position=normalized_position(start_angle), length=length)

    @classmethod
    def centered(cls, center: float, length: float) -> "Arc":
        return cls.from_start(center - math.pi * length, length)

    @property
    def center(self) -> float:
        return wrap_angle(TWO_PI * self.position + math.pi * self.length)

    @property
    def start_angle(self) -> float:
        return self.position * TWO_PI

    def segments(self) -> List[Tuple[float, float]]:
        return arc_segments(self.position, self.length)

    def contains(self, angles):
        """Vectorized half-open membership test"""
        if self.length >= 1.0:
            return np.ones(np.shape(angles), dtype=bool)
        offset = np.mod(normalized_position(angles) - self.position, 1.0)
        return offset < self.length


class AtomicMeasure(BaseModel):
    """Finite sum of point masses: atoms are (angle, weight) pairs"""

    model_config = ConfigDict(frozen=True)

    kind: Literal["atomic"] = "atomic"
    atoms: List[Tuple[float, float]] = Field(default_factory=list)

    @field_validator("atoms")
    @classmethod
    def _check_atoms(cls, atoms: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
        checked = []
        for angle, weight in atoms:
            if not (weight > 0.0 and math.isfinite(weight)):
                raise ValueError(f"atom weight must be positive and finite, got {weight}")
            checked.append((wrap_angle(angle), float(weight)))
        return checked

    @property
    def total_mass(self) -> float:
        return math.fsum(weight for _, weight in self.atoms)

    @property
    def angles(self) -> np.ndarray:
        return np.array([angle for angle, _ in self.atoms], dtype=float)

    @property
    def weights(self) -> np.ndarray:
        return np.array([weight for _, weight in self.atoms], dtype=float)

    def scaled(self, factor: float) -> "AtomicMeasure":
        return AtomicMeasure(atoms=[(angle, weight * factor) for angle, weight in self.atoms])


class SimilarityMap(BaseModel):
    """Contraction x -> ratio·x + offset of the base arc, chosen with probability weight"""

    model_config = ConfigDict(frozen=True)

    ratio: float = Field(..., gt=0.0, lt=1.0)
    offset: float = Field(..., ge=0.0, lt=1.0)
    weight: float = Field(..., gt=0.0, le=1.0)


class SelfSimilarMeasure(BaseModel):
    """Invariant measure of an iterated function system living on a base arc.

    Local coordinates x ∈ [0, 1) run along the base arc; the circle position
    is base_position + base_length·x.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["selfsimilar"] = "selfsimilar"
    base_start: float = 0.0
    base_length: float = Field(default=1.0, gt=0.0, le=1.0)
    maps: List[SimilarityMap]
    mass: float = Field(..., gt=0.0)
    max_depth: int = Field(default=60, ge=1, le=200)

    @field_validator("base_start", mode="before")
    @classmethod
    def _wrap_start(cls, value: Any) -> float:
        return wrap_angle(float(value))

    @model_validator(mode="after")
    def _check_pieces(self) -> "SelfSimilarMeasure":
        if not self.maps:
            raise ValueError("a self-similar measure needs at least one map")
        total = math.fsum(m.weight for m in self.maps)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"map weights must sum to 1, got {total}")
        pieces = sorted((m.offset, m.offset + m.ratio) for m in self.maps)
        for (_, right), (left, _) in zip(pieces, pieces[1:]):
            if right > left + 1e-15:
                raise ValueError("pieces of a self-similar measure must be pairwise disjoint")
        if pieces[-1][1] > 1.0 + 1e-15:
            raise ValueError("pieces must stay inside the base arc")
        return self

    @classmethod
    def cantor(cls, mass: float = 1.0, ratio: float = 1.0 / 3.0) -> "SelfSimilarMeasure":
        """Cantor measure on the whole circle: two pieces of the given ratio, equal weights"""
        return cls(
            maps=[
                SimilarityMap(ratio=ratio, offset=0.0, weight=0.5),
                SimilarityMap(ratio=ratio, offset=1.0 - ratio, weight=0.5),
            ],
            mass=mass,
        )

    @property
    def total_mass(self) -> float:
        return self.mass

    @property
    def base_position(self) -> float:
        return float(normalized_position(self.base_start))

    @property
    def barycenter(self) -> float:
        """Mean of the normalized measure in local coordinates"""
        drift = math.fsum(m.weight * m.offset for m in self.maps)
        return drift / (1.0 - math.fsum(m.weight * m.ratio for m in self.maps))

    def scaled(self, factor: float) -> "SelfSimilarMeasure":
        return self.model_copy(update={"mass": self.mass * factor})


class CoverMeasure(BaseModel):
    """Natural measure of a named compact set from the set registry"""

    model_config = ConfigDict(frozen=True)

    kind: Literal["cover"] = "cover"
    name: str
    mass: float = Field(default=1.0, gt=0.0)

    @property
    def total_mass(self) -> float:
        return self.mass

    def scaled(self, factor: float) -> "CoverMeasure":
        return self.model_copy(update={"mass": self.mass * factor})


SingularMeasure = Annotated[
    Union[AtomicMeasure, SelfSimilarMeasure, CoverMeasure],
    Field(discriminator="kind"),
]


class MassEstimate(BaseModel):
    value: float
    error: float = 0.0


class SupRatio(BaseModel):
    """Lower estimate of sup ν(I)/|I| over arcs of a fixed length"""

    ratio: float
    window: Arc
    exact: bool


def _decimal(value: Any, location: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise DescriptorError(f"expected a number, got {value!r}", location)


def measure_from_descriptor(data: Dict[str, Any], location: str = "measure"):
    """Build a SingularMeasure from its JSON descriptor"""
    if not isinstance(data, dict) or "type" not in data:
        raise DescriptorError("measure descriptor needs a 'type' field", location)
    kind = data["type"]
    try:
        if kind == "atomic":
            atoms = data.get("atoms", [])
            parsed = []
            for index, atom in enumerate(atoms):
                if not isinstance(atom, (list, tuple)) or len(atom) != 2:
                    raise DescriptorError("atom must be [angle, weight]", f"{location}.atoms[{index}]")
                parsed.append(
                    (
                        _decimal(atom[0], f"{location}.atoms[{index}][0]"),
                        _decimal(atom[1], f"{location}.atoms[{index}][1]"),
                    )
                )
            return AtomicMeasure(atoms=parsed)
        if kind == "cantor":
            return SelfSimilarMeasure.cantor(
                mass=_decimal(data.get("mass", 1), f"{location}.mass"),
                ratio=_decimal(data.get("ratio", "0.3333333333333333"), f"{location}.ratio"),
            )
        if kind == "selfsimilar":
            return SelfSimilarMeasure.model_validate(
                {key: value for key, value in data.items() if key != "type"} | {"kind": "selfsimilar"}
            )
        if kind == "cover":
            if "name" not in data:
                raise DescriptorError("cover descriptor needs a 'name'", location)
            return CoverMeasure(name=str(data["name"]), mass=_decimal(data.get("mass", 1), f"{location}.mass"))
    except ValueError as exc:
        raise DescriptorError(str(exc), location)
    raise DescriptorError(f"unknown measure type {kind!r}", f"{location}.type")
