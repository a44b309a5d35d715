"""Compact subsets of the circle presented through their finite covers."""
import math
from abc import ABC, abstractmethod
from typing import Callable, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from models.measure_models import Arc, AtomicMeasure, SelfSimilarMeasure
from services.errors import DescriptorError, DomainError
from utils.circle_utils import circular_distance, normalized_position

# beyond this many arcs a cover is described by its length groups only
MAX_ENUMERATED_ARCS = 4096

# digit tests lose a factor 1/ratio of precision per level
MAX_MEMBERSHIP_DEPTH = 20


class ArcGroup(BaseModel):
    """`count` arcs sharing the same normalized length"""

    model_config = ConfigDict(frozen=True)

    length: float = Field(..., gt=0.0, le=1.0)
    count: int = Field(..., ge=1)


class Cover(BaseModel):
    model_config = ConfigDict(frozen=True)

    generation: int
    groups: List[ArcGroup]
    arcs: Optional[List[Arc]] = None

    @property
    def total_length(self) -> float:
        return math.fsum(float(group.count) * group.length for group in self.groups)

    @property
    def min_length(self) -> float:
        return min(group.length for group in self.groups)

    @property
    def max_length(self) -> float:
        return max(group.length for group in self.groups)

    @property
    def arc_count(self) -> int:
        return sum(group.count for group in self.groups)


def cover_from_arcs(generation: int, arcs: List[Arc]) -> Cover:
    lengths: Dict[float, int] = {}
    for arc in arcs:
        lengths[arc.length] = lengths.get(arc.length, 0) + 1
    groups = [ArcGroup(length=length, count=count) for length, count in sorted(lengths.items())]
    return Cover(generation=generation, groups=groups, arcs=list(arcs))


class CompactCircleSet(BaseModel, ABC):
    """A closed subset E of the circle known through covers at increasing generations"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    declared_measure_zero: bool = True
    max_generation: int = Field(default=200, ge=1)

    @abstractmethod
    def cover_at(self, generation: int) -> Cover:
        """Finite cover of the set by arcs; deeper generations give finer covers"""

    @abstractmethod
    def contains(self, angle: float, generation: int) -> bool:
        """Whether the angle lies in the generation cover (up to round-off)"""

    def natural_measure(self, mass: float = 1.0):
        raise DomainError(f"set {self.name!r} has no natural measure", "natural_measure")


class CantorSet(CompactCircleSet):
    """Symmetric Cantor set on the whole circle, normalized position x ∈ [0, 1)"""

    name: Literal["cantor"] = "cantor"
    ratio: float = Field(default=1.0 / 3.0, gt=0.0, lt=0.5)

    def cover_at(self, generation: int) -> Cover:
        if generation < 1 or generation > self.max_generation:
            raise DomainError(f"generation {generation} outside 1..{self.max_generation}", "cover")
        length = self.ratio**generation
        count = 2**generation
        arcs = None
        if count <= MAX_ENUMERATED_ARCS:
            lefts = np.zeros(1)
            for level in range(generation):
                scale = self.ratio**level
                lefts = np.concatenate([lefts, lefts + (1.0 - self.ratio) * scale])
            arcs = [Arc(position=left, length=length) for left in np.sort(lefts)]
        return Cover(generation=generation, groups=[ArcGroup(length=length, count=count)], arcs=arcs)

    def contains(self, angle: float, generation: int) -> bool:
        x = float(normalized_position(angle))
        if x > 1.0 - 1e-13:
            x = 1.0
        tol = 1e-12
        for _ in range(min(generation, MAX_MEMBERSHIP_DEPTH)):
            if x <= self.ratio + tol:
                x = min(max(x / self.ratio, 0.0), 1.0)
            elif x >= 1.0 - self.ratio - tol:
                x = min(max((x - (1.0 - self.ratio)) / self.ratio, 0.0), 1.0)
            else:
                return False
        return True

    def natural_measure(self, mass: float = 1.0) -> SelfSimilarMeasure:
        return SelfSimilarMeasure.cantor(mass=mass, ratio=self.ratio)


class PointSet(CompactCircleSet):
    """Single point; generation g is covered by one arc of length shrink^-g"""

    name: Literal["point"] = "point"
    angle: float = 0.0
    shrink: float = Field(default=5.0, gt=4.0)

    def cover_at(self, generation: int) -> Cover:
        if generation < 1 or generation > self.max_generation:
            raise DomainError(f"generation {generation} outside 1..{self.max_generation}", "cover")
        arc = Arc.centered(self.angle, self.shrink**-generation)
        return cover_from_arcs(generation, [arc])

    def contains(self, angle: float, generation: int) -> bool:
        half_width = math.pi * self.shrink**-generation
        return bool(circular_distance(angle, self.angle) <= half_width + 1e-12)

    def natural_measure(self, mass: float = 1.0) -> AtomicMeasure:
        return AtomicMeasure(atoms=[(self.angle, mass)])


class CallbackCoverSet(CompactCircleSet):
    """Set described by a user-supplied cover provider: generation -> arcs"""

    provider: Callable[[int], List[Arc]]

    def cover_at(self, generation: int) -> Cover:
        if generation < 1 or generation > self.max_generation:
            raise DomainError(f"generation {generation} outside 1..{self.max_generation}", "cover")
        arcs = list(self.provider(generation))
        if not arcs:
            raise DomainError(f"provider returned an empty cover at generation {generation}", "cover")
        return cover_from_arcs(generation, arcs)

    def contains(self, angle: float, generation: int) -> bool:
        return any(bool(arc.contains(np.array([angle]))[0]) for arc in self.cover_at(generation).arcs)


SET_REGISTRY = {
    "cantor": CantorSet,
    "point": PointSet,
}


def circle_set_from_name(name: str, location: str = "set") -> CompactCircleSet:
    if name not in SET_REGISTRY:
        raise DescriptorError(f"unknown set {name!r}; known: {', '.join(sorted(SET_REGISTRY))}", location)
    return SET_REGISTRY[name]()
