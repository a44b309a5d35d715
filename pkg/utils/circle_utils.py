"""Geometry helpers on the unit circle.

Angles are radians; positions are normalized circle coordinates in [0, 1)
(position = angle / 2π), matching the normalized Lebesgue measure.
"""
import math
from typing import List, Tuple

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(angle: float) -> float:
    """Reduce an angle to [0, 2π)"""
    wrapped = math.fmod(angle, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    return 0.0 if wrapped >= TWO_PI else wrapped


def normalized_position(angle):
    """Map angles (scalar or array) to normalized positions in [0, 1)"""
    position = np.mod(np.asarray(angle, dtype=float) / TWO_PI, 1.0)
    return np.where(position >= 1.0, 0.0, position)


def to_unit(angle):
    return np.exp(1j * np.asarray(angle, dtype=float))


def arc_segments(position: float, length: float) -> List[Tuple[float, float]]:
    """Split the half-open arc [position, position + length) into pieces of [0, 1)"""
    if length >= 1.0:
        return [(0.0, 1.0)]
    end = position + length
    if end <= 1.0:
        return [(position, end)]
    return [(position, 1.0), (0.0, end - 1.0)]


def circular_distance(a, b):
    """Angular distance in [0, π] between angles a and b"""
    diff = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), TWO_PI)
    return np.minimum(diff, TWO_PI - diff)


def poisson_kernel(r, delta):
    """Poisson kernel (1 - r²)/|e^{iδ} - r|², written to stay accurate as r → 1"""
    r = np.asarray(r, dtype=float)
    s = np.sin(0.5 * np.asarray(delta, dtype=float))
    return (1.0 - r) * (1.0 + r) / ((1.0 - r) ** 2 + 4.0 * r * s * s)
