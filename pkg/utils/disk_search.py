"""Grid-and-refine minimization of real objectives over the open unit disk."""
import math
from typing import Callable, Iterable, Optional, Tuple

import numpy as np
from scipy.optimize import minimize, minimize_scalar

MAX_RADIUS = 1.0 - 1e-12


def disk_grid(radial: int, angular: int, extra: Optional[Iterable[complex]] = None) -> np.ndarray:
    """Polar grid: linear radii up to 0.9, then geometric spacing accumulating at |z| = 1"""
    linear = np.linspace(0.0, 0.9, radial // 2, endpoint=False)[1:]
    geometric = 1.0 - np.geomspace(0.1, 1e-6, radial - radial // 2)
    radii = np.concatenate([linear, geometric])
    angles = np.arange(angular) * (2.0 * math.pi / angular)
    points = (radii[:, None] * np.exp(1j * angles)[None, :]).ravel()
    points = np.concatenate([[0.0 + 0.0j], points])
    if extra is not None:
        extra = np.asarray(list(extra), dtype=complex)
        if extra.size:
            points = np.concatenate([points, extra[np.abs(extra) < 1.0]])
    return points


def smallest_candidates(points: np.ndarray, values: np.ndarray, count: int) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    return points[order[:count]]


def refine_minimum(
    objective: Callable[[complex], float],
    start: complex,
    scale: float,
    xatol: float = 1e-10,
    sweeps: int = 3,
) -> Tuple[complex, float]:
    """Polish a grid minimizer: Nelder-Mead in the plane, then polar coordinate sweeps.

    The objective is only ever decreased, so the result never exceeds the start value.
    """

    def planar(v: np.ndarray) -> float:
        z = complex(v[0], v[1])
        if abs(z) >= MAX_RADIUS:
            return math.inf
        return objective(z)

    best_z, best_value = complex(start), objective(complex(start))
    simplex = np.array(
        [
            [best_z.real, best_z.imag],
            [best_z.real + scale, best_z.imag],
            [best_z.real, best_z.imag + scale],
        ]
    )
    result = minimize(
        planar,
        simplex[0],
        method="Nelder-Mead",
        options={"initial_simplex": simplex, "xatol": xatol, "fatol": 1e-15, "maxiter": 600},
    )
    if result.fun < best_value:
        best_z, best_value = complex(result.x[0], result.x[1]), float(result.fun)

    for _ in range(sweeps):
        rho, angle = abs(best_z), float(np.angle(best_z))
        radial = minimize_scalar(
            lambda s: objective(s * np.exp(1j * angle)),
            bounds=(max(0.0, rho - scale), min(MAX_RADIUS, rho + scale)),
            method="bounded",
            options={"xatol": xatol},
        )
        if radial.fun < best_value:
            best_z, best_value = radial.x * np.exp(1j * angle), float(radial.fun)
        rho = abs(best_z)
        if rho <= 0.0:
            break
        span = min(math.pi, scale / rho)
        angular = minimize_scalar(
            lambda a: objective(rho * np.exp(1j * a)),
            bounds=(angle - span, angle + span),
            method="bounded",
            options={"xatol": xatol},
        )
        if angular.fun < best_value:
            best_z, best_value = rho * np.exp(1j * angular.x), float(angular.fun)
    return complex(best_z), best_value
