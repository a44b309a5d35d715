import logging
import math
from typing import Optional

import numpy as np
from scipy.optimize import bisect, minimize_scalar
from scipy.signal import lfilter

from models.inner_models import DecayRecord, GapRecord, InnerFunction, MinModulus, TaylorResult, phase
from models.run_models import DEFAULT_POLICY, NumericPolicy
from services.errors import (
    BoundaryEvaluationError,
    ConstantFunctionError,
    DomainError,
    EmptyMeasureError,
    PoleError,
    TaylorPrecisionError,
    ZeroOnCircleError,
)
from services.measure_service import MeasureService
from utils.circle_utils import TWO_PI
from utils.disk_search import disk_grid, refine_minimum, smallest_candidates

logger = logging.getLogger(__name__)

GAP_CONSTANT = (math.pi + 1.0) ** 2

TAYLOR_RADII = (0.8, 0.9, 0.95, 0.98, 0.99, 0.995, 0.998, 0.999)
MAX_TAYLOR_SAMPLES = 1 << 16
EPS = np.finfo(float).eps


def _blaschke_factor(w: complex, z: np.ndarray) -> np.ndarray:
    if w == 0:
        return z.astype(complex)
    return phase(w) * (w - z) / (1.0 - np.conj(w) * z)


def _log_abs_blaschke(theta: InnerFunction, z: np.ndarray) -> np.ndarray:
    total = np.zeros(z.shape)
    with np.errstate(divide="ignore"):
        for w in theta.zeros:
            if w == 0:
                total += np.log(np.abs(z))
            else:
                total += np.log(np.abs(w - z)) - np.log(np.abs(1.0 - np.conj(w) * z))
    return total


class InnerService:
    """Evaluation, minimum modulus and decay of inner functions"""

    @staticmethod
    def evaluate(theta: InnerFunction, z: complex, policy: NumericPolicy = DEFAULT_POLICY) -> complex:
        """θ(z) for |z| < 1, or by reflection θ(z) = 1/conj(θ(1/conj z)) for |z| > 1"""
        return complex(InnerService.evaluate_many(theta, np.array([z]), policy)[0])

    @staticmethod
    def evaluate_many(theta: InnerFunction, z, policy: NumericPolicy = DEFAULT_POLICY) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        modulus = np.abs(z)
        if np.any(np.abs(modulus - 1.0) <= 4.0 * EPS):
            raise BoundaryEvaluationError("inner functions are not evaluated on the unit circle", "evaluate")
        values = np.full(z.shape, theta.constant, dtype=complex)
        for w in theta.zeros:
            if w != 0 and np.any(np.abs(1.0 - np.conj(w) * z) <= 1e3 * EPS):
                raise PoleError(f"z is the reflected zero 1/conj({w})", "evaluate")
            values *= _blaschke_factor(w, z)
        measure = theta.measure
        if measure is not None:
            inside = modulus < 1.0
            herglotz = np.zeros(z.shape, dtype=complex)
            if np.any(inside):
                herglotz[inside], _ = MeasureService.herglotz_many(measure, z[inside], policy)
            if np.any(~inside):
                mirrored = 1.0 / np.conj(z[~inside])
                interior, _ = MeasureService.herglotz_many(measure, mirrored, policy)
                herglotz[~inside] = -np.conj(interior)
            values *= np.exp(-herglotz)
        return values

    @staticmethod
    def log_abs(theta: InnerFunction, r, angles, policy: NumericPolicy = DEFAULT_POLICY) -> np.ndarray:
        """log|θ(r e^{iφ})| for 0 <= r < 1, computed from the Poisson sum"""
        angles = np.asarray(angles, dtype=float)
        r = np.broadcast_to(np.asarray(r, dtype=float), angles.shape)
        values = _log_abs_blaschke(theta, r * np.exp(1j * angles))
        if theta.measure is not None:
            values = values - MeasureService.poisson(theta.measure, r, angles, policy).reshape(angles.shape)
        return values

    @staticmethod
    def log_abs_points(theta: InnerFunction, z, policy: NumericPolicy = DEFAULT_POLICY) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return InnerService.log_abs(theta, np.abs(z), np.angle(z), policy)

    @staticmethod
    def min_modulus(theta: InnerFunction, r: float, policy: NumericPolicy = DEFAULT_POLICY) -> MinModulus:
        """m_θ(r) = min over |z| = r of |θ(z)|, by angular grid plus bounded refinement"""
        if not 0.0 <= r < 1.0:
            raise DomainError(f"radius {r} outside [0, 1)", "min_modulus")
        zeros = theta.zeros
        if zeros.size and np.any(np.abs(np.abs(zeros) - r) <= 1e-14):
            raise ZeroOnCircleError(f"a Blaschke zero lies on |z| = {r}; the minimum is 0", "min_modulus")
        if r == 0.0:
            log_value = float(InnerService.log_abs(theta, 0.0, np.zeros(1), policy)[0])
            return MinModulus(r=r, value=math.exp(log_value), log_value=log_value, argmin_angle=0.0, grid_size=1)

        spikes = max(1, len(getattr(theta.measure, "atoms", ()) or ()) + len(zeros))
        size = int(min(policy.grid_cap, max(policy.grid_density, math.ceil(8.0 * math.pi * spikes / (1.0 - r)))))
        angles = np.arange(size) * (TWO_PI / size)
        values = InnerService.log_abs(theta, r, angles, policy)

        candidates = list(smallest_candidates(angles, values, policy.refine_candidates))
        atoms = getattr(theta.measure, "atoms", None) or []
        candidates += [angle for angle, _ in atoms]
        candidates += [float(np.angle(w)) for w in zeros if w != 0]

        def objective(angle: float) -> float:
            return float(InnerService.log_abs(theta, r, np.array([angle]), policy)[0])

        best_index = int(np.argmin(values))
        best_angle, best_value = float(angles[best_index]), float(values[best_index])
        step = TWO_PI / size
        for angle in candidates:
            value = objective(angle)
            if value < best_value:
                best_angle, best_value = angle, value
            refined = minimize_scalar(
                objective, bounds=(angle - step, angle + step), method="bounded", options={"xatol": 1e-13}
            )
            if refined.fun < best_value:
                best_angle, best_value = float(refined.x), float(refined.fun)
        return MinModulus(
            r=r,
            value=math.exp(best_value),
            log_value=best_value,
            argmin_angle=float(np.mod(best_angle, TWO_PI)),
            grid_size=size,
        )

    @staticmethod
    def delta_n(theta: InnerFunction, n: int, policy: NumericPolicy = DEFAULT_POLICY) -> DecayRecord:
        """δₙ(θ) = inf over the disk of max{|z|ⁿ, |θ(z)|}"""
        if n < 1:
            raise DomainError("n must be a positive integer", "delta_n")
        if theta.is_constant:
            raise ConstantFunctionError("δₙ needs a non-constant inner function", "delta_n")
        zeros = theta.zeros
        if zeros.size and np.any(zeros == 0):
            return DecayRecord(
                n=n, delta_n=0.0, log_delta_n=-math.inf, crossing_radius=0.0,
                bracket_width=0.0, argmin=0j, method="origin",
            )
        if theta.is_singular:
            return InnerService._delta_by_crossing(theta, n, policy)
        return InnerService._delta_by_disk_search(theta, n, policy)

    @staticmethod
    def _delta_by_crossing(theta: InnerFunction, n: int, policy: NumericPolicy) -> DecayRecord:
        # rⁿ increases and m_θ(r) decreases, so the crossing is unique
        def gap(r: float) -> float:
            return InnerService.min_modulus(theta, r, policy).log_value - n * math.log(r)

        lo, hi = 1e-300, None
        for k in range(1, 41):
            candidate = 1.0 - 2.0**-k
            if gap(candidate) < 0.0:
                hi = candidate
                break
            lo = candidate
        if hi is None:
            raise DomainError("no crossing of m_θ(r) = rⁿ below r = 1 - 2^-40", "delta_n")
        radius = bisect(gap, lo, hi, xtol=policy.bisection_width)
        logger.debug("delta_n n=%d crossing at r=%.15f", n, radius)
        argmin = InnerService.min_modulus(theta, radius, policy).argmin_angle
        return DecayRecord(
            n=n,
            delta_n=radius**n,
            log_delta_n=n * math.log(radius),
            crossing_radius=radius,
            bracket_width=policy.bisection_width,
            argmin=radius * complex(math.cos(argmin), math.sin(argmin)),
            method="crossing",
        )

    @staticmethod
    def _delta_by_disk_search(theta: InnerFunction, n: int, policy: NumericPolicy) -> DecayRecord:
        zeros = theta.zeros
        points = disk_grid(policy.disk_radial, policy.disk_angular, extra=zeros)

        def objective_many(z: np.ndarray) -> np.ndarray:
            with np.errstate(divide="ignore"):
                return np.maximum(n * np.log(np.abs(z)), InnerService.log_abs_points(theta, z, policy))

        def objective(z: complex) -> float:
            return float(objective_many(np.array([z]))[0])

        values = objective_many(points)
        starts = list(smallest_candidates(points, values, policy.refine_candidates)) + list(zeros)
        best_z, best_value = points[int(np.argmin(values))], float(np.min(values))
        scale = 2.0 / policy.disk_radial
        for start in starts:
            z, value = refine_minimum(objective, start, scale, xatol=policy.refine_xatol)
            if value < best_value:
                best_z, best_value = z, value
        return DecayRecord(
            n=n,
            delta_n=math.exp(best_value),
            log_delta_n=best_value,
            crossing_radius=abs(best_z),
            bracket_width=policy.refine_xatol,
            argmin=complex(best_z),
            method="disk",
        )

    @staticmethod
    def exterior_max_modulus(theta: InnerFunction, rho: float, policy: NumericPolicy = DEFAULT_POLICY) -> float:
        """log max over |λ| = ρ > 1 of |θ(λ)|, from exterior evaluation"""
        if not rho > 1.0:
            raise DomainError("exterior radius must exceed 1", "exterior_max_modulus")
        size = int(min(policy.grid_cap, max(policy.grid_density, math.ceil(8.0 * math.pi / (1.0 - 1.0 / rho)))))
        angles = np.arange(size) * (TWO_PI / size)
        values = np.log(np.abs(InnerService.evaluate_many(theta, rho * np.exp(1j * angles), policy)))
        atoms = getattr(theta.measure, "atoms", None) or []
        candidates = list(smallest_candidates(angles, -values, policy.refine_candidates))
        candidates += [angle for angle, _ in atoms]
        best = float(np.max(values))

        def negative(angle: float) -> float:
            return -float(np.log(np.abs(InnerService.evaluate(theta, rho * complex(math.cos(angle), math.sin(angle)), policy))))

        step = TWO_PI / size
        for angle in candidates:
            best = max(best, -negative(angle))
            refined = minimize_scalar(negative, bounds=(angle - step, angle + step), method="bounded")
            best = max(best, -float(refined.fun))
        return best

    @staticmethod
    def delta_n_exterior(theta: InnerFunction, n: int, policy: NumericPolicy = DEFAULT_POLICY) -> float:
        """δₙ through 1/δₙ = sup over |λ| > 1 of min{|λ|ⁿ, |θ(λ)|}, for zero-free θ"""
        if n < 1:
            raise DomainError("n must be a positive integer", "delta_n_exterior")
        if not theta.is_singular:
            raise DomainError("the exterior route needs a zero-free non-constant θ", "delta_n_exterior")

        def gap(log_rho: float) -> float:
            return InnerService.exterior_max_modulus(theta, math.exp(log_rho), policy) - n * log_rho

        hi = 1.0
        while gap(hi) > 0.0:
            hi *= 2.0
            if hi > 1e4:
                raise DomainError("no exterior crossing found", "delta_n_exterior")
        lo = hi / 2.0
        while gap(lo) <= 0.0:
            lo /= 2.0
            if lo < 1e-13:
                raise DomainError("exterior crossing too close to the circle", "delta_n_exterior")
        log_rho = bisect(gap, lo, hi, xtol=policy.bisection_width)
        return math.exp(-n * log_rho)

    @staticmethod
    def innerest_gap(measure, eta: float, policy: NumericPolicy = DEFAULT_POLICY) -> GapRecord:
        """-log m_θ(1 - η) against (π+1)^-2 · sup_{|I|=η} ν(I)/|I|"""
        if not 0.0 < eta <= 1.0:
            raise DomainError(f"η = {eta} outside (0, 1]", "innerest_gap")
        if MeasureService.total_mass(measure) <= 0.0:
            raise EmptyMeasureError("the gap check needs a nonzero measure", "innerest_gap")
        theta = InnerFunction(singular=measure)
        lhs = -InnerService.min_modulus(theta, 1.0 - eta, policy).log_value
        sup = MeasureService.sup_arc_ratio(measure, eta, policy)
        rhs = sup.ratio / GAP_CONSTANT
        return GapRecord(eta=eta, lhs=lhs, rhs=rhs, holds=lhs >= rhs - policy.tol * max(1.0, rhs), window=sup.window)

    @staticmethod
    def taylor(theta: InnerFunction, degree: int, policy: NumericPolicy = DEFAULT_POLICY) -> TaylorResult:
        """Taylor coefficients c_0..c_D of θ with an error bound"""
        if degree < 0:
            raise DomainError("degree must be nonnegative", "taylor")
        if theta.measure is None:
            return InnerService._rational_taylor(theta, degree)
        return InnerService._fft_taylor(theta, degree, policy)

    @staticmethod
    def _rational_taylor(theta: InnerFunction, degree: int) -> TaylorResult:
        numerator = np.array([theta.constant], dtype=complex)
        denominator = np.array([1.0], dtype=complex)
        for w in theta.zeros:
            if w == 0:
                numerator = np.convolve(numerator, [0.0, 1.0])
            else:
                numerator = np.convolve(numerator, [abs(w), -phase(w)])
                denominator = np.convolve(denominator, [1.0, -np.conj(w)])
        impulse = np.zeros(degree + 1, dtype=complex)
        impulse[0] = 1.0
        coefficients = lfilter(numerator, denominator, impulse)
        bound = float(EPS * (degree + 1) * max(1, theta.degree))
        return TaylorResult(coefficients=coefficients, radius=1.0, samples=degree + 1, error_bound=bound, method="rational")

    @staticmethod
    def _fft_taylor(theta: InnerFunction, degree: int, policy: NumericPolicy) -> TaylorResult:
        sample_error = EPS * 16 if hasattr(theta.measure, "atoms") else policy.quadrature_tol

        def plan(rho: float):
            samples = max(4 * (degree + 1), math.ceil(math.log(EPS) / math.log(rho)))
            samples = min(MAX_TAYLOR_SAMPLES, 1 << (samples - 1).bit_length())
            aliasing = rho**samples / (1.0 - rho**samples)
            roundoff = (2.0 * EPS * math.log2(samples) + sample_error) * rho**-degree
            return aliasing + roundoff, samples

        plans = [(rho,) + plan(rho) for rho in TAYLOR_RADII]
        feasible = [p for p in plans if p[1] <= policy.taylor_threshold]
        rho, bound, samples = feasible[0] if feasible else min(plans, key=lambda p: p[1])
        if bound > policy.taylor_threshold:
            raise TaylorPrecisionError(
                f"degree {degree} cannot be resolved: best coefficient error bound {bound:.3g} "
                f"exceeds {policy.taylor_threshold:g}",
                error_bound=bound,
            )
        nodes = rho * np.exp(1j * TWO_PI * np.arange(samples) / samples)
        values = InnerService.evaluate_many(theta, nodes, policy)
        coefficients = np.fft.fft(values)[: degree + 1] / samples
        coefficients *= rho ** -np.arange(degree + 1, dtype=float)
        logger.debug("taylor degree=%d rho=%g samples=%d bound=%.3g", degree, rho, samples, bound)
        return TaylorResult(coefficients=coefficients, radius=rho, samples=samples, error_bound=bound, method="fft")
