"""Arc masses, Herglotz/Poisson integrals and arc-density suprema of singular measures."""
import logging
import math
from functools import lru_cache
from typing import List, Tuple

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import comb

from models.circle_set_models import circle_set_from_name
from models.measure_models import (
    Arc,
    AtomicMeasure,
    CoverMeasure,
    MassEstimate,
    SelfSimilarMeasure,
    SupRatio,
)
from models.run_models import DEFAULT_POLICY, NumericPolicy
from services.errors import DomainError, QuadratureToleranceError
from utils.circle_utils import TWO_PI, arc_segments, normalized_position, poisson_kernel

logger = logging.getLogger(__name__)

# cells closer than this (in local coordinates) to an arc endpoint count as aligned
ALIGNMENT_TOL = 1e-12

# enumeration budget for window scans over self-similar cells
MAX_WINDOW_CELLS = 1 << 16

POINT_CHUNK = 256

GAUSS_NODES = 4


def _cells(measure: SelfSimilarMeasure, depth: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Generation cells (left, length, weight) of the normalized measure, sorted by left end"""
    ratios = np.array([m.ratio for m in measure.maps])
    offsets = np.array([m.offset for m in measure.maps])
    probs = np.array([m.weight for m in measure.maps])
    lefts, lengths, weights = np.zeros(1), np.ones(1), np.ones(1)
    for _ in range(depth):
        lefts = (lefts[:, None] + lengths[:, None] * offsets[None, :]).ravel()
        lengths = (lengths[:, None] * ratios[None, :]).ravel()
        weights = (weights[:, None] * probs[None, :]).ravel()
    order = np.argsort(lefts, kind="stable")
    return lefts[order], lengths[order], weights[order]


def _children(measure: SelfSimilarMeasure, lefts, lengths, weights, *extra):
    ratios = np.array([m.ratio for m in measure.maps])
    offsets = np.array([m.offset for m in measure.maps])
    probs = np.array([m.weight for m in measure.maps])
    k = len(ratios)
    new_lefts = (lefts[:, None] + lengths[:, None] * offsets[None, :]).ravel()
    new_lengths = (lengths[:, None] * ratios[None, :]).ravel()
    new_weights = (weights[:, None] * probs[None, :]).ravel()
    return (new_lefts, new_lengths, new_weights) + tuple(np.repeat(e, k) for e in extra)


@lru_cache(maxsize=64)
def _gauss_rule(maps_key: Tuple[Tuple[float, float, float], ...], nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss rule of the normalized self-similar measure on local coordinates [0, 1].

    Moments of y = 2x - 1 follow exactly from self-similarity; the Jacobi matrix
    comes from the Cholesky factor of the moment Hankel matrix.
    """
    a = np.array([r for r, _, _ in maps_key])
    b = np.array([2.0 * o + r - 1.0 for r, o, _ in maps_key])
    p = np.array([w for _, _, w in maps_key])
    for q in range(nodes, 0, -1):
        moments = np.zeros(2 * q + 1)
        moments[0] = 1.0
        for k in range(1, 2 * q + 1):
            acc = 0.0
            for j in range(k):
                acc += comb(k, j) * moments[j] * np.sum(p * a**j * b ** (k - j))
            moments[k] = acc / (1.0 - np.sum(p * a**k))
        if q == 1:
            return np.array([0.5 * (moments[1] + 1.0)]), np.ones(1)
        hankel = np.array([[moments[i + j] for j in range(q + 1)] for i in range(q + 1)])
        try:
            upper = np.linalg.cholesky(hankel).T
        except np.linalg.LinAlgError:
            continue
        diag = np.diag(upper)
        alpha = np.array(
            [
                upper[j, j + 1] / diag[j] - (upper[j - 1, j] / diag[j - 1] if j > 0 else 0.0)
                for j in range(q)
            ]
        )
        beta = np.array([diag[j + 1] / diag[j] for j in range(q - 1)])
        y, vectors = eigh_tridiagonal(alpha, beta)
        w = vectors[0, :] ** 2
        if np.all(np.abs(y) <= 1.0 + 1e-12) and np.all(w > 0.0):
            return np.clip(0.5 * (y + 1.0), 0.0, 1.0), w / w.sum()
    raise AssertionError("unreachable: the one-node rule always exists")


def _maps_key(measure: SelfSimilarMeasure):
    return tuple((m.ratio, m.offset, m.weight) for m in measure.maps)


def _selfsimilar_integral(
    measure: SelfSimilarMeasure,
    r: np.ndarray,
    phi: np.ndarray,
    tol: float,
    policy: NumericPolicy,
    real_only: bool,
    operation: str,
) -> Tuple[np.ndarray, np.ndarray]:
    """Adaptive cell quadrature of the Herglotz kernel against a self-similar measure.

    Each (point, cell) pair is integrated with the measure's own Gauss rule once
    the Cauchy-estimate bound  6.81·m·|z|·(2w/D)^(2q)/D  falls below the pair's
    share tol·m/mass of the tolerance; otherwise the cell is split.
    """
    nodes, node_weights = _gauss_rule(_maps_key(measure), GAUSS_NODES)
    q = len(nodes)
    base = measure.base_position
    scale = measure.base_length
    total = measure.mass
    z_all = r * np.exp(1j * phi)
    values = np.zeros(len(r), dtype=float if real_only else complex)
    errors = np.zeros(len(r))

    for start in range(0, len(r), POINT_CHUNK):
        stop = min(start + POINT_CHUNK, len(r))
        idx = np.arange(start, stop)
        lefts, lengths, weights = np.zeros(len(idx)), np.ones(len(idx)), np.full(len(idx), total)
        for depth in range(measure.max_depth + 1):
            if len(idx) == 0:
                break
            if len(idx) > policy.quadrature_pair_budget:
                raise QuadratureToleranceError(
                    f"quadrature needs more than {policy.quadrature_pair_budget} cell evaluations", operation
                )
            zr = r[idx]
            width = TWO_PI * scale * lengths
            t_mid = TWO_PI * (base + scale * (lefts + 0.5 * lengths))
            gap = np.abs(np.exp(1j * t_mid) - z_all[idx]) - 0.5 * width
            dist = np.maximum(gap, (1.0 - zr) * (1.0 + zr) / 2.0)
            bound = 6.81 * weights * zr * (2.0 * width / dist) ** (2 * q) / dist
            accept = bound <= tol * weights / total
            if depth == measure.max_depth:
                accept = np.ones_like(accept)
                if not np.all(bound <= tol * weights / total):
                    raise QuadratureToleranceError(
                        f"tolerance {tol:g} not reached within depth {measure.max_depth}", operation
                    )
            if np.any(accept):
                a_idx = idx[accept]
                t = TWO_PI * (base + scale * (lefts[accept, None] + lengths[accept, None] * nodes[None, :]))
                mass = weights[accept, None] * node_weights[None, :]
                if real_only:
                    kernel = poisson_kernel(r[a_idx, None], phi[a_idx, None] - t)
                    contrib = np.sum(mass * kernel, axis=1)
                    values += np.bincount(a_idx, weights=contrib, minlength=len(r))
                else:
                    u = np.exp(1j * t)
                    zz = z_all[a_idx, None]
                    kernel = (u + zz) / (u - zz)
                    kernel = poisson_kernel(r[a_idx, None], phi[a_idx, None] - t) + 1j * kernel.imag
                    contrib = np.sum(mass * kernel, axis=1)
                    values += np.bincount(a_idx, weights=contrib.real, minlength=len(r))
                    values += 1j * np.bincount(a_idx, weights=contrib.imag, minlength=len(r))
                errors += np.bincount(a_idx, weights=bound[accept], minlength=len(r))
            keep = ~accept
            lefts, lengths, weights, idx = _children(
                measure, lefts[keep], lengths[keep], weights[keep], idx[keep]
            )
    return values, errors


class MeasureService:
    """Operations on finite positive singular measures of the circle"""

    @staticmethod
    def resolve(measure):
        """Replace a cover-described measure by the natural measure of its set"""
        if isinstance(measure, CoverMeasure):
            return circle_set_from_name(measure.name).natural_measure(measure.mass)
        return measure

    @staticmethod
    def total_mass(measure) -> float:
        return MeasureService.resolve(measure).total_mass

    @staticmethod
    def mass(measure, arc: Arc, policy: NumericPolicy = DEFAULT_POLICY) -> MassEstimate:
        """ν(I); exact for atoms, bracketed within one level for self-similar measures"""
        measure = MeasureService.resolve(measure)
        if arc.length >= 1.0:
            return MassEstimate(value=measure.total_mass, error=0.0)
        if isinstance(measure, AtomicMeasure):
            if not measure.atoms:
                return MassEstimate(value=0.0)
            inside = arc.contains(measure.angles)
            return MassEstimate(value=math.fsum(measure.weights[inside]), error=0.0)
        return MeasureService._selfsimilar_mass(measure, arc)

    @staticmethod
    def _selfsimilar_mass(measure: SelfSimilarMeasure, arc: Arc) -> MassEstimate:
        period = 1.0 / measure.base_length
        local_start = ((arc.position - measure.base_position) % 1.0) * period
        local_length = arc.length * period
        intervals = []
        for lo in (local_start, local_start - period):
            lo_c, hi_c = max(lo, 0.0), min(lo + local_length, 1.0)
            if hi_c > lo_c:
                intervals.append((lo_c, hi_c))

        inside = 0.0
        partial = 0.0
        for lo, hi in intervals:
            lefts, lengths, weights = np.zeros(1), np.ones(1), np.ones(1)
            for depth in range(measure.max_depth + 1):
                rights = lefts + lengths
                full = (lefts >= lo - ALIGNMENT_TOL) & (rights <= hi + ALIGNMENT_TOL)
                disjoint = (rights <= lo + ALIGNMENT_TOL) | (lefts >= hi - ALIGNMENT_TOL)
                cut = ~(full | disjoint)
                inside += math.fsum(weights[full])
                if not np.any(cut) or depth == measure.max_depth:
                    partial += math.fsum(weights[cut])
                    break
                lefts, lengths, weights = _children(measure, lefts[cut], lengths[cut], weights[cut])
        scale = measure.mass
        return MassEstimate(value=scale * (inside + 0.5 * partial), error=scale * 0.5 * partial)

    @staticmethod
    def poisson(measure, r, angles, policy: NumericPolicy = DEFAULT_POLICY, tol=None) -> np.ndarray:
        """Poisson integral ∫ P_r(φ - t) dν(t) at the points r·e^{iφ}"""
        measure = MeasureService.resolve(measure)
        r = np.broadcast_to(np.asarray(r, dtype=float), np.shape(angles)).ravel()
        phi = np.asarray(angles, dtype=float).ravel()
        if np.any(r >= 1.0) or np.any(r < 0.0):
            raise DomainError("Poisson integral needs 0 <= r < 1", "poisson")
        if isinstance(measure, AtomicMeasure):
            if not measure.atoms:
                return np.zeros_like(phi)
            kernel = poisson_kernel(r[:, None], phi[:, None] - measure.angles[None, :])
            return kernel @ measure.weights
        values, _ = _selfsimilar_integral(
            measure, r, phi, tol or policy.quadrature_tol, policy, real_only=True, operation="poisson"
        )
        return values

    @staticmethod
    def herglotz_many(measure, z, policy: NumericPolicy = DEFAULT_POLICY, tol=None) -> Tuple[np.ndarray, np.ndarray]:
        """Herglotz integrals at interior points with their a posteriori error bounds"""
        measure = MeasureService.resolve(measure)
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        r = np.abs(z)
        if np.any(r >= 1.0):
            raise DomainError("Herglotz integral is defined for |z| < 1 only", "herglotz")
        phi = np.angle(z)
        if isinstance(measure, AtomicMeasure):
            if not measure.atoms:
                return np.zeros(len(z), dtype=complex), np.zeros(len(z))
            u = np.exp(1j * measure.angles)[None, :]
            kernel = (u + z[:, None]) / (u - z[:, None])
            real = poisson_kernel(r[:, None], phi[:, None] - measure.angles[None, :])
            values = (real + 1j * kernel.imag) @ measure.weights
            return values, np.zeros(len(z))
        return _selfsimilar_integral(
            measure, r, phi, tol or policy.quadrature_tol, policy, real_only=False, operation="herglotz"
        )

    @staticmethod
    def herglotz(measure, z: complex, policy: NumericPolicy = DEFAULT_POLICY, tol=None) -> complex:
        """∫ (e^{it} + z)/(e^{it} - z) dν(t) for |z| < 1"""
        if not abs(z) < 1.0:
            raise DomainError(f"|z| = {abs(z)} is not inside the unit disk", "herglotz")
        values, _ = MeasureService.herglotz_many(measure, [z], policy, tol)
        return complex(values[0])

    @staticmethod
    def sup_arc_ratio(measure, eta: float, policy: NumericPolicy = DEFAULT_POLICY) -> SupRatio:
        """Lower estimate of sup_{|I| = η} ν(I)/|I| with the window achieving it"""
        if not 0.0 < eta <= 1.0:
            raise DomainError(f"arc length {eta} outside (0, 1]", "sup_arc_ratio")
        measure = MeasureService.resolve(measure)
        if isinstance(measure, AtomicMeasure):
            return MeasureService._atomic_sup(measure, eta)
        return MeasureService._selfsimilar_sup(measure, eta)

    @staticmethod
    def _atomic_sup(measure: AtomicMeasure, eta: float) -> SupRatio:
        if not measure.atoms:
            return SupRatio(ratio=0.0, window=Arc.from_start(0.0, eta), exact=True)
        if eta >= 1.0:
            return SupRatio(ratio=measure.total_mass, window=Arc(position=0.0, length=1.0), exact=True)
        # an optimal window can always be slid until its closed left end meets an atom
        positions = normalized_position(measure.angles)
        order = np.argsort(positions, kind="stable")
        positions, weights = positions[order], measure.weights[order]
        extended = np.concatenate([positions, positions + 1.0])
        cumulative = np.concatenate([[0.0], np.cumsum(np.concatenate([weights, weights]))])
        ends = np.searchsorted(extended, positions + eta, side="left")
        captured = cumulative[ends] - cumulative[np.arange(len(positions))]
        best = int(np.argmax(captured))
        window = Arc(position=positions[best], length=eta)
        return SupRatio(ratio=float(captured[best]) / eta, window=window, exact=True)

    @staticmethod
    def _selfsimilar_sup(measure: SelfSimilarMeasure, eta: float) -> SupRatio:
        local_length = eta / measure.base_length
        mass, start = MeasureService._window_lower(measure, local_length)
        angle = TWO_PI * (measure.base_position + measure.base_length * start)
        return SupRatio(ratio=measure.mass * mass / eta, window=Arc.from_start(angle, eta), exact=False)

    @staticmethod
    def _window_lower(measure: SelfSimilarMeasure, local_length: float) -> Tuple[float, float]:
        """(normalized mass, local start) of a good window of the given local length"""
        if local_length >= 1.0:
            return 1.0, 0.0
        max_ratio = max(m.ratio for m in measure.maps)
        depth = max(1, math.ceil(math.log(local_length / 8.0) / math.log(max_ratio)))
        if len(measure.maps) ** depth <= MAX_WINDOW_CELLS:
            lefts, lengths, weights = _cells(measure, depth)
            if measure.base_length >= 1.0:
                lefts = np.concatenate([lefts, lefts + 1.0])
                lengths = np.concatenate([lengths, lengths])
                weights = np.concatenate([weights, weights])
            rights = lefts + lengths
            cumulative = np.concatenate([[0.0], np.cumsum(weights)])
            count = len(lefts) // 2 if measure.base_length >= 1.0 else len(lefts)
            starts = np.arange(count)
            ends = np.searchsorted(rights, lefts[:count] + local_length * (1.0 + 1e-12), side="right")
            captured = np.where(ends > starts, cumulative[np.maximum(ends, starts)] - cumulative[starts], 0.0)
            best = int(np.argmax(captured))
            return float(captured[best]), float(lefts[best])
        # too fine to enumerate: zoom into the piece with the best density p/r
        piece = max(measure.maps, key=lambda m: m.weight / m.ratio)
        inner_mass, inner_start = MeasureService._window_lower(measure, local_length / piece.ratio)
        return piece.weight * inner_mass, piece.offset + piece.ratio * inner_start

    @staticmethod
    def poisson_mean_value(measure, r: float, policy: NumericPolicy = DEFAULT_POLICY) -> Tuple[float, float]:
        """(1/2π)∫ Re H(r e^{iφ}) dφ by the periodic trapezoid rule, with the total mass"""
        if not 0.0 <= r < 1.0:
            raise DomainError("mean value needs 0 <= r < 1", "poisson_mean_value")
        samples = max(256, int(math.ceil(math.log(policy.tol) / math.log(max(r, 1e-3)))) + 1)
        samples = min(samples, policy.grid_cap)
        angles = np.arange(samples) * (TWO_PI / samples)
        mean = float(np.mean(MeasureService.poisson(measure, r, angles, policy)))
        return mean, MeasureService.total_mass(measure)
