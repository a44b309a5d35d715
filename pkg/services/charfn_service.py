"""Characteristic functions of matrix contractions and the operator-side checks."""
import logging
import math
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import eigh, null_space, svdvals
from scipy.stats import unitary_group

from models.charfn_models import (
    CharacteristicFunction,
    DefectData,
    DetReduction,
    DiagonalInnerFunction,
    LangerSplit,
    MatrixContraction,
    ModelValidation,
    OperatorDecay,
    OperatorEstimate,
)
from models.inner_models import DecayRecord, InnerFunction
from models.measure_models import AtomicMeasure
from models.run_models import DEFAULT_POLICY, NumericPolicy
from services.errors import (
    DegenerateDefectError,
    DomainError,
    NotContractionError,
    NotInvertibleError,
    ResolventError,
)
from services.inner_service import InnerService
from utils.circle_utils import TWO_PI
from utils.disk_search import disk_grid, refine_minimum, smallest_candidates

logger = logging.getLogger(__name__)

SQRT_CLAMP = -1e-12
INNERNESS_ANGLES = 256
DET_ZERO_TOL = 1e-6
INTERIOR_RADIUS = 0.99
RESOLVENT_TOL = 1e-14
SPECTRUM_TOL = 1e-6


def _hermitian_sqrt(A: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Principal square root of a PSD matrix; eigenvalues in [-1e-12, 0) are clamped"""
    A = 0.5 * (A + A.conj().T)
    values, vectors = eigh(A)
    if values.size and values[0] < SQRT_CLAMP:
        raise NotContractionError(
            f"I - T*T has eigenvalue {values[0]:.3g} below zero", norm=math.sqrt(1.0 - values[0])
        )
    values = np.clip(values, 0.0, None)
    return (vectors * np.sqrt(values)) @ vectors.conj().T, values, vectors


def _range_basis(values: np.ndarray, vectors: np.ndarray, threshold: float) -> np.ndarray:
    """Columns spanning the eigenvalues above threshold, largest first, each phase-normalized"""
    keep = np.flatnonzero(values > threshold)[::-1]
    basis = vectors[:, keep].astype(complex)
    for k in range(basis.shape[1]):
        pivot = basis[np.argmax(np.abs(basis[:, k])), k]
        basis[:, k] *= abs(pivot) / pivot
    return basis


def _log_sigma_min(matrices: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.linalg.svd(matrices, compute_uv=False)[..., -1])


def _log_abs_det_root(matrices: np.ndarray) -> np.ndarray:
    _, logdet = np.linalg.slogdet(matrices)
    return logdet / matrices.shape[-1]


@lru_cache(maxsize=4096)
def _scalar_decay(theta_json: str, n: int, policy_json: str) -> DecayRecord:
    """δₙ of one diagonal entry, shared between Θ and repeated entries"""
    theta = InnerFunction.model_validate_json(theta_json)
    return InnerService.delta_n(theta, n, NumericPolicy.model_validate_json(policy_json))


def _decay(theta: InnerFunction, n: int, policy: NumericPolicy) -> DecayRecord:
    return _scalar_decay(theta.model_dump_json(), n, policy.model_dump_json())


def _averaged_measure(diagonal: DiagonalInnerFunction) -> AtomicMeasure:
    """ν̄ = (ν_1 + ... + ν_N)/N, so |Δ| = |det Θ|^{1/N} = exp(-P[ν̄])"""
    weights: Dict[float, float] = {}
    for entry in diagonal.entries:
        if not entry.is_singular or not isinstance(entry.measure, AtomicMeasure):
            raise DomainError("synthetic determinant reduction needs zero-free atomic entries", "det_reduction")
        for angle, weight in entry.measure.atoms:
            weights[angle] = weights.get(angle, 0.0) + weight
    return AtomicMeasure(atoms=[(angle, total / diagonal.size) for angle, total in sorted(weights.items())])


class CharFnService:
    """Sz.-Nagy–Foias characteristic functions of d×d contractions"""

    @staticmethod
    def contraction(T, policy: NumericPolicy = DEFAULT_POLICY) -> MatrixContraction:
        T = np.atleast_2d(np.asarray(T, dtype=complex))
        if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] == 0:
            raise DomainError(f"expected a square matrix, got shape {T.shape}", "contraction")
        singular_values = svdvals(T)
        norm = float(singular_values[0])
        if norm > 1.0 + policy.contraction_tol:
            raise NotContractionError(f"‖T‖ = {norm:.12g} exceeds 1", norm=norm, operation="contraction")
        eigenvalues = np.linalg.eigvals(T)
        radius = float(np.max(np.abs(eigenvalues)))
        smallest = float(singular_values[-1])
        return MatrixContraction(
            matrix=T,
            norm=norm,
            min_singular_value=smallest,
            spectral_radius=radius,
            eigenvalues=eigenvalues,
            invertible=smallest > policy.defect_tol,
            strict_spectral=radius < 1.0 - policy.defect_tol,
        )

    @staticmethod
    def defects(T, policy: NumericPolicy = DEFAULT_POLICY) -> DefectData:
        """Defect operators by Hermitian eigendecomposition, ranks at defect_tol·max(‖T‖, 1)"""
        contraction = T if isinstance(T, MatrixContraction) else CharFnService.contraction(T, policy)
        A = contraction.matrix
        identity = np.eye(A.shape[0])
        D, values, vectors = _hermitian_sqrt(identity - A.conj().T @ A)
        D_star, values_star, vectors_star = _hermitian_sqrt(identity - A @ A.conj().T)
        threshold = policy.defect_tol * max(contraction.norm, 1.0)
        return DefectData(
            D_T=D,
            D_T_star=D_star,
            basis=_range_basis(values, vectors, threshold),
            basis_star=_range_basis(values_star, vectors_star, threshold),
            square_residual=float(np.linalg.norm(D @ D - (identity - A.conj().T @ A), 2)),
            square_residual_star=float(np.linalg.norm(D_star @ D_star - (identity - A @ A.conj().T), 2)),
            intertwining_residual=float(np.linalg.norm(A @ D - D_star @ A, 2)),
        )

    @staticmethod
    def characteristic_function(T, policy: NumericPolicy = DEFAULT_POLICY) -> CharacteristicFunction:
        contraction = T if isinstance(T, MatrixContraction) else CharFnService.contraction(T, policy)
        return CharacteristicFunction(contraction=contraction, defects=CharFnService.defects(contraction, policy))

    @staticmethod
    def theta_eval_many(C: CharacteristicFunction, points) -> np.ndarray:
        """Stack of Θ_T(λ) matrices, shape (k, rank D_{T*}, rank D_T)"""
        defects = C.defects
        if defects.rank == 0 or defects.rank_star == 0:
            raise DegenerateDefectError("T is unitary: the defect spaces are zero-dimensional", "theta_eval")
        points = np.atleast_1d(np.asarray(points, dtype=complex))
        T = C.T
        d = T.shape[0]
        resolvent = np.eye(d)[None, :, :] - points[:, None, None] * T.conj().T[None, :, :]
        smallest = np.linalg.svd(resolvent, compute_uv=False)[:, -1]
        if np.any(smallest <= RESOLVENT_TOL):
            bad = points[int(np.argmin(smallest))]
            raise ResolventError(f"I - λT* is singular at λ = {bad}", "theta_eval")
        solved = np.linalg.solve(resolvent, np.broadcast_to(defects.D_T, resolvent.shape))
        full = -T[None, :, :] + points[:, None, None] * (defects.D_T_star[None, :, :] @ solved)
        return defects.basis_star.conj().T[None, :, :] @ full @ defects.basis[None, :, :]

    @staticmethod
    def theta_eval(C: CharacteristicFunction, lam: complex) -> np.ndarray:
        return CharFnService.theta_eval_many(C, [lam])[0]

    @staticmethod
    def validate_model(C: CharacteristicFunction, policy: NumericPolicy = DEFAULT_POLICY) -> ModelValidation:
        """Innerness near the circle, det Θ_T at eigenvalues, pure contractivity inside"""
        if not C.contraction.strict_spectral:
            raise DomainError(
                f"spectral radius {C.contraction.spectral_radius:.12g} is not below 1", "validate_model"
            )
        if not C.is_square:
            raise DomainError("defect ranks differ, det Θ_T is undefined", "validate_model")
        radius = policy.innerness_radius
        ring = radius * np.exp(1j * TWO_PI * np.arange(INNERNESS_ANGLES) / INNERNESS_ANGLES)
        values = CharFnService.theta_eval_many(C, ring)
        identity = np.eye(values.shape[-1])
        gram = values.conj().transpose(0, 2, 1) @ values - identity
        innerness = float(np.max(np.linalg.norm(gram, ord=2, axis=(1, 2))))

        at_zero = CharFnService.theta_eval(C, 0.0)
        expected = -C.defects.basis_star.conj().T @ C.T @ C.defects.basis
        zero_residual = float(np.max(np.abs(at_zero - expected)))

        eigen_values = CharFnService.theta_eval_many(C, C.contraction.eigenvalues)
        dets = np.abs(np.linalg.det(eigen_values)).tolist()

        grid = disk_grid(policy.disk_radial // 2, policy.disk_angular // 2)
        grid = grid[np.abs(grid) <= INTERIOR_RADIUS]
        interior = float(np.max(np.linalg.svd(CharFnService.theta_eval_many(C, grid), compute_uv=False)[:, 0]))
        return ModelValidation(
            innerness_residual=innerness,
            innerness_radius=radius,
            theta_at_zero_residual=zero_residual,
            det_at_eigenvalues=dets,
            spectrum_consistent=all(value < DET_ZERO_TOL for value in dets),
            max_interior_norm=interior,
            purely_contractive=interior < 1.0,
        )

    @staticmethod
    def _grid_search(objective_many, extra: np.ndarray, policy: NumericPolicy,
                     grid: Optional[Tuple[np.ndarray, np.ndarray]] = None, refine: bool = True) -> Tuple[complex, float]:
        """Grid minimum polished by refine_minimum; grid = (points, values) skips the grid pass"""
        if grid is None:
            points = disk_grid(policy.disk_radial, policy.disk_angular, extra=extra)
            values = objective_many(points)
        else:
            points, values = grid
        best = int(np.argmin(values))
        best_z, best_value = complex(points[best]), float(values[best])
        # eigenvalues sit in the grid, so they compete as starts with the grid minima
        starts = smallest_candidates(points, values, policy.refine_candidates) if refine else []

        def objective(z: complex) -> float:
            return float(objective_many(np.array([z]))[0])

        for start in starts:
            if abs(start) >= 1.0:
                continue
            z, value = refine_minimum(objective, start, 2.0 / policy.disk_radial, xatol=policy.refine_xatol)
            if value < best_value:
                best_z, best_value = z, value
        return best_z, best_value

    @staticmethod
    def delta_n_op(C: Union[CharacteristicFunction, DiagonalInnerFunction], n: int,
                   policy: NumericPolicy = DEFAULT_POLICY) -> OperatorDecay:
        """δₙ(Θ) = inf over the disk of max{|λ|ⁿ, σ_min(Θ(λ))}"""
        if n < 1:
            raise DomainError("n must be a positive integer", "delta_n_op")
        if isinstance(C, DiagonalInnerFunction):
            # σ_min(diag θ_i) = min_i |θ_i|, and the infimum commutes with the minimum
            decays = [_decay(entry, n, policy) for entry in C.entries]
            best = min(decays, key=lambda record: record.log_delta_n)
            return OperatorDecay(
                n=n, delta_n=best.delta_n, log_delta_n=best.log_delta_n, argmin=best.argmin, method="diagonal"
            )
        return CharFnService.delta_n_op_many(C, [n], policy)[0]

    @staticmethod
    def delta_n_op_many(C: CharacteristicFunction, n_values: Sequence[int],
                        policy: NumericPolicy = DEFAULT_POLICY, refine: bool = True) -> List[OperatorDecay]:
        """δₙ(Θ_T) for several n, sharing one σ_min(Θ_T) grid.

        Without refinement the result is the grid minimum, eigenvalues included, which
        bounds δₙ from above.
        """
        if not C.is_square:
            raise DegenerateDefectError("δₙ(Θ) needs equal defect ranks", "delta_n_op")
        if min(n_values) < 1:
            raise DomainError("n must be a positive integer", "delta_n_op")
        points = disk_grid(policy.disk_radial, policy.disk_angular, extra=C.contraction.eigenvalues)
        log_sigma = _log_sigma_min(CharFnService.theta_eval_many(C, points))
        with np.errstate(divide="ignore"):
            log_radius = np.log(np.abs(points))
        decays = []
        for n in n_values:

            def objective_many(z: np.ndarray, n: int = n) -> np.ndarray:
                with np.errstate(divide="ignore"):
                    return np.maximum(n * np.log(np.abs(z)), _log_sigma_min(CharFnService.theta_eval_many(C, z)))

            grid = (points, np.maximum(n * log_radius, log_sigma))
            z, value = CharFnService._grid_search(objective_many, C.contraction.eigenvalues, policy, grid, refine)
            method = "disk" if refine else "grid"
            decays.append(OperatorDecay(n=n, delta_n=math.exp(value), log_delta_n=value, argmin=z, method=method))
        return decays

    @staticmethod
    def det_reduction(C: Union[CharacteristicFunction, DiagonalInnerFunction], n: int,
                      policy: NumericPolicy = DEFAULT_POLICY) -> DetReduction:
        """(δₙ(Θ), δₙ(Δ)) for Δ = |det Θ|^{1/N}"""
        if isinstance(C, DiagonalInnerFunction):
            theta = CharFnService.delta_n_op(C, n, policy)
            if C.size == 1:
                delta_det = theta.delta_n
            else:
                averaged = InnerFunction(singular=_averaged_measure(C))
                delta_det = _decay(averaged, n, policy).delta_n
            return DetReduction(
                n=n, delta_theta=theta.delta_n, delta_det=delta_det,
                holds=theta.delta_n <= delta_det + policy.tol,
            )
        if not C.is_square:
            raise DegenerateDefectError("det Θ needs equal defect ranks", "det_reduction")

        def theta_objective(z: np.ndarray) -> np.ndarray:
            with np.errstate(divide="ignore"):
                return np.maximum(n * np.log(np.abs(z)), _log_sigma_min(CharFnService.theta_eval_many(C, z)))

        def det_objective(z: np.ndarray) -> np.ndarray:
            with np.errstate(divide="ignore"):
                return np.maximum(n * np.log(np.abs(z)), _log_abs_det_root(CharFnService.theta_eval_many(C, z)))

        extra = C.contraction.eigenvalues
        z_theta, value_theta = CharFnService._grid_search(theta_objective, extra, policy)
        if C.defects.rank == 1:
            value_det = value_theta
        else:
            z_det, value_det = CharFnService._grid_search(det_objective, extra, policy)
            # σ_min <= |det|^{1/N} pointwise
            value_theta = min(value_theta, float(theta_objective(np.array([z_det]))[0]))
            value_det = min(value_det, float(det_objective(np.array([z_theta]))[0]))
        delta_theta, delta_det = math.exp(value_theta), math.exp(value_det)
        return DetReduction(n=n, delta_theta=delta_theta, delta_det=delta_det, holds=delta_theta <= delta_det + policy.tol)

    @staticmethod
    def _unitary_subspace(T: np.ndarray, tol: float) -> np.ndarray:
        d = T.shape[0]
        identity = np.eye(d)
        blocks = []
        power = identity.astype(complex)
        for _ in range(d):
            power = power @ T
            blocks.append(identity - power.conj().T @ power)
            blocks.append(identity - power @ power.conj().T)
        _, singular_values, vh = np.linalg.svd(np.vstack(blocks))
        rank = int(np.count_nonzero(singular_values > tol))
        return vh[rank:].conj().T

    @staticmethod
    def _defect_rank(T: np.ndarray, tol: float) -> int:
        if T.size == 0:
            return 0
        return int(np.count_nonzero(np.linalg.eigvalsh(np.eye(T.shape[0]) - T.conj().T @ T) > tol))

    @staticmethod
    def langer_split(T, n_values: Sequence[int] = (1, 2, 3), policy: NumericPolicy = DEFAULT_POLICY) -> LangerSplit:
        """Maximal reducing subspace where T is unitary, ∩_k ker(I - T*ᵏTᵏ) ∩ ker(I - TᵏT*ᵏ)"""
        contraction = T if isinstance(T, MatrixContraction) else CharFnService.contraction(T, policy)
        A = contraction.matrix
        d = A.shape[0]
        tol = policy.defect_tol * max(contraction.norm, 1.0)
        unitary = CharFnService._unitary_subspace(A, tol)
        cnu = null_space(unitary.conj().T) if unitary.shape[1] else np.eye(d, dtype=complex)

        W = np.hstack([unitary, cnu])
        blocked = W.conj().T @ A @ W
        k = unitary.shape[1]
        off_block = max(
            float(np.max(np.abs(blocked[:k, k:]), initial=0.0)),
            float(np.max(np.abs(blocked[k:, :k]), initial=0.0)),
        )
        T1, T2 = blocked[:k, :k], blocked[k:, k:]
        isometry = 0.0
        if k:
            identity = np.eye(k)
            isometry = max(
                float(np.linalg.norm(T1.conj().T @ T1 - identity, 2)),
                float(np.linalg.norm(T1 @ T1.conj().T - identity, 2)),
            )
        idempotent = True
        if T2.size:
            idempotent = CharFnService._unitary_subspace(T2, tol).shape[1] == 0

        spectrum_included = negpower_dominated = None
        if T2.size:
            eigenvalues = np.linalg.eigvals(T2)
            gaps = np.min(np.abs(eigenvalues[:, None] - contraction.eigenvalues[None, :]), axis=1)
            spectrum_included = bool(np.all(gaps <= SPECTRUM_TOL))
            if contraction.invertible:
                inverse, inverse_part = np.linalg.inv(A), np.linalg.inv(T2)
                negpower_dominated = all(
                    svdvals(np.linalg.matrix_power(inverse_part, n))[0]
                    <= svdvals(np.linalg.matrix_power(inverse, n))[0] * (1.0 + policy.tol)
                    for n in n_values
                )
        logger.debug("langer split: unitary dim %d, cnu dim %d", k, d - k)
        return LangerSplit(
            unitary_basis=unitary,
            cnu_basis=cnu,
            block_residual=off_block,
            isometry_residual=isometry,
            defect_rank=CharFnService._defect_rank(A, tol),
            cnu_defect_rank=CharFnService._defect_rank(T2, tol),
            idempotent=idempotent,
            spectrum_included=spectrum_included,
            negpower_dominated=negpower_dominated,
        )

    @staticmethod
    def opestimate_check(C: CharacteristicFunction, n: int, policy: NumericPolicy = DEFAULT_POLICY,
                         decay: Optional[OperatorDecay] = None) -> OperatorEstimate:
        """‖T⁻ⁿ‖ against ½(1/δₙ(Θ_T) - 1)"""
        contraction = C.contraction
        if not contraction.invertible:
            raise NotInvertibleError(
                f"σ_min(T) = {contraction.min_singular_value:.3g}, T is not invertible", "opestimate_check"
            )
        if not contraction.strict_spectral:
            raise DomainError("the estimate needs spectral radius below 1", "opestimate_check")
        if C.defects.rank == 0:
            raise DegenerateDefectError("T is unitary", "opestimate_check")
        norm = float(svdvals(np.linalg.matrix_power(np.linalg.inv(C.T), n))[0])
        decay = decay or CharFnService.delta_n_op(C, n, policy)
        lower = 0.5 * (1.0 / decay.delta_n - 1.0)
        return OperatorEstimate(
            n=n,
            norm_inverse_power=norm,
            delta_n=decay.delta_n,
            lower=lower,
            holds=norm >= lower - policy.tol * max(1.0, lower),
        )

    @staticmethod
    def random_contractions(seed: int, count: int, max_dimension: int = 5,
                            planted_unitary: bool = False) -> List[np.ndarray]:
        """Seeded strict contractions with σ_max in (0.3, 0.95), optionally ⊕ a unitary block"""
        rng = np.random.default_rng(seed)
        matrices = []
        for _ in range(count):
            d = int(rng.integers(1, max_dimension + 1))
            A = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            A *= rng.uniform(0.3, 0.95) / svdvals(A)[0]
            if planted_unitary:
                k = int(rng.integers(1, 3))
                U = unitary_group.rvs(k, random_state=rng) if k > 1 else np.array([[np.exp(1j * rng.uniform(0, TWO_PI))]])
                block = np.zeros((d + k, d + k), dtype=complex)
                block[:k, :k], block[k:, k:] = U, A
                W = unitary_group.rvs(d + k, random_state=rng)
                A = W @ block @ W.conj().T
            matrices.append(A)
        return matrices
