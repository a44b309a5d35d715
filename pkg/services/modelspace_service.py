"""Finite truncations of the compressed shift on K_θ = H² ⊖ θH²."""
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import hankel, solve_triangular, svdvals, toeplitz

from models.inner_models import InnerFunction, TaylorResult
from models.modelspace_models import BoundReport, DefectSpectrum, ModelTruncation, SarasonResult
from models.run_models import DEFAULT_POLICY, NumericPolicy
from services.errors import ConditioningError, DomainError, GramConditionError, NotInvertibleError
from services.inner_service import InnerService

logger = logging.getLogger(__name__)

# relative disagreement tolerated between the two inverse routes on complete models
AGREEMENT_TOL = 1e-8
SUP_NORM_SAMPLES = 4096
# s₂/s₁ of I - AᴴA: round-off on complete models, leak into the tail otherwise
DEFECT_EXACT_RATIO = 1e-10
DEFECT_TRUNCATED_RATIO = 1e-2


def _lower_toeplitz(c: np.ndarray, size: int) -> np.ndarray:
    """C[i, k] = c_{i-k}, the matrix of multiplication by θ on the first size monomials"""
    column = np.asarray(c[:size], dtype=complex)
    return toeplitz(column, np.zeros(size, dtype=complex))


def _orthonormal_compression(cholesky_factor: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """L^{-1} X L^{-H}: a Gram-basis sesquilinear form in the orthonormal basis"""
    left = solve_triangular(cholesky_factor, matrix, lower=True)
    return solve_triangular(cholesky_factor, left.conj().T, lower=True).conj().T


def model_size(theta: InnerFunction, M: int) -> int:
    # for N zeros the Gram matrix is singular beyond M = N
    return min(M, theta.degree) if theta.is_blaschke else M


def _gram(c: np.ndarray, size: int) -> np.ndarray:
    """<q_j, q_i> = δ_ij - Σ_{u<=min(i,j)} c_{|i-j|+u} conj(c_u).

    Each diagonal is a running sum, so the leading block does not depend on size.
    """
    c = np.asarray(c[:size], dtype=complex)
    gram = np.eye(size, dtype=complex)
    for d in range(size):
        partial = np.cumsum(c[d:] * np.conj(c[: size - d]))
        cols = np.arange(size - d)
        gram[cols + d, cols] -= partial
        if d:
            gram[cols, cols + d] -= np.conj(partial)
    return gram


def _leading_cholesky(gram: np.ndarray, threshold: float, limit: int) -> Tuple[np.ndarray, float, float]:
    """Cholesky of the longest leading block, at most limit columns, whose pivots stay above
    threshold · gram[j, j].

    Returns the factor, the smallest kept pivot and the relative residual of the first
    column left out, which is the truncation error of the kept span.
    """
    size = gram.shape[0]
    L = np.zeros((size, size), dtype=complex)
    min_pivot = math.inf
    for j in range(size):
        x = solve_triangular(L[:j, :j], gram[:j, j], lower=True) if j else np.zeros(0, dtype=complex)
        diagonal = float(gram[j, j].real)
        pivot = diagonal - float(np.vdot(x, x).real)
        if j == limit or diagonal <= 0.0 or pivot <= threshold * diagonal:
            residual = max(pivot, 0.0) / diagonal if diagonal > 0.0 else 0.0
            return L[:j, :j], min_pivot, residual
        L[j, :j] = np.conj(x)
        L[j, j] = math.sqrt(pivot)
        min_pivot = min(min_pivot, pivot)
    return L, min_pivot, 0.0


def _inverse_orbit(c: np.ndarray, steps: int) -> List[np.ndarray]:
    """b_k with S_θ^{-k} q_0 = z^{-k}(1 + θ b_k), k = 0..steps.

    S_θ⁻¹f = (f - (f(0)/θ(0))θ)/z, and f(0) is the z^k coefficient of 1 + θ b_k.
    """
    c0 = complex(c[0])
    b = np.array([-np.conj(c0)], dtype=complex)
    orbit = [b.copy()]
    for m in range(steps):
        value = float(m == 0) + np.sum(c[m - np.arange(b.size)] * b)
        if b.size < m + 1:
            b = np.pad(b, (0, m + 1 - b.size))
        b[m] -= value / c0
        orbit.append(b.copy())
    return orbit


def _pushed_gram(c: np.ndarray, rank: int, n: int, orbit: List[np.ndarray]) -> np.ndarray:
    """H[i, j] = <S_θ⁻ⁿ q_j, S_θ⁻ⁿ q_i> for i, j < rank.

    zⁿ S_θ⁻ⁿ q_j = P_j + θR_j with P_j = z^j; for j >= n this is zⁿ q_{j-n}, otherwise z^j S_θ^{-(n-j)} q_0.
    """
    size = max(rank, n) + 1
    P = np.zeros((rank, size), dtype=complex)
    R = np.zeros((rank, size), dtype=complex)
    P[np.arange(rank), np.arange(rank)] = 1.0
    for j in range(rank):
        if j >= n:
            R[j, n : j + 1] = -np.conj(c[j - n :: -1][: j - n + 1])
        else:
            b = orbit[n - j]
            R[j, j : j + b.size] = b
    theta_R = R @ _lower_toeplitz(c, size).T
    # <θR_i, θR_j> = <R_i, R_j>; cross terms only meet P inside the first size coefficients
    W = P @ P.conj().T + R @ R.conj().T + P @ theta_R.conj().T + theta_R @ P.conj().T
    return W.conj()


class ModelSpaceService:
    """Truncated compressed shift, negative powers, Sarason norms and defects"""

    @staticmethod
    def coefficient_degree(M: int, n: int = 1, policy: NumericPolicy = DEFAULT_POLICY) -> int:
        return M + max(policy.guard_factor * M, n + 1)

    @staticmethod
    def project_monomial(theta: InnerFunction, j: int, D: int, policy: NumericPolicy = DEFAULT_POLICY,
                         coefficients: Optional[np.ndarray] = None) -> np.ndarray:
        """Coefficients of P_{K_θ} z^j = z^j - θ · Σ_{m<=j} conj(c_m) z^{j-m} through degree D"""
        if not 0 <= j <= D:
            raise DomainError(f"monomial degree {j} outside 0..{D}", "project_monomial")
        c = coefficients if coefficients is not None else InnerService.taylor(theta, D, policy).coefficients
        q = -np.convolve(c[: D + 1], np.conj(c[j::-1]))[: D + 1]
        q[j] += 1.0
        return q

    @staticmethod
    def orthogonality_residue(basis: np.ndarray, c: np.ndarray, depth: int) -> float:
        """max |<q_j, θ z^k>| over the basis rows and k <= depth, from coefficients through degree D"""
        if depth < 0:
            return 0.0
        D = basis.shape[1] - 1
        shifted = toeplitz(np.asarray(c[: D + 1], dtype=complex), np.zeros(depth + 1, dtype=complex))
        return float(np.max(np.abs(basis @ np.conj(shifted))))

    @staticmethod
    def build_truncation(theta: InnerFunction, M: int, D: Optional[int] = None,
                         policy: NumericPolicy = DEFAULT_POLICY, taylor: Optional[TaylorResult] = None) -> ModelTruncation:
        """Gram matrix, rank-revealing Cholesky and the compressed shift on the kept span.

        A precomputed taylor fixes D to its degree, so several sizes can share one expansion.
        """
        if M < 1:
            raise DomainError("M must be at least 1", "build_truncation")
        if theta.is_constant:
            raise DomainError("K_θ is trivial for a constant θ", "build_truncation")
        if taylor is not None:
            D = taylor.degree
        elif D is None:
            D = ModelSpaceService.coefficient_degree(M, policy=policy)
        if D < M + 1:
            raise DomainError(f"coefficient degree D = {D} must exceed M = {M}", "build_truncation")
        taylor = taylor or InnerService.taylor(theta, D, policy)
        c = taylor.coefficients

        gram_extended = _gram(c, M + 1)
        gram = gram_extended[:M, :M]
        L, min_pivot, discarded = _leading_cholesky(gram_extended, policy.gram_threshold, M)
        rank = L.shape[0]
        if rank == 0:
            raise GramConditionError(
                "P_{K_θ}1 vanishes to working precision; θ(0) is unimodular",
                min_eigenvalue=float(gram[0, 0].real),
            )
        # S_θ q_j = q_{j+1}, so <S_θ q_j, q_i> = gram_extended[i, j + 1]
        shift = _orthonormal_compression(L, gram_extended[:rank, 1 : rank + 1])

        basis = np.array([ModelSpaceService.project_monomial(theta, j, D, policy, c) for j in range(M)])
        residue = ModelSpaceService.orthogonality_residue(basis, c, D - M)
        complete = theta.is_blaschke and M == theta.degree and rank == M
        smallest = float(np.linalg.eigvalsh(gram[:rank, :rank])[0])
        if rank < M:
            logger.debug("kept %d of %d projected monomials, first residual left out %.3g", rank, M, discarded)
        logger.debug("truncation M=%d D=%d min pivot %.3g residue %.3g", M, D, min_pivot, residue)
        return ModelTruncation(
            inner=theta,
            M=M,
            D=D,
            rank=rank,
            coefficients=c,
            basis=basis,
            gram=gram,
            gram_extended=gram_extended,
            cholesky=L,
            shift_matrix=shift,
            min_pivot=min_pivot,
            discarded_residual=discarded,
            gram_min_eigenvalue=smallest,
            taylor_error_bound=taylor.error_bound,
            orthogonality_residue=residue,
            complete=complete,
        )

    @staticmethod
    def _negpower_norms(trunc: ModelTruncation, n: int,
                        orbit: Optional[List[np.ndarray]] = None) -> Tuple[float, float]:
        """‖(A⁻¹)ⁿ‖ for the truncated shift A, and ‖S_θ⁻ⁿ‖ restricted to the kept span"""
        if abs(trunc.theta_at_zero) == 0.0:
            raise NotInvertibleError("θ(0) = 0, so S_θ is not invertible", "negpower_norm")
        c = trunc.coefficients
        if c.size < max(trunc.rank, n) + 1:
            raise DomainError(f"coefficient degree {c.size - 1} too small for n = {n}", "negpower_norm")
        try:
            inverse = np.linalg.inv(trunc.shift_matrix)
        except np.linalg.LinAlgError:
            raise NotInvertibleError("the truncated shift matrix is singular", "negpower_norm")
        by_matrix = float(svdvals(np.linalg.matrix_power(inverse, n))[0])
        if orbit is None or len(orbit) <= n:
            orbit = _inverse_orbit(c, n)
        pushed = _orthonormal_compression(trunc.cholesky, _pushed_gram(c, trunc.rank, n, orbit))
        largest = float(np.linalg.eigvalsh(0.5 * (pushed + pushed.conj().T))[-1])
        return by_matrix, math.sqrt(max(largest, 0.0))

    @staticmethod
    def negpower_table(theta: InnerFunction, n_values: Sequence[int], schedule: Optional[Sequence[int]] = None,
                       policy: NumericPolicy = DEFAULT_POLICY) -> List[BoundReport]:
        """BoundReport per n; the truncations share one Taylor expansion, so their spans are nested"""
        if not n_values or min(n_values) < 1:
            raise DomainError("n values must be positive", "negpower_norm")
        if theta.is_constant:
            raise DomainError("S_θ acts on a trivial space for constant θ", "negpower_norm")
        if np.any(theta.zeros == 0):
            raise NotInvertibleError("θ(0) = 0, so S_θ is not invertible", "negpower_norm")
        schedule = sorted({model_size(theta, M) for M in (schedule or policy.m_schedule)})
        top = max(n_values)
        taylor = InnerService.taylor(theta, ModelSpaceService.coefficient_degree(schedule[-1], top, policy), policy)
        truncations = [ModelSpaceService.build_truncation(theta, M, policy=policy, taylor=taylor) for M in schedule]
        orbit = _inverse_orbit(taylor.coefficients, top)
        reports = []
        for n in n_values:
            decay = InnerService.delta_n(theta, n, policy)
            trace, matrices = [], []
            for trunc in truncations:
                by_matrix, restricted = ModelSpaceService._negpower_norms(trunc, n, orbit)
                agreement = abs(by_matrix - restricted) / max(by_matrix, restricted)
                if trunc.complete and agreement > AGREEMENT_TOL:
                    raise ConditioningError(
                        f"inverse routes disagree on the complete model (relative {agreement:.3g})",
                        diagnostics={"M": trunc.M, "rank": trunc.rank, "min_pivot": trunc.min_pivot},
                        operation="negpower_norm",
                    )
                trace.append((trunc.M, restricted))
                matrices.append(by_matrix)
            # nested spans make the trace nondecreasing up to round-off
            norm = max(value for _, value in trace)
            explicit = trace[-1][1]
            if truncations[-1].complete:
                stabilized = True
            elif len(trace) > 1:
                stabilized = abs(trace[-1][1] - trace[-2][1]) <= policy.stabilization * trace[-1][1]
            else:
                stabilized = False
            delta = decay.delta_n
            upper_shape = math.log(2.0 / delta) / delta**2
            reports.append(
                BoundReport(
                    n=n,
                    M=truncations[-1].M,
                    rank=truncations[-1].rank,
                    delta_n=delta,
                    norm_estimate=norm,
                    norm_matrix=matrices[-1],
                    norm_explicit=explicit,
                    agreement=abs(matrices[-1] - explicit) / max(matrices[-1], explicit),
                    lower=0.5 * (1.0 / delta - 1.0),
                    upper_shape=upper_shape,
                    fitted_constant=norm / upper_shape,
                    stabilized=stabilized,
                    trace=trace,
                )
            )
        return reports

    @staticmethod
    def negpower_norm(theta: InnerFunction, n: int, schedule: Optional[Sequence[int]] = None,
                      policy: NumericPolicy = DEFAULT_POLICY) -> BoundReport:
        """‖S_θ⁻ⁿ‖ estimated on growing truncations, with the δₙ envelope attached"""
        return ModelSpaceService.negpower_table(theta, [n], schedule, policy)[0]

    @staticmethod
    def _phi_coefficients(theta: InnerFunction, phi: Union[Sequence[complex], InnerFunction, str],
                          degree: int, policy: NumericPolicy) -> np.ndarray:
        if isinstance(phi, str):
            if phi != "theta":
                raise DomainError(f"unknown symbol {phi!r}", "sarason_norm")
            phi = theta
        if isinstance(phi, InnerFunction):
            return InnerService.taylor(phi, degree, policy).coefficients
        coefficients = np.asarray(phi, dtype=complex)
        if coefficients.ndim != 1 or coefficients.size == 0:
            raise DomainError("φ must be a nonempty coefficient list", "sarason_norm")
        return coefficients

    @staticmethod
    def sarason_norm(theta: InnerFunction, phi: Union[Sequence[complex], InnerFunction, str],
                     K: Optional[int] = None, policy: NumericPolicy = DEFAULT_POLICY) -> SarasonResult:
        """‖φ(S_θ)‖ = dist(conj(θ)φ, H^∞), the norm of the Hankel matrix of its negative coefficients"""
        if theta.is_constant:
            raise DomainError("S_θ acts on a trivial space for constant θ", "sarason_norm")
        K = K or policy.sarason_k
        symbol_degree = 2 * K if isinstance(phi, (InnerFunction, str)) else 0
        phi_c = ModelSpaceService._phi_coefficients(theta, phi, symbol_degree, policy)
        p = phi_c.size - 1
        c = InnerService.taylor(theta, 2 * K + p + 1, policy).coefficients
        # ψ̂(-k) = Σ_l conj(c_l) φ_{l-k} for ψ = conj(θ)φ
        negative = np.conj(np.convolve(c, np.conj(phi_c)[::-1]))[p + 1 : p + 2 * K]
        sizes = sorted({max(1, K // 8), max(1, K // 4), max(1, K // 2), K})
        trace = []
        for size in sizes:
            gamma = hankel(negative[:size], negative[size - 1 : 2 * size - 1])
            trace.append((size, float(svdvals(gamma)[0])))
        sup_norm = None
        if not isinstance(phi, (InnerFunction, str)):
            samples = np.fft.fft(phi_c, n=max(SUP_NORM_SAMPLES, 4 * phi_c.size))
            sup_norm = float(np.max(np.abs(samples)))
        return SarasonResult(norm=trace[-1][1], K=K, trace=trace, sup_norm_phi=sup_norm)

    @staticmethod
    def functional_calculus_norm(trunc: ModelTruncation, phi: Sequence[complex]) -> float:
        """‖φ(A)‖ for the truncated shift A, by Horner's scheme"""
        A = trunc.shift_matrix
        result = np.zeros_like(A)
        for coefficient in np.asarray(phi, dtype=complex)[::-1]:
            result = result @ A + coefficient * np.eye(A.shape[0])
        return float(svdvals(result)[0])

    @staticmethod
    def defect_rank_check(trunc: ModelTruncation) -> DefectSpectrum:
        """Singular values of I - AᴴA; beyond the defect of S_θ only the leak of A's span into the tail remains"""
        A = trunc.shift_matrix
        values = svdvals(np.eye(trunc.rank) - A.conj().T @ A)
        ratio = float(values[1] / values[0]) if values.size > 1 and values[0] > 0.0 else 0.0
        return DefectSpectrum(
            singular_values=values.tolist(),
            ratio=ratio,
            M=trunc.M,
            rank=trunc.rank,
            discarded_residual=trunc.discarded_residual,
        )

    @staticmethod
    def export_matrices(trunc: ModelTruncation) -> Dict[str, np.ndarray]:
        return {"shift": trunc.shift_matrix, "gram": trunc.gram, "basis": trunc.basis}
