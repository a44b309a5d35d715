from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from models.inner_models import InnerFunction

EPS = float(np.finfo(float).eps)


class ModelTruncation(BaseModel):
    """Compression of S_θ to span{q_0, ..., q_{rank-1}}, q_j = P_{K_θ} z^j.

    basis holds the coefficient vectors of all M projected monomials through degree D.
    gram[i, j] = <q_j, q_i> for i, j < M. The leading q_j are kept until the first one whose
    residual against the kept span falls below gram_threshold · <q_j, q_j>; the kept block
    factors as gram[:rank, :rank] = L Lᴴ and the orthonormal basis is Q L^{-H}.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    inner: InnerFunction
    M: int = Field(..., ge=1)
    D: int
    rank: int = Field(..., ge=1)
    coefficients: np.ndarray
    basis: np.ndarray
    gram: np.ndarray
    gram_extended: np.ndarray
    cholesky: np.ndarray
    shift_matrix: np.ndarray
    min_pivot: float
    discarded_residual: float
    gram_min_eigenvalue: float
    taylor_error_bound: float
    orthogonality_residue: float
    complete: bool = False

    @property
    def theta_at_zero(self) -> complex:
        return complex(self.coefficients[0])

    @property
    def roundoff_scale(self) -> float:
        # forward error of L^{-1} X L^{-H} relative to ‖X‖
        return EPS * self.M / self.min_pivot


class BoundReport(BaseModel):
    """Both sides of ½(1/δₙ - 1) <= ‖S_θ⁻ⁿ‖ <= A·log(2/δₙ)/δₙ²"""

    n: int = Field(..., ge=1)
    M: int
    rank: int
    delta_n: float
    norm_estimate: float
    norm_matrix: float
    norm_explicit: float
    agreement: float
    lower: float
    upper_shape: float
    fitted_constant: float
    stabilized: bool
    trace: List[Tuple[int, float]] = Field(default_factory=list)


class SarasonResult(BaseModel):
    """‖φ(S_θ)‖ through the Hankel matrix of the negative coefficients of conj(θ)φ"""

    norm: float
    K: int
    trace: List[Tuple[int, float]]
    sup_norm_phi: Optional[float] = None


class DefectSpectrum(BaseModel):
    """Singular values of I - AᴴA for the truncated shift A"""

    singular_values: List[float]
    ratio: float
    M: int
    rank: int
    discarded_residual: float
