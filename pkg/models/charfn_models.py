from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from models.inner_models import InnerFunction


class MatrixContraction(BaseModel):
    """A d×d matrix with ‖T‖ <= 1 and its spectral flags"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    matrix: np.ndarray
    norm: float
    min_singular_value: float
    spectral_radius: float
    eigenvalues: np.ndarray
    invertible: bool
    strict_spectral: bool

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


class DefectData(BaseModel):
    """D_T = (I - T*T)^½, D_{T*} = (I - TT*)^½ and orthonormal bases of their ranges"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    D_T: np.ndarray
    D_T_star: np.ndarray
    basis: np.ndarray
    basis_star: np.ndarray
    square_residual: float
    square_residual_star: float
    intertwining_residual: float

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def rank_star(self) -> int:
        return self.basis_star.shape[1]


class CharacteristicFunction(BaseModel):
    """Θ_T(λ) = -T + λ D_{T*}(I - λT*)⁻¹ D_T, compressed to the defect bases"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    contraction: MatrixContraction
    defects: DefectData

    @property
    def T(self) -> np.ndarray:
        return self.contraction.matrix

    @property
    def is_square(self) -> bool:
        return self.defects.rank == self.defects.rank_star


class DiagonalInnerFunction(BaseModel):
    """Θ = diag(θ_1, ..., θ_N) with scalar inner entries"""

    entries: List[InnerFunction] = Field(..., min_length=1)

    @field_validator("entries")
    @classmethod
    def _non_constant(cls, entries: List[InnerFunction]) -> List[InnerFunction]:
        if any(entry.is_constant for entry in entries):
            raise ValueError("diagonal entries must be non-constant inner functions")
        return entries

    @property
    def size(self) -> int:
        return len(self.entries)


class ModelValidation(BaseModel):
    innerness_residual: float
    innerness_radius: float
    theta_at_zero_residual: float
    det_at_eigenvalues: List[float]
    spectrum_consistent: bool
    max_interior_norm: float
    purely_contractive: bool

    @property
    def passed(self) -> bool:
        return self.spectrum_consistent and self.purely_contractive


class OperatorDecay(BaseModel):
    n: int = Field(..., ge=1)
    delta_n: float
    log_delta_n: float
    argmin: Optional[complex] = None
    method: str


class DetReduction(BaseModel):
    n: int
    delta_theta: float
    delta_det: float
    holds: bool


class LangerSplit(BaseModel):
    """H = H' ⊕ H'' with T|H' unitary and T|H'' completely non-unitary"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    unitary_basis: np.ndarray
    cnu_basis: np.ndarray
    block_residual: float
    isometry_residual: float
    defect_rank: int
    cnu_defect_rank: int
    idempotent: bool
    spectrum_included: Optional[bool] = None
    negpower_dominated: Optional[bool] = None

    @property
    def unitary_dimension(self) -> int:
        return self.unitary_basis.shape[1]

    @property
    def cnu_dimension(self) -> int:
        return self.cnu_basis.shape[1]


class OperatorEstimate(BaseModel):
    n: int
    norm_inverse_power: float
    delta_n: float
    lower: float
    holds: bool
