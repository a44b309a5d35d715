import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from pydantic import ValidationError

from models.charfn_models import DiagonalInnerFunction
from models.inner_models import InnerFunction
from services.charfn_service import CharFnService
from services.errors import DegenerateDefectError, DomainError, NotContractionError, NotInvertibleError

DIMENSION = 3


@pytest.fixture(scope="module")
def battery():
    return CharFnService.random_contractions(seed=7, count=12)


def test_scalar_characteristic_function_is_the_moebius_map():
    lam = 0.9 * np.exp(1j * np.linspace(0.0, 2.0 * math.pi, 13))
    for a in (0.5, 0.3 + 0.4j, -0.7j):
        C = CharFnService.characteristic_function([[a]])
        values = CharFnService.theta_eval_many(C, lam)[:, 0, 0]
        assert np.max(np.abs(values - (lam - a) / (1.0 - np.conj(a) * lam))) <= 1e-12


@given(
    entries=arrays(np.float64, (2, DIMENSION, DIMENSION), elements=st.floats(-1.0, 1.0)),
    scale=st.floats(0.1, 0.99),
)
def test_defect_identities(entries, scale):
    T = entries[0] + 1j * entries[1]
    norm = np.linalg.norm(T, 2)
    if norm < 1e-3:
        return
    defects = CharFnService.defects(T * (scale / norm))
    assert defects.square_residual <= 1e-10
    assert defects.square_residual_star <= 1e-10
    assert defects.intertwining_residual <= 1e-10
    assert defects.rank == defects.rank_star


def test_theta_at_zero_is_minus_t(battery):
    for T in battery:
        C = CharFnService.characteristic_function(T)
        expected = -C.defects.basis_star.conj().T @ T @ C.defects.basis
        assert np.max(np.abs(CharFnService.theta_eval(C, 0.0) - expected)) <= 1e-12


def test_model_validation_on_battery(battery):
    for T in battery:
        report = CharFnService.validate_model(CharFnService.characteristic_function(T))
        assert report.passed
        assert report.innerness_residual < 1e-2
        assert all(value < 1e-6 for value in report.det_at_eigenvalues)


def test_rejects_non_contraction():
    with pytest.raises(NotContractionError) as excinfo:
        CharFnService.contraction(np.diag([1.5, 0.2]))
    assert excinfo.value.norm == pytest.approx(1.5)
    assert "1.5" in str(excinfo.value)


def test_unitary_has_no_characteristic_values():
    C = CharFnService.characteristic_function(np.diag([1j, -1.0]))
    assert C.defects.rank == 0
    with pytest.raises(DegenerateDefectError):
        CharFnService.theta_eval(C, 0.5)


def test_scalar_decay_below_eigenvalue_modulus():
    C = CharFnService.characteristic_function([[0.5]])
    for n in (1, 3):
        decay = CharFnService.delta_n_op(C, n)
        assert 0.0 < decay.delta_n < 0.5**n


def test_diagonal_anchor_estimate():
    C = CharFnService.characteristic_function(np.diag([0.3, 0.5 + 0.1j]))
    estimate = CharFnService.opestimate_check(C, 5)
    assert estimate.norm_inverse_power == pytest.approx(0.3**-5, rel=1e-10)
    assert estimate.norm_inverse_power == pytest.approx(411.52, abs=0.01)
    assert estimate.delta_n <= 0.3**5
    assert estimate.lower >= 205.26
    assert estimate.holds


def test_estimate_on_battery(battery):
    for T in battery:
        C = CharFnService.characteristic_function(T)
        if not C.contraction.invertible:
            continue
        for decay in CharFnService.delta_n_op_many(C, [1, 4, 10]):
            assert decay.method == "disk"
            assert CharFnService.opestimate_check(C, decay.n, decay=decay).holds


def test_refinement_only_tightens_delta(battery):
    # the refined infimum sits below the grid minimum, so its lower bound is the stricter one
    C = CharFnService.characteristic_function(battery[0])
    grid = CharFnService.delta_n_op_many(C, [2, 6], refine=False)
    refined = CharFnService.delta_n_op_many(C, [2, 6])
    for coarse, fine in zip(grid, refined):
        assert fine.delta_n <= coarse.delta_n
        assert 0.5 * (1.0 / fine.delta_n - 1.0) >= 0.5 * (1.0 / coarse.delta_n - 1.0)


def test_estimate_needs_invertible_t():
    C = CharFnService.characteristic_function(np.array([[0.0, 0.5], [0.0, 0.0]]))
    with pytest.raises(NotInvertibleError):
        CharFnService.opestimate_check(C, 2)


def test_determinant_reduction_on_diagonals():
    first, second = InnerFunction.atom(1.0), InnerFunction.atom(0.5, math.pi)
    repeated = DiagonalInnerFunction(entries=[first, first])
    mixed = DiagonalInnerFunction(entries=[first, second, first])
    for n in (1, 5, 10):
        equal = CharFnService.det_reduction(repeated, n)
        assert abs(equal.delta_theta - equal.delta_det) <= 1e-8
        assert CharFnService.det_reduction(mixed, n).holds


def test_determinant_reduction_rejects_blaschke_entries():
    diagonal = DiagonalInnerFunction(entries=[InnerFunction.from_zeros([0.5]), InnerFunction.atom(1.0)])
    with pytest.raises(DomainError):
        CharFnService.det_reduction(diagonal, 2)


def test_diagonal_inner_function_rejects_constants():
    with pytest.raises(ValidationError):
        DiagonalInnerFunction(entries=[InnerFunction()])


def test_langer_split_of_rotation_plus_contraction():
    split = CharFnService.langer_split(np.diag([np.exp(1j * math.pi / 4.0), 0.5]))
    assert split.unitary_dimension == 1
    assert split.cnu_dimension == 1
    assert split.block_residual < 1e-10
    assert split.isometry_residual < 1e-8
    assert split.idempotent
    assert split.spectrum_included
    assert split.negpower_dominated


def test_langer_split_of_planted_battery():
    for T in CharFnService.random_contractions(seed=11, count=8, planted_unitary=True):
        split = CharFnService.langer_split(T)
        assert split.unitary_dimension >= 1
        assert split.block_residual < 1e-10
        assert split.isometry_residual < 1e-8
        assert split.cnu_defect_rank <= split.defect_rank
        assert split.idempotent


def test_random_contractions_are_reproducible():
    first = CharFnService.random_contractions(seed=3, count=5)
    second = CharFnService.random_contractions(seed=3, count=5)
    for a, b in zip(first, second):
        assert np.array_equal(a, b)
        assert 0.3 <= np.linalg.norm(a, 2) <= 0.95 + 1e-12
