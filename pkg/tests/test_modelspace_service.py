import numpy as np
import pytest

from models.inner_models import InnerFunction
from models.run_models import NumericPolicy
from services.errors import DomainError, NotInvertibleError
from services.inner_service import InnerService
from services.modelspace_service import DEFECT_EXACT_RATIO, DEFECT_TRUNCATED_RATIO, ModelSpaceService

BLASCHKE_ZEROS = [(0.5,), (0.5, -0.5), (0.3, 0.6j), (0.4, -0.2 + 0.5j, 0.7, -0.6)]


@pytest.fixture(scope="module")
def atom_table():
    return ModelSpaceService.negpower_table(InnerFunction.atom(0.05), list(range(1, 9)))


def test_single_zero_negative_powers_are_exact():
    theta = InnerFunction.from_zeros([0.5])
    for report in ModelSpaceService.negpower_table(theta, list(range(1, 21)), [16]):
        assert report.M == 1
        assert report.stabilized
        assert report.norm_estimate == pytest.approx(2.0**report.n, rel=1e-8)


@pytest.mark.parametrize("zeros", BLASCHKE_ZEROS)
def test_blaschke_lower_bound(zeros):
    theta = InnerFunction.from_zeros(zeros)
    for report in ModelSpaceService.negpower_table(theta, list(range(1, 21)), [len(zeros)]):
        assert report.norm_estimate >= report.lower - 1e-6
        assert report.agreement <= 1e-8
        assert np.isfinite(report.fitted_constant)


def test_complete_model_shift_spectrum_is_the_zero_set():
    zeros = (0.4, -0.2 + 0.5j, 0.7)
    trunc = ModelSpaceService.build_truncation(InnerFunction.from_zeros(zeros), 3)
    assert trunc.complete
    eigenvalues = np.sort_complex(np.linalg.eigvals(trunc.shift_matrix))
    assert np.allclose(eigenvalues, np.sort_complex(np.array(zeros)), atol=1e-10)
    assert np.linalg.norm(trunc.shift_matrix, 2) <= 1.0 + 1e-12


def test_atom_truncations_grow_monotonically(atom_table):
    assert any(report.stabilized for report in atom_table)
    for report in atom_table:
        norms = [norm for _, norm in report.trace]
        assert all(b >= a * (1.0 - 1e-6) for a, b in zip(norms, norms[1:]))
        if report.stabilized:
            assert report.norm_estimate >= report.lower - 1e-6


@pytest.mark.parametrize("M", [4, 8, 16, 32, 64])
def test_small_atom_builds_at_every_size(M):
    trunc = ModelSpaceService.build_truncation(InnerFunction.atom(0.05), M)
    assert 1 <= trunc.rank <= M
    assert trunc.min_pivot > 0.0
    assert trunc.cholesky.shape == (trunc.rank, trunc.rank)
    assert trunc.shift_matrix.shape == (trunc.rank, trunc.rank)


def test_kept_spans_are_nested():
    theta = InnerFunction.atom(0.5)
    taylor = InnerService.taylor(theta, ModelSpaceService.coefficient_degree(64))
    truncations = [ModelSpaceService.build_truncation(theta, M, taylor=taylor) for M in (8, 16, 32, 64)]
    ranks = [trunc.rank for trunc in truncations]
    assert ranks == sorted(ranks)
    for small, large in zip(truncations, truncations[1:]):
        r = small.rank
        assert np.allclose(large.cholesky[:r, :r], small.cholesky, rtol=0.0, atol=1e-14)


def test_small_atom_negative_power_estimate():
    theta = InnerFunction.atom(0.05)
    report = ModelSpaceService.negpower_norm(theta, 5, [16, 32, 64])
    norms = [norm for _, norm in report.trace]
    assert [M for M, _ in report.trace] == [16, 32, 64]
    assert all(b >= a * (1.0 - 1e-6) for a, b in zip(norms, norms[1:]))
    assert report.stabilized
    assert report.norm_estimate >= report.lower - 1e-6


def test_atom_truncation_records_what_it_leaves_out():
    policy = NumericPolicy()
    trunc = ModelSpaceService.build_truncation(InnerFunction.atom(1.0), 16)
    assert not trunc.complete
    assert 1 <= trunc.rank <= 16
    assert trunc.min_pivot > 0.0
    assert trunc.gram_min_eigenvalue > 0.0
    if trunc.rank < 16:
        assert trunc.discarded_residual <= policy.gram_threshold
    assert np.isfinite(trunc.orthogonality_residue)


def test_blaschke_orthogonality_residue_is_small():
    trunc = ModelSpaceService.build_truncation(InnerFunction.from_zeros([0.4, -0.2 + 0.5j, 0.7]), 3, D=120)
    assert trunc.complete
    assert trunc.orthogonality_residue < 1e-10


def test_defect_has_rank_one():
    exact = ModelSpaceService.build_truncation(InnerFunction.from_zeros([0.3, 0.6j]), 2)
    assert ModelSpaceService.defect_rank_check(exact).ratio < DEFECT_EXACT_RATIO
    for weight in (0.5, 1.0):
        atomic = ModelSpaceService.defect_rank_check(
            ModelSpaceService.build_truncation(InnerFunction.atom(weight), 64)
        )
        assert atomic.M == 64
        assert atomic.rank == len(atomic.singular_values)
        assert atomic.ratio < DEFECT_TRUNCATED_RATIO


def test_sarason_norms_for_single_zero():
    theta = InnerFunction.from_zeros([0.5])
    assert ModelSpaceService.sarason_norm(theta, "theta", 256).norm < 1e-8
    assert abs(ModelSpaceService.sarason_norm(theta, [1.0], 256).norm - 1.0) <= 1e-10
    of_z = ModelSpaceService.sarason_norm(theta, [0.0, 1.0], 256)
    assert abs(of_z.norm - 0.5) <= 1e-6
    assert of_z.sup_norm_phi == pytest.approx(1.0)


def test_sarason_matches_functional_calculus():
    theta = InnerFunction.from_zeros([0.4, -0.2 + 0.5j, 0.7])
    trunc = ModelSpaceService.build_truncation(theta, 3)
    phi = [0.3, -0.5, 0.2j]
    hankel_norm = ModelSpaceService.sarason_norm(theta, phi, 64).norm
    assert hankel_norm == pytest.approx(ModelSpaceService.functional_calculus_norm(trunc, phi), rel=1e-8)


def test_truncation_preconditions():
    with pytest.raises(DomainError):
        ModelSpaceService.build_truncation(InnerFunction.atom(1.0), 0)
    with pytest.raises(DomainError):
        ModelSpaceService.build_truncation(InnerFunction(), 4)
    with pytest.raises(DomainError):
        ModelSpaceService.build_truncation(InnerFunction.atom(1.0), 8, D=8)


def test_zero_at_origin_is_not_invertible():
    with pytest.raises(NotInvertibleError):
        ModelSpaceService.negpower_norm(InnerFunction.from_zeros([0.0, 0.5]), 2)


def test_export_matrices():
    trunc = ModelSpaceService.build_truncation(InnerFunction.atom(1.0), 8)
    matrices = ModelSpaceService.export_matrices(trunc)
    assert matrices["shift"].shape == (trunc.rank, trunc.rank)
    assert matrices["gram"].shape == (8, 8)
    assert matrices["basis"].shape == (8, trunc.D + 1)
    assert np.allclose(matrices["gram"], matrices["gram"].conj().T)
