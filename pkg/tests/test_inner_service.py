import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from models.inner_models import InnerFunction, inner_from_descriptor
from models.measure_models import AtomicMeasure
from services.errors import (
    BoundaryEvaluationError,
    ConstantFunctionError,
    DescriptorError,
    DomainError,
    ZeroOnCircleError,
)
from services.inner_service import InnerService

RADII = [round(0.1 * k, 1) for k in range(1, 10)]


def atom_min_modulus(weight: float, r: float) -> float:
    return math.exp(-weight * (1.0 + r) / (1.0 - r))


@pytest.mark.parametrize("weight", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("r", RADII)
def test_atom_min_modulus_closed_form(weight, r):
    result = InnerService.min_modulus(InnerFunction.atom(weight), r)
    assert abs(result.value - atom_min_modulus(weight, r)) <= 1e-10
    assert abs(result.argmin_angle) < 1e-6 or abs(result.argmin_angle - 2.0 * math.pi) < 1e-6


@given(weight=st.floats(0.2, 3.0), r=st.floats(0.05, 0.95), angle=st.floats(0.0, 6.28))
def test_rotated_atom_min_modulus(weight, r, angle):
    result = InnerService.min_modulus(InnerFunction.atom(weight, angle), r)
    expected = -weight * (1.0 + r) / (1.0 - r)
    assert result.log_value == pytest.approx(expected, rel=1e-9, abs=1e-12)


def test_crossing_satisfies_defining_equation(atom_theta, policy):
    previous = 1.0
    for n in range(1, 11):
        record = InnerService.delta_n(atom_theta, n, policy)
        r = record.crossing_radius
        assert record.method == "crossing"
        assert abs(math.log(atom_min_modulus(1.0, r)) - n * math.log(r)) < 1e-7
        assert record.delta_n == pytest.approx(r**n)
        assert record.delta_n < previous
        previous = record.delta_n


def test_blaschke_decay_below_zero_modulus(half_zero, policy):
    for n in (1, 2, 5):
        record = InnerService.delta_n(half_zero, n, policy)
        assert record.method == "disk"
        assert 0.0 < record.delta_n < 0.5**n


def test_zero_at_origin_gives_zero_decay():
    record = InnerService.delta_n(InnerFunction.from_zeros([0.0, 0.3]), 3)
    assert record.delta_n == 0.0
    assert record.method == "origin"


def test_constant_function_rejected():
    with pytest.raises(ConstantFunctionError):
        InnerService.delta_n(InnerFunction(), 1)


def test_blaschke_evaluation_and_reflection(half_zero):
    z = 0.2 + 0.3j
    assert InnerService.evaluate(half_zero, z) == pytest.approx((0.5 - z) / (1.0 - 0.5 * z), abs=1e-15)
    outside = InnerService.evaluate(half_zero, 1.0 / np.conj(z))
    assert abs(InnerService.evaluate(half_zero, z)) * abs(outside) == pytest.approx(1.0, abs=1e-12)


def test_singular_reflection(atom_theta):
    z = 0.4 - 0.1j
    inside = InnerService.evaluate(atom_theta, z)
    outside = InnerService.evaluate(atom_theta, 1.0 / np.conj(z))
    assert outside == pytest.approx(1.0 / np.conj(inside), rel=1e-12)


def test_boundary_evaluation_rejected(atom_theta):
    with pytest.raises(BoundaryEvaluationError):
        InnerService.evaluate(atom_theta, 1j)


def test_zero_on_circle_rejected(half_zero):
    with pytest.raises(ZeroOnCircleError):
        InnerService.min_modulus(half_zero, 0.5)


def test_min_modulus_radius_domain(atom_theta):
    with pytest.raises(DomainError):
        InnerService.min_modulus(atom_theta, 1.0)


@pytest.mark.parametrize("eta", [0.5, 0.2, 0.1, 0.05])
def test_innerest_gap_on_atoms_and_cantor(eta, cantor_measure, cantor_atoms):
    for measure in (AtomicMeasure(atoms=[(0.0, 1.0)]), cantor_atoms, cantor_measure):
        record = InnerService.innerest_gap(measure, eta)
        assert record.holds, (measure.kind, eta, record.lhs, record.rhs)


def test_rational_taylor_of_single_zero(half_zero):
    result = InnerService.taylor(half_zero, 8)
    expected = [0.5] + [-0.75 * 0.5 ** (k - 1) for k in range(1, 9)]
    assert result.method == "rational"
    assert np.allclose(result.coefficients, expected, atol=1e-15)


def test_fft_taylor_of_atom(atom_theta):
    result = InnerService.taylor(atom_theta, 6)
    assert result.method == "fft"
    assert result.value_at_zero == pytest.approx(math.exp(-1.0), abs=1e-9)
    # θ(z) = exp(-(1+z)/(1-z)) has θ'(0) = -2/e
    assert result.coefficients[1] == pytest.approx(-2.0 * math.exp(-1.0), abs=1e-9)


def test_exterior_decay_matches_interior(atom_theta, policy):
    interior = InnerService.delta_n(atom_theta, 2, policy).delta_n
    exterior = InnerService.delta_n_exterior(atom_theta, 2, policy)
    assert exterior == pytest.approx(interior, rel=1e-6)


def test_inner_descriptor():
    theta = inner_from_descriptor({"blaschke": [[0.5, 0.0, 2]], "constant": [0.0, 1.0]})
    assert theta.degree == 2
    assert theta.constant == 1j
    with pytest.raises(DescriptorError) as excinfo:
        inner_from_descriptor({"blaschke": [[1.5, 0.0]]})
    assert "inner" in str(excinfo.value)
