import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from models.measure_models import Arc, AtomicMeasure, CoverMeasure, measure_from_descriptor
from services.errors import DescriptorError, DomainError
from services.measure_service import MeasureService

atoms_strategy = st.lists(
    st.tuples(st.floats(0.0, 2.0 * math.pi, exclude_max=True), st.floats(0.05, 3.0)),
    min_size=1,
    max_size=5,
)


def test_atomic_mass_is_exact():
    measure = AtomicMeasure(atoms=[(0.0, 1.0), (math.pi, 2.0)])
    arc = Arc.centered(math.pi, 0.1)
    estimate = MeasureService.mass(measure, arc)
    assert estimate.value == 2.0
    assert estimate.error == 0.0


def test_cantor_mass_of_first_third(cantor_measure):
    estimate = MeasureService.mass(cantor_measure, Arc.from_start(0.0, 1.0 / 3.0))
    assert abs(estimate.value - 0.5) <= estimate.error + 1e-12


def test_cover_measure_resolves_to_natural_measure():
    measure = CoverMeasure(name="cantor", mass=2.0)
    assert MeasureService.total_mass(measure) == 2.0
    assert MeasureService.resolve(measure).kind == "selfsimilar"


def test_herglotz_at_origin_is_total_mass(cantor_measure):
    atom = AtomicMeasure(atoms=[(1.0, 0.7)])
    assert MeasureService.herglotz(atom, 0j) == pytest.approx(0.7, abs=1e-15)
    assert MeasureService.herglotz(cantor_measure, 0j) == pytest.approx(1.0, abs=1e-9)


def test_herglotz_rejects_boundary_points():
    with pytest.raises(DomainError):
        MeasureService.herglotz(AtomicMeasure(atoms=[(0.0, 1.0)]), 1.0 + 0j)


def test_poisson_rejects_radius_one():
    with pytest.raises(DomainError):
        MeasureService.poisson(AtomicMeasure(atoms=[(0.0, 1.0)]), 1.0, np.zeros(1))


@given(atoms=atoms_strategy, r=st.floats(0.0, 0.9))
def test_poisson_mean_value_recovers_mass(atoms, r):
    mean, mass = MeasureService.poisson_mean_value(AtomicMeasure(atoms=atoms), r)
    assert mean == pytest.approx(mass, rel=1e-8)


def test_cantor_poisson_mean_value(cantor_measure):
    mean, mass = MeasureService.poisson_mean_value(cantor_measure, 0.5)
    assert mean == pytest.approx(mass, abs=1e-8)


def test_single_atom_sup_ratio():
    ratio = MeasureService.sup_arc_ratio(AtomicMeasure(atoms=[(0.3, 2.0)]), 0.1)
    assert ratio.exact
    assert ratio.ratio == pytest.approx(20.0)
    assert bool(ratio.window.contains(np.array([0.3]))[0])


def test_sup_window_starts_on_the_atom():
    for angle in np.linspace(0.01, 6.2, 200):
        measure = AtomicMeasure(atoms=[(float(angle), 2.0)])
        window = MeasureService.sup_arc_ratio(measure, 0.1).window
        assert MeasureService.mass(measure, window).value == 2.0
        assert abs(math.remainder(window.center - float(angle) - 0.1 * math.pi, 2.0 * math.pi)) <= 1e-12


@given(atoms=atoms_strategy, eta=st.floats(0.01, 0.5))
def test_sup_ratio_bounded_by_mass(atoms, eta):
    measure = AtomicMeasure(atoms=atoms)
    ratio = MeasureService.sup_arc_ratio(measure, eta)
    assert ratio.ratio * eta <= measure.total_mass * (1.0 + 1e-12)
    assert ratio.ratio * eta >= max(measure.weights) * (1.0 - 1e-12)


def test_descriptor_errors_carry_location():
    with pytest.raises(DescriptorError) as excinfo:
        measure_from_descriptor({"type": "atomic", "atoms": [[0.0]]}, "inner.singular")
    assert "inner.singular.atoms[0]" in str(excinfo.value)
    with pytest.raises(DescriptorError):
        measure_from_descriptor({"atoms": []})
    with pytest.raises(DescriptorError):
        measure_from_descriptor({"type": "atomic", "atoms": [[0.0, -1.0]]})


def test_cantor_descriptor():
    measure = measure_from_descriptor({"type": "cantor", "mass": 2})
    assert measure.total_mass == 2.0
    assert len(measure.maps) == 2
