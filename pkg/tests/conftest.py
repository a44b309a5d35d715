import os

import pytest
from hypothesis import settings

from models.circle_set_models import CantorSet, PointSet
from models.inner_models import InnerFunction
from models.measure_models import AtomicMeasure, SelfSimilarMeasure
from models.run_models import NumericPolicy

settings.register_profile("toolkit", max_examples=25, deadline=None, derandomize=True)
settings.load_profile("toolkit")

SAMPLES_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "samples")


@pytest.fixture
def policy() -> NumericPolicy:
    return NumericPolicy()


@pytest.fixture
def samples_dir() -> str:
    return SAMPLES_DIR


@pytest.fixture
def atom_theta() -> InnerFunction:
    return InnerFunction.atom(1.0)


@pytest.fixture
def half_zero() -> InnerFunction:
    return InnerFunction.from_zeros([0.5])


@pytest.fixture
def cantor_measure() -> SelfSimilarMeasure:
    return SelfSimilarMeasure.cantor(mass=1.0)


@pytest.fixture
def cantor_atoms() -> AtomicMeasure:
    """Two atoms sitting on Cantor set points (positions 0 and 2/3)"""
    return AtomicMeasure(atoms=[(0.0, 0.5), (4.0 * 3.141592653589793 / 3.0, 0.5)])


@pytest.fixture
def cantor_set() -> CantorSet:
    return CantorSet()


@pytest.fixture
def point_set() -> PointSet:
    return PointSet()
