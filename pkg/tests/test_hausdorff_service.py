import math

import numpy as np
import pytest

from models.circle_set_models import CantorSet, PointSet
from models.inner_models import InnerFunction
from models.measure_models import AtomicMeasure
from services.errors import CoverBudgetError, DomainError, EmptyMeasureError, PrefixExhaustedError, SupportError
from services.hausdorff_service import HausdorffService

STAGES = 40


@pytest.fixture(scope="module")
def cantor_gauge():
    return HausdorffService.besicovitch_build(CantorSet(), STAGES)


@pytest.fixture(scope="module")
def point_gauge():
    return HausdorffService.besicovitch_build(PointSet(), STAGES)


@pytest.mark.parametrize("gauge_name", ["cantor_gauge", "point_gauge"])
def test_breakpoints_and_gauge_bounds(gauge_name, request):
    h = request.getfixturevalue(gauge_name)
    t = h.breakpoints
    assert h.stages == STAGES
    for n in range(1, STAGES + 1):
        assert t[n] <= t[n - 1] / 4.0
        assert h.stage_covers[n - 1].total_length < 4.0**-n
        assert HausdorffService.breakpoint_value(h, n) <= 2.0**-n
        # continuity: the two pieces meeting at t_n agree there
        if n < STAGES:
            assert HausdorffService.h_eval(h, t[n] * (1.0 - 1e-12)) == pytest.approx(2.0**n * t[n], rel=1e-9)
        assert HausdorffService.h_eval(h, t[n] * (1.0 + 1e-12)) == pytest.approx(2.0**n * t[n], rel=1e-9)
        for s in np.geomspace(t[n], t[n - 1], 7)[1:]:
            assert HausdorffService.h_eval(h, s) / s >= 2.0 ** (n - 1) * (1.0 - 1e-12)


def test_gauge_is_nondecreasing(cantor_gauge):
    t = np.geomspace(cantor_gauge.last_breakpoint, 1.0, 2000)[1:]
    values = [HausdorffService.h_eval(cantor_gauge, s) for s in t]
    assert all(b >= a * (1.0 - 1e-14) for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("gauge_name,circle_set", [("cantor_gauge", CantorSet()), ("point_gauge", PointSet())])
def test_premeasure_bound(gauge_name, circle_set, request):
    h = request.getfixturevalue(gauge_name)
    for n in range(1, STAGES + 1):
        assert HausdorffService.premeasure_estimate(h, circle_set, n) <= 2.0**-n


def test_premeasure_rejects_foreign_set(cantor_gauge):
    with pytest.raises(DomainError):
        HausdorffService.premeasure_estimate(cantor_gauge, PointSet(), 1)


def test_h_eval_below_prefix(cantor_gauge):
    with pytest.raises(PrefixExhaustedError) as excinfo:
        HausdorffService.h_eval(cantor_gauge, cantor_gauge.last_breakpoint / 2.0)
    assert excinfo.value.stage_required == STAGES + 1
    with pytest.raises(DomainError):
        HausdorffService.h_eval(cantor_gauge, 0.0)


def test_h_eval_boundary_is_strict(cantor_gauge):
    last = cantor_gauge.last_breakpoint
    with pytest.raises(PrefixExhaustedError) as excinfo:
        HausdorffService.h_eval(cantor_gauge, last)
    assert excinfo.value.stage_required == STAGES + 1
    above = float(np.nextafter(last, 1.0))
    assert HausdorffService.h_eval(cantor_gauge, above) == pytest.approx(2.0**STAGES * last, rel=1e-12)
    assert HausdorffService.breakpoint_value(cantor_gauge, STAGES) == 2.0**STAGES * last


def test_build_preconditions():
    with pytest.raises(DomainError):
        HausdorffService.besicovitch_build(CantorSet(declared_measure_zero=False), 3)
    with pytest.raises(DomainError):
        HausdorffService.besicovitch_build(CantorSet(), 0)
    with pytest.raises(CoverBudgetError) as excinfo:
        HausdorffService.besicovitch_build(PointSet(max_generation=2), 5)
    assert excinfo.value.stage == 3


def test_epsilon_sequence(cantor_gauge):
    table = HausdorffService.epsilon_sequence(cantor_gauge, 12)
    assert len(table.rows) == 12
    for row in table.rows:
        assert 0.0 < row.epsilon < 1.0
        assert row.u == pytest.approx(1.0 / row.epsilon)
        assert row.identity_residual <= 1e-8
        assert row.t_star_next <= row.t_star
    assert table.threshold_constant == pytest.approx((math.pi + 1.0) ** 2)


def test_liminf_witness_on_cantor_atoms(cantor_gauge, cantor_atoms):
    table = HausdorffService.epsilon_sequence(cantor_gauge, 60)
    report = HausdorffService.liminf_witness(
        InnerFunction(singular=cantor_atoms), table, CantorSet(), cantor_gauge, horizon=60
    )
    assert report.horizon == 60
    assert report.witnesses
    assert all(record.is_witness == (record.n in report.witnesses) for record in report.records)


def test_liminf_witness_rejects_off_set_atoms(cantor_gauge):
    table = HausdorffService.epsilon_sequence(cantor_gauge, 3)
    # position 1/2 sits in the first removed third
    off_set = InnerFunction(singular=AtomicMeasure(atoms=[(math.pi, 1.0)]))
    with pytest.raises(SupportError):
        HausdorffService.liminf_witness(off_set, table, CantorSet(), cantor_gauge)
    with pytest.raises(EmptyMeasureError):
        HausdorffService.liminf_witness(InnerFunction(singular=AtomicMeasure()), table, CantorSet())


def test_quarter_position_is_in_the_cantor_set():
    # 1/4 = 0.0202..._3 survives every generation
    HausdorffService.check_support(AtomicMeasure(atoms=[(math.pi / 2.0, 1.0)]), CantorSet(), 12)
    with pytest.raises(SupportError):
        HausdorffService.check_support(AtomicMeasure(atoms=[(math.pi, 1.0)]), CantorSet(), 12)
