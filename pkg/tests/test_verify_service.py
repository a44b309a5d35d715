import pytest

from models.run_models import NumericPolicy
from services import verify_service
from services.errors import DomainError, ToolkitError
from services.verify_service import CHECKS, SUITES, VerifyService


def test_every_check_belongs_to_a_suite():
    assert len(CHECKS) == 12
    for suite, _ in CHECKS.values():
        assert suite in SUITES


def test_select():
    assert VerifyService.select(["all"]) == list(CHECKS)
    assert VerifyService.select(["inner"]) == [
        "01_closed_form_min_modulus", "02_crossing_equivalence", "03_innerest_gap"
    ]
    assert VerifyService.select(["08_sarason_norm"]) == ["08_sarason_norm"]
    with pytest.raises(ToolkitError):
        VerifyService.select(["plots"])


@pytest.mark.parametrize("name", ["01_closed_form_min_modulus", "08_sarason_norm", "12_langer_split"])
def test_fast_checks_pass(name):
    record = VerifyService.run_check(name, NumericPolicy())
    assert record.passed, record.values
    assert record.error is None
    assert record.runtime_seconds >= 0.0


def test_errors_become_failing_records(monkeypatch):
    def broken(policy):
        raise DomainError("no such thing", "broken_check")

    monkeypatch.setitem(verify_service.CHECKS, "99_broken", ("inner", broken))
    record = VerifyService.run_check("99_broken")
    assert not record.passed
    assert "[broken_check]" in record.error


def test_records_are_sorted_and_digests_depend_on_seed():
    first = VerifyService.run_suite(["08_sarason_norm", "01_closed_form_min_modulus"], NumericPolicy(seed=7), 2)
    assert [record.name for record in first] == ["01_closed_form_min_modulus", "08_sarason_norm"]
    other = VerifyService.run_check("08_sarason_norm", NumericPolicy(seed=8))
    assert other.inputs_digest != first[1].inputs_digest


@pytest.mark.slow
def test_full_battery_passes():
    records = VerifyService.run_suite(["all"], NumericPolicy(seed=7))
    failing = {record.name: record.values for record in records if not record.passed}
    assert not failing
    assert [record.name for record in records] == sorted(CHECKS)


def test_besicovitch_check_evaluates_both_sides_and_gates_runtime(monkeypatch):
    record = VerifyService.run_check("04_besicovitch_construction", NumericPolicy())
    assert record.passed, record.values
    assert record.values["worst_relative_gap"] <= 4.0 * verify_service.CONTINUITY_STEP
    monkeypatch.setattr(verify_service, "BUILD_TIME_LIMIT", 0.0)
    late = VerifyService.run_check("04_besicovitch_construction", NumericPolicy())
    assert not late.passed
    assert not late.values["within_time_budget"]


def test_negpower_check_passes_with_every_n_stabilized():
    record = VerifyService.run_check("06_negpower_bounds", NumericPolicy())
    assert record.passed, record.values
    assert record.values["unstabilized"] == []


def test_negpower_check_fails_without_a_schedule_to_compare():
    record = VerifyService.run_check("06_negpower_bounds", NumericPolicy(m_schedule=[16]))
    assert not record.passed
    assert {entry["n"] for entry in record.values["unstabilized"]} == set(range(1, 21))


def test_defect_check_uses_the_plain_ratio():
    record = VerifyService.run_check("07_defect_rank", NumericPolicy())
    assert record.passed, record.values
    assert set(record.values["atomic"]) == {"0.5", "1.0"}
    assert all(ratio < 1e-2 for ratio in record.values["atomic"].values())
