import json
import os

import numpy as np
import pytest

from models.run_models import CheckRecord, NumericPolicy, Report, RunConfig
from services.errors import DescriptorError, NotContractionError, ToolkitError
from services.run_service import RunService
from utils.io_utils import matrix_to_nested

ATOM = {"singular": {"type": "atomic", "atoms": [[0.0, 1.0]]}}
HALF_ZERO = {"blaschke": [[0.5, 0.0]]}
SCHEMA_PATH = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "schemas", "report.schema.json")


def test_deltan_table():
    report, tables = RunService.run(RunConfig(command="deltan", inner=ATOM, n_values=list(range(1, 6))))
    frame = tables["deltan"]
    assert list(frame["n"]) == [1, 2, 3, 4, 5]
    assert (np.diff(frame["delta_n"]) < 0).all()
    assert {"crossing_radius", "bracket_width"} <= set(frame.columns)
    assert report.passed
    assert report.seed == 7


def test_eval_inside_and_outside():
    report, tables = RunService.run(RunConfig(command="eval", inner=HALF_ZERO, points=[0.2j, 0.5, 3.0]))
    frame = tables["eval"]
    assert frame["modulus"][1] == pytest.approx(0.0, abs=1e-15)
    assert frame["modulus"][2] > 1.0
    assert report.passed


def test_missing_descriptor():
    with pytest.raises(DescriptorError):
        RunService.run(RunConfig(command="mtheta"))


def test_hausdorff_point_set():
    config = RunConfig(command="hausdorff", set_name="point", policy=NumericPolicy(stages=12))
    report, tables = RunService.run(config)
    assert len(tables["hausdorff"]) == 12
    assert report.passed


def test_modelspace_actions():
    policy = NumericPolicy(m_schedule=[16, 32])
    report, tables = RunService.run(
        RunConfig(command="modelspace", action="negpowers", inner=HALF_ZERO, n_values=[1, 2, 3], policy=policy)
    )
    assert report.passed
    assert tables["negpowers"]["norm"].tolist() == pytest.approx([2.0, 4.0, 8.0], rel=1e-8)

    report, tables = RunService.run(RunConfig(command="modelspace", action="export", inner=ATOM, policy=policy))
    assert report.passed
    exported = next(record for record in report.records if record.name == "shift_contraction")
    rank = exported.values["rank"]
    assert 1 <= rank <= 16
    assert len(tables["shift"]) == rank * rank
    assert len(tables["gram"]) == 16 * 16

    report, tables = RunService.run(RunConfig(command="modelspace", action="defect", inner=ATOM, policy=policy))
    assert report.passed, [record.values for record in report.failures]
    assert set(tables["defect"]["M"]) == {16, 32}

    with pytest.raises(DescriptorError):
        RunService.run(RunConfig(command="modelspace", action="plot", inner=ATOM))


def test_sarason_default_symbol_is_theta():
    report, tables = RunService.run(RunConfig(command="sarason", inner=HALF_ZERO, policy=NumericPolicy(sarason_k=64)))
    assert tables["sarason"]["norm"].iloc[-1] < 1e-8
    assert report.passed


def test_charfn_on_diagonal_anchor():
    matrix = matrix_to_nested(np.diag([0.3, 0.5 + 0.1j]))
    report, tables = RunService.run(RunConfig(command="charfn", matrix=matrix, n_values=[1, 5], format="json"))
    assert report.passed, [record.name for record in report.failures]
    assert {"defects", "model", "delta", "bounds", "langer"} <= set(tables)
    bounds = tables["bounds"].set_index("n")
    assert bounds.loc[5, "norm_inverse_power"] == pytest.approx(411.52, abs=0.01)


def test_charfn_explicit_check_must_apply():
    matrix = matrix_to_nested(np.diag([np.exp(0.25j * np.pi), 0.5]))
    report, _ = RunService.run(RunConfig(command="charfn", matrix=matrix, checks=["all"], n_values=[1]))
    skipped = [record for record in report.records if "skipped" in record.values]
    assert {record.name for record in skipped} >= {"model", "bounds"}
    with pytest.raises(ToolkitError):
        RunService.run(RunConfig(command="charfn", matrix=matrix, checks=["model"]))


def test_charfn_rejects_non_contraction():
    with pytest.raises(NotContractionError):
        RunService.run(RunConfig(command="charfn", matrix=matrix_to_nested(np.diag([1.5, 0.2]))))


def test_replay_reproduces_report():
    report, _ = RunService.run(RunConfig(command="deltan", inner=ATOM, n_values=[1, 2, 3]))
    written = Report.model_validate_json(report.model_dump_json())
    _, differences = RunService.replay(written)
    assert differences == []


def test_failing_record_sets_exit_code():
    record = CheckRecord(name="x", inputs_digest="0", inequality="a <= b", passed=False)
    report = Report(config=RunConfig(command="verify"), seed=7, digest="d", records=[record])
    assert not report.passed
    assert RunService.exit_code(report) == 1


def test_records_sorted_by_name():
    records = [
        CheckRecord(name=name, inputs_digest="0", inequality="", passed=True) for name in ("b", "a", "c")
    ]
    report = Report(config=RunConfig(command="verify"), seed=7, digest="d", records=records)
    assert [record.name for record in report.records] == ["a", "b", "c"]


def test_config_digest_ignores_output_options():
    base = RunConfig(command="deltan", inner=ATOM)
    assert base.digest() == RunConfig(command="deltan", inner=ATOM, out="x.csv", format="json").digest()
    assert base.digest() != RunConfig(command="deltan", inner=ATOM, policy=NumericPolicy(seed=8)).digest()


def test_policy_rejects_bad_values():
    with pytest.raises(ValueError):
        NumericPolicy(tol=0.0)
    with pytest.raises(ValueError):
        NumericPolicy(m_schedule=[])


def test_shipped_schema_matches_report_model():
    with open(SCHEMA_PATH, encoding="utf-8") as handle:
        shipped = json.load(handle)
    generated = Report.model_json_schema(mode="serialization")
    assert set(shipped["properties"]) == set(generated["properties"])
    for name in ("RunConfig", "CheckRecord", "NumericPolicy"):
        assert set(shipped["$defs"][name]["properties"]) == set(generated["$defs"][name]["properties"])
