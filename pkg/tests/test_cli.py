import io
import json
import os

import pandas as pd
import pytest
from typer.testing import CliRunner

from cli import app


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner(mix_stderr=False)


def sample(samples_dir: str, name: str) -> str:
    return os.path.join(samples_dir, name)


def read_csv(text: str) -> pd.DataFrame:
    return pd.read_csv(io.StringIO(text), comment="#")


def test_deltan_emits_twenty_decreasing_rows(runner, samples_dir):
    result = runner.invoke(app, ["deltan", "--inner", sample(samples_dir, "atom.json"), "--n", "1..20"])
    assert result.exit_code == 0, result.stderr
    assert result.stdout.startswith("# seed=7 digest=")
    frame = read_csv(result.stdout)
    assert len(frame) == 20
    assert frame["delta_n"].is_monotonic_decreasing


def test_not_a_contraction_is_rejected(runner, samples_dir):
    result = runner.invoke(app, ["charfn", "--matrix", sample(samples_dir, "not_a_contraction.csv")])
    assert result.exit_code == 2
    assert "exceeds 1" in result.stderr
    assert "[contraction]" in result.stderr


def test_charfn_json_report(runner, samples_dir):
    result = runner.invoke(
        app, ["charfn", "--matrix", sample(samples_dir, "diag_matrix.csv"), "--n", "5", "--check", "bounds"]
    )
    assert result.exit_code == 0, result.stderr
    report = json.loads(result.stdout)
    assert report["passed"]
    assert report["seed"] == 7
    assert report["tables"]["bounds"][0]["norm_inverse_power"] == pytest.approx(411.52, abs=0.01)


def test_modelspace_negpowers(runner, samples_dir):
    result = runner.invoke(
        app,
        ["modelspace", "negpowers", "--inner", sample(samples_dir, "blaschke.json"), "--n", "1..5", "--M", "16,32,64"],
    )
    assert result.exit_code == 0, result.stderr
    frame = read_csv(result.stdout)
    assert frame["norm"].tolist() == pytest.approx([2.0, 4.0, 8.0, 16.0, 32.0], rel=1e-8)


def test_hausdorff_writes_csv_file(runner, tmp_path):
    out = tmp_path / "gauge.csv"
    result = runner.invoke(
        app, ["hausdorff", "build", "--set", "point", "--stages", "8", "--out", str(out), "--seed", "3"]
    )
    assert result.exit_code == 0, result.stderr
    text = out.read_text(encoding="utf-8")
    assert text.startswith("# seed=3 digest=")
    assert len(read_csv(text)) == 8


def test_hausdorff_build_breakpoint_table(runner):
    result = runner.invoke(app, ["hausdorff", "build", "--set", "cantor", "--stages", "6"])
    assert result.exit_code == 0, result.stderr
    frame = read_csv(result.stdout)
    assert list(frame["n"]) == list(range(1, 7))
    assert {"t_n", "h_t_n"} <= set(frame.columns)
    assert (frame["h_t_n"] <= 2.0 ** -frame["n"]).all()


def test_malformed_descriptor_reports_location(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"blaschke": [[0.5]], "singular": {"type": "atomic", "atoms": [[0.0, "x"]]}}', encoding="utf-8")
    result = runner.invoke(app, ["deltan", "--inner", str(bad), "--n", "1"])
    assert result.exit_code == 2
    assert "inner.blaschke[0]" in result.stderr


def test_bad_range_and_format(runner, samples_dir):
    result = runner.invoke(app, ["deltan", "--inner", sample(samples_dir, "atom.json"), "--n", "5..1"])
    assert result.exit_code == 2
    assert "--n" in result.stderr
    result = runner.invoke(app, ["deltan", "--inner", sample(samples_dir, "atom.json"), "--format", "xml"])
    assert result.exit_code == 2


def test_unknown_suite(runner):
    result = runner.invoke(app, ["verify", "--suite", "plots"])
    assert result.exit_code == 2
    assert "plots" in result.stderr


def test_verify_single_check_and_replay(runner, tmp_path):
    out = tmp_path / "report.json"
    result = runner.invoke(app, ["verify", "--suite", "08_sarason_norm", "--out", str(out)])
    assert result.exit_code == 0, result.stderr
    report = json.loads(out.read_text(encoding="utf-8"))
    assert [record["name"] for record in report["records"]] == ["08_sarason_norm"]

    replayed = runner.invoke(app, ["replay", str(out)])
    assert replayed.exit_code == 0, replayed.stderr
    assert "reproduced 1 record" in replayed.stdout


def test_sarason_with_polynomial_symbol(runner, samples_dir):
    result = runner.invoke(app, ["sarason", "--inner", sample(samples_dir, "blaschke.json"), "--phi", "0,1", "--K", "64"])
    assert result.exit_code == 0, result.stderr
    assert read_csv(result.stdout)["norm"].iloc[-1] == pytest.approx(0.5, abs=1e-6)
