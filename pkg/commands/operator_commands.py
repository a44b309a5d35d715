import logging
from typing import List, Optional

import typer
from pydantic import ValidationError
from typing_extensions import Annotated

from commands.common import (
    EXIT_FAILED_CHECK,
    FormatOption,
    NOption,
    OutOption,
    SeedOption,
    TolOption,
    build_policy,
    emit,
    execute,
    fail,
    int_list,
    make_config,
    resolve_format,
)
from models.run_models import Report
from services.errors import ToolkitError
from services.run_service import CHARFN_CHECKS, RunService
from services.verify_service import CHECKS, SUITES
from utils.io_utils import load_json, load_matrix_csv

logger = logging.getLogger(__name__)

app = typer.Typer(help="Matrix contractions, the verify battery and report replay")


@app.command("charfn")
def charfn(
    matrix: Annotated[str, typer.Option("--matrix", help="CSV of re,im pairs, one matrix row per line")],
    check: Annotated[
        Optional[List[str]], typer.Option("--check", help=f"One of all, {', '.join(CHARFN_CHECKS)}")
    ] = None,
    n: NOption = None,
    seed: SeedOption = None,
    tol: TolOption = None,
    out: OutOption = None,
    format: FormatOption = None,
):
    """Characteristic function Θ_T of a matrix contraction and its checks"""
    checks = check or ["all"]
    unknown = sorted(set(checks) - {"all", *CHARFN_CHECKS})
    if unknown:
        fail(f"--check: unknown check(s) {', '.join(unknown)}")
    try:
        entries = load_matrix_csv(matrix)
    except ToolkitError as exc:
        fail(str(exc))
    execute(
        make_config(
            command="charfn",
            matrix=entries,
            checks=checks,
            n_values=int_list(n, "--n"),
            policy=build_policy(seed=seed, tol=tol),
            out=out,
            format=resolve_format(format, "json"),
        )
    )


@app.command("verify")
def verify(
    suite: Annotated[
        Optional[List[str]], typer.Option("--suite", help=f"One of {', '.join(SUITES)} or a check name")
    ] = None,
    seed: SeedOption = None,
    tol: TolOption = None,
    out: OutOption = None,
    format: FormatOption = None,
):
    """Run the acceptance battery; exit status 1 if any check fails"""
    suites = suite or ["all"]
    unknown = sorted(set(suites) - set(SUITES) - set(CHECKS))
    if unknown:
        fail(f"--suite: unknown suite(s) {', '.join(unknown)}")
    execute(
        make_config(
            command="verify",
            suite=suites,
            policy=build_policy(seed=seed, tol=tol),
            out=out,
            format=resolve_format(format, "json"),
        )
    )


@app.command("replay")
def replay(
    report_path: Annotated[str, typer.Argument(help="JSON report written by --format json")],
    out: OutOption = None,
):
    """Re-run a report's embedded config and compare every numeric field"""
    try:
        report = Report.model_validate(load_json(report_path))
        fresh, differences = RunService.replay(report)
    except ToolkitError as exc:
        fail(str(exc))
    except ValidationError as exc:
        fail(f"[replay] {report_path}: {exc}")
    if out:
        emit(fresh, {}, out, "json")
    if differences:
        typer.secho(f"replay differs in: {', '.join(differences)}", fg=typer.colors.YELLOW, err=True)
        raise typer.Exit(code=EXIT_FAILED_CHECK)
    typer.echo(f"replay of {report.digest} reproduced {len(fresh.records)} record(s)")
