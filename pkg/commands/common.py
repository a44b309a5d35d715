"""Option types and run plumbing shared by every subcommand."""
import logging
import os
from typing import Any, Dict, List, Optional

import typer
from pydantic import ValidationError
from typing_extensions import Annotated

from models.run_models import NumericPolicy, Report, RunConfig
from services.errors import ToolkitError
from services.run_service import RunService, Tables
from utils.io_utils import load_json, parse_int_list, table_to_csv, write_text

logger = logging.getLogger(__name__)

EXIT_FAILED_CHECK = 1
EXIT_ERROR = 2

InnerOption = Annotated[Optional[str], typer.Option("--inner", help="Inner function JSON descriptor")]
MeasureOption = Annotated[Optional[str], typer.Option("--measure", help="Singular measure JSON descriptor")]
NOption = Annotated[Optional[str], typer.Option("--n", help="Exponents, e.g. 1..20 or 1,2,5")]
SeedOption = Annotated[Optional[int], typer.Option("--seed", help="Seed recorded in every output")]
TolOption = Annotated[Optional[float], typer.Option("--tol", help="Assertion tolerance")]
OutOption = Annotated[Optional[str], typer.Option("--out", help="Write the output here instead of stdout")]
FormatOption = Annotated[Optional[str], typer.Option("--format", help="csv or json")]


def fail(message: str) -> None:
    typer.secho(f"error: {message}", fg=typer.colors.RED, err=True)
    raise typer.Exit(code=EXIT_ERROR)


def build_policy(**overrides: Any) -> NumericPolicy:
    values = {key: value for key, value in overrides.items() if value is not None}
    try:
        return NumericPolicy(**values)
    except ValidationError as exc:
        fail(f"[policy] {exc}")


def descriptor(path: Optional[str]) -> Optional[Dict[str, Any]]:
    if path is None:
        return None
    try:
        return load_json(path)
    except ToolkitError as exc:
        fail(str(exc))


def int_list(text: Optional[str], location: str) -> List[int]:
    try:
        return parse_int_list(text, location)
    except ToolkitError as exc:
        fail(str(exc))


def make_config(**fields: Any) -> RunConfig:
    try:
        return RunConfig(**fields)
    except ValidationError as exc:
        fail(f"[config] {exc}")


def emit(report: Report, tables: Tables, out: Optional[str], format: str) -> None:
    if format == "json":
        text = report.model_dump_json(indent=2)
        if out:
            write_text(text, out)
        else:
            typer.echo(text)
        return
    for index, (name, frame) in enumerate(tables.items()):
        text = table_to_csv(frame, report.seed, report.digest)
        if out is None:
            if index:
                typer.echo(f"# table={name}")
            typer.echo(text, nl=False)
        elif index == 0:
            write_text(text, out)
        else:
            stem, extension = os.path.splitext(out)
            write_text(text, f"{stem}_{name}{extension or '.csv'}")


def execute(config: RunConfig) -> None:
    """Run, emit, and exit with 0 (all checks pass), 1 (a check failed) or 2 (error)"""
    try:
        report, tables = RunService.run(config)
    except ToolkitError as exc:
        fail(str(exc))
    except ValidationError as exc:
        fail(f"[{config.command}] {exc}")
    emit(report, tables, config.out, config.format)
    for record in report.failures:
        typer.secho(f"FAILED {record.name}: {record.inequality}", fg=typer.colors.YELLOW, err=True)
    raise typer.Exit(code=RunService.exit_code(report))


def resolve_format(requested: Optional[str], default: str) -> str:
    format = (requested or default).lower()
    if format not in ("csv", "json"):
        fail(f"--format: expected csv or json, got {requested!r}")
    return format
