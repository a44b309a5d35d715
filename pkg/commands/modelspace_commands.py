from typing import Optional

import typer
from typing_extensions import Annotated

from commands.common import (
    FormatOption,
    InnerOption,
    MeasureOption,
    NOption,
    OutOption,
    SeedOption,
    TolOption,
    build_policy,
    descriptor,
    execute,
    fail,
    int_list,
    make_config,
    resolve_format,
)
from services.errors import ToolkitError
from utils.io_utils import parse_complex_list

app = typer.Typer(help="Truncated model spaces K_θ and the compressed shift")

MOption = Annotated[Optional[str], typer.Option("--M", help="Truncation sizes, e.g. 16,32,64")]


def _schedule(M: Optional[str]):
    return int_list(M, "--M") or None


def _run(action: str, inner, measure, n, M, seed, tol, out, format) -> None:
    execute(
        make_config(
            command="modelspace",
            action=action,
            inner=descriptor(inner),
            measure=descriptor(measure),
            n_values=int_list(n, "--n"),
            policy=build_policy(seed=seed, tol=tol, m_schedule=_schedule(M)),
            out=out,
            format=resolve_format(format, "csv"),
        )
    )


@app.command("negpowers")
def negpowers(
    inner: InnerOption = None,
    measure: MeasureOption = None,
    n: NOption = None,
    M: MOption = None,
    seed: SeedOption = None,
    tol: TolOption = None,
    out: OutOption = None,
    format: FormatOption = None,
):
    """‖S_θ⁻ⁿ‖ per truncation size, with the lower bound ½(1/δₙ - 1)"""
    _run("negpowers", inner, measure, n, M, seed, tol, out, format)


@app.command("defect")
def defect(
    inner: InnerOption = None,
    measure: MeasureOption = None,
    M: MOption = None,
    seed: SeedOption = None,
    tol: TolOption = None,
    out: OutOption = None,
    format: FormatOption = None,
):
    """Singular values of I - S_θ*S_θ on each truncation"""
    _run("defect", inner, measure, None, M, seed, tol, out, format)


@app.command("export")
def export(
    inner: InnerOption = None,
    measure: MeasureOption = None,
    M: MOption = None,
    seed: SeedOption = None,
    tol: TolOption = None,
    out: OutOption = None,
    format: FormatOption = None,
):
    """Compressed shift and Gram matrices at the first truncation size"""
    _run("export", inner, measure, None, M, seed, tol, out, format)


def sarason(
    inner: InnerOption = None,
    measure: MeasureOption = None,
    phi: Annotated[
        Optional[str], typer.Option("--phi", help="Taylor coefficients of φ, e.g. 0,1; default φ = θ")
    ] = None,
    K: Annotated[Optional[int], typer.Option("--K", help="Hankel truncation size")] = None,
    seed: SeedOption = None,
    tol: TolOption = None,
    out: OutOption = None,
    format: FormatOption = None,
):
    """‖φ(S_θ)‖ as a Hankel norm (distance from conj(θ)φ to H^∞)"""
    try:
        coefficients = parse_complex_list(phi, "--phi") if phi else None
    except ToolkitError as exc:
        fail(str(exc))
    execute(
        make_config(
            command="sarason",
            inner=descriptor(inner),
            measure=descriptor(measure),
            phi=coefficients,
            policy=build_policy(seed=seed, tol=tol, sarason_k=K),
            out=out,
            format=resolve_format(format, "csv"),
        )
    )
