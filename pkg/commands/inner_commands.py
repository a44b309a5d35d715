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

app = typer.Typer(help="Scalar inner functions: evaluation, minimum modulus, decay δₙ")


def _floats(text: Optional[str], location: str):
    try:
        return [value.real for value in parse_complex_list(text, location)]
    except ToolkitError as exc:
        fail(str(exc))


@app.command("eval")
def evaluate(
    inner: InnerOption = None,
    measure: MeasureOption = None,
    z: Annotated[Optional[str], typer.Option("--z", help="Points, e.g. 0.5,0.3+0.2j,2j")] = None,
    seed: SeedOption = None,
    tol: TolOption = None,
    out: OutOption = None,
    format: FormatOption = None,
):
    """Evaluate θ at points of the plane off the circle"""
    try:
        points = parse_complex_list(z, "--z")
    except ToolkitError as exc:
        fail(str(exc))
    execute(
        make_config(
            command="eval",
            inner=descriptor(inner),
            measure=descriptor(measure),
            points=points,
            policy=build_policy(seed=seed, tol=tol),
            out=out,
            format=resolve_format(format, "csv"),
        )
    )


@app.command("mtheta")
def mtheta(
    inner: InnerOption = None,
    measure: MeasureOption = None,
    r: Annotated[Optional[str], typer.Option("--r", help="Radii in (0,1), e.g. 0.1,0.5,0.9")] = None,
    grid: Annotated[Optional[int], typer.Option("--grid", help="Angular grid density")] = None,
    seed: SeedOption = None,
    tol: TolOption = None,
    out: OutOption = None,
    format: FormatOption = None,
):
    """Minimum modulus m_θ(r) on circles of radius r"""
    execute(
        make_config(
            command="mtheta",
            inner=descriptor(inner),
            measure=descriptor(measure),
            radii=_floats(r, "--r"),
            policy=build_policy(seed=seed, tol=tol, grid_density=grid),
            out=out,
            format=resolve_format(format, "csv"),
        )
    )


@app.command("deltan")
def deltan(
    inner: InnerOption = None,
    measure: MeasureOption = None,
    n: NOption = None,
    exterior: Annotated[bool, typer.Option("--exterior", help="Cross-check through the exterior sup")] = False,
    grid: Annotated[Optional[int], typer.Option("--grid", help="Angular grid density")] = None,
    seed: SeedOption = None,
    tol: TolOption = None,
    out: OutOption = None,
    format: FormatOption = None,
):
    """δₙ(θ) = inf over the disk of max(|z|ⁿ, |θ(z)|)"""
    execute(
        make_config(
            command="deltan",
            inner=descriptor(inner),
            measure=descriptor(measure),
            n_values=int_list(n, "--n"),
            checks=["exterior"] if exterior else ["all"],
            policy=build_policy(seed=seed, tol=tol, grid_density=grid),
            out=out,
            format=resolve_format(format, "csv"),
        )
    )
