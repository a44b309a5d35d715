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
    int_list,
    make_config,
    resolve_format,
)

app = typer.Typer(help="Measure functions for null sets and the εₙ sequence")
hausdorff_app = typer.Typer(help="Besicovitch measure functions h with H^h(E) = 0", no_args_is_help=True)

SetOption = Annotated[str, typer.Option("--set", help="Compact set: cantor or point")]
StagesOption = Annotated[Optional[int], typer.Option("--stages", help="Number of cover stages")]


@hausdorff_app.command("build")
def build(
    set_name: SetOption = "cantor",
    stages: StagesOption = None,
    seed: SeedOption = None,
    tol: TolOption = None,
    out: OutOption = None,
    format: FormatOption = None,
):
    """Build the measure function h with H^h(E) = 0, one row per stage"""
    execute(
        make_config(
            command="hausdorff",
            set_name=set_name,
            policy=build_policy(seed=seed, tol=tol, stages=stages),
            out=out,
            format=resolve_format(format, "csv"),
        )
    )


@app.command("epsilon")
def epsilon(
    set_name: SetOption = "cantor",
    stages: StagesOption = None,
    n: NOption = None,
    inner: InnerOption = None,
    measure: MeasureOption = None,
    seed: SeedOption = None,
    tol: TolOption = None,
    out: OutOption = None,
    format: FormatOption = None,
):
    """εₙ table; with --inner/--measure also the δₙ < εₙ² witnesses"""
    n_values = int_list(n, "--n")
    execute(
        make_config(
            command="epsilon",
            set_name=set_name,
            inner=descriptor(inner),
            measure=descriptor(measure),
            n_values=n_values,
            policy=build_policy(seed=seed, tol=tol, stages=stages),
            out=out,
            format=resolve_format(format, "csv"),
        )
    )
