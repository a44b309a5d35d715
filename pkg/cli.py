import typer
from typing_extensions import Annotated

from commands import hausdorff_commands, inner_commands, modelspace_commands, operator_commands
from config.logging_config import configure_logging

app = typer.Typer(
    name="negpower",
    help="Numerical toolkit for inner functions, model spaces and negative powers of contractions",
    no_args_is_help=True,
    add_completion=False,
)


@app.callback()
def main(
    log_level: Annotated[str, typer.Option("--log-level", help="DEBUG, INFO, WARNING or ERROR")] = "WARNING",
):
    configure_logging(log_level)


for group in (inner_commands, hausdorff_commands, operator_commands):
    for command in group.app.registered_commands:
        app.registered_commands.append(command)

app.add_typer(hausdorff_commands.hausdorff_app, name="hausdorff")
app.add_typer(modelspace_commands.app, name="modelspace")
app.command("sarason")(modelspace_commands.sarason)


if __name__ == "__main__":
    app()
