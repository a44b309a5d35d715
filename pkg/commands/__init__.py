"""typer command groups; cli.py mounts them on the root app."""
