"""Console entry point for the quantum robot simulator."""

import argparse
import sys
from typing import List, Optional

from rich.console import Console
from rich.table import Table
from structlog import get_logger

from src.cli import (
    COMMANDS,
    CommandInvocation,
    CommandResponse,
    CommandStatus,
    ScenarioHandler,
)
from src.cli.models import CommandParameter
from src.config import configure_logging, get_config

logger = get_logger(__name__)

_TYPES = {"int": int, "float": float, "path": str}


def _add_parameter(
    parser: argparse.ArgumentParser, parameter: CommandParameter
) -> None:
    if parameter.type == "flag":
        parser.add_argument(
            parameter.flag, action="store_true", help=parameter.description
        )
        return
    options = {"help": parameter.description, "dest": parameter.name}
    if parameter.type.startswith("choice:"):
        options["choices"] = parameter.type.split(":", 1)[1].split(",")
    else:
        options["type"] = _TYPES[parameter.type]
    if parameter.required:
        options["required"] = True
    elif parameter.default is not None:
        options["default"] = parameter.default
    parser.add_argument(parameter.flag, **options)


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subparser per registered command."""
    parser = argparse.ArgumentParser(
        prog="qrobot", description="Simulate quantum robots on a qubit lattice"
    )
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Minimum level of log events written to stderr",
    )
    parser.add_argument(
        "--json-logs", action="store_true", help="Write log events as JSON lines"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for spec in COMMANDS:
        subparser = subparsers.add_parser(spec.name, help=spec.description)
        for parameter in spec.parameters:
            _add_parameter(subparser, parameter)
    return parser


def _print_tasks(console: Console, response: CommandResponse) -> None:
    table = Table(title="Built-in tasks")
    table.add_column("Task", style="bold")
    table.add_column("Description")
    table.add_column("Parameters")
    for task in response.result or []:
        parameters = ", ".join(
            parameter["name"]
            if parameter["required"]
            else f"{parameter['name']}={parameter['default']}"
            for parameter in task["parameters"]
        )
        table.add_row(task["name"], task["description"], parameters)
    console.print(table)


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run the command and return its exit status."""
    args = build_parser().parse_args(argv)
    config = get_config()
    overrides = (("level", args.log_level), ("json_output", args.json_logs or None))
    logging_settings = config.logging.model_copy(
        update={key: value for key, value in overrides if value is not None}
    )
    configure_logging(logging_settings)
    parameters = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "log_level", "json_logs") and value is not None
    }
    handler = ScenarioHandler(config)
    response = handler.execute(
        CommandInvocation(command=args.command, parameters=parameters)
    )
    console = Console()
    if response.status is CommandStatus.ERROR:
        Console(stderr=True).print(
            f"[red]error[/red] {response.error}", highlight=False
        )
    elif args.command == "tasks":
        _print_tasks(console, response)
    else:
        console.print_json(data=response.model_dump(mode="json", exclude={"error"}))
    logger.info("command_finished", command=args.command, exit_code=response.exit_code)
    return response.exit_code


if __name__ == "__main__":
    sys.exit(main())
