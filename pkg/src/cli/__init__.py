"""Command-line front end: scenarios, subcommands and result files."""

from .catalogue import TaskCatalogue, TaskEntry
from .functions import COMMANDS, get_command_specs
from .handler import ScenarioHandler
from .models import (
    CommandInvocation,
    CommandParameter,
    CommandResponse,
    CommandSpec,
    CommandStatus,
    Scenario,
)

__all__ = [
    "COMMANDS",
    "CommandInvocation",
    "CommandParameter",
    "CommandResponse",
    "CommandSpec",
    "CommandStatus",
    "Scenario",
    "ScenarioHandler",
    "TaskCatalogue",
    "TaskEntry",
    "get_command_specs",
]
