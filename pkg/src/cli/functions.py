"""Subcommand specifications for the qrobot command line.

Each subcommand is mapped to a method of ``ScenarioHandler`` with the same name;
``main`` turns these specifications into argparse subparsers.
"""

from typing import Dict, List

from .models import CommandParameter, CommandSpec

_SCENARIO = CommandParameter(
    name="scenario",
    type="path",
    description="Scenario JSON file",
    required=True,
)
_OUT = CommandParameter(
    name="out",
    type="path",
    description="Directory for result files",
    default=".",
)
_MAX_DIM = CommandParameter(
    name="max_dim",
    type="int",
    description="Largest basis the reachable closure may build",
)
_MAX_STEPS = CommandParameter(
    name="max_steps",
    type="int",
    description="Step cap for classical traces",
)

COMMANDS: List[CommandSpec] = [
    CommandSpec(
        name="run",
        description=(
            "Evolve the scenario's start state and write amplitude and marginal CSVs"
        ),
        parameters=[
            _SCENARIO,
            _OUT,
            CommandParameter(
                name="method",
                type="choice:auto,dense_eigen,krylov,scaled_taylor",
                description="Propagation method",
            ),
            CommandParameter(
                name="tol", type="float", description="Propagation tolerance"
            ),
            _MAX_DIM,
            CommandParameter(
                name="strict",
                type="flag",
                description=(
                    "Fail with exit status 1 if the operator has structural violations"
                ),
                default=False,
            ),
            CommandParameter(
                name="seed",
                type="int",
                description="Seed for random initial amplitudes",
            ),
        ],
    ),
    CommandSpec(
        name="validate",
        description="Check the scenario's operator against every structural condition",
        parameters=[_SCENARIO, _OUT, _MAX_DIM],
    ),
    CommandSpec(
        name="trace",
        description=(
            "Follow the scenario's rules classically from a basis configuration"
        ),
        parameters=[_SCENARIO, _OUT, _MAX_STEPS],
    ),
    CommandSpec(
        name="tasks",
        description="List the built-in tasks and their parameters",
        parameters=[],
    ),
]


def get_command_specs() -> Dict[str, CommandSpec]:
    """Subcommands by name."""
    return {spec.name: spec for spec in COMMANDS}
