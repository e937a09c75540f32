"""Scenario files and command protocol models.

A scenario is a versioned JSON document naming what to simulate (a built-in task,
inline rule sets or an explicit operator), the start state and the evolution
settings. The schema is documented in ``docs/scenario-schema.md``.
"""

import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from ..models.core import LatticeGeometry, Selector
from ..models.errors import ScenarioError
from ..models.rules import RuleSet

SCHEMA_VERSION = 1
_INITIAL_FORMS = ("configuration", "amplitudes", "environments", "random_environments")

Amplitude = Union[float, Tuple[float, float]]


def to_complex(value: Amplitude) -> complex:
    """Amplitude given as a real number or as [re, im]."""
    if isinstance(value, (tuple, list)):
        return complex(value[0], value[1])
    return complex(value)


def _location(loc: Tuple[Any, ...]) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


class CommandParameter(BaseModel):
    """Definition of a command-line option."""

    name: str = Field(..., description="Name of the parameter")
    type: str = Field(..., description="Data type of the parameter")
    description: str = Field(..., description="Description of the parameter")
    required: bool = Field(
        default=False, description="Whether the parameter is required"
    )
    default: Optional[Any] = Field(None, description="Default value for the parameter")

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")


class CommandSpec(BaseModel):
    """Definition of a subcommand."""

    name: str = Field(..., description="Name of the subcommand")
    description: str = Field(..., description="Description of what the subcommand does")
    parameters: List[CommandParameter] = Field(
        default_factory=list, description="Options accepted by the subcommand"
    )


class CommandInvocation(BaseModel):
    """Request to run one subcommand."""

    command: str = Field(..., description="Name of the subcommand to run")
    parameters: Dict[str, Any] = Field(
        default_factory=dict, description="Option values, unset options omitted"
    )


class CommandStatus(str, Enum):
    """Possible outcomes of a command."""

    SUCCESS = "success"
    VIOLATIONS = "violations"
    ERROR = "error"


class CommandResponse(BaseModel):
    """Outcome of a command invocation."""

    status: CommandStatus = Field(..., description="Status of the invocation")
    exit_code: int = Field(0, description="Process exit status")
    result: Optional[Any] = Field(
        None, description="Summary of what the command produced"
    )
    error: Optional[str] = Field(None, description="Error message if status is error")
    files: List[str] = Field(default_factory=list, description="Result files written")


class TaskReference(BaseModel):
    """A built-in task and the keyword arguments of its factory."""

    model_config = ConfigDict(extra="forbid")

    name: str
    parameters: Dict[str, Any] = Field(default_factory=dict)


class InlineRules(BaseModel):
    """Rule sets given directly in the scenario."""

    model_config = ConfigDict(extra="forbid")

    computation: RuleSet
    action: RuleSet
    final_outputs: List[int] = Field(
        default_factory=list, description="Output codes that flag completion in traces"
    )


class OperatorElement(BaseModel):
    """One element <row|T|column> of an explicitly supplied step operator."""

    model_config = ConfigDict(extra="forbid")

    row: str = Field(..., description="Configuration text of the row")
    column: str = Field(..., description="Configuration text of the column")
    value: Amplitude = 1.0


class AmplitudeEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    configuration: str
    amplitude: Amplitude = 1.0


class InitialState(BaseModel):
    """Start state: exactly one of the four forms."""

    model_config = ConfigDict(extra="forbid")

    configuration: Optional[str] = Field(
        None, description="Single basis configuration text"
    )
    amplitudes: Optional[List[AmplitudeEntry]] = Field(
        None, description="Explicit amplitudes over configurations"
    )
    environments: Optional[Dict[str, Amplitude]] = Field(
        None, description="Amplitudes over environment strings of the task's start"
    )
    random_environments: Optional[List[str]] = Field(
        None, description="Environment strings given seeded random amplitudes"
    )

    @model_validator(mode="after")
    def _one_form(self) -> "InitialState":
        given = [
            name
            for name in _INITIAL_FORMS
            if getattr(self, name) is not None
        ]
        if len(given) != 1:
            raise ValueError(
                f"initial must give exactly one form, got {given or 'none'}"
            )
        return self


class OutputFiles(BaseModel):
    """Result file names, relative to the output directory."""

    model_config = ConfigDict(extra="forbid")

    amplitudes: str = "amplitudes.csv"
    marginals: str = "marginals.csv"
    completion: str = "completion.csv"
    violations: str = "violations.jsonl"
    trace: str = "trace.jsonl"


class Scenario(BaseModel):
    """One simulation request."""

    model_config = ConfigDict(extra="forbid")

    version: Literal[1] = Field(SCHEMA_VERSION, description="Schema version")
    name: Optional[str] = None
    geometry: Optional[LatticeGeometry] = Field(
        None, description="Required with inline rules or an explicit operator"
    )
    coupling: Optional[float] = Field(None, gt=0, description="Coupling constant K")
    task: Optional[TaskReference] = None
    rules: Optional[InlineRules] = None
    operator: Optional[List[OperatorElement]] = None
    initial: Optional[InitialState] = None
    basis: Literal["reachable", "full"] = Field(
        "reachable", description="Basis the validate command scans"
    )
    times: List[float] = Field(default_factory=lambda: [0.0])
    method: Optional[Literal["auto", "dense_eigen", "krylov", "scaled_taylor"]] = None
    tolerance: Optional[float] = Field(None, gt=0)
    max_dim: Optional[int] = Field(None, ge=1)
    max_steps: int = Field(1000, ge=0)
    seed: int = 0
    selectors: List[Selector] = Field(
        default_factory=lambda: [
            Selector.ROBOT_POSITION,
            Selector.CONTROL_BIT,
            Selector.OUTPUT_REGISTER,
        ]
    )
    outputs: OutputFiles = Field(default_factory=OutputFiles)

    @field_validator("times")
    @classmethod
    def _ascending(cls, times: List[float]) -> List[float]:
        if any(t < 0 for t in times) or any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("times must be non-negative and ascending")
        return times

    @model_validator(mode="after")
    def _one_source(self) -> "Scenario":
        sources = [
            name
            for name in ("task", "rules", "operator")
            if getattr(self, name) is not None
        ]
        if len(sources) != 1:
            raise ValueError(
                "scenario must give exactly one of task, rules, operator; "
                f"got {sources or 'none'}"
            )
        if self.task is None and self.geometry is None:
            raise ValueError(
                "geometry is required with inline rules or an explicit operator"
            )
        if self.rules is not None and self.geometry is not None:
            limit = self.geometry.register_dim
            outside = [
                code for code in self.rules.final_outputs if not 0 <= code < limit
            ]
            if outside:
                raise ValueError(f"final outputs {outside} are outside [0, {limit})")
        return self

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Scenario":
        """Read and validate a scenario file.

        Raises:
            ScenarioError: With the parse or validation diagnostics
        """
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ScenarioError(
                f"Cannot read scenario {path}: {e.strerror}", path=str(path)
            ) from e
        try:
            return cls.model_validate(json.loads(text))
        except json.JSONDecodeError as e:
            raise ScenarioError(
                f"Scenario {path} is not valid JSON: {e.msg} "
                f"at line {e.lineno} column {e.colno}",
                path=str(path),
            ) from e
        except ValidationError as e:
            problems = "; ".join(
                f"{_location(error['loc'])}: {error['msg']}" for error in e.errors()
            )
            raise ScenarioError(
                f"Scenario {path} is invalid: {problems}", path=str(path)
            ) from e
