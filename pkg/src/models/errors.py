"""Exception hierarchy for the simulator.

Every error carries a human-readable ``detail`` and the process ``exit_code`` the
command line maps it to.
"""

from typing import Any, Dict


class SimulationError(Exception):
    """Base class for all simulator errors."""

    exit_code: int = 4

    def __init__(self, detail: str, **context: Any):
        super().__init__(detail)
        self.detail = detail
        self.context: Dict[str, Any] = context

    def __str__(self) -> str:
        return self.detail


class ConfigurationError(SimulationError, ValueError):
    """An index, bit string or geometry parameter is out of range."""


class ZeroNormError(SimulationError, ValueError):
    """A zero vector was asked to be normalized."""


class GeometryMismatchError(SimulationError, ValueError):
    """Two values built on different lattice geometries were combined."""


class CompileError(SimulationError, ValueError):
    """A rule set cannot be compiled into a step operator."""


class CapacityError(SimulationError):
    """An enumeration grew beyond its dimension cap."""

    exit_code = 3


class BasisClosureError(SimulationError):
    """A transition leaves the basis an operator is being realized on."""


class PreconditionError(SimulationError, ValueError):
    """A check was requested outside the domain where it is defined."""


class ConvergenceError(SimulationError):
    """An iterative propagator could not reach its tolerance."""


class NondeterminismError(SimulationError):
    """A deterministic interpreter met a configuration with several images."""


class TaskError(SimulationError, ValueError):
    """Task parameters are inconsistent."""


class ScenarioError(SimulationError):
    """A scenario file cannot be read or does not validate."""

    exit_code = 2
