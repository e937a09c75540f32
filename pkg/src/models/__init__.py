"""Data models for the quantum robot simulator."""

from .core import (
    Boundary,
    Configuration,
    LatticeGeometry,
    Phase,
    Selector,
    check_configuration,
    make_configuration,
)
from .errors import (
    BasisClosureError,
    CapacityError,
    CompileError,
    ConfigurationError,
    ConvergenceError,
    GeometryMismatchError,
    NondeterminismError,
    PreconditionError,
    ScenarioError,
    SimulationError,
    TaskError,
    ZeroNormError,
)
from .operator import SparseOperator
from .rules import (
    LocalRule,
    LookupTable,
    RuleMatch,
    RuleOutcome,
    RuleSet,
    gated_table,
)
from .state import BasisEnumeration, QuantumState, inner_product

__all__ = [
    "BasisClosureError",
    "BasisEnumeration",
    "Boundary",
    "CapacityError",
    "CompileError",
    "Configuration",
    "ConfigurationError",
    "ConvergenceError",
    "GeometryMismatchError",
    "LatticeGeometry",
    "LocalRule",
    "LookupTable",
    "NondeterminismError",
    "Phase",
    "PreconditionError",
    "QuantumState",
    "RuleMatch",
    "RuleOutcome",
    "RuleSet",
    "ScenarioError",
    "Selector",
    "SimulationError",
    "SparseOperator",
    "TaskError",
    "ZeroNormError",
    "check_configuration",
    "gated_table",
    "inner_product",
    "make_configuration",
]
