"""Services for the quantum robot simulator."""

from .cache import EigenCache, get_eigen_cache
from .dynamics import (
    EvolutionMethod,
    EvolutionResult,
    Hamiltonian,
    build_hamiltonian,
    evolve,
    evolve_series,
    expectation,
    iterate_step,
    propagator,
)
from .operators import (
    StepOperator,
    compile_ruleset,
    enumerate_reachable,
    full_basis,
    to_matrix,
)
from .tasks import (
    ClassicalTrace,
    EnvironmentMap,
    TaskSpec,
    classical_trace,
    compile_lookup_computation,
    completion_curve,
    completion_probability,
    environment_map,
    make_cleanup_task,
    make_conditional_rotate_task,
    make_copy_task,
    make_lookup_task,
    make_rotate_task,
    make_search_zeros_task,
    make_shift_task,
    make_walk_task,
)
from .validators import (
    Condition,
    DistinctPathResult,
    Lattice,
    ViolationReport,
    check_distinct_path,
    check_env_locality,
    check_gating_and_diagonality,
    check_homogeneity,
    check_onboard_locality,
    check_unitarity,
    validate_operator,
)

__all__ = [
    "ClassicalTrace",
    "Condition",
    "DistinctPathResult",
    "EigenCache",
    "EnvironmentMap",
    "EvolutionMethod",
    "EvolutionResult",
    "Hamiltonian",
    "Lattice",
    "StepOperator",
    "TaskSpec",
    "ViolationReport",
    "build_hamiltonian",
    "check_distinct_path",
    "check_env_locality",
    "check_gating_and_diagonality",
    "check_homogeneity",
    "check_onboard_locality",
    "check_unitarity",
    "classical_trace",
    "compile_lookup_computation",
    "compile_ruleset",
    "completion_curve",
    "completion_probability",
    "enumerate_reachable",
    "environment_map",
    "evolve",
    "evolve_series",
    "expectation",
    "full_basis",
    "get_eigen_cache",
    "iterate_step",
    "make_cleanup_task",
    "make_conditional_rotate_task",
    "make_copy_task",
    "make_lookup_task",
    "make_rotate_task",
    "make_search_zeros_task",
    "make_shift_task",
    "make_walk_task",
    "propagator",
    "to_matrix",
    "validate_operator",
]
