"""Matrix-level checks of the structural conditions on step operators.

Every check scans the nonzero elements of a ``SparseOperator`` and returns a list
of ``ViolationReport`` witnesses instead of raising, so externally supplied
matrices can be certified the same way as compiled ones.
"""

import json
from enum import Enum
from typing import Callable, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import sparse
from structlog import get_logger

from ..config import Config, get_config
from ..models.core import Configuration, LatticeGeometry
from ..models.errors import BasisClosureError, PreconditionError
from ..models.operator import SparseOperator
from ..models.state import QuantumState

logger = get_logger(__name__)


class Condition(str, Enum):
    """Identifiers of the structural conditions."""

    ENV_LOCALITY = "env_locality"
    ONBOARD_LOCALITY = "onboard_locality"
    HOMOGENEITY_ENV = "homogeneity_env"
    HOMOGENEITY_ONBOARD = "homogeneity_onboard"
    COMPUTATION_GATING = "computation_gating"
    COMPUTATION_ENV_DIAGONAL = "computation_env_diagonal"
    ACTION_GATING = "action_gating"
    ACTION_REGISTER_DIAGONAL = "action_register_diagonal"
    ACTION_ONBOARD_INVARIANCE = "action_onboard_invariance"


class Lattice(str, Enum):
    """Which head a homogeneity check translates."""

    ENV_J = "env_j"
    ONBOARD_K = "onboard_k"


class ViolationReport(BaseModel):
    """One matrix element <row|T|column> that breaks a condition."""

    model_config = ConfigDict(frozen=True)

    condition: Condition
    row: Configuration
    column: Configuration
    value: complex
    explanation: str

    @property
    def sort_key(self) -> tuple:
        return (self.condition.value, self.row.sort_key, self.column.sort_key)

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "condition": self.condition.value,
                "row": self.row.to_text(),
                "column": self.column.to_text(),
                "value": [self.value.real, self.value.imag],
                "explanation": self.explanation,
            }
        )


class DistinctPathResult(BaseModel):
    """Outcome of following T from one basis state."""

    is_distinct_path: bool
    length: int = Field(..., description="Transitions taken, including a closing step")
    closed: bool = Field(False, description="The path returned to its start")
    visited: List[Configuration] = Field(default_factory=list)


def _scan(
    operator: SparseOperator,
    condition: Condition,
    explain: Callable[[Configuration, Configuration], Optional[str]],
) -> List[ViolationReport]:
    reports = [
        ViolationReport(
            condition=condition, row=row, column=column, value=value, explanation=reason
        )
        for row, column, value in operator.entries()
        if (reason := explain(row, column)) is not None
    ]
    return sorted(reports, key=lambda report: report.sort_key)


def _changed_sites(before: str, after: str) -> List[int]:
    return [site for site, (a, b) in enumerate(zip(before, after)) if a != b]


def check_env_locality(operator: SparseOperator) -> List[ViolationReport]:
    """Elements may change s only at the column's j and move h1 by at most one site."""
    geometry = operator.basis.geometry

    def explain(row: Configuration, column: Configuration) -> Optional[str]:
        hop = geometry.env_distance(row.j, column.j)
        if hop > 1:
            return f"h1 hops {hop} sites (j={column.j} -> j={row.j})"
        stray = [site for site in _changed_sites(column.s, row.s) if site != column.j]
        if stray:
            return f"environment qubit(s) {stray} change away from h1 at j={column.j}"
        return None

    return _scan(operator, Condition.ENV_LOCALITY, explain)


def check_onboard_locality(operator: SparseOperator) -> List[ViolationReport]:
    """Elements may change t only at the column's k and move h2 by at most one site."""
    geometry = operator.basis.geometry

    def explain(row: Configuration, column: Configuration) -> Optional[str]:
        hop = geometry.onboard_distance(row.k, column.k)
        if hop > 1:
            return f"h2 hops {hop} sites (k={column.k} -> k={row.k})"
        stray = [site for site in _changed_sites(column.t, row.t) if site != column.k]
        if stray:
            return f"on-board qubit(s) {stray} change away from h2 at k={column.k}"
        return None

    return _scan(operator, Condition.ONBOARD_LOCALITY, explain)


def _rotate(bits: str, direction: int) -> str:
    return bits[-1:] + bits[:-1] if direction > 0 else bits[1:] + bits[:1]


def _translate(
    cfg: Configuration,
    lattice: Lattice,
    direction: int,
    geometry: LatticeGeometry,
    windowed: bool,
) -> Optional[Configuration]:
    """Shift one head and its lattice contents by ``direction`` sites."""
    if lattice is Lattice.ONBOARD_K:
        return cfg.evolve(
            k=geometry.onboard_step(cfg.k, direction), t=_rotate(cfg.t, direction)
        )
    if not windowed:
        return cfg.evolve(
            j=(cfg.j + direction) % geometry.env_size, s=_rotate(cfg.s, direction)
        )
    j = cfg.j + direction
    if not 0 <= j < geometry.env_size:
        return None
    s = "0" + cfg.s[:-1] if direction > 0 else cfg.s[1:] + "0"
    return cfg.evolve(j=j, s=s)


def check_homogeneity(
    operator: SparseOperator,
    which: Union[Lattice, str],
    windowed: bool = False,
) -> List[ViolationReport]:
    """Translating row and column by one site preserves every element.

    Pairs whose translate leaves the basis are not compared; the numbers of compared
    and skipped translates are logged, with a warning when nothing was compared.
    With ``windowed`` a bounded environment is checked only where both heads stay on
    the lattice, with a 0 shifted in at the edge.

    Raises:
        PreconditionError: Exact environment homogeneity requested on a bounded lattice
    """
    which = Lattice(which)
    geometry = operator.basis.geometry
    if which is Lattice.ENV_J and not geometry.cyclic and not windowed:
        raise PreconditionError(
            "Exact environment homogeneity needs a cyclic lattice; "
            "use windowed=True on a bounded lattice"
        )
    condition = (
        Condition.HOMOGENEITY_ENV
        if which is Lattice.ENV_J
        else Condition.HOMOGENEITY_ONBOARD
    )
    use_window = windowed and which is Lattice.ENV_J and not geometry.cyclic
    basis = operator.basis
    elements = {(row, column): value for row, column, value in operator.entries()}
    counts = {"compared": 0, "skipped": 0}

    def explain(row: Configuration, column: Configuration) -> Optional[str]:
        value = elements[(row, column)]
        for direction in (1, -1):
            moved_column = _translate(column, which, direction, geometry, use_window)
            moved_row = _translate(row, which, direction, geometry, use_window)
            if moved_column is None or moved_row is None or moved_column not in basis:
                counts["skipped"] += 1
                continue
            counts["compared"] += 1
            translated = elements.get((moved_row, moved_column), 0j)
            if translated != value:
                return (
                    f"element {value} differs from {translated} at the translate "
                    f"{moved_column} -> {moved_row}"
                )
        return None

    reports = _scan(operator, condition, explain)
    if elements and not counts["compared"]:
        logger.warning("homogeneity_vacuous", lattice=which.value, **counts)
    else:
        logger.info(
            "homogeneity_checked",
            lattice=which.value,
            violations=len(reports),
            **counts,
        )
    return reports


def check_gating_and_diagonality(
    action: SparseOperator, computation: SparseOperator
) -> List[ViolationReport]:
    """Control gating of both parts, environment diagonality of T_c, register
    diagonality and on-board invariance of T_a."""

    def computation_gating(row: Configuration, column: Configuration) -> Optional[str]:
        if column.i != 0:
            return "computation step fires with the control qubit in |1>"
        return None

    def computation_env(row: Configuration, column: Configuration) -> Optional[str]:
        if row.s != column.s or row.j != column.j:
            return "computation step changes the environment or robot position"
        return None

    def action_gating(row: Configuration, column: Configuration) -> Optional[str]:
        if column.i != 1:
            return "action step fires with the control qubit in |0>"
        return None

    def action_registers(row: Configuration, column: Configuration) -> Optional[str]:
        if row.l1 != column.l1 or row.l2 != column.l2:
            return (
                "action step changes the output or memory register; actions must be "
                "diagonal in the register basis to avoid no-cloning limits"
            )
        return None

    def action_onboard(row: Configuration, column: Configuration) -> Optional[str]:
        if (row.p, row.k, row.t) != (column.p, column.k, column.t):
            return "action step changes the on-board head or qubits"
        return None

    reports = [
        *_scan(computation, Condition.COMPUTATION_GATING, computation_gating),
        *_scan(computation, Condition.COMPUTATION_ENV_DIAGONAL, computation_env),
        *_scan(action, Condition.ACTION_GATING, action_gating),
        *_scan(action, Condition.ACTION_REGISTER_DIAGONAL, action_registers),
        *_scan(action, Condition.ACTION_ONBOARD_INVARIANCE, action_onboard),
    ]
    return sorted(reports, key=lambda report: report.sort_key)


def check_unitarity(
    operator: Union[SparseOperator, np.ndarray, sparse.spmatrix],
    tol: Optional[float] = None,
) -> float:
    """Largest element of |U^dagger U - I|.

    Non-square input is padded with zeros to a square matrix first. ``tol`` only
    controls whether a warning is logged; the caller compares the return value.
    """
    if isinstance(operator, SparseOperator):
        matrix = operator.matrix
    else:
        matrix = sparse.csr_matrix(operator)
    rows, cols = matrix.shape
    size = max(rows, cols)
    if rows != cols:
        padded = sparse.lil_matrix((size, size), dtype=complex)
        padded[:rows, :cols] = matrix
        matrix = padded.tocsr()
    gram = (matrix.conj().T @ matrix).toarray() - np.eye(size)
    deviation = float(np.max(np.abs(gram))) if size else 0.0
    if tol is not None and deviation > tol:
        logger.warning("unitarity_deviation", deviation=deviation, tolerance=tol)
    return deviation


def check_distinct_path(
    operator: SparseOperator,
    start: Configuration,
    n_steps: int,
    tolerance: Optional[float] = None,
    config: Optional[Config] = None,
) -> DistinctPathResult:
    """Follow T from |start> while every iterate is a single, unvisited basis state.

    A zero iterate ends the path; returning to ``start`` closes it.
    """
    config = config or get_config()
    tolerance = tolerance or config.validators.distinct_path_tolerance
    basis = operator.basis
    if start not in basis:
        raise BasisClosureError(f"Start configuration {start} is not in the basis")
    current = QuantumState.build(basis.geometry, {start: 1.0})
    visited = [start]
    for step in range(1, n_steps + 1):
        image = operator.apply(current)
        support = [
            cfg for cfg, amp in image.amplitudes.items() if abs(amp) > tolerance
        ]
        if len(support) != 1:
            return DistinctPathResult(
                is_distinct_path=not support, length=step - 1, visited=visited
            )
        (cfg,) = support
        if cfg == start:
            return DistinctPathResult(
                is_distinct_path=True, length=step, closed=True, visited=visited
            )
        if cfg in visited:
            return DistinctPathResult(
                is_distinct_path=False, length=step, visited=visited
            )
        visited.append(cfg)
        current = QuantumState.build(basis.geometry, {cfg: image.amplitudes[cfg]})
    return DistinctPathResult(is_distinct_path=True, length=n_steps, visited=visited)


def validate_operator(
    action: SparseOperator,
    computation: SparseOperator,
    check_homogeneity_flag: Optional[bool] = None,
    config: Optional[Config] = None,
) -> List[ViolationReport]:
    """Run every structural check on the two parts of a step operator.

    Homogeneity uses the windowed comparison on a bounded environment.
    """
    config = config or get_config()
    if check_homogeneity_flag is None:
        check_homogeneity_flag = config.validators.check_homogeneity
    total = _sum(action, computation)
    windowed = not total.basis.geometry.cyclic
    reports: List[ViolationReport] = [
        *check_env_locality(total),
        *check_onboard_locality(computation),
        *check_gating_and_diagonality(action, computation),
    ]
    if check_homogeneity_flag:
        reports.extend(check_homogeneity(total, Lattice.ENV_J, windowed=windowed))
        reports.extend(check_homogeneity(computation, Lattice.ONBOARD_K))
    reports.sort(key=lambda report: report.sort_key)
    logger.info(
        "operator_validated",
        dimension=total.dimension,
        nnz=total.nnz,
        violations=len(reports),
    )
    return reports


def _sum(action: SparseOperator, computation: SparseOperator) -> SparseOperator:
    if action.basis is not computation.basis and action.basis != computation.basis:
        raise BasisClosureError("Action and computation parts use different bases")
    return action.with_matrix(action.matrix + computation.matrix)

