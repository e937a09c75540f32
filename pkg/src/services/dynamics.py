"""Hamiltonian construction and time evolution.

H = K(2 - T - T^dagger) with hbar = 1. States are propagated by e^{-iHt} through a
dense eigendecomposition (the reference), a restarted Lanczos/Krylov propagator, or
scipy's scaled Taylor ``expm_multiply``.
"""

import math
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr
from scipy import linalg, sparse
from scipy.sparse.linalg import expm_multiply
from structlog import get_logger

from ..config import Config, get_config
from ..models.core import Selector
from ..models.errors import (
    ConfigurationError,
    ConvergenceError,
    GeometryMismatchError,
    PreconditionError,
)
from ..models.operator import SparseOperator
from ..models.state import BasisEnumeration, QuantumState
from .cache import Eigensystem, get_eigen_cache
from .operators import StepOperator

logger = get_logger(__name__)

_BREAKDOWN = 1e-12


class EvolutionMethod(str, Enum):
    """Propagation method for e^{-iHt}."""

    DENSE_EIGEN = "dense_eigen"
    KRYLOV = "krylov"
    SCALED_TAYLOR = "scaled_taylor"


class Hamiltonian(BaseModel):
    """Self-adjoint H = K(2 - T - T^dagger) over a closed basis."""

    model_config = ConfigDict(frozen=True)

    coupling: float = Field(..., gt=0, description="Coupling constant K")
    operator: SparseOperator

    _eigensystem: Optional[Eigensystem] = PrivateAttr(default=None)

    @property
    def basis(self) -> BasisEnumeration:
        return self.operator.basis

    @property
    def matrix(self) -> sparse.csr_matrix:
        return self.operator.matrix

    @property
    def dimension(self) -> int:
        return self.operator.dimension

    def hermiticity_error(self) -> float:
        """Largest element of |H - H^dagger|."""
        difference = self.matrix - self.matrix.conj().T
        return float(abs(difference).max()) if difference.nnz else 0.0

    def eigensystem(self, config: Optional[Config] = None) -> Eigensystem:
        """Eigenvalues and eigenvectors, memoised here and optionally on disk."""
        if self._eigensystem is not None:
            return self._eigensystem
        config = config or get_config()
        cache = get_eigen_cache(config.cache)
        eigensystem = cache.get(self.matrix) if cache else None
        if eigensystem is None:
            eigensystem = linalg.eigh(self.matrix.toarray())
            logger.info("eigensystem_computed", dimension=self.dimension)
            if cache:
                cache.set(self.matrix, eigensystem)
        self._eigensystem = eigensystem
        return eigensystem


class EvolutionResult(BaseModel):
    """States along a time series with their norm drift."""

    times: List[float]
    states: List[QuantumState]
    method: EvolutionMethod
    parameters: Dict[str, Any] = Field(default_factory=dict)
    norm_drift: List[float] = Field(default_factory=list)

    def marginals(self, selector: Union[Selector, str]) -> List[Dict[Any, float]]:
        return [state.marginal(selector) for state in self.states]


def build_hamiltonian(
    operator: SparseOperator,
    coupling: Optional[float] = None,
    config: Optional[Config] = None,
) -> Hamiltonian:
    """H = K(2I - (T + T^dagger)); T + T^dagger is Hermitian element by element.

    Raises:
        ConfigurationError: If T is not square or K is not positive
    """
    config = config or get_config()
    coupling = config.evolution.coupling if coupling is None else coupling
    rows, cols = operator.matrix.shape
    if rows != cols:
        raise ConfigurationError(f"Step operator must be square, got {rows}x{cols}")
    if coupling <= 0:
        raise ConfigurationError(f"Coupling constant must be positive, got {coupling}")
    step = sparse.csr_matrix(operator.matrix, dtype=complex)
    symmetric = step + step.conj().T
    identity = sparse.identity(rows, dtype=complex, format="csr")
    matrix = (2.0 * identity - symmetric) * coupling
    hamiltonian = Hamiltonian(coupling=coupling, operator=operator.with_matrix(matrix))
    logger.info(
        "hamiltonian_built",
        dimension=rows,
        nnz=hamiltonian.operator.nnz,
        coupling=coupling,
    )
    return hamiltonian


def resolve_method(
    method: Union[EvolutionMethod, str, None],
    dimension: int,
    config: Optional[Config] = None,
) -> EvolutionMethod:
    """Map ``auto`` to dense_eigen up to the dense cutoff and krylov above it."""
    config = config or get_config()
    method = method or config.evolution.method
    if method == "auto":
        if dimension <= config.evolution.dense_cutoff:
            return EvolutionMethod.DENSE_EIGEN
        return EvolutionMethod.KRYLOV
    try:
        return EvolutionMethod(method)
    except ValueError:
        raise ConfigurationError(f"Unknown evolution method {method!r}") from None


def _lanczos(matrix: sparse.spmatrix, start: np.ndarray, size: int):
    """Orthonormal Krylov basis with full reorthogonalization.

    Returns diagonal, off-diagonal (last entry is the residual norm), basis rows and
    whether the subspace turned out invariant.
    """
    size = min(size, start.shape[0])
    basis = np.zeros((size, start.shape[0]), dtype=complex)
    alpha = np.zeros(size)
    beta = np.zeros(size)
    basis[0] = start
    for j in range(size):
        w = matrix @ basis[j]
        alpha[j] = np.vdot(basis[j], w).real
        w = w - alpha[j] * basis[j]
        if j:
            w = w - beta[j - 1] * basis[j - 1]
        w = w - basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
        beta[j] = np.linalg.norm(w)
        if beta[j] < _BREAKDOWN:
            return alpha[: j + 1], beta[: j + 1], basis[: j + 1], True
        if j + 1 < size:
            basis[j + 1] = w / beta[j]
    return alpha, beta, basis, False


def _tridiagonal_exp(
    alpha: np.ndarray, off_diagonal: np.ndarray, dt: float
) -> np.ndarray:
    """e^{-i T dt} e_1 for the real symmetric tridiagonal T."""
    if alpha.shape[0] == 1:
        return np.array([np.exp(-1j * alpha[0] * dt)])
    values, vectors = linalg.eigh_tridiagonal(alpha, off_diagonal)
    return vectors @ (np.exp(-1j * values * dt) * vectors[0])


def krylov_propagate(
    matrix: sparse.spmatrix,
    vector: np.ndarray,
    t: float,
    krylov_dim: int,
    tol: float,
    max_substeps: int,
) -> np.ndarray:
    """e^{-iHt} vector by restarted Lanczos with adaptive substeps.

    Each substep is accepted when its error estimate beta_m |c_m| stays below its
    share of ``tol``.

    Raises:
        ConvergenceError: When the substep budget runs out
    """
    if t == 0:
        return vector.copy()
    sign = 1.0 if t > 0 else -1.0
    total = abs(t)
    remaining = total
    step = total
    substeps = 0
    current = vector.astype(complex)
    while remaining > 0:
        norm = np.linalg.norm(current)
        if norm == 0:
            break
        alpha, beta, basis, invariant = _lanczos(matrix, current / norm, krylov_dim)
        while True:
            substeps += 1
            if substeps > max_substeps:
                raise ConvergenceError(
                    f"Krylov propagation needed more than {max_substeps} substeps for "
                    f"t={t}; use dense_eigen or a smaller t",
                    t=t,
                    krylov_dim=krylov_dim,
                )
            dt = min(step, remaining)
            coefficients = _tridiagonal_exp(alpha, beta[:-1], sign * dt)
            error = 0.0 if invariant else beta[-1] * abs(coefficients[-1]) * norm
            if error <= tol * dt / total:
                break
            step = dt / 2
        current = norm * (basis.T @ coefficients)
        remaining -= dt
        if error <= tol * dt / total / 10:
            step = dt * 2
    logger.debug("krylov_propagated", t=t, substeps=substeps, krylov_dim=krylov_dim)
    return current


def taylor_propagate(
    matrix: sparse.spmatrix, vector: np.ndarray, t: float, taylor_step: float
) -> np.ndarray:
    """e^{-iHt} vector in slices no longer than ``taylor_step``."""
    chunks = max(1, math.ceil(abs(t) / taylor_step))
    generator = sparse.csr_matrix(matrix, dtype=complex) * (-1j * t / chunks)
    current = vector.astype(complex)
    for _ in range(chunks):
        current = expm_multiply(generator, current)
    return current


def _check_input(
    hamiltonian: Hamiltonian, state: QuantumState, tolerance: float
) -> None:
    if state.geometry != hamiltonian.basis.geometry:
        raise GeometryMismatchError(
            "State and Hamiltonian belong to different geometries"
        )
    norm = state.norm()
    if abs(norm - 1.0) > tolerance:
        raise PreconditionError(f"Evolution needs a normalized state; norm is {norm}")


def _propagate(
    hamiltonian: Hamiltonian,
    vector: np.ndarray,
    t: float,
    method: EvolutionMethod,
    tol: float,
    config: Config,
) -> np.ndarray:
    if method is EvolutionMethod.DENSE_EIGEN:
        values, vectors = hamiltonian.eigensystem(config)
        return vectors @ (np.exp(-1j * values * t) * (vectors.conj().T @ vector))
    if method is EvolutionMethod.KRYLOV:
        return krylov_propagate(
            hamiltonian.matrix,
            vector,
            t,
            config.evolution.krylov_dim,
            tol,
            config.evolution.krylov_max_substeps,
        )
    return taylor_propagate(hamiltonian.matrix, vector, t, config.evolution.taylor_step)


def evolve(
    hamiltonian: Hamiltonian,
    state: QuantumState,
    t: float,
    method: Union[EvolutionMethod, str, None] = None,
    tol: Optional[float] = None,
    config: Optional[Config] = None,
) -> QuantumState:
    """e^{-iHt}|state>.

    Args:
        hamiltonian: Generator of the evolution
        state: Normalized state supported inside the Hamiltonian's basis
        t: Evolution time (hbar = 1)
        method: ``auto``, ``dense_eigen``, ``krylov`` or ``scaled_taylor``
        tol: Target accuracy; defaults to ``evolution.tolerance``

    Returns:
        QuantumState: The evolved state

    Raises:
        PreconditionError: If the state is not normalized
        BasisClosureError: If the state leaves the Hamiltonian's basis
        ConvergenceError: If Krylov propagation exhausts its substep budget
    """
    config = config or get_config()
    _check_input(hamiltonian, state, config.basis.normalize_tolerance)
    if t == 0 or hamiltonian.operator.nnz == 0:
        return state
    resolved = resolve_method(method, hamiltonian.dimension, config)
    tol = tol or config.evolution.tolerance
    vector = hamiltonian.basis.to_vector(state)
    evolved = hamiltonian.basis.to_state(
        _propagate(hamiltonian, vector, t, resolved, tol, config),
        threshold=config.basis.prune_threshold,
    )
    drift = abs(evolved.norm() - 1.0)
    if drift > tol:
        logger.warning(
            "norm_drift", t=t, drift=drift, method=resolved.value, tolerance=tol
        )
    return evolved


def evolve_series(
    hamiltonian: Hamiltonian,
    state: QuantumState,
    times: Sequence[float],
    method: Union[EvolutionMethod, str, None] = None,
    tol: Optional[float] = None,
    config: Optional[Config] = None,
) -> EvolutionResult:
    """Evolve ``state`` to each of ``times``, each point independently from t = 0.

    Raises:
        PreconditionError: If times are negative or not ascending
    """
    config = config or get_config()
    times = [float(t) for t in times]
    if any(t < 0 for t in times) or any(b < a for a, b in zip(times, times[1:])):
        raise PreconditionError(
            f"Times must be non-negative and ascending, got {times}"
        )
    resolved = resolve_method(method, hamiltonian.dimension, config)
    states = [evolve(hamiltonian, state, t, resolved, tol, config) for t in times]
    drift = [abs(evolved.norm() - 1.0) for evolved in states]
    parameters: Dict[str, Any] = {
        "coupling": hamiltonian.coupling,
        "dimension": hamiltonian.dimension,
    }
    if resolved is EvolutionMethod.KRYLOV:
        parameters["krylov_dim"] = config.evolution.krylov_dim
    elif resolved is EvolutionMethod.SCALED_TAYLOR:
        parameters["taylor_step"] = config.evolution.taylor_step
    logger.info(
        "series_evolved",
        points=len(times),
        method=resolved.value,
        max_norm_drift=max(drift, default=0.0),
    )
    return EvolutionResult(
        times=times,
        states=states,
        method=resolved,
        parameters=parameters,
        norm_drift=drift,
    )


def iterate_step(
    operator: Union[StepOperator, SparseOperator],
    state: QuantumState,
    n: int,
    adjoint: bool = False,
) -> List[QuantumState]:
    """[state, T state, ..., T^n state], unnormalized; T^dagger with ``adjoint``."""
    if n < 0:
        raise PreconditionError(f"Iteration count must be non-negative, got {n}")
    if isinstance(operator, SparseOperator):
        matrix = operator.adjoint() if adjoint else operator
        step = matrix.apply
    else:
        step = operator.apply_adjoint if adjoint else operator.apply
    iterates = [state]
    for _ in range(n):
        iterates.append(step(iterates[-1]))
    return iterates


def expectation(
    hamiltonian: Hamiltonian, state: QuantumState, config: Optional[Config] = None
) -> float:
    """<state|H|state>; the imaginary residue of a self-adjoint H is dropped."""
    config = config or get_config()
    _check_input(hamiltonian, state, config.basis.normalize_tolerance)
    vector = hamiltonian.basis.to_vector(state)
    value = np.vdot(vector, hamiltonian.matrix @ vector)
    if abs(value.imag) > 1e-12 * max(1.0, abs(value.real)):
        logger.warning("expectation_not_real", imaginary=float(value.imag))
    return float(value.real)


def propagator(
    hamiltonian: Hamiltonian, t: float, config: Optional[Config] = None
) -> SparseOperator:
    """Dense e^{-iHt} over the Hamiltonian's basis."""
    values, vectors = hamiltonian.eigensystem(config)
    unitary = (vectors * np.exp(-1j * values * t)) @ vectors.conj().T
    return SparseOperator.from_dense(hamiltonian.basis, unitary)
