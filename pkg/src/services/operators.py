"""Step operators compiled from local rules.

This module turns computation and action rule sets into a ``StepOperator`` that acts
on sparse states directly, enumerates the finite basis reachable from an initial
support, and realizes the operator as a sparse matrix over that basis.
"""

import itertools
from collections import deque
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr
from scipy import sparse
from structlog import get_logger

from ..config import Config, get_config
from ..models.core import (
    Configuration,
    LatticeGeometry,
    Phase,
    check_configuration,
    set_bit,
)
from ..models.errors import BasisClosureError, CapacityError, CompileError
from ..models.operator import SparseOperator
from ..models.rules import ContextKey, LocalRule, RuleSet
from ..models.state import PRUNE_THRESHOLD, BasisEnumeration, QuantumState
from .validators import validate_operator

logger = get_logger(__name__)


class _RuleIndex:
    """Rules bucketed by their (partially wildcarded) match key."""

    def __init__(self, rules: Sequence[LocalRule]):
        self.by_key: Dict[ContextKey, List[LocalRule]] = {}
        masks = set()
        for rule in rules:
            self.by_key.setdefault(rule.match.key, []).append(rule)
            masks.add(rule.match.mask)
        self.masks = sorted(masks)

    def firing(self, context: Tuple[int, ...]) -> Iterator[LocalRule]:
        for mask in self.masks:
            key = tuple(
                value if pinned else None for value, pinned in zip(context, mask)
            )
            yield from self.by_key.get(key, ())


class _WriteIndex:
    """Rules bucketed by the head state and registers they overwrite."""

    def __init__(self, rules: Sequence[LocalRule]):
        self.by_key: Dict[Tuple[Optional[int], ...], List[LocalRule]] = {}
        masks = set()
        for rule in rules:
            key = (rule.outcome.p, rule.outcome.l1, rule.outcome.l2)
            self.by_key.setdefault(key, []).append(rule)
            masks.add(tuple(value is not None for value in key))
        self.masks = sorted(masks)

    def producing(self, target: Configuration) -> Iterator[LocalRule]:
        values = (target.p, target.l1, target.l2)
        for mask in self.masks:
            key = tuple(
                value if pinned else None for value, pinned in zip(values, mask)
            )
            yield from self.by_key.get(key, ())


def _context(cfg: Configuration) -> Tuple[int, int, int, int, int]:
    return (cfg.p, cfg.t_k, cfg.l1, cfg.l2, cfg.s_j)


def _matches(rule: LocalRule, cfg: Configuration) -> bool:
    if cfg.i != rule.phase.gate:
        return False
    return all(
        wanted is None or wanted == actual
        for wanted, actual in zip(rule.match.key, _context(cfg))
    )


def _fire(
    rule: LocalRule, cfg: Configuration, geometry: LatticeGeometry
) -> Optional[Configuration]:
    """Image of ``cfg`` under ``rule``; ``None`` when h1 leaves a bounded lattice."""
    outcome = rule.outcome
    if rule.phase is Phase.COMPUTATION:
        return cfg.evolve(
            p=cfg.p if outcome.p is None else outcome.p,
            k=geometry.onboard_step(cfg.k, outcome.dk),
            t=cfg.t if outcome.t is None else set_bit(cfg.t, cfg.k, outcome.t),
            l1=cfg.l1 if outcome.l1 is None else outcome.l1,
            l2=cfg.l2 if outcome.l2 is None else outcome.l2,
            i=1 if outcome.flip_control else 0,
        )
    j = geometry.env_step(cfg.j, outcome.dj)
    if j is None:
        return None
    return cfg.evolve(
        j=j,
        s=cfg.s if outcome.s is None else set_bit(cfg.s, cfg.j, outcome.s),
        i=0 if outcome.flip_control else 1,
    )


def _options(
    written: Optional[int], current: int, matched: Optional[int], domain: Iterable[int]
) -> Tuple[int, ...]:
    """Values a field could have held before a rule produced ``current``."""
    if written is None:
        return (current,)
    if current != written:
        return ()
    return (matched,) if matched is not None else tuple(domain)


def _preimage_candidates(
    rule: LocalRule, target: Configuration, geometry: LatticeGeometry
) -> Iterator[Configuration]:
    outcome, match = rule.outcome, rule.match
    if rule.phase is Phase.COMPUTATION:
        if target.i != (1 if outcome.flip_control else 0):
            return
        k = geometry.onboard_step(target.k, -outcome.dk)
        registers = range(geometry.register_dim)
        for p, tk, l1, l2 in itertools.product(
            _options(outcome.p, target.p, match.p, range(geometry.head_states)),
            _options(outcome.t, int(target.t[k]), match.t, (0, 1)),
            _options(outcome.l1, target.l1, match.l1, registers),
            _options(outcome.l2, target.l2, match.l2, registers),
        ):
            yield target.evolve(p=p, k=k, t=set_bit(target.t, k, tk), l1=l1, l2=l2, i=0)
        return
    if target.i != (0 if outcome.flip_control else 1):
        return
    if geometry.cyclic:
        j = (target.j - outcome.dj) % geometry.env_size
    else:
        j = target.j - outcome.dj
        if not 0 <= j < geometry.env_size:
            return
    for sj in _options(outcome.s, int(target.s[j]), match.s, (0, 1)):
        yield target.evolve(j=j, s=set_bit(target.s, j, sj), i=1)


class StepOperator(BaseModel):
    """T = T_c + T_a realized rule by rule on sparse states.

    Build instances with :func:`compile_ruleset`, which checks every rule first.
    """

    model_config = ConfigDict(frozen=True)

    geometry: LatticeGeometry
    computation: RuleSet
    action: RuleSet
    prune_threshold: float = Field(
        PRUNE_THRESHOLD, gt=0, description="Smallest matrix element kept"
    )

    _indices: Dict[Phase, _RuleIndex] = PrivateAttr(default_factory=dict)
    _writes: Optional[_WriteIndex] = PrivateAttr(default=None)

    def model_post_init(self, __context: Any) -> None:
        self._indices = {
            Phase.COMPUTATION: _RuleIndex(self.computation.rules),
            Phase.ACTION: _RuleIndex(self.action.rules),
        }
        self._writes = _WriteIndex(self.rules)

    @property
    def is_empty(self) -> bool:
        return not self.computation.rules and not self.action.rules

    @property
    def rules(self) -> List[LocalRule]:
        return [*self.computation.rules, *self.action.rules]

    def computation_part(self) -> "StepOperator":
        """T_c alone."""
        return StepOperator(
            geometry=self.geometry,
            computation=self.computation,
            action=RuleSet.empty(Phase.ACTION),
            prune_threshold=self.prune_threshold,
        )

    def action_part(self) -> "StepOperator":
        """T_a alone."""
        return StepOperator(
            geometry=self.geometry,
            computation=RuleSet.empty(Phase.COMPUTATION),
            action=self.action,
            prune_threshold=self.prune_threshold,
        )

    def images(self, cfg: Configuration) -> Dict[Configuration, complex]:
        """Column of T at ``cfg``: image configuration -> <image|T|cfg>."""
        phase = Phase.COMPUTATION if cfg.i == 0 else Phase.ACTION
        column: Dict[Configuration, complex] = {}
        for rule in self._indices[phase].firing(_context(cfg)):
            image = _fire(rule, cfg, self.geometry)
            if image is not None:
                column[image] = column.get(image, 0j) + rule.amplitude
        return {
            image: amp
            for image, amp in column.items()
            if abs(amp) >= self.prune_threshold
        }

    def preimages(self, cfg: Configuration) -> Dict[Configuration, complex]:
        """Row of T at ``cfg``: source configuration -> <cfg|T|source>."""
        row: Dict[Configuration, complex] = {}
        for rule in self._writes.producing(cfg):
            for candidate in _preimage_candidates(rule, cfg, self.geometry):
                if (
                    _matches(rule, candidate)
                    and _fire(rule, candidate, self.geometry) == cfg
                ):
                    row[candidate] = row.get(candidate, 0j) + rule.amplitude
        return {
            source: amp
            for source, amp in row.items()
            if abs(amp) >= self.prune_threshold
        }

    def apply(self, state: QuantumState) -> QuantumState:
        """T|state>, unnormalized."""
        result: Dict[Configuration, complex] = {}
        for cfg, amp in state.amplitudes.items():
            for image, element in self.images(cfg).items():
                result[image] = result.get(image, 0j) + element * amp
        return QuantumState.build(state.geometry, result, self.prune_threshold)

    def apply_adjoint(self, state: QuantumState) -> QuantumState:
        """T^dagger|state>, unnormalized."""
        result: Dict[Configuration, complex] = {}
        for cfg, amp in state.amplitudes.items():
            for source, element in self.preimages(cfg).items():
                result[source] = result.get(source, 0j) + element.conjugate() * amp
        return QuantumState.build(state.geometry, result, self.prune_threshold)


def _reject(rule: LocalRule, position: int, condition: str) -> CompileError:
    return CompileError(
        f"Rule {position} ({rule.describe()}) violates {condition}",
        rule=position,
        condition=condition,
    )


def _check_ranges(rule: LocalRule, position: int, geometry: LatticeGeometry) -> None:
    limits = {
        "p": geometry.head_states,
        "l1": geometry.register_dim,
        "l2": geometry.register_dim,
    }
    for part in (rule.match, rule.outcome):
        for name, limit in limits.items():
            value = getattr(part, name)
            if value is not None and value >= limit:
                raise CompileError(
                    f"Rule {position} ({rule.describe()}) uses {name}={value}, "
                    f"outside [0, {limit})",
                    rule=position,
                )


def _check_rule(
    rule: LocalRule, position: int, geometry: LatticeGeometry, strict_memory: bool
) -> None:
    match, outcome = rule.match, rule.outcome
    if abs(outcome.dk) > 1 or abs(outcome.dj) > 1:
        raise _reject(rule, position, "locality: head displacement must be -1, 0 or +1")
    if rule.phase is Phase.COMPUTATION:
        if outcome.s is not None or outcome.dj != 0:
            raise _reject(
                rule,
                position,
                "environment diagonality of computation steps: "
                "the environment qubit and robot position must not change",
            )
    else:
        if match.p is not None or match.t is not None:
            raise _reject(
                rule,
                position,
                "on-board invariance of action steps: p and t cannot be read",
            )
        if outcome.p is not None or outcome.t is not None or outcome.dk != 0:
            raise _reject(
                rule,
                position,
                "on-board invariance of action steps: h2 must not change",
            )
        if outcome.l1 is not None or outcome.l2 is not None:
            raise _reject(
                rule,
                position,
                "register diagonality of action steps (no-cloning): "
                "output and memory registers must not change",
            )
        if strict_memory and match.l1 is not None:
            raise _reject(
                rule, position, "strict memory mode: action rules cannot read l1"
            )
    _check_ranges(rule, position, geometry)


def _overlapping(first: ContextKey, second: ContextKey) -> bool:
    """Some context satisfies both matches; ``None`` is a wildcard."""
    return all(a is None or b is None or a == b for a, b in zip(first, second))


def compile_ruleset(
    computation: RuleSet,
    action: RuleSet,
    geometry: LatticeGeometry,
    strict_memory: Optional[bool] = None,
    config: Optional[Config] = None,
) -> StepOperator:
    """Check rule sets against the phase invariants and assemble T = T_c + T_a.

    Args:
        computation: Rules gated on control 0
        action: Rules gated on control 1
        geometry: Lattice the operator acts on
        strict_memory: Forbid action rules from reading l1; defaults to configuration

    Returns:
        StepOperator: The compiled operator

    Raises:
        CompileError: Naming the offending rule and the violated condition
    """
    config = config or get_config()
    if strict_memory is None:
        strict_memory = config.validators.strict_memory
    for expected, ruleset in ((Phase.COMPUTATION, computation), (Phase.ACTION, action)):
        if ruleset.phase is not expected:
            raise CompileError(
                f"Expected a {expected.value} rule set, got {ruleset.phase.value}"
            )
        by_outcome: Dict[Tuple[Any, ...], List[Tuple[int, ContextKey]]] = {}
        for position, rule in enumerate(ruleset.rules):
            _check_rule(rule, position, geometry, strict_memory)
            siblings = by_outcome.setdefault(rule.outcome.key, [])
            for earlier, match in siblings:
                if _overlapping(match, rule.match.key):
                    raise CompileError(
                        f"Rules {earlier} and {position} ({rule.describe()}) share "
                        "a context and have the same outcome",
                        rule=position,
                        earlier=earlier,
                        condition="duplicate",
                    )
            siblings.append((position, rule.match.key))
    logger.info(
        "ruleset_compiled",
        computation_rules=len(computation),
        action_rules=len(action),
        strict_memory=strict_memory,
    )
    return StepOperator(
        geometry=geometry,
        computation=computation,
        action=action,
        prune_threshold=config.basis.prune_threshold,
    )


def enumerate_reachable(
    initial_support: Iterable[Configuration],
    operator: StepOperator,
    max_dim: Optional[int] = None,
    config: Optional[Config] = None,
) -> BasisEnumeration:
    """Smallest basis containing ``initial_support`` closed under T and T^dagger.

    Raises:
        CapacityError: When the closure would exceed ``max_dim``
    """
    config = config or get_config()
    max_dim = max_dim or config.basis.max_dim
    geometry = operator.geometry
    seen = {check_configuration(geometry, cfg) for cfg in initial_support}
    if len(seen) > max_dim:
        raise CapacityError(
            f"Initial support of {len(seen)} configurations exceeds max_dim={max_dim}",
            max_dim=max_dim,
        )
    frontier = deque(sorted(seen))
    while frontier:
        cfg = frontier.popleft()
        for neighbour in itertools.chain(operator.images(cfg), operator.preimages(cfg)):
            if neighbour in seen:
                continue
            if len(seen) >= max_dim:
                raise CapacityError(
                    f"Reachable closure exceeds max_dim={max_dim}", max_dim=max_dim
                )
            seen.add(neighbour)
            frontier.append(neighbour)
    basis = BasisEnumeration.from_configurations(geometry, seen)
    logger.info("basis_enumerated", size=len(basis), max_dim=max_dim)
    return basis


def full_basis(
    geometry: LatticeGeometry,
    max_dim: Optional[int] = None,
    config: Optional[Config] = None,
) -> BasisEnumeration:
    """Every configuration of a small geometry, in basis order.

    Raises:
        CapacityError: When the geometry has more than ``max_dim`` configurations
    """
    config = config or get_config()
    max_dim = max_dim or config.basis.max_dim
    if geometry.dimension > max_dim:
        raise CapacityError(
            f"Full basis of {geometry.dimension} configurations exceeds "
            f"max_dim={max_dim}",
            max_dim=max_dim,
        )
    registers = range(geometry.register_dim)
    configurations = [
        Configuration(p=p, k=k, t=t, l1=l1, l2=l2, i=i, j=j, s=s)
        for p, k, t, l1, l2, i, j, s in itertools.product(
            range(geometry.head_states),
            range(geometry.onboard_size),
            _bit_strings(geometry.onboard_size),
            registers,
            registers,
            (0, 1),
            range(geometry.env_size),
            _bit_strings(geometry.env_size),
        )
    ]
    return BasisEnumeration(geometry=geometry, configurations=tuple(configurations))


def _bit_strings(length: int) -> List[str]:
    return ["".join(bits) for bits in itertools.product("01", repeat=length)]


def _realize(operator: StepOperator, basis: BasisEnumeration) -> SparseOperator:
    rows: List[int] = []
    cols: List[int] = []
    data: List[complex] = []
    for column, cfg in enumerate(basis.configurations):
        for image, amp in operator.images(cfg).items():
            row = basis.find(image)
            if row is None:
                raise BasisClosureError(
                    f"Transition {cfg} -> {image} leaves the basis",
                    source=cfg.to_text(),
                    target=image.to_text(),
                )
            rows.append(row)
            cols.append(column)
            data.append(amp)
        for source in operator.preimages(cfg):
            if source not in basis:
                raise BasisClosureError(
                    f"Adjoint transition {cfg} -> {source} leaves the basis",
                    source=cfg.to_text(),
                    target=source.to_text(),
                )
    size = len(basis)
    matrix = sparse.csr_matrix(
        (np.asarray(data, dtype=complex), (rows, cols)), shape=(size, size)
    )
    return SparseOperator(basis=basis, matrix=matrix)


def to_matrix(
    operator: StepOperator,
    basis: BasisEnumeration,
    check: Optional[bool] = None,
    config: Optional[Config] = None,
) -> SparseOperator:
    """Realize ``operator`` as a sparse matrix over a closed basis.

    When ``check`` (default: ``validators.check_on_compile``) is set, the computation
    and action parts are run through every structural validator.

    Raises:
        BasisClosureError: Naming a transition that escapes ``basis``
        CompileError: When check-on-compile finds violations
    """
    config = config or get_config()
    if operator.geometry != basis.geometry:
        raise CompileError("Operator and basis belong to different geometries")
    if check is None:
        check = config.validators.check_on_compile
    matrix = _realize(operator, basis)
    if check:
        reports = validate_operator(
            _realize(operator.action_part(), basis),
            _realize(operator.computation_part(), basis),
            config=config,
        )
        if reports:
            first = reports[0]
            raise CompileError(
                f"{len(reports)} structural violation(s); first: {first.condition} at "
                f"{first.column} -> {first.row}: {first.explanation}",
                violations=len(reports),
            )
    logger.debug("operator_realized", dimension=matrix.dimension, nnz=matrix.nnz)
    return matrix
