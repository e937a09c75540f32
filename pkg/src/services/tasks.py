"""Built-in robot tasks and the classical trace interpreter.

Every task shares one computation phase: a lookup-table update of the output and
memory registers performed by a sweep of h2 around the on-board ring, ending with
the 0->1 control flip. The output value selects the action rule family. Tasks that
touch a single site use four codes (idle, rotate, search-step, complete); tasks that
sweep a window of sites compile an itinerary whose codes also carry the bits read
so far.
"""

import itertools
import math
from functools import partial
from typing import (
    Any,
    Callable,
    Dict,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator
from scipy import sparse
from structlog import get_logger

from ..config import Config
from ..models.core import (
    Boundary,
    Configuration,
    LatticeGeometry,
    Phase,
    make_configuration,
)
from ..models.errors import CompileError, NondeterminismError, TaskError
from ..models.rules import (
    LocalRule,
    LookupTable,
    RuleMatch,
    RuleOutcome,
    RuleSet,
    gated_table,
)
from ..models.state import PRUNE_THRESHOLD, QuantumState
from .dynamics import EvolutionResult
from .operators import StepOperator, compile_ruleset

logger = get_logger(__name__)

IDLE, ROTATE, SEARCH_STEP, COMPLETE = 0, 1, 2, 3
SINGLE_SITE_CODES = 4
HEAD_STATES = 3
DEFAULT_ONBOARD_SIZE = 3

Bits = Tuple[Tuple[str, int], ...]
Site = Tuple[int, int]


class TaskSpec(BaseModel):
    """A named scenario: rules, geometry, start configuration and completion codes."""

    model_config = ConfigDict(frozen=True)

    name: str
    description: str = ""
    geometry: LatticeGeometry
    computation: RuleSet
    action: RuleSet
    initial: Configuration
    final_outputs: Tuple[int, ...] = Field(
        default=(), description="Output-register codes that flag completion"
    )
    window: Tuple[int, ...] = Field(
        default=(), description="Environment sites the task transforms"
    )
    parameters: Dict[str, Any] = Field(default_factory=dict)

    _operator: Optional[StepOperator] = PrivateAttr(default=None)

    @model_validator(mode="after")
    def _check_outputs(self) -> "TaskSpec":
        for code in self.final_outputs:
            if not 0 <= code < self.geometry.register_dim:
                raise ValueError(
                    f"final output {code} is outside [0, {self.geometry.register_dim})"
                )
        return self

    def step_operator(self, config: Optional[Config] = None) -> StepOperator:
        """Compiled T = T_c + T_a, built once."""
        if self._operator is None:
            self._operator = compile_ruleset(
                self.computation, self.action, self.geometry, config=config
            )
        return self._operator

    def configuration_with(self, env: str, **fields: Any) -> Configuration:
        """The start configuration with another environment string (and fields)."""
        values = {**self.initial.model_dump(), "s": env, **fields}
        return make_configuration(self.geometry, **values)

    def initial_state(self) -> QuantumState:
        return QuantumState.basis_state(self.geometry, self.initial)

    def superposition(self, amplitudes: Mapping[str, complex]) -> QuantumState:
        """Normalized sum of start configurations over environment strings."""
        state = QuantumState.from_amplitudes(
            self.geometry,
            {self.configuration_with(env): amp for env, amp in amplitudes.items()},
        )
        return state.normalize()

    def summary(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "geometry": self.geometry.model_dump(mode="json"),
            "initial": self.initial.to_text(),
            "final_outputs": list(self.final_outputs),
            "window": list(self.window),
            "computation_rules": len(self.computation),
            "action_rules": len(self.action),
            "parameters": self.parameters,
        }


class ClassicalTrace(BaseModel):
    """Single-image path of configurations from a start configuration."""

    configurations: List[Configuration]
    amplitudes: List[complex] = Field(default_factory=list)
    terminated: bool = False
    truncated: bool = Field(
        False, description="Stopped at max_steps without completing"
    )
    stalled: bool = Field(False, description="T annihilated the last configuration")

    @property
    def steps(self) -> int:
        return len(self.configurations) - 1

    @property
    def final(self) -> Configuration:
        return self.configurations[-1]

    @property
    def phases(self) -> List[Phase]:
        """Phase of each step taken, read from the control bit before it."""
        return [
            Phase.COMPUTATION if cfg.i == 0 else Phase.ACTION
            for cfg in self.configurations[:-1]
        ]


class EnvironmentMap(BaseModel):
    """Net classical transformation of a task on its window of sites."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    sites: Tuple[int, ...]
    matrix: sparse.csr_matrix = Field(
        ..., description="Column = input bits, row = output bits"
    )
    robot: str = Field(
        ..., description="Final robot configuration shared by every input"
    )

    @property
    def labels(self) -> List[str]:
        width = len(self.sites)
        return ["".join(bits) for bits in itertools.product("01", repeat=width)]

    def image(self, bits: str) -> Tuple[str, complex]:
        """Output window bits and amplitude for input window ``bits``."""
        column = self.matrix[:, int(bits, 2)].tocoo()
        if column.nnz != 1:
            raise TaskError(f"Window input {bits} has {column.nnz} images")
        row = int(column.row[0])
        return format(row, f"0{len(self.sites)}b"), complex(column.data[0])

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


def _computation_rule(
    match: Dict[str, Any], outcome: Dict[str, Any], label: str
) -> LocalRule:
    return LocalRule(
        phase=Phase.COMPUTATION,
        match=RuleMatch(**match),
        outcome=RuleOutcome(**outcome),
        label=label,
    )


def _action_rule(
    match: Dict[str, Any], outcome: Dict[str, Any], label: str, amplitude: complex = 1.0
) -> LocalRule:
    return LocalRule(
        phase=Phase.ACTION,
        match=RuleMatch(**match),
        outcome=RuleOutcome(**outcome),
        amplitude=amplitude,
        label=label,
    )


def compile_lookup_computation(
    table: LookupTable, geometry: LatticeGeometry
) -> RuleSet:
    """Computation rules realizing |l2>o|l1>m|0>c -> |l3>o|l2>m|1>c.

    h2 starts at k=0 in state p=0 over an all-zero ring. At k=0 it updates the
    registers from (l2, l1, s), leaves a marker qubit and walks the ring in state 1;
    back on the marker it erases it (state 2) and then returns to state 0 while
    flipping the control. The sweep takes N + 2 steps and restores the frame.

    Raises:
        CompileError: If the table is not total, its L differs from the geometry's,
            or fewer than three head states are available
    """
    size = geometry.register_dim
    if table.register_dim != size:
        raise CompileError(
            f"Lookup table has L={table.register_dim}, geometry has L={size}"
        )
    missing = table.missing()
    if missing:
        raise CompileError(
            f"Lookup table is not total: {len(missing)} entries missing, "
            f"first (l2, l1, s)={missing[0]}",
            missing=len(missing),
        )
    if geometry.head_states < HEAD_STATES:
        raise CompileError(
            f"Lookup computation needs {HEAD_STATES} head states, "
            f"geometry has {geometry.head_states}"
        )

    def update(l2: int, l1: Optional[int], s: Optional[int], l3: int) -> LocalRule:
        memory = "*" if l1 is None else l1
        read = "*" if s is None else s
        return _computation_rule(
            {"p": 0, "t": 0, "l2": l2, "l1": l1, "s": s},
            {"p": 1, "t": 1, "l2": l3, "l1": l2, "dk": 1},
            f"update[l2={l2},l1={memory},s={read}]",
        )

    rules: List[LocalRule] = []
    for a in range(size):
        values = {(b, x): table.lookup(a, b, x) for b in range(size) for x in (0, 1)}
        if len(set(values.values())) == 1:
            rules.append(update(a, None, None, values[(0, 0)]))
        elif all(values[(b, 0)] == values[(b, 1)] for b in range(size)):
            rules.extend(update(a, b, None, values[(b, 0)]) for b in range(size))
        elif all(values[(b, x)] == values[(0, x)] for b, x in values):
            rules.extend(update(a, None, x, values[(0, x)]) for x in (0, 1))
        else:
            rules.extend(update(a, b, x, l3) for (b, x), l3 in values.items())
    rules.extend(
        [
            _computation_rule({"p": 1, "t": 0}, {"dk": 1}, "sweep"),
            _computation_rule({"p": 1, "t": 1}, {"p": 2, "t": 0}, "erase-marker"),
            _computation_rule({"p": 2}, {"p": 0, "flip_control": True}, "hand-over"),
        ]
    )
    return RuleSet(phase=Phase.COMPUTATION, rules=rules)


def rotation_matrix(phi: float) -> np.ndarray:
    """R(phi) = [[cos phi/2, -sin phi/2], [sin phi/2, cos phi/2]]."""
    c, s = math.cos(phi / 2), math.sin(phi / 2)
    return np.array([[c, -s], [s, c]])


def _completion_rule(code: int, drift: int) -> LocalRule:
    return _action_rule(
        {"l2": code}, {"dj": drift, "flip_control": True}, f"complete-drift[{drift:+d}]"
    )


def _check_drift(drift: int) -> None:
    if drift not in (-1, 0, 1):
        raise TaskError(f"Completion drift must be -1, 0 or +1, got {drift}")


def _single_site_task(
    name: str,
    description: str,
    action_rules: List[LocalRule],
    transitions: Dict[int, Tuple[int, int]],
    env: str,
    start: int,
    boundary: Union[Boundary, str],
    onboard_size: int,
    drift: int,
    parameters: Dict[str, Any],
) -> TaskSpec:
    _check_drift(drift)
    geometry = LatticeGeometry(
        env_size=len(env),
        env_boundary=Boundary(boundary),
        onboard_size=onboard_size,
        head_states=HEAD_STATES,
        register_dim=SINGLE_SITE_CODES,
    )
    computation = compile_lookup_computation(
        gated_table(SINGLE_SITE_CODES, transitions), geometry
    )
    action = RuleSet(
        phase=Phase.ACTION, rules=[*action_rules, _completion_rule(COMPLETE, drift)]
    )
    initial = make_configuration(
        geometry, p=0, k=0, t="0" * onboard_size, l1=IDLE, l2=IDLE, i=0, j=start, s=env
    )
    return TaskSpec(
        name=name,
        description=description,
        geometry=geometry,
        computation=computation,
        action=action,
        initial=initial,
        final_outputs=(COMPLETE,),
        window=(start,),
        parameters={**parameters, "env": env, "start": start, "drift": drift},
    )


def _rotation_rules(phi: float, conditional: bool) -> List[LocalRule]:
    matrix = rotation_matrix(phi)
    rules = []
    for x in (0, 1):
        if conditional and x == 1:
            rules.append(
                _action_rule(
                    {"l2": ROTATE, "s": 1},
                    {"dj": 1, "flip_control": True},
                    "step-past-1",
                )
            )
            continue
        for y in (0, 1):
            amplitude = float(matrix[y, x])
            if abs(amplitude) < PRUNE_THRESHOLD:
                continue
            rules.append(
                _action_rule(
                    {"l2": ROTATE, "s": x},
                    {"s": y, "flip_control": True},
                    f"rotate[{x}->{y}]",
                    amplitude,
                )
            )
    return rules


_ROTATE_TRANSITIONS = {
    IDLE: (ROTATE, ROTATE),
    ROTATE: (COMPLETE, COMPLETE),
    COMPLETE: (COMPLETE, COMPLETE),
}


def make_rotate_task(
    phi: float,
    env: str = "0000",
    start: int = 0,
    boundary: Union[Boundary, str] = Boundary.CYCLIC,
    onboard_size: int = DEFAULT_ONBOARD_SIZE,
    drift: int = 1,
) -> TaskSpec:
    """Rotate the qubit under the robot by ``phi`` in one action step, then complete."""
    return _single_site_task(
        "rotate",
        "Rotate the qubit under the robot by phi; needs no observation",
        _rotation_rules(phi, conditional=False),
        _ROTATE_TRANSITIONS,
        env,
        start,
        boundary,
        onboard_size,
        drift,
        {"phi": phi},
    )


def make_conditional_rotate_task(
    phi: float,
    env: str = "0000",
    start: int = 0,
    boundary: Union[Boundary, str] = Boundary.CYCLIC,
    onboard_size: int = DEFAULT_ONBOARD_SIZE,
    drift: int = 1,
) -> TaskSpec:
    """Rotate the qubit by ``phi`` only if it is 0; on a 1 step to the next site."""
    return _single_site_task(
        "conditional_rotate",
        "Rotate the qubit by phi if it reads 0, otherwise move one site right",
        _rotation_rules(phi, conditional=True),
        _ROTATE_TRANSITIONS,
        env,
        start,
        boundary,
        onboard_size,
        drift,
        {"phi": phi},
    )


_SEARCH_TRANSITIONS = {
    IDLE: (SEARCH_STEP, SEARCH_STEP),
    SEARCH_STEP: (COMPLETE, COMPLETE),
    COMPLETE: (COMPLETE, COMPLETE),
}


def make_search_zeros_task(
    a: complex,
    b: complex,
    env: str = "0001",
    start: int = 0,
    boundary: Union[Boundary, str] = Boundary.CYCLIC,
    onboard_size: int = DEFAULT_ONBOARD_SIZE,
    drift: int = 1,
) -> TaskSpec:
    """Walk right over 0s, rewriting each to a|0> + b|1>, until a 1 is read.

    Raises:
        TaskError: If |a|^2 + |b|^2 != 1
    """
    a, b = complex(a), complex(b)
    if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > 1e-12:
        raise TaskError(f"|a|^2 + |b|^2 must be 1, got {abs(a) ** 2 + abs(b) ** 2}")
    rules = [
        _action_rule(
            {"l2": SEARCH_STEP, "s": 0}, {"s": y, "dj": 1}, f"search[0->{y}]", amp
        )
        for y, amp in ((0, a), (1, b))
        if abs(amp) >= PRUNE_THRESHOLD
    ]
    rules.append(
        _action_rule(
            {"l2": SEARCH_STEP, "s": 1}, {"flip_control": True}, "search-found-1"
        )
    )
    return _single_site_task(
        "search_zeros",
        "Move along a chain of 0s rewriting each to a|0> + b|1> until a 1 is found",
        rules,
        _SEARCH_TRANSITIONS,
        env,
        start,
        boundary,
        onboard_size,
        drift,
        {"a": [a.real, a.imag], "b": [b.real, b.imag]},
    )


def make_lookup_task(
    table: LookupTable,
    env: str = "0",
    start: int = 0,
    boundary: Union[Boundary, str] = Boundary.CYCLIC,
    onboard_size: int = DEFAULT_ONBOARD_SIZE,
) -> TaskSpec:
    """A custom lookup computation whose action only hands control back."""
    geometry = LatticeGeometry(
        env_size=len(env),
        env_boundary=Boundary(boundary),
        onboard_size=onboard_size,
        head_states=HEAD_STATES,
        register_dim=table.register_dim,
    )
    action = RuleSet(
        phase=Phase.ACTION,
        rules=[_action_rule({}, {"flip_control": True}, "hand-back")],
    )
    initial = make_configuration(
        geometry, p=0, k=0, t="0" * onboard_size, l1=0, l2=0, i=0, j=start, s=env
    )
    return TaskSpec(
        name="lookup",
        description="Register update by a user lookup table",
        geometry=geometry,
        computation=compile_lookup_computation(table, geometry),
        action=action,
        initial=initial,
        parameters={"env": env, "start": start},
    )


def make_walk_task(
    env_size: int = 64,
    start: int = 0,
    boundary: Union[Boundary, str] = Boundary.CYCLIC,
) -> TaskSpec:
    """Robot that only ever steps right: T is a shift along a distinct path."""
    geometry = LatticeGeometry(
        env_size=env_size,
        env_boundary=Boundary(boundary),
        onboard_size=1,
        head_states=1,
        register_dim=1,
    )
    action = RuleSet(
        phase=Phase.ACTION, rules=[_action_rule({}, {"dj": 1}, "step-right")]
    )
    initial = make_configuration(
        geometry, p=0, k=0, t="0", l1=0, l2=0, i=1, j=start, s="0" * env_size
    )
    return TaskSpec(
        name="walk",
        description="Free quantum walk of the robot on a clean lattice",
        geometry=geometry,
        computation=RuleSet.empty(Phase.COMPUTATION),
        action=action,
        initial=initial,
        parameters={"env_size": env_size, "start": start},
    )


class _Visit(NamedTuple):
    """One action step of a sweep."""

    site: int
    move: int
    observe: Optional[Callable[[Dict[str, int], int], None]] = None
    write: Optional[Callable[[Mapping[str, int], int], int]] = None
    forget: Tuple[str, ...] = ()
    clear: bool = False


def _store(slot: str, bits: Dict[str, int], x: int) -> None:
    bits[slot] = x


def _or_into(slot: str, bits: Dict[str, int], x: int) -> None:
    bits[slot] = bits.get(slot, 0) | x


def _xor_with(slot: str, bits: Mapping[str, int], x: int) -> int:
    return x ^ bits[slot]


def _xor_with_pattern(slot: str, target: int, bits: Mapping[str, int], x: int) -> int:
    return x ^ bits[slot] ^ target


def _move_in_if_free(slot: str, bits: Mapping[str, int], x: int) -> int:
    return bits[slot] if bits["occ"] == 0 else x


def _vacate_if_free(bits: Mapping[str, int], x: int) -> int:
    return 0 if bits["occ"] == 0 else x


def _reading(site: int, slot: str) -> Dict[str, Any]:
    return {"site": site, "observe": partial(_store, slot)}


def _writing(site: int, slot: str, write: Callable[..., int]) -> Dict[str, Any]:
    return {"site": site, "write": partial(write, slot), "forget": (slot,)}


class _Itinerary:
    """Codes and rules for a fixed sequence of visits.

    A code stands for (visit index, bits carried). The computation at a visit reads
    the qubit there and advances the code; the action writes, moves and hands back.
    A final parking visit drops every carried bit.
    """

    def __init__(self, visits: Sequence[_Visit]):
        last = visits[-1]
        self.visits = [*visits, _Visit(site=last.site, move=0, clear=True)]
        self.keys: List[Tuple[int, Bits]] = []
        self.transitions: Dict[int, Tuple[int, int]] = {
            IDLE: (self._code(0, {}, 0), self._code(0, {}, 1))
        }
        parked: List[int] = []
        code = 1
        while code <= len(self.keys):
            pc, bits = self.keys[code - 1]
            if pc == len(self.visits) - 1:
                parked.append(code)
            else:
                forget = self.visits[pc].forget
                carried = {slot: value for slot, value in bits if slot not in forget}
                self.transitions[code] = (
                    self._code(pc + 1, carried, 0),
                    self._code(pc + 1, carried, 1),
                )
            code += 1
        self.complete = len(self.keys) + 1
        for code in (*parked, self.complete):
            self.transitions[code] = (self.complete, self.complete)

    @property
    def register_dim(self) -> int:
        return self.complete + 1

    def _code(self, pc: int, carried: Dict[str, int], x: int) -> int:
        visit = self.visits[pc]
        bits = {} if visit.clear else dict(carried)
        if visit.observe is not None:
            visit.observe(bits, x)
        key = (pc, tuple(sorted(bits.items())))
        if key not in self.keys:
            self.keys.append(key)
        return self.keys.index(key) + 1

    def action_rules(self, drift: int) -> List[LocalRule]:
        rules = []
        for code, (pc, bits) in enumerate(self.keys, start=1):
            visit = self.visits[pc]
            if visit.write is None:
                rules.append(
                    _action_rule(
                        {"l2": code},
                        {"dj": visit.move, "flip_control": True},
                        f"visit{pc}:{code}",
                    )
                )
                continue
            for x in (0, 1):
                y = visit.write(dict(bits), x)
                rules.append(
                    _action_rule(
                        {"l2": code, "s": x},
                        {"s": y, "dj": visit.move, "flip_control": True},
                        f"visit{pc}:{code}[{x}->{y}]",
                    )
                )
        rules.append(_completion_rule(self.complete, drift))
        return rules


def _sites(first: int, last: int, geometry_size: int, name: str) -> List[int]:
    if not 0 <= first <= last < geometry_size:
        raise TaskError(
            f"{name} ({first}, {last}) must satisfy "
            f"0 <= first <= last < {geometry_size}"
        )
    return list(range(first, last + 1))


def _path(start: int, stop: int, direction: int) -> List[int]:
    return list(range(start, stop + direction, direction))


def _with_moves(visits: List[Dict[str, Any]], direction: int) -> List[_Visit]:
    """Unit moves along the sweep, with a final move of 0 for a turnaround."""
    return [
        _Visit(move=direction if position < len(visits) - 1 else 0, **visit)
        for position, visit in enumerate(visits)
    ]


def _itinerary_task(
    name: str,
    description: str,
    visits: List[_Visit],
    env: str,
    boundary: Union[Boundary, str],
    onboard_size: int,
    drift: int,
    window: Sequence[int],
    parameters: Dict[str, Any],
) -> TaskSpec:
    _check_drift(drift)
    itinerary = _Itinerary(visits)
    geometry = LatticeGeometry(
        env_size=len(env),
        env_boundary=Boundary(boundary),
        onboard_size=onboard_size,
        head_states=HEAD_STATES,
        register_dim=itinerary.register_dim,
    )
    computation = compile_lookup_computation(
        gated_table(itinerary.register_dim, itinerary.transitions), geometry
    )
    action = RuleSet(phase=Phase.ACTION, rules=itinerary.action_rules(drift))
    initial = make_configuration(
        geometry,
        p=0,
        k=0,
        t="0" * onboard_size,
        l1=IDLE,
        l2=IDLE,
        i=0,
        j=visits[0].site,
        s=env,
    )
    logger.debug(
        "itinerary_compiled",
        task=name,
        visits=len(itinerary.visits),
        register_dim=itinerary.register_dim,
    )
    return TaskSpec(
        name=name,
        description=description,
        geometry=geometry,
        computation=computation,
        action=action,
        initial=initial,
        final_outputs=(itinerary.complete,),
        window=tuple(sorted(window)),
        parameters={**parameters, "env": env, "drift": drift},
    )


def _two_regions(
    region: Site, copy_region: Site, env: str
) -> Tuple[List[int], List[int], int]:
    sources = _sites(*region, len(env), "region")
    targets = _sites(*copy_region, len(env), "copy_region")
    if len(sources) != len(targets):
        raise TaskError("region and copy_region must have equal length")
    if set(sources) & set(targets):
        raise TaskError(f"region {region} overlaps copy_region {copy_region}")
    direction = 1 if targets[0] > sources[-1] else -1
    return sources, targets, direction


def make_copy_task(
    region: Site = (0, 1),
    copy_region: Site = (2, 3),
    env: Optional[str] = None,
    boundary: Union[Boundary, str] = Boundary.CYCLIC,
    onboard_size: int = DEFAULT_ONBOARD_SIZE,
    drift: int = 1,
) -> TaskSpec:
    """XOR each region qubit into the matching copy-region qubit in one sweep.

    On basis inputs with a clean copy region this copies the region; by linearity
    sum c_x |x>|0> becomes sum c_x |x>|x>.

    Raises:
        TaskError: If the regions overlap, differ in length or leave the lattice
    """
    env = env or "0" * (max(*region, *copy_region) + 1)
    sources, targets, direction = _two_regions(region, copy_region, env)
    near = sources[0] if direction > 0 else sources[-1]
    far = targets[-1] if direction > 0 else targets[0]
    plan: List[Dict[str, Any]] = []
    for site in _path(near, far, direction):
        if site in sources:
            plan.append(_reading(site, f"x{sources.index(site)}"))
        elif site in targets:
            slot = f"x{targets.index(site)}"
            plan.append(_writing(site, slot, _xor_with))
        else:
            plan.append({"site": site})
    return _itinerary_task(
        "copy",
        "Copy a region into a clean copy region relative to the computational basis",
        _with_moves(plan, direction),
        env,
        boundary,
        onboard_size,
        drift,
        [*sources, *targets],
        {"region": list(region), "copy_region": list(copy_region)},
    )


def make_cleanup_task(
    region: Site = (0, 1),
    pattern: str = "00",
    copy_region: Site = (2, 3),
    env: Optional[str] = None,
    boundary: Union[Boundary, str] = Boundary.CYCLIC,
    onboard_size: int = DEFAULT_ONBOARD_SIZE,
    drift: int = 1,
) -> TaskSpec:
    """Reset the region to ``pattern``, keeping its old contents in the copy region.

    The first sweep XORs the region into the copy region; the sweep back reads the
    copy region and XORs it, together with the pattern, into the region.
    """
    env = env or "0" * (max(*region, *copy_region) + 1)
    sources, targets, direction = _two_regions(region, copy_region, env)
    if len(pattern) != len(sources) or set(pattern) - {"0", "1"}:
        raise TaskError(f"pattern {pattern!r} must be {len(sources)} bits")
    near = sources[0] if direction > 0 else sources[-1]
    far = targets[-1] if direction > 0 else targets[0]
    outward: List[Dict[str, Any]] = []
    for site in _path(near, far, direction):
        if site in sources:
            outward.append(_reading(site, f"x{sources.index(site)}"))
        elif site in targets:
            slot = f"x{targets.index(site)}"
            outward.append(_writing(site, slot, _xor_with))
        else:
            outward.append({"site": site})
    back: List[Dict[str, Any]] = []
    for site in _path(far, near, -direction):
        if site in targets:
            back.append(_reading(site, f"z{targets.index(site)}"))
        elif site in sources:
            index = sources.index(site)
            slot = f"z{index}"
            back.append(
                {
                    "site": site,
                    "write": partial(_xor_with_pattern, slot, int(pattern[index])),
                    "forget": (slot,),
                }
            )
        else:
            back.append({"site": site})
    return _itinerary_task(
        "cleanup",
        "Reset a region to a fixed pattern, keeping the old contents in a copy region",
        [*_with_moves(outward, direction), *_with_moves(back, -direction)],
        env,
        boundary,
        onboard_size,
        drift,
        [*sources, *targets],
        {"region": list(region), "pattern": pattern, "copy_region": list(copy_region)},
    )


def make_shift_task(
    region: Site = (0, 1),
    offset: int = 3,
    env: str = "110000",
    boundary: Union[Boundary, str] = Boundary.CYCLIC,
    onboard_size: int = DEFAULT_ONBOARD_SIZE,
    drift: int = 1,
) -> TaskSpec:
    """Shift the region's bits by ``offset`` sites if the destination is all 0.

    Raises:
        TaskError: If the destination leaves the lattice or overlaps the region
    """
    sources = _sites(*region, len(env), "region")
    if offset == 0:
        raise TaskError("offset must be nonzero")
    targets = [site + offset for site in sources]
    if not all(0 <= site < len(env) for site in targets):
        raise TaskError(f"destination {targets} leaves the lattice of {len(env)} sites")
    if set(sources) & set(targets):
        raise TaskError(f"destination {targets} overlaps region {sources}")
    direction = 1 if offset > 0 else -1
    near = sources[0] if direction > 0 else sources[-1]
    far = targets[-1] if direction > 0 else targets[0]
    outward: List[Dict[str, Any]] = []
    for site in _path(near, far, direction):
        if site in sources:
            outward.append(_reading(site, f"q{sources.index(site)}"))
        elif site in targets:
            outward.append({"site": site, "observe": partial(_or_into, "occ")})
        else:
            outward.append({"site": site})
    back: List[Dict[str, Any]] = []
    for site in _path(far, near, -direction):
        if site in targets:
            slot = f"q{targets.index(site)}"
            back.append(_writing(site, slot, _move_in_if_free))
        elif site in sources:
            back.append({"site": site, "write": _vacate_if_free})
        else:
            back.append({"site": site})
    return _itinerary_task(
        "shift",
        "Shift a region's pattern by an offset if and only if the destination is free",
        [*_with_moves(outward, direction), *_with_moves(back, -direction)],
        env,
        boundary,
        onboard_size,
        drift,
        [*sources, *targets],
        {"region": list(region), "offset": offset},
    )


def classical_trace(
    task: TaskSpec,
    initial: Optional[Configuration] = None,
    max_steps: int = 1000,
    config: Optional[Config] = None,
) -> ClassicalTrace:
    """Follow T from a basis configuration while every step has a single image.

    The trace terminates after an action step taken while the output register held
    a completion code; it is truncated when ``max_steps`` runs out first.

    Raises:
        NondeterminismError: Naming the configuration with several images
    """
    operator = task.step_operator(config)
    cfg = initial or task.initial
    configurations = [cfg]
    amplitudes: List[complex] = []
    terminated = stalled = False
    for _ in range(max_steps):
        images = operator.images(cfg)
        if not images:
            stalled = True
            break
        if len(images) > 1:
            raise NondeterminismError(
                f"Configuration {cfg} has {len(images)} images",
                configuration=cfg.to_text(),
                images=[image.to_text() for image in sorted(images)],
            )
        ((image, amplitude),) = images.items()
        configurations.append(image)
        amplitudes.append(amplitude)
        if cfg.i == 1 and cfg.l2 in task.final_outputs:
            terminated = True
            break
        cfg = image
    trace = ClassicalTrace(
        configurations=configurations,
        amplitudes=amplitudes,
        terminated=terminated,
        truncated=not terminated and not stalled,
        stalled=stalled,
    )
    logger.debug(
        "trace_completed", task=task.name, steps=trace.steps, terminated=terminated
    )
    return trace


def environment_map(
    task: TaskSpec,
    sites: Optional[Sequence[int]] = None,
    max_steps: int = 10_000,
    config: Optional[Config] = None,
) -> EnvironmentMap:
    """Window-to-window map of a deterministic task, from traces of every window input.

    Raises:
        TaskError: If the task has no window, a trace does not complete, sites outside
            the window change, or the final robot state depends on the input
    """
    sites = tuple(sorted(sites)) if sites is not None else task.window
    if not sites:
        raise TaskError(f"Task {task.name} declares no window")
    if not all(0 <= site < task.geometry.env_size for site in sites):
        raise TaskError(
            f"Window {sites} leaves the lattice of {task.geometry.env_size} sites"
        )
    rows: List[int] = []
    cols: List[int] = []
    data: List[complex] = []
    robot: Optional[Configuration] = None
    for column, bits in enumerate(itertools.product((0, 1), repeat=len(sites))):
        env = list(task.initial.s)
        for site, bit in zip(sites, bits):
            env[site] = str(bit)
        start = task.configuration_with("".join(env))
        trace = classical_trace(task, start, max_steps, config)
        if not trace.terminated:
            raise TaskError(
                f"Task {task.name} did not complete on window input {bits}"
            )
        final = trace.final
        outside = [
            site
            for site in range(len(env))
            if site not in sites and final.s[site] != env[site]
        ]
        if outside:
            raise TaskError(
                f"Task {task.name} changed sites {outside} outside its window"
            )
        shared = final.evolve(s=task.initial.s)
        if robot is None:
            robot = shared
        elif shared != robot:
            raise TaskError(
                f"Final robot state of {task.name} depends on the window input"
            )
        rows.append(int("".join(final.s[site] for site in sites), 2))
        cols.append(column)
        data.append(complex(np.prod(trace.amplitudes)))
    size = 2 ** len(sites)
    matrix = sparse.csr_matrix(
        (np.asarray(data, dtype=complex), (rows, cols)), shape=(size, size)
    )
    assert robot is not None
    return EnvironmentMap(sites=tuple(sites), matrix=matrix, robot=robot.to_text())


def completion_probability(state: QuantumState, task: TaskSpec) -> float:
    """Probability that the output register holds a completion code."""
    distribution = state.marginal("output_register")
    return math.fsum(distribution.get(code, 0.0) for code in task.final_outputs)


def completion_curve(
    result: EvolutionResult, task: TaskSpec
) -> List[Tuple[float, float]]:
    """(time, completion probability) along an evolution."""
    return [
        (time, completion_probability(state, task))
        for time, state in zip(result.times, result.states)
    ]
