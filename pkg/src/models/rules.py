"""Rule language for computation and action steps.

A rule names the local context it fires on (fields left as ``None`` are wildcards)
and the local outcome it produces. Rules never mention absolute head positions.
The JSON form is documented in ``docs/rules-schema.md``.
"""

import json
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PrivateAttr,
    field_serializer,
    field_validator,
    model_validator,
)

from .core import Phase

ContextKey = Tuple[
    Optional[int], Optional[int], Optional[int], Optional[int], Optional[int]
]


class RuleMatch(BaseModel):
    """Local context a rule fires on."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    p: Optional[int] = Field(None, ge=0, description="Head state of h2")
    t: Optional[int] = Field(None, ge=0, le=1, description="On-board qubit under h2")
    l1: Optional[int] = Field(None, ge=0, description="Memory register")
    l2: Optional[int] = Field(None, ge=0, description="Output register")
    s: Optional[int] = Field(None, ge=0, le=1, description="Environment qubit under h1")

    @property
    def key(self) -> ContextKey:
        return (self.p, self.t, self.l1, self.l2, self.s)

    @property
    def mask(self) -> Tuple[bool, ...]:
        """Which context fields the rule pins down."""
        return tuple(value is not None for value in self.key)


class RuleOutcome(BaseModel):
    """Local effect of a rule; ``None`` fields are left unchanged."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    p: Optional[int] = Field(None, ge=0)
    t: Optional[int] = Field(None, ge=0, le=1)
    l1: Optional[int] = Field(None, ge=0)
    l2: Optional[int] = Field(None, ge=0)
    s: Optional[int] = Field(None, ge=0, le=1)
    dk: int = Field(0, description="Displacement of h2 on the on-board lattice")
    dj: int = Field(0, description="Displacement of h1 on the environment")
    flip_control: bool = Field(
        False,
        description="Toggle the control qubit (0->1 for computation, 1->0 for action)",
    )

    @property
    def key(self) -> Tuple[Any, ...]:
        return (
            self.p,
            self.t,
            self.l1,
            self.l2,
            self.s,
            self.dk,
            self.dj,
            self.flip_control,
        )


class LocalRule(BaseModel):
    """One amplitude-bearing local transition."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    phase: Phase
    match: RuleMatch = Field(default_factory=RuleMatch)
    outcome: RuleOutcome = Field(default_factory=RuleOutcome)
    amplitude: complex = Field(1.0 + 0j, description="Serialized as [re, im]")
    label: Optional[str] = Field(None, description="Name used in diagnostics")

    @field_validator("amplitude", mode="before")
    @classmethod
    def _parse_amplitude(cls, value: Any) -> Any:
        if isinstance(value, (list, tuple)):
            if len(value) != 2:
                raise ValueError("amplitude must be given as [re, im]")
            return complex(float(value[0]), float(value[1]))
        return value

    @field_serializer("amplitude")
    def _dump_amplitude(self, value: complex) -> List[float]:
        return [value.real, value.imag]

    def describe(self) -> str:
        if self.label:
            return self.label
        match = ",".join(
            f"{name}={value}"
            for name, value in zip(("p", "t", "l1", "l2", "s"), self.match.key)
            if value is not None
        )
        return f"{self.phase.value}[{match or '*'}]"


class RuleSet(BaseModel):
    """Rules of one phase."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    phase: Phase
    rules: List[LocalRule] = Field(default_factory=list)

    @model_validator(mode="before")
    @classmethod
    def _inherit_phase(cls, data: Any) -> Any:
        """Rules written as plain objects may leave out their phase."""
        if isinstance(data, dict) and "phase" in data:
            rules = [
                {"phase": data["phase"], **rule} if isinstance(rule, dict) else rule
                for rule in data.get("rules", [])
            ]
            return {**data, "rules": rules}
        return data

    @model_validator(mode="after")
    def _check_phase_tags(self) -> "RuleSet":
        for position, rule in enumerate(self.rules):
            if rule.phase is not self.phase:
                raise ValueError(
                    f"rule {position} ({rule.describe()}) "
                    f"has phase {rule.phase.value}, "
                    f"rule set is {self.phase.value}"
                )
        return self

    @classmethod
    def empty(cls, phase: Phase) -> "RuleSet":
        return cls(phase=phase, rules=[])

    def __len__(self) -> int:
        return len(self.rules)

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json", exclude_none=True), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RuleSet":
        return cls.model_validate_json(text)


class LookupTable(BaseModel):
    """Map (l2, l1, s) -> l3 driving the register update of a computation phase."""

    model_config = ConfigDict(frozen=True)

    register_dim: int = Field(..., ge=1)
    entries: Tuple[Tuple[int, int, int, int], ...] = Field(
        ..., description="Rows (l2, l1, s, l3)"
    )

    _values: Dict[Tuple[int, int, int], int] = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context: Any) -> None:
        values: Dict[Tuple[int, int, int], int] = {}
        limit = self.register_dim
        for l2, l1, s, l3 in self.entries:
            if not all(0 <= code < limit for code in (l2, l1, l3)) or s not in (0, 1):
                raise ValueError(
                    f"lookup row {(l2, l1, s, l3)} is out of range for L={limit}"
                )
            if values.get((l2, l1, s), l3) != l3:
                raise ValueError(
                    f"lookup row {(l2, l1, s)} is given conflicting values"
                )
            values[(l2, l1, s)] = l3
        self._values = values

    @classmethod
    def from_function(
        cls, register_dim: int, function: Callable[[int, int, int], int]
    ) -> "LookupTable":
        """Tabulate ``function(l2, l1, s)`` over the whole domain."""
        rows = [
            (l2, l1, s, function(l2, l1, s))
            for l2 in range(register_dim)
            for l1 in range(register_dim)
            for s in (0, 1)
        ]
        return cls(register_dim=register_dim, entries=tuple(rows))

    def lookup(self, l2: int, l1: int, s: int) -> Optional[int]:
        return self._values.get((l2, l1, s))

    def missing(self) -> List[Tuple[int, int, int]]:
        """Domain points without a value."""
        return [
            (l2, l1, s)
            for l2 in range(self.register_dim)
            for l1 in range(self.register_dim)
            for s in (0, 1)
            if (l2, l1, s) not in self._values
        ]

    @property
    def is_total(self) -> bool:
        return not self.missing()


def gated_table(
    register_dim: int, transitions: Dict[int, Tuple[int, int]]
) -> LookupTable:
    """Lookup table that advances code ``a`` only from a recorded predecessor.

    ``transitions[a]`` gives the next code after reading s=0 and s=1. The memory
    register holds the previous code; when it is not one that leads to ``a`` the
    table falls back to code 0. Code 0 with memory 0 is the start.
    """
    predecessors: Dict[int, set] = {0: {0}}
    for code, successors in transitions.items():
        for successor in successors:
            predecessors.setdefault(successor, set()).add(code)

    def advance(l2: int, l1: int, s: int) -> int:
        if l2 in transitions and l1 in predecessors.get(l2, ()):
            return transitions[l2][s]
        return 0

    return LookupTable.from_function(register_dim, advance)


def rules_from_dicts(phase: Phase, rows: Iterable[Dict[str, Any]]) -> RuleSet:
    """Build a rule set from plain dictionaries carrying match/outcome/amplitude."""
    return RuleSet(
        phase=phase,
        rules=[LocalRule(phase=phase, **row) for row in rows],
    )
