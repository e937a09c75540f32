"""Core data models for the quantum robot simulator.

This module defines the lattice geometry shared by every value in the simulator and
the computational-basis configuration of robot plus environment, together with its
bit-exact text form.
"""

import re
from enum import Enum
from typing import Any, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from .errors import ConfigurationError

_TEXT_PATTERN = re.compile(
    r"^p=(?P<p>\d+) k=(?P<k>\d+) t=(?P<t>[01]+) l1=(?P<l1>\d+) l2=(?P<l2>\d+) "
    r"c=(?P<i>[01]) j=(?P<j>\d+) s=(?P<s>[01]+)$"
)


class Boundary(str, Enum):
    """Boundary handling of the environment lattice."""

    CYCLIC = "cyclic"
    BOUNDED = "bounded"


class Phase(str, Enum):
    """Which part of the step operator a rule belongs to."""

    COMPUTATION = "computation"
    ACTION = "action"

    @property
    def gate(self) -> int:
        """Control-qubit value on which rules of this phase fire."""
        return 0 if self is Phase.COMPUTATION else 1


class Selector(str, Enum):
    """Observable a marginal distribution is taken over."""

    ROBOT_POSITION = "robot_position"
    CONTROL_BIT = "control_bit"
    ENV_STRING = "env_string"
    OUTPUT_REGISTER = "output_register"
    MEMORY_REGISTER = "memory_register"

    @property
    def field(self) -> str:
        """Configuration field the selector reads."""
        return _SELECTOR_FIELDS[self]


_SELECTOR_FIELDS = {
    Selector.ROBOT_POSITION: "j",
    Selector.CONTROL_BIT: "i",
    Selector.ENV_STRING: "s",
    Selector.OUTPUT_REGISTER: "l2",
    Selector.MEMORY_REGISTER: "l1",
}


class LatticeGeometry(BaseModel):
    """Sizes of the environment lattice, the on-board lattice and the registers."""

    model_config = ConfigDict(frozen=True)

    env_size: int = Field(..., ge=1, description="Number of environment qubit sites M")
    env_boundary: Boundary = Field(
        default=Boundary.CYCLIC, description="Environment lattice boundary"
    )
    onboard_size: int = Field(
        ..., ge=1, description="Number of on-board qubit sites N (always cyclic)"
    )
    head_states: int = Field(..., ge=1, description="Internal states P of the head h2")
    register_dim: int = Field(
        ..., ge=1, description="Dimension L of the output and memory registers"
    )

    @property
    def cyclic(self) -> bool:
        return self.env_boundary is Boundary.CYCLIC

    @property
    def dimension(self) -> int:
        """Number of configurations in the full basis."""
        return (
            self.head_states
            * self.onboard_size
            * 2**self.onboard_size
            * self.register_dim**2
            * 2
            * self.env_size
            * 2**self.env_size
        )

    def env_step(self, j: int, dj: int) -> Optional[int]:
        """Move the robot by ``dj``; ``None`` when it would leave a bounded lattice."""
        target = j + dj
        if self.cyclic:
            return target % self.env_size
        if 0 <= target < self.env_size:
            return target
        return None

    def onboard_step(self, k: int, dk: int) -> int:
        return (k + dk) % self.onboard_size

    def env_distance(self, a: int, b: int) -> int:
        """Hop count between two robot positions."""
        gap = abs(a - b)
        if self.cyclic:
            return min(gap, self.env_size - gap)
        return gap

    def onboard_distance(self, a: int, b: int) -> int:
        gap = abs(a - b)
        return min(gap, self.onboard_size - gap)


class Configuration(BaseModel):
    """One computational-basis label of robot plus environment.

    Bit strings hold site 0 leftmost.
    """

    model_config = ConfigDict(frozen=True)

    p: int = Field(..., ge=0, description="Internal state of the on-board head h2")
    k: int = Field(..., ge=0, description="Position of h2 on the on-board lattice")
    t: str = Field(..., pattern=r"^[01]+$", description="On-board qubit states")
    l1: int = Field(..., ge=0, description="Memory register value")
    l2: int = Field(..., ge=0, description="Output register value")
    i: int = Field(..., ge=0, le=1, description="Control qubit")
    j: int = Field(..., ge=0, description="Position of the robot h1 on the environment")
    s: str = Field(..., pattern=r"^[01]+$", description="Environment qubit states")

    @property
    def sort_key(self) -> Tuple[int, int, str, int, int, int, int, str]:
        return (self.p, self.k, self.t, self.l1, self.l2, self.i, self.j, self.s)

    def __lt__(self, other: "Configuration") -> bool:
        return self.sort_key < other.sort_key

    @property
    def t_k(self) -> int:
        """On-board qubit under h2."""
        return int(self.t[self.k])

    @property
    def s_j(self) -> int:
        """Environment qubit under h1."""
        return int(self.s[self.j])

    def evolve(self, **update: Any) -> "Configuration":
        """Copy with the given fields replaced, without re-validation."""
        return self.model_copy(update=update)

    def to_text(self) -> str:
        return (
            f"p={self.p} k={self.k} t={self.t} l1={self.l1} l2={self.l2} "
            f"c={self.i} j={self.j} s={self.s}"
        )

    def __str__(self) -> str:
        return self.to_text()

    @classmethod
    def from_text(
        cls, text: str, geometry: Optional[LatticeGeometry] = None
    ) -> "Configuration":
        """Parse the text form, validating against ``geometry`` when given.

        Raises:
            ConfigurationError: If the text is malformed or out of range
        """
        match = _TEXT_PATTERN.match(text.strip())
        if match is None:
            raise ConfigurationError(f"Malformed configuration text: {text!r}")
        fields = match.groupdict()
        values = {
            name: fields[name] if name in ("t", "s") else int(fields[name])
            for name in fields
        }
        if geometry is None:
            return cls(**values)
        return make_configuration(geometry, **values)


def set_bit(bits: str, position: int, value: int) -> str:
    """Return ``bits`` with one site replaced."""
    return bits[:position] + str(value) + bits[position + 1 :]


def make_configuration(
    geometry: LatticeGeometry,
    p: int,
    k: int,
    t: str,
    l1: int,
    l2: int,
    i: int,
    j: int,
    s: str,
) -> Configuration:
    """Assemble a configuration after checking every field against ``geometry``.

    Raises:
        ConfigurationError: Naming the offending field and its allowed range
    """
    bounds = {
        "p": (p, geometry.head_states),
        "k": (k, geometry.onboard_size),
        "l1": (l1, geometry.register_dim),
        "l2": (l2, geometry.register_dim),
        "i": (i, 2),
        "j": (j, geometry.env_size),
    }
    for name, (value, limit) in bounds.items():
        if not 0 <= value < limit:
            raise ConfigurationError(
                f"{name}={value} is out of range [0, {limit})",
                field=name,
                value=value,
            )
    for name, bits, length in (
        ("t", t, geometry.onboard_size),
        ("s", s, geometry.env_size),
    ):
        if len(bits) != length:
            raise ConfigurationError(
                f"{name}={bits!r} has length {len(bits)}, expected {length}",
                field=name,
                value=bits,
            )
        if set(bits) - {"0", "1"}:
            raise ConfigurationError(
                f"{name}={bits!r} must contain only 0 and 1", field=name, value=bits
            )
    return Configuration(p=p, k=k, t=t, l1=l1, l2=l2, i=i, j=j, s=s)


def check_configuration(
    geometry: LatticeGeometry, configuration: Configuration
) -> Configuration:
    """Validate an already-built configuration against ``geometry``."""
    return make_configuration(geometry, **configuration.model_dump())
