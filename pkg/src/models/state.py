"""State vectors and basis enumerations over robot-plus-environment configurations."""

import math
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr

from .core import Configuration, LatticeGeometry, Selector, check_configuration
from .errors import (
    BasisClosureError,
    ConfigurationError,
    GeometryMismatchError,
    PreconditionError,
    ZeroNormError,
)

PRUNE_THRESHOLD = 1e-14
# A state this close to unit norm is returned unchanged by normalize.
_UNIT_SLACK = 1e-13
_MARGINAL_SLACK = 1e-6

Number = Union[int, float, complex]


def _prune(
    amplitudes: Mapping[Configuration, complex], threshold: float = PRUNE_THRESHOLD
) -> Dict[Configuration, complex]:
    return {cfg: amp for cfg, amp in amplitudes.items() if abs(amp) >= threshold}


class QuantumState(BaseModel):
    """Sparse complex amplitudes over configurations of one geometry."""

    model_config = ConfigDict(frozen=True)

    geometry: LatticeGeometry
    amplitudes: Dict[Configuration, complex] = Field(default_factory=dict)

    @classmethod
    def build(
        cls,
        geometry: LatticeGeometry,
        amplitudes: Mapping[Configuration, complex],
        threshold: float = PRUNE_THRESHOLD,
    ) -> "QuantumState":
        """Internal constructor: prune and wrap without re-validating entries."""
        return cls.model_construct(
            geometry=geometry, amplitudes=_prune(amplitudes, threshold)
        )

    @classmethod
    def from_amplitudes(
        cls,
        geometry: LatticeGeometry,
        amplitudes: Mapping[Configuration, Number],
    ) -> "QuantumState":
        """Checked constructor for user-supplied amplitudes.

        Raises:
            ConfigurationError: If a configuration does not fit ``geometry``
        """
        checked = {
            check_configuration(geometry, cfg): complex(amp)
            for cfg, amp in amplitudes.items()
        }
        return cls.build(geometry, checked)

    @classmethod
    def basis_state(
        cls, geometry: LatticeGeometry, configuration: Configuration
    ) -> "QuantumState":
        return cls.from_amplitudes(geometry, {configuration: 1.0})

    @property
    def support(self) -> List[Configuration]:
        """Configurations with nonzero amplitude, in basis order."""
        return sorted(self.amplitudes)

    def amplitude(self, configuration: Configuration) -> complex:
        return self.amplitudes.get(configuration, 0j)

    def norm(self) -> float:
        return math.sqrt(math.fsum(abs(amp) ** 2 for amp in self.amplitudes.values()))

    def normalize(self) -> "QuantumState":
        """Scale to unit norm, preserving amplitude ratios.

        Raises:
            ZeroNormError: If the state is the zero vector
        """
        norm = self.norm()
        if norm == 0.0:
            raise ZeroNormError("Cannot normalize the zero vector")
        if abs(norm - 1.0) <= _UNIT_SLACK:
            return self
        return QuantumState.build(
            self.geometry,
            {cfg: amp / norm for cfg, amp in self.amplitudes.items()},
        )

    def _require_same_geometry(self, other: "QuantumState") -> None:
        if self.geometry != other.geometry:
            raise GeometryMismatchError(
                "States belong to different geometries",
                left=self.geometry.model_dump(),
                right=other.geometry.model_dump(),
            )

    def inner(self, other: "QuantumState") -> complex:
        """<self|other>, conjugate-linear in ``self``.

        Raises:
            GeometryMismatchError: If the geometries differ
        """
        self._require_same_geometry(other)
        terms = [
            amp.conjugate() * other.amplitudes[cfg]
            for cfg, amp in self.amplitudes.items()
            if cfg in other.amplitudes
        ]
        return complex(
            math.fsum(term.real for term in terms),
            math.fsum(term.imag for term in terms),
        )

    def marginal(self, selector: Union[Selector, str]) -> Dict[Any, float]:
        """Probability distribution of one observable, keyed in ascending order.

        Raises:
            PreconditionError: If the state is far from normalized
        """
        selector = Selector(selector)
        weights: Dict[Any, List[float]] = {}
        for cfg, amp in self.amplitudes.items():
            value = getattr(cfg, selector.field)
            weights.setdefault(value, []).append(abs(amp) ** 2)
        distribution = {value: math.fsum(parts) for value, parts in weights.items()}
        total = math.fsum(distribution.values())
        if abs(total - 1.0) > _MARGINAL_SLACK:
            raise PreconditionError(
                f"Marginal requires a normalized state; total probability is {total}"
            )
        return dict(sorted(distribution.items()))

    def scaled(self, factor: Number) -> "QuantumState":
        return QuantumState.build(
            self.geometry,
            {cfg: amp * factor for cfg, amp in self.amplitudes.items()},
        )

    def __add__(self, other: "QuantumState") -> "QuantumState":
        self._require_same_geometry(other)
        combined = dict(self.amplitudes)
        for cfg, amp in other.amplitudes.items():
            combined[cfg] = combined.get(cfg, 0j) + amp
        return QuantumState.build(self.geometry, combined)

    def __sub__(self, other: "QuantumState") -> "QuantumState":
        return self + other.scaled(-1)

    def __mul__(self, factor: Number) -> "QuantumState":
        return self.scaled(factor)

    __rmul__ = __mul__

    def max_difference(self, other: "QuantumState") -> float:
        """Largest amplitude difference over the union of supports."""
        self._require_same_geometry(other)
        keys = set(self.amplitudes) | set(other.amplitudes)
        return max(
            (abs(self.amplitude(cfg) - other.amplitude(cfg)) for cfg in keys),
            default=0.0,
        )

    def records(self) -> List[Tuple[str, float, float]]:
        """(configuration text, re, im) rows in basis order."""
        return [
            (cfg.to_text(), amp.real, amp.imag)
            for cfg, amp in sorted(
                self.amplitudes.items(), key=lambda item: item[0].sort_key
            )
        ]


def inner_product(a: QuantumState, b: QuantumState) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    return a.inner(b)


class BasisEnumeration(BaseModel):
    """Ordered configurations with a bijective index map."""

    model_config = ConfigDict(frozen=True)

    geometry: LatticeGeometry
    configurations: Tuple[Configuration, ...]

    _index: Dict[Configuration, int] = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context: Any) -> None:
        index = {cfg: position for position, cfg in enumerate(self.configurations)}
        if len(index) != len(self.configurations):
            raise ConfigurationError("Basis enumeration contains duplicates")
        self._index = index

    @classmethod
    def from_configurations(
        cls, geometry: LatticeGeometry, configurations: Iterable[Configuration]
    ) -> "BasisEnumeration":
        """Deduplicate and order configurations lexicographically."""
        ordered = sorted(set(configurations), key=lambda cfg: cfg.sort_key)
        return cls(geometry=geometry, configurations=tuple(ordered))

    def __len__(self) -> int:
        return len(self.configurations)

    def __contains__(self, configuration: object) -> bool:
        return configuration in self._index

    def index(self, configuration: Configuration) -> int:
        """Position of ``configuration``.

        Raises:
            BasisClosureError: If the configuration is not enumerated
        """
        try:
            return self._index[configuration]
        except KeyError:
            raise BasisClosureError(
                f"Configuration {configuration} is not in the basis"
            ) from None

    def find(self, configuration: Configuration) -> Optional[int]:
        return self._index.get(configuration)

    def __getitem__(self, position: int) -> Configuration:
        return self.configurations[position]

    def to_vector(self, state: QuantumState) -> np.ndarray:
        """Dense amplitude vector of ``state`` in basis order."""
        if state.geometry != self.geometry:
            raise GeometryMismatchError(
                "State and basis belong to different geometries"
            )
        vector = np.zeros(len(self), dtype=complex)
        for cfg, amp in state.amplitudes.items():
            vector[self.index(cfg)] = amp
        return vector

    def to_state(
        self, vector: np.ndarray, threshold: float = PRUNE_THRESHOLD
    ) -> QuantumState:
        amplitudes = {
            self.configurations[position]: complex(vector[position])
            for position in np.flatnonzero(np.abs(vector) >= threshold)
        }
        return QuantumState.model_construct(
            geometry=self.geometry, amplitudes=amplitudes
        )
