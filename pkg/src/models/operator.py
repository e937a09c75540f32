"""Sparse matrix realization of an operator over an enumerated basis."""

from typing import Any, Iterator, List, Mapping, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import sparse

from .core import Configuration
from .errors import ConfigurationError, GeometryMismatchError
from .state import BasisEnumeration, QuantumState

Element = Tuple[Configuration, Configuration, complex]


class SparseOperator(BaseModel):
    """Complex CSR matrix whose rows and columns are labelled by ``basis``.

    Element ``(r, c)`` is the amplitude <r|T|c>; explicit zeros are removed on
    construction.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    basis: BasisEnumeration
    matrix: sparse.csr_matrix = Field(..., description="Square complex CSR matrix")

    def model_post_init(self, __context: Any) -> None:
        size = len(self.basis)
        if self.matrix.shape != (size, size):
            raise ConfigurationError(
                f"Matrix shape {self.matrix.shape} does not match basis size {size}"
            )
        self.matrix.sum_duplicates()
        self.matrix.eliminate_zeros()

    @classmethod
    def from_elements(
        cls,
        basis: BasisEnumeration,
        elements: Mapping[Tuple[Configuration, Configuration], complex],
    ) -> "SparseOperator":
        """Build from explicit ``{(row, column): value}`` elements.

        Raises:
            BasisClosureError: If a configuration is not in ``basis``
        """
        rows: List[int] = []
        cols: List[int] = []
        data: List[complex] = []
        for (row, column), value in elements.items():
            rows.append(basis.index(row))
            cols.append(basis.index(column))
            data.append(complex(value))
        size = len(basis)
        matrix = sparse.csr_matrix(
            (np.asarray(data, dtype=complex), (rows, cols)), shape=(size, size)
        )
        return cls(basis=basis, matrix=matrix)

    @classmethod
    def from_dense(cls, basis: BasisEnumeration, dense: np.ndarray) -> "SparseOperator":
        matrix = sparse.csr_matrix(np.asarray(dense, dtype=complex))
        return cls(basis=basis, matrix=matrix)

    @classmethod
    def zero(cls, basis: BasisEnumeration) -> "SparseOperator":
        size = len(basis)
        return cls(basis=basis, matrix=sparse.csr_matrix((size, size), dtype=complex))

    @property
    def dimension(self) -> int:
        return len(self.basis)

    @property
    def nnz(self) -> int:
        return int(self.matrix.nnz)

    def entries(self) -> Iterator[Element]:
        """Nonzero elements as (row, column, value), ordered by row then column."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for position in order:
            yield (
                self.basis[int(coo.row[position])],
                self.basis[int(coo.col[position])],
                complex(coo.data[position]),
            )

    def element(self, row: Configuration, column: Configuration) -> complex:
        """<row|T|column>; zero when either label is outside the basis."""
        r = self.basis.find(row)
        c = self.basis.find(column)
        if r is None or c is None:
            return 0j
        return complex(self.matrix[r, c])

    def adjoint(self) -> "SparseOperator":
        return SparseOperator(basis=self.basis, matrix=self.matrix.conj().T.tocsr())

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def apply(self, state: QuantumState) -> QuantumState:
        """Matrix-vector product on a state supported inside the basis."""
        if state.geometry != self.basis.geometry:
            raise GeometryMismatchError(
                "State and operator belong to different geometries"
            )
        return self.basis.to_state(self.matrix @ self.basis.to_vector(state))

    def with_matrix(self, matrix: sparse.spmatrix) -> "SparseOperator":
        """Same basis, different matrix."""
        return SparseOperator(
            basis=self.basis, matrix=sparse.csr_matrix(matrix, dtype=complex)
        )
