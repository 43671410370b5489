"""Exact algebra of N-qubit Pauli strings.

A string is stored as two bit-masks plus a power-of-i phase:

    P = i**phase_exp * (s_0 x s_1 x ... x s_{N-1}),   s_q in {I, X, Y, Z}

where bit q of ``x_mask`` is set iff s_q is X or Y and bit q of ``z_mask``
is set iff s_q is Z or Y. Qubit 0 is the leftmost character of a text label
and addresses the most significant bit of a basis-state index. All phase
arithmetic is integer arithmetic mod 4, so products and commutation checks
are exact.

Hermitian strings have phase_exp in {0, 2}; gate generators are required to
be plain (phase_exp == 0).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

_PHASE_REPR = {0: "", 1: "i", 2: "-", 3: "-i"}
_PHASE_TOKENS = {"": 0, "+": 0, "-": 2, "i": 1, "+i": 1, "-i": 3}
_CHAR_TO_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_TO_CHAR = {v: k for k, v in _CHAR_TO_BITS.items()}

_SINGLE_QUBIT_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class DimensionError(ValueError):
    """Operands act on different numbers of qubits."""


class PauliFormatError(ValueError):
    """A text label does not parse; ``position`` is the offending index."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at index {position})")
        self.position = position


class Relation(enum.Enum):
    """Commutation relation between two strings (or two circuit layers)."""

    COMMUTE = "commute"
    ANTICOMMUTE = "anticommute"
    SELF = "self"


@dataclass(frozen=True)
class PauliString:
    """Immutable N-qubit Pauli string with an exact i**k global phase."""

    n_qubits: int
    x_mask: int
    z_mask: int
    phase_exp: int = 0

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be >= 1")
        full = (1 << self.n_qubits) - 1
        if self.x_mask & ~full or self.z_mask & ~full:
            raise ValueError("mask has bits beyond n_qubits")
        if self.phase_exp not in (0, 1, 2, 3):
            raise ValueError("phase_exp must be in {0, 1, 2, 3}")

    # -- queries ----------------------------------------------------------

    @property
    def y_count(self) -> int:
        return (self.x_mask & self.z_mask).bit_count()

    @property
    def weight(self) -> int:
        """Number of non-identity positions."""
        return (self.x_mask | self.z_mask).bit_count()

    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    def is_hermitian(self) -> bool:
        return self.phase_exp in (0, 2)

    def hermitian_sign(self) -> int:
        """+1 or -1 for a Hermitian string (i**phase_exp as a real number)."""
        if not self.is_hermitian():
            raise ValueError(f"{self} is not Hermitian")
        return 1 if self.phase_exp == 0 else -1

    def phase_free(self) -> PauliString:
        """The same tensor factors with phase_exp forced to 0."""
        return PauliString(self.n_qubits, self.x_mask, self.z_mask, 0)

    # -- algebra -----------------------------------------------------------

    def commutes(self, other: PauliString) -> Relation:
        """COMMUTE or ANTICOMMUTE, decided by the symplectic product."""
        if self.n_qubits != other.n_qubits:
            raise DimensionError(
                f"size mismatch: {self.n_qubits} vs {other.n_qubits} qubits"
            )
        parity = (
            (self.x_mask & other.z_mask).bit_count()
            + (self.z_mask & other.x_mask).bit_count()
        ) & 1
        return Relation.ANTICOMMUTE if parity else Relation.COMMUTE

    def __mul__(self, other: PauliString) -> PauliString:
        if not isinstance(other, PauliString):
            return NotImplemented
        if self.n_qubits != other.n_qubits:
            raise DimensionError(
                f"size mismatch: {self.n_qubits} vs {other.n_qubits} qubits"
            )
        x = self.x_mask ^ other.x_mask
        z = self.z_mask ^ other.z_mask
        # Decompose each factor as i**y (X^x Z^z); reordering Z^za past X^xb
        # contributes (-1)^|za & xb|, and recombining XZ pairs into Y factors
        # absorbs i**(-y) of the product string.
        phase = (
            self.phase_exp
            + other.phase_exp
            + self.y_count
            + other.y_count
            + 2 * (self.z_mask & other.x_mask).bit_count()
            - (x & z).bit_count()
        ) % 4
        return PauliString(self.n_qubits, x, z, phase)

    def scaled_by_i(self, k: int = 1) -> PauliString:
        """The string multiplied by i**k."""
        return PauliString(self.n_qubits, self.x_mask, self.z_mask, (self.phase_exp + k) % 4)

    # -- text and dense forms ----------------------------------------------

    @classmethod
    def parse(cls, text: str) -> PauliString:
        """Parse a label like 'XIZY', optionally prefixed by +, -, +i, -i, i."""
        body_start = 0
        while body_start < len(text) and text[body_start] in "+-i":
            body_start += 1
            if text[body_start - 1] == "i":
                break
        token = text[:body_start]
        if token not in _PHASE_TOKENS:
            raise PauliFormatError(f"bad phase prefix {token!r}", 0)
        body = text[body_start:]
        if not body:
            raise PauliFormatError("empty Pauli label", body_start)
        x = z = 0
        for pos, ch in enumerate(body):
            bits = _CHAR_TO_BITS.get(ch)
            if bits is None:
                raise PauliFormatError(f"illegal character {ch!r}", body_start + pos)
            x |= bits[0] << pos
            z |= bits[1] << pos
        return cls(len(body), x, z, _PHASE_TOKENS[token])

    def label(self) -> str:
        """Canonical text form; inverse of :meth:`parse` for canonical input."""
        chars = [
            _BITS_TO_CHAR[((self.x_mask >> q) & 1, (self.z_mask >> q) & 1)]
            for q in range(self.n_qubits)
        ]
        return _PHASE_REPR[self.phase_exp] + "".join(chars)

    def __str__(self) -> str:
        return self.label()

    def __repr__(self) -> str:
        return f"PauliString({self.label()!r})"

    def to_matrix(self) -> np.ndarray:
        """Dense 2^N x 2^N matrix (qubit 0 is the most significant factor)."""
        m = np.array([[1.0 + 0j]])
        for q in range(self.n_qubits):
            bits = ((self.x_mask >> q) & 1, (self.z_mask >> q) & 1)
            m = np.kron(m, _SINGLE_QUBIT_MATRICES[_BITS_TO_CHAR[bits]])
        return (1j ** self.phase_exp) * m


def parse(text: str) -> PauliString:
    return PauliString.parse(text)


def identity(n_qubits: int) -> PauliString:
    return PauliString(n_qubits, 0, 0, 0)
