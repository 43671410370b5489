"""Dense statevector simulation.

Basis-state index convention: qubit 0 is the most significant bit, matching
the text-label convention of :mod:`.pauli`. Pauli masks are therefore
bit-reversed once per operation before hitting the kernels, which work in
index space.

Public operations never mutate their inputs; states returned by them are
normalized to 1 within 1e-10 (checked).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._backend import kernels
from .circuit import CommutingBlockCircuit, Layer
from .pauli import DimensionError, PauliString, Relation

_NORM_TOL = 1e-10
_PHASES = (1 + 0j, 1j, -1 + 0j, -1j)


class NonCommutingError(ValueError):
    """A jointly-measured set contains a non-commuting pair."""

    def __init__(self, a: PauliString, b: PauliString):
        super().__init__(f"{a} and {b} do not commute")
        self.witness = (a, b)


@dataclass(frozen=True)
class SampleRecord:
    """Outcomes of one shot: one +-1 value per measured generator."""

    generator_outcomes: tuple[int, ...]
    shot_index: int


class StateVector:
    """Dense complex amplitudes over 2^n basis states."""

    __slots__ = ("n_qubits", "amplitudes")

    def __init__(self, n_qubits: int, amplitudes: np.ndarray, check: bool = True):
        amplitudes = np.asarray(amplitudes, dtype=np.complex128)
        if amplitudes.shape != (2**n_qubits,):
            raise DimensionError(
                f"need {2**n_qubits} amplitudes for {n_qubits} qubits, got {amplitudes.shape}"
            )
        if check and abs(np.linalg.norm(amplitudes) - 1.0) > _NORM_TOL:
            raise ValueError("state vector is not normalized")
        self.n_qubits = n_qubits
        self.amplitudes = amplitudes

    def copy(self) -> StateVector:
        return StateVector(self.n_qubits, self.amplitudes.copy(), check=False)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def inner(self, other: StateVector) -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def _bit_reverse(mask: int, n: int) -> int:
    out = 0
    for q in range(n):
        if (mask >> q) & 1:
            out |= 1 << (n - 1 - q)
    return out


def _index_masks(p: PauliString, n_qubits: int) -> tuple[int, int, complex]:
    """(x, z, prefactor) of p in index space; prefactor = i**(phase + y_count)."""
    if p.n_qubits != n_qubits:
        raise DimensionError(f"{p} acts on {p.n_qubits} qubits, state has {n_qubits}")
    return (
        _bit_reverse(p.x_mask, n_qubits),
        _bit_reverse(p.z_mask, n_qubits),
        _PHASES[(p.phase_exp + p.y_count) % 4],
    )


def _apply_pauli_into(amps: np.ndarray, out: np.ndarray, p: PauliString, n: int):
    x, z, pref = _index_masks(p, n)
    kernels.apply_pauli(amps, out, x, z, pref)


def _apply_rotation_inplace(amps: np.ndarray, p: PauliString, n: int, theta: float):
    if p.phase_exp != 0:
        raise ValueError(f"rotation generator {p} must have phase_exp 0")
    x, z, pref = _index_masks(p, n)
    kernels.apply_rotation(amps, x, z, pref, float(theta))


# -- state preparation -------------------------------------------------------


def init_state(n_qubits: int, spec="zero") -> StateVector:
    """Initial state: 'zero', 'plus', or an explicit normalized amplitude array."""
    if isinstance(spec, str):
        if spec == "zero":
            amps = np.zeros(2**n_qubits, dtype=np.complex128)
            amps[0] = 1.0
        elif spec == "plus":
            amps = np.full(2**n_qubits, 2.0 ** (-n_qubits / 2), dtype=np.complex128)
        else:
            raise ValueError(f"unknown initial state {spec!r}")
        return StateVector(n_qubits, amps, check=False)
    return StateVector(n_qubits, np.array(spec, dtype=np.complex128))


# -- single operators --------------------------------------------------------


def apply_pauli(state: StateVector, p: PauliString) -> StateVector:
    """P|state>; a permutation of amplitudes with exact sign/phase factors."""
    out = np.empty_like(state.amplitudes)
    _apply_pauli_into(state.amplitudes, out, p, state.n_qubits)
    return StateVector(state.n_qubits, out, check=False)


def apply_rotation(state: StateVector, p: PauliString, theta: float) -> StateVector:
    """exp(-i theta P)|state> for a plain Hermitian string (P**2 == I)."""
    out = state.amplitudes.copy()
    _apply_rotation_inplace(out, p, state.n_qubits, theta)
    return StateVector(state.n_qubits, out, check=False)


def expectation(state: StateVector, p: PauliString) -> float:
    """<state|P|state> for Hermitian P; the vanishing imaginary part is checked."""
    if not p.is_hermitian():
        raise ValueError(f"observable {p} is not Hermitian")
    x, z, pref = _index_masks(p, state.n_qubits)
    value = kernels.expectation(state.amplitudes, x, z, pref)
    if abs(value.imag) > 1e-12:
        raise AssertionError(f"Hermitian expectation has imaginary part {value.imag:g}")
    return value.real


# -- circuit execution -------------------------------------------------------


def run_prefix(circuit: CommutingBlockCircuit, theta: np.ndarray, l: int) -> StateVector:
    """State after the first l layers (l = 0 gives the initial state)."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (circuit.n_parameters,):
        raise DimensionError(
            f"expected {circuit.n_parameters} parameters, got {theta.shape}"
        )
    state = init_state(circuit.n_qubits, circuit.initial_state)
    amps = state.amplitudes
    for gate in circuit.prefix_gates(l):
        _apply_rotation_inplace(amps, gate.generator, circuit.n_qubits, theta[gate.param_index])
    return state


def run_circuit(circuit: CommutingBlockCircuit, theta: np.ndarray) -> StateVector:
    """State after the full circuit."""
    return run_prefix(circuit, theta, circuit.n_layers)


# -- ancilla-assisted interference states -------------------------------------


def prepare_lcu_state(
    psi: StateVector,
    segment_layers: Sequence[Layer],
    sign_flips: Sequence[int],
    theta: np.ndarray,
    variant: Relation,
) -> StateVector:
    """Ancilla-tagged superposition of the segment run forwards and sign-flipped.

    Let W apply ``segment_layers`` with the given angles and W~ apply them
    with each layer's angles multiplied by its entry of ``sign_flips``. With
    L+- = W +- W~ the prepared (n+1)-qubit state is

        COMMUTE:      (|0> (x) L+ psi + |1> (x) L- psi) / 2
        ANTICOMMUTE:  (|0> (x) L- psi + |1> (x) L+ psi) / 2

    The ancilla is qubit 0. The 1/2 prefactor makes the state exactly
    normalized because |L+ psi|^2 + |L- psi|^2 = 4.
    """
    if len(segment_layers) == 0:
        raise ValueError("segment must be nonempty")
    if len(sign_flips) != len(segment_layers):
        raise DimensionError("one sign per segment layer required")
    if variant not in (Relation.COMMUTE, Relation.ANTICOMMUTE):
        raise ValueError(f"variant must be COMMUTE or ANTICOMMUTE, got {variant}")
    theta = np.asarray(theta, dtype=float)
    n = psi.n_qubits
    forward = psi.amplitudes.copy()
    flipped = psi.amplitudes.copy()
    for layer, sign in zip(segment_layers, sign_flips):
        for gate in layer.gates:
            angle = float(theta[gate.param_index])
            _apply_rotation_inplace(forward, gate.generator, n, angle)
            _apply_rotation_inplace(flipped, gate.generator, n, sign * angle)
    half_sum = 0.5 * (forward + flipped)
    half_diff = 0.5 * (forward - flipped)
    out = np.empty(2 ** (n + 1), dtype=np.complex128)
    d = 2**n
    if variant is Relation.COMMUTE:
        out[:d], out[d:] = half_sum, half_diff
    else:
        out[:d], out[d:] = half_diff, half_sum
    return StateVector(n + 1, out)


# -- projective sampling ------------------------------------------------------


def _check_joint_set(paulis: Sequence[PauliString], n_qubits: int):
    for p in paulis:
        if p.n_qubits != n_qubits:
            raise DimensionError(f"{p} acts on {p.n_qubits} qubits, state has {n_qubits}")
        if not p.is_hermitian():
            raise ValueError(f"{p} is not Hermitian; cannot be measured")
    for i in range(len(paulis)):
        for j in range(i + 1, len(paulis)):
            if paulis[i].commutes(paulis[j]) is not Relation.COMMUTE:
                raise NonCommutingError(paulis[i], paulis[j])


def sample_outcome_matrix(
    state: StateVector,
    paulis: Sequence[PauliString],
    shots: int,
    rng,
) -> np.ndarray:
    """(shots, len(paulis)) int8 matrix of +-1 outcomes; array core of sampling.

    Each shot sequentially measures the commuting Hermitian strings with Born
    probabilities, projecting and renormalizing after each one, which equals
    one joint measurement in the common eigenbasis. Deterministic given the
    rng seed; one uniform is consumed per (shot, string) in row order.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    _check_joint_set(paulis, state.n_qubits)
    n_gen = len(paulis)
    if shots < 0:
        raise ValueError("shots must be >= 0")
    if n_gen == 0 or shots == 0:
        return np.empty((shots, n_gen), dtype=np.int8)
    xs = np.empty(n_gen, dtype=np.uint64)
    zs = np.empty(n_gen, dtype=np.uint64)
    prefs = np.empty(n_gen, dtype=np.complex128)
    signs = np.empty(n_gen, dtype=np.float64)
    for k, p in enumerate(paulis):
        x, z, _ = _index_masks(p, state.n_qubits)
        xs[k], zs[k] = x, z
        prefs[k] = _PHASES[p.y_count % 4]
        signs[k] = p.hermitian_sign()
    uniforms = rng.random((shots, n_gen))
    return kernels.sample_outcomes(state.amplitudes, xs, zs, prefs, signs, uniforms)


def sample_joint_pauli(
    state: StateVector,
    generating_set: Sequence[PauliString],
    shots: int,
    rng_seed,
) -> list[SampleRecord]:
    """Record-per-shot view of :func:`sample_outcome_matrix`."""
    matrix = sample_outcome_matrix(state, generating_set, shots, rng_seed)
    return [
        SampleRecord(tuple(int(v) for v in row), m) for m, row in enumerate(matrix)
    ]
