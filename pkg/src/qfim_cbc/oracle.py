"""Brute-force ground truth for the estimation protocol.

Everything here works directly with analytic derivative statevectors, so it
shares no code path with the preparation-based estimator in
:mod:`.protocol`; agreement between the two is the package's central
correctness check. A finite-difference cross-oracle guards the analytic
derivatives themselves.
"""
from __future__ import annotations

import numpy as np

from . import simulator
from .circuit import CommutingBlockCircuit
from .pauli import PauliString
from .simulator import StateVector


def derivative_state(circuit: CommutingBlockCircuit, theta: np.ndarray, k: int) -> StateVector:
    """Tangent vector d|psi(theta)>/d theta_k (unit norm, not a physical state).

    Computed by inserting -i G_k right after the layer containing parameter
    k, which is exact because the layer's generators commute.
    """
    theta = np.asarray(theta, dtype=float)
    l = circuit.layer_of_param(k)
    gate = next(g for g in circuit.layer(l).gates if g.param_index == k)
    state = simulator.run_prefix(circuit, theta, l)
    state = simulator.apply_pauli(state, gate.generator.scaled_by_i(3))
    amps = state.amplitudes
    if l < circuit.n_layers:
        for g in circuit.segment_gates(l, circuit.n_layers):
            simulator._apply_rotation_inplace(
                amps, g.generator, circuit.n_qubits, theta[g.param_index]
            )
    return state


def _tangent_matrix(circuit: CommutingBlockCircuit, theta: np.ndarray) -> np.ndarray:
    m = circuit.n_parameters
    d = 2**circuit.n_qubits
    tangents = np.empty((m, d), dtype=np.complex128)
    for k in range(m):
        tangents[k] = derivative_state(circuit, theta, k).amplitudes
    return tangents


def _assemble_qfim(tangents: np.ndarray, psi: np.ndarray) -> np.ndarray:
    gram = tangents.conj() @ tangents.T
    overlaps = tangents.conj() @ psi  # <d_k psi | psi>
    f = 4.0 * np.real(gram - np.outer(overlaps, overlaps.conj()))
    return 0.5 * (f + f.T)


def qfim_exact(circuit: CommutingBlockCircuit, theta: np.ndarray) -> np.ndarray:
    """Exact QFIM from analytic derivative states.

    F_ij = 4 Re[<d_i psi|d_j psi> - <d_i psi|psi><psi|d_j psi>], symmetrized
    to remove floating-point asymmetry.
    """
    theta = np.asarray(theta, dtype=float)
    psi = simulator.run_circuit(circuit, theta).amplitudes
    return _assemble_qfim(_tangent_matrix(circuit, theta), psi)


def qfim_fd(circuit: CommutingBlockCircuit, theta: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central-finite-difference QFIM; independent of the analytic derivatives.

    The raw statevector is differentiated directly, which is phase-consistent
    because the circuit is an explicit smooth unitary in theta. Agreement
    with :func:`qfim_exact` is O(h^2).
    """
    if not 1e-6 <= h <= 1e-2:
        raise ValueError("h must lie in [1e-6, 1e-2]")
    theta = np.asarray(theta, dtype=float)
    m = circuit.n_parameters
    d = 2**circuit.n_qubits
    tangents = np.empty((m, d), dtype=np.complex128)
    for k in range(m):
        shift = np.zeros(m)
        shift[k] = h
        plus = simulator.run_circuit(circuit, theta + shift).amplitudes
        minus = simulator.run_circuit(circuit, theta - shift).amplitudes
        tangents[k] = (plus - minus) / (2.0 * h)
    psi = simulator.run_circuit(circuit, theta).amplitudes
    return _assemble_qfim(tangents, psi)


def generator_expectations(circuit: CommutingBlockCircuit, theta: np.ndarray) -> np.ndarray:
    """<G_k> for every parameter k, taken on the state after k's own layer.

    These are the phase (Berry) terms of the QFIM: since G_k commutes with
    its layer, the value equals the expectation before the layer as well, and
    <d_i psi|psi><psi|d_j psi> reduces to the real product <G_i><G_j>.
    """
    theta = np.asarray(theta, dtype=float)
    values = np.empty(circuit.n_parameters)
    for l in range(1, circuit.n_layers + 1):
        state = simulator.run_prefix(circuit, theta, l)
        for gate in circuit.layer(l).gates:
            values[gate.param_index] = simulator.expectation(state, gate.generator)
    return values


def energy_gradient(
    circuit: CommutingBlockCircuit,
    theta: np.ndarray,
    hamiltonian_terms,
) -> np.ndarray:
    """Gradient of sum_t c_t <psi|P_t|psi> from analytic derivative states.

    ``hamiltonian_terms`` is an iterable of (coefficient, PauliString) pairs
    with Hermitian strings. d_k E = 2 Re <H psi | d_k psi>.
    """
    theta = np.asarray(theta, dtype=float)
    psi = simulator.run_circuit(circuit, theta)
    h_psi = np.zeros_like(psi.amplitudes)
    scratch = np.empty_like(psi.amplitudes)
    for coeff, op in hamiltonian_terms:
        if not isinstance(op, PauliString) or not op.is_hermitian():
            raise ValueError(f"Hamiltonian term {op} must be a Hermitian Pauli string")
        simulator._apply_pauli_into(psi.amplitudes, scratch, op, circuit.n_qubits)
        h_psi += float(coeff) * scratch
    grad = np.empty(circuit.n_parameters)
    for k in range(circuit.n_parameters):
        tangent = derivative_state(circuit, theta, k).amplitudes
        grad[k] = 2.0 * np.real(np.vdot(h_psi, tangent))
    return grad
