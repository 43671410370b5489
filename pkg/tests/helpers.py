"""Shared test utilities."""
from __future__ import annotations

import numpy as np

from qfim_cbc.pauli import PauliString


def random_pauli(rng, n_qubits: int, phases=(0,)) -> PauliString:
    """Uniform random nonidentity string with a phase drawn from ``phases``."""
    while True:
        x = int(rng.integers(0, 1 << n_qubits))
        z = int(rng.integers(0, 1 << n_qubits))
        if x or z:
            return PauliString(n_qubits, x, z, int(rng.choice(phases)))


def random_state(rng, n_qubits: int) -> np.ndarray:
    v = rng.normal(size=2**n_qubits) + 1j * rng.normal(size=2**n_qubits)
    return v / np.linalg.norm(v)


def dense_unitary(gates, theta, n_qubits: int) -> np.ndarray:
    """Product of exp(-i theta_k G_k) matrices in application order."""
    from scipy.linalg import expm

    u = np.eye(2**n_qubits, dtype=complex)
    for gate in gates:
        u = expm(-1j * theta[gate.param_index] * gate.generator.to_matrix()) @ u
    return u


def acceptance_circuits():
    """The deterministic random-circuit set used by the acceptance criteria.

    50 seeded circuits with N <= 5, L <= 4, at most 3 gates per layer,
    alternating initial states.
    """
    from qfim_cbc.circuit import build_random_circuit

    circuits = []
    for seed in range(50):
        n = 2 + seed % 4
        layers = 2 + seed % 3
        gates = 1 + (seed // 2) % 3
        init = "plus" if seed % 2 == 0 else "zero"
        circuits.append(build_random_circuit(seed, n, layers, gates, init))
    return circuits
