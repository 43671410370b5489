"""Quantum natural gradient descent driven by the estimated QFIM.

Demonstration consumer of the estimation protocol: minimizes the energy of
a Pauli-sum Hamiltonian over a commuting-block ansatz, preconditioning the
gradient with the (regularized) QFIM.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import oracle, protocol, simulator
from .circuit import CommutingBlockCircuit, build_odd_z_ansatz
from .pauli import PauliString

QFIM_MODES = ("oracle-exact", "protocol-exact", "protocol-shots")
GRAD_MODES = ("analytic", "parameter-shift")


@dataclass(frozen=True)
class Hamiltonian:
    """Real linear combination of Hermitian Pauli strings."""

    terms: tuple[tuple[float, PauliString], ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("Hamiltonian needs at least one term")
        n = self.terms[0][1].n_qubits
        for coeff, op in self.terms:
            if not np.isfinite(coeff):
                raise ValueError("coefficients must be finite")
            if op.n_qubits != n:
                raise ValueError("all terms must act on the same number of qubits")
            if not op.is_hermitian():
                raise ValueError(f"term {op} is not Hermitian")

    @property
    def n_qubits(self) -> int:
        return self.terms[0][1].n_qubits

    @classmethod
    def from_terms(cls, terms) -> Hamiltonian:
        """From (coefficient, label-or-PauliString) pairs; signs fold into coefficients."""
        normalized = []
        for coeff, op in terms:
            if not isinstance(op, PauliString):
                op = PauliString.parse(op)
            coeff = float(coeff) * op.hermitian_sign()
            normalized.append((coeff, op.phase_free()))
        return cls(tuple(normalized))

    @classmethod
    def from_dict(cls, doc: dict) -> Hamiltonian:
        """Parse {"terms": [[coefficient, "label"], ...]}."""
        if "terms" not in doc:
            raise ValueError("Hamiltonian document needs a 'terms' field")
        return cls.from_terms(doc["terms"])

    def to_dict(self) -> dict:
        return {"terms": [[coeff, op.label()] for coeff, op in self.terms]}

    def to_matrix(self) -> np.ndarray:
        return sum(coeff * op.to_matrix() for coeff, op in self.terms)


def transverse_field_ising(n_qubits: int, coupling: float = 1.0, field_: float = 1.0) -> Hamiltonian:
    """Open-chain TFIM: -J sum Z_i Z_{i+1} - h sum X_i."""
    terms = []
    for i in range(n_qubits - 1):
        terms.append((-coupling, PauliString(n_qubits, 0, 0b11 << i)))
    for i in range(n_qubits):
        terms.append((-field_, PauliString(n_qubits, 1 << i, 0)))
    return Hamiltonian(tuple(terms))


def ground_energy(hamiltonian: Hamiltonian) -> float:
    """Smallest eigenvalue by dense diagonalization (reference, n <= 12)."""
    if hamiltonian.n_qubits > 12:
        raise ValueError("dense diagonalization reference is limited to 12 qubits")
    return float(np.linalg.eigvalsh(hamiltonian.to_matrix())[0])


def tfim3_demo(
    repetitions: int = 2, theta_scale: float = 0.1, theta_seed: int = 0
) -> tuple[CommutingBlockCircuit, Hamiltonian, np.ndarray]:
    """Benchmark problem: 3-qubit TFIM under the odd-Z ansatz.

    The odd-Z ansatz conserves every even-weight Z string, so the
    nearest-neighbour ZZ correlators are frozen at their initial values and
    the ground state is unreachable from |+++> or |000>. The initial state
    here is the tilted product state whose ZZ correlators match the ground
    state's (z_i z_j = <Z_i Z_j>_ground, three equations in three tilts),
    which makes the ground energy attainable. Returns
    (circuit, hamiltonian, theta0) with a small seeded random theta0, since
    theta = 0 is a stationary point of the energy.
    """
    hamiltonian = transverse_field_ising(3)
    matrix = hamiltonian.to_matrix()
    _, vectors = np.linalg.eigh(matrix)
    gs = vectors[:, 0]

    def corr(z_mask: int) -> float:
        op = PauliString(3, 0, z_mask).to_matrix()
        return float(np.real(gs.conj() @ op @ gs))

    c12, c23, c13 = corr(0b011), corr(0b110), corr(0b101)
    z2 = np.sqrt(c12 * c23 / c13)
    tilts = (c12 / z2, z2, c23 / z2)
    psi0 = np.array([1.0])
    for z in tilts:
        psi0 = np.kron(psi0, [np.sqrt((1 + z) / 2), np.sqrt((1 - z) / 2)])
    circuit = build_odd_z_ansatz(3, repetitions, psi0)
    theta0 = np.random.default_rng(theta_seed).uniform(
        -theta_scale, theta_scale, size=circuit.n_parameters
    )
    return circuit, hamiltonian, theta0


def energy(circuit: CommutingBlockCircuit, theta: np.ndarray, hamiltonian: Hamiltonian) -> float:
    """sum_t c_t <psi(theta)|P_t|psi(theta)> on the simulated state."""
    if hamiltonian.n_qubits != circuit.n_qubits:
        raise ValueError(
            f"Hamiltonian acts on {hamiltonian.n_qubits} qubits, circuit on {circuit.n_qubits}"
        )
    state = simulator.run_circuit(circuit, theta)
    return sum(
        coeff * simulator.expectation(state, op) for coeff, op in hamiltonian.terms
    )


def parameter_shift_gradient(
    circuit: CommutingBlockCircuit, theta: np.ndarray, hamiltonian: Hamiltonian
) -> np.ndarray:
    """Two-point rule g_k = E(theta_k + pi/4) - E(theta_k - pi/4).

    Exact for gates exp(-i G theta) with G**2 == I, where the energy is a
    degree-1 trigonometric polynomial in 2 theta_k.
    """
    theta = np.asarray(theta, dtype=float)
    grad = np.empty(circuit.n_parameters)
    for k in range(circuit.n_parameters):
        shift = np.zeros(circuit.n_parameters)
        shift[k] = np.pi / 4
        grad[k] = energy(circuit, theta + shift, hamiltonian) - energy(
            circuit, theta - shift, hamiltonian
        )
    return grad


def qng_step(
    theta: np.ndarray,
    gradient: np.ndarray,
    qfim: np.ndarray,
    eta: float,
    regularization: float,
) -> np.ndarray:
    """theta - eta * (F + regularization I)^{-1} gradient.

    Solved as a linear system; falls back to least squares when the
    regularized matrix is still singular to working precision.
    """
    if eta <= 0:
        raise ValueError("eta must be > 0")
    if regularization < 0:
        raise ValueError("regularization must be >= 0")
    theta = np.asarray(theta, dtype=float)
    gradient = np.asarray(gradient, dtype=float)
    a = qfim + regularization * np.eye(len(theta))
    try:
        step = np.linalg.solve(a, gradient)
    except np.linalg.LinAlgError:
        step, *_ = np.linalg.lstsq(a, gradient, rcond=None)
    if not np.all(np.isfinite(step)):
        raise RuntimeError("natural-gradient solve produced a non-finite step")
    return theta - eta * step


@dataclass(frozen=True)
class QngConfig:
    eta: float = 0.05
    regularization: float = 1e-3
    max_iters: int = 200
    qfim_mode: str = "protocol-exact"
    grad_mode: str = "analytic"
    seed: int = 0
    stop_tol: float = 1e-6
    shots: int = 4096  # used by qfim_mode="protocol-shots" only

    def __post_init__(self):
        if self.qfim_mode not in QFIM_MODES:
            raise ValueError(f"qfim_mode must be one of {QFIM_MODES}")
        if self.grad_mode not in GRAD_MODES:
            raise ValueError(f"grad_mode must be one of {GRAD_MODES}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    theta: tuple[float, ...]
    energy: float
    grad_norm: float
    qfim_min_eigval: float
    qfim_max_eigval: float
    total_preparations: int
    total_shots: int

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "theta": list(self.theta),
            "energy": self.energy,
            "grad_norm": self.grad_norm,
            "qfim_min_eigval": self.qfim_min_eigval,
            "qfim_max_eigval": self.qfim_max_eigval,
            "total_preparations": self.total_preparations,
            "total_shots": self.total_shots,
        }


@dataclass
class QngTrajectory:
    records: list[IterationRecord] = field(default_factory=list)
    stopped_on: str = "max_iters"

    @property
    def final_theta(self) -> np.ndarray:
        return np.array(self.records[-1].theta)

    @property
    def final_energy(self) -> float:
        return self.records[-1].energy

    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    def to_dict(self) -> dict:
        return {
            "stopped_on": self.stopped_on,
            "records": [r.to_dict() for r in self.records],
        }


def run(
    circuit: CommutingBlockCircuit,
    hamiltonian: Hamiltonian,
    theta0: np.ndarray,
    config: QngConfig = QngConfig(),
) -> QngTrajectory:
    """Natural-gradient descent; deterministic given the config seed.

    The initial point is always recorded, so the trajectory has
    ``iterations + 1`` records. Stops early once the gradient norm falls
    below ``stop_tol``.
    """
    theta = np.asarray(theta0, dtype=float).copy()
    trajectory = QngTrajectory()
    total_preps = 0
    total_shots = 0
    for iteration in range(config.max_iters + 1):
        e = energy(circuit, theta, hamiltonian)
        if config.grad_mode == "analytic":
            grad = oracle.energy_gradient(circuit, theta, hamiltonian.terms)
        else:
            grad = parameter_shift_gradient(circuit, theta, hamiltonian)
        if config.qfim_mode == "oracle-exact":
            qfim = oracle.qfim_exact(circuit, theta)
        else:
            shots = config.shots if config.qfim_mode == "protocol-shots" else None
            estimate = protocol.estimate_qfim(
                circuit, theta, shots=shots, master_seed=[config.seed, iteration]
            )
            qfim = estimate.matrix
            total_preps += estimate.ledger.n_preparations
            total_shots += estimate.ledger.total_shots
        eigvals = np.linalg.eigvalsh(0.5 * (qfim + qfim.T))
        grad_norm = float(np.linalg.norm(grad))
        trajectory.records.append(
            IterationRecord(
                iteration=iteration,
                theta=tuple(float(t) for t in theta),
                energy=float(e),
                grad_norm=grad_norm,
                qfim_min_eigval=float(eigvals[0]),
                qfim_max_eigval=float(eigvals[-1]),
                total_preparations=total_preps,
                total_shots=total_shots,
            )
        )
        if not np.isfinite(e):
            raise RuntimeError(f"energy diverged at iteration {iteration}")
        if grad_norm < config.stop_tol:
            trajectory.stopped_on = "stop_tol"
            break
        if iteration == config.max_iters:
            break
        theta = qng_step(theta, grad, qfim, config.eta, config.regularization)
    return trajectory
