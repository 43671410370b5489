"""Quantum Fisher information matrix estimation for commuting-block circuits."""

from ._backend import backend_name
from .pauli import DimensionError, PauliFormatError, PauliString, Relation
from .circuit import (
    CommutingBlockCircuit,
    ConstructionError,
    Gate,
    Layer,
    LayerCommutationError,
    MixedRelationError,
    build_odd_z_ansatz,
    build_random_circuit,
    validate,
)
from .simulator import (
    NonCommutingError,
    SampleRecord,
    StateVector,
    apply_pauli,
    apply_rotation,
    expectation,
    init_state,
    prepare_lcu_state,
    run_circuit,
    run_prefix,
    sample_joint_pauli,
)
from .oracle import generator_expectations, qfim_exact, qfim_fd
from .protocol import (
    ObservableAssignment,
    Preparation,
    QfimEstimate,
    ResourceLedger,
    build_offblock_observable,
    estimate_qfim,
    generating_set,
    plan,
    variance_sweep,
)
from .qng import Hamiltonian, QngConfig, QngTrajectory, ground_energy, qng_step
from .qng import run as qng_run

__version__ = "0.1.0"

__all__ = [
    "backend_name",
    "DimensionError",
    "PauliFormatError",
    "PauliString",
    "Relation",
    "CommutingBlockCircuit",
    "ConstructionError",
    "Gate",
    "Layer",
    "LayerCommutationError",
    "MixedRelationError",
    "build_odd_z_ansatz",
    "build_random_circuit",
    "validate",
    "NonCommutingError",
    "SampleRecord",
    "StateVector",
    "apply_pauli",
    "apply_rotation",
    "expectation",
    "init_state",
    "prepare_lcu_state",
    "run_circuit",
    "run_prefix",
    "sample_joint_pauli",
    "generator_expectations",
    "qfim_exact",
    "qfim_fd",
    "ObservableAssignment",
    "Preparation",
    "QfimEstimate",
    "ResourceLedger",
    "build_offblock_observable",
    "estimate_qfim",
    "generating_set",
    "plan",
    "variance_sweep",
    "Hamiltonian",
    "QngConfig",
    "QngTrajectory",
    "ground_energy",
    "qng_step",
    "qng_run",
    "__version__",
]
