"""Statevector engine: initialization, operators, LCU states, sampling."""
import numpy as np
import pytest

import qfim_cbc.simulator as sim
from qfim_cbc.circuit import CommutingBlockCircuit, build_odd_z_ansatz
from qfim_cbc.pauli import DimensionError, PauliString, Relation
from qfim_cbc.simulator import (
    NonCommutingError,
    StateVector,
    apply_pauli,
    apply_rotation,
    expectation,
    init_state,
    prepare_lcu_state,
    run_circuit,
    run_prefix,
    sample_joint_pauli,
    sample_outcome_matrix,
)

from helpers import dense_unitary, random_pauli, random_state


def _p(text):
    return PauliString.parse(text)


def test_init_state():
    np.testing.assert_array_equal(init_state(1, "zero").amplitudes, [1, 0])
    np.testing.assert_allclose(init_state(2, "plus").amplitudes, [0.5] * 4)
    custom = init_state(1, np.array([0.6, 0.8]))
    np.testing.assert_allclose(custom.amplitudes, [0.6, 0.8])
    with pytest.raises(ValueError):
        init_state(1, np.array([0.6, 0.9]))
    with pytest.raises(ValueError):
        init_state(1, "bell")


def test_apply_pauli_single_qubit():
    zero = init_state(1, "zero")
    np.testing.assert_array_equal(apply_pauli(zero, _p("X")).amplitudes, [0, 1])
    np.testing.assert_array_equal(apply_pauli(zero, _p("Y")).amplitudes, [0, 1j])
    state = StateVector(1, np.array([0.6, 0.8]))
    np.testing.assert_allclose(apply_pauli(state, _p("Z")).amplitudes, [0.6, -0.8])


def test_apply_pauli_matches_dense():
    rng = np.random.default_rng(0)
    for _ in range(150):
        n = int(rng.integers(1, 5))
        p = random_pauli(rng, n, phases=(0, 1, 2, 3))
        v = random_state(rng, n)
        out = apply_pauli(StateVector(n, v), p).amplitudes
        np.testing.assert_allclose(out, p.to_matrix() @ v, atol=1e-13)


def test_apply_pauli_value_semantics():
    state = init_state(1, "zero")
    apply_pauli(state, _p("X"))
    np.testing.assert_array_equal(state.amplitudes, [1, 0])


def test_apply_rotation_examples():
    zero = init_state(1, "zero")
    np.testing.assert_allclose(
        apply_rotation(zero, _p("Z"), 0.4).amplitudes, [np.exp(-0.4j), 0]
    )
    np.testing.assert_allclose(
        apply_rotation(zero, _p("X"), np.pi / 4).amplitudes,
        [1 / np.sqrt(2), -1j / np.sqrt(2)],
    )
    np.testing.assert_array_equal(apply_rotation(zero, _p("X"), 0.0).amplitudes, [1, 0])
    with pytest.raises(ValueError):
        apply_rotation(zero, _p("-Z"), 0.1)


def test_apply_rotation_properties():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = int(rng.integers(1, 5))
        p = random_pauli(rng, n)
        v = StateVector(n, random_state(rng, n))
        t1, t2 = rng.normal(size=2)
        combined = apply_rotation(v, p, t1 + t2)
        stepwise = apply_rotation(apply_rotation(v, p, t1), p, t2)
        np.testing.assert_allclose(combined.amplitudes, stepwise.amplitudes, atol=1e-12)
        assert abs(stepwise.norm() - 1.0) < 1e-10


def test_commuting_rotations_swap():
    rng = np.random.default_rng(2)
    count = 0
    while count < 30:
        n = int(rng.integers(2, 5))
        p, q = random_pauli(rng, n), random_pauli(rng, n)
        if p.commutes(q) is not Relation.COMMUTE:
            continue
        count += 1
        v = StateVector(n, random_state(rng, n))
        t1, t2 = rng.normal(size=2)
        pq = apply_rotation(apply_rotation(v, p, t1), q, t2)
        qp = apply_rotation(apply_rotation(v, q, t2), p, t1)
        np.testing.assert_allclose(pq.amplitudes, qp.amplitudes, atol=1e-12)


def test_expectation_examples():
    assert expectation(init_state(1, "zero"), _p("Z")) == pytest.approx(1.0)
    assert expectation(init_state(1, "plus"), _p("Z")) == pytest.approx(0.0, abs=1e-15)
    assert expectation(init_state(1, "plus"), _p("X")) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        expectation(init_state(1, "zero"), _p("iY"))


def test_expectation_matches_dense():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(1, 5))
        p = random_pauli(rng, n, phases=(0, 2))
        v = random_state(rng, n)
        dense = np.real(v.conj() @ p.to_matrix() @ v)
        assert expectation(StateVector(n, v), p) == pytest.approx(dense, abs=1e-12)


def test_run_prefix():
    c = build_odd_z_ansatz(2, 1)
    theta = np.array([0.3, 0.7, 0.5])
    np.testing.assert_allclose(run_prefix(c, theta, 0).amplitudes, [0.5] * 4)
    np.testing.assert_allclose(run_prefix(c, np.zeros(3), 2).amplitudes, [0.5] * 4)
    with pytest.raises(DimensionError):
        run_prefix(c, np.zeros(2), 1)


def test_run_circuit_matches_dense_product():
    rng = np.random.default_rng(4)
    for seed in range(5):
        from qfim_cbc.circuit import build_random_circuit

        c = build_random_circuit(seed, 3, 2, 2)
        theta = rng.normal(size=c.n_parameters)
        u = dense_unitary(c.prefix_gates(c.n_layers), theta, 3)
        expected = u @ init_state(3, "plus").amplitudes
        np.testing.assert_allclose(run_circuit(c, theta).amplitudes, expected, atol=1e-12)


def test_prepare_lcu_degenerate_branches():
    c = build_odd_z_ansatz(2, 1)
    theta = np.array([0.3, 0.7, 0.5])
    psi = run_prefix(c, theta, 1)
    segment = c.segment_layers(1, 2)

    # no sign flip: the flipped branch equals the forward one, ancilla stays |0>
    state = prepare_lcu_state(psi, segment, (1,), theta, Relation.COMMUTE)
    w = apply_rotation(psi, _p("XX"), theta[2])
    np.testing.assert_allclose(state.amplitudes[:4], w.amplitudes, atol=1e-12)
    np.testing.assert_allclose(state.amplitudes[4:], 0, atol=1e-12)

    # zero angles: both branches are the identity regardless of the signs
    state0 = prepare_lcu_state(psi, segment, (-1,), np.zeros(3), Relation.COMMUTE)
    np.testing.assert_allclose(state0.amplitudes[:4], psi.amplitudes, atol=1e-12)
    np.testing.assert_allclose(state0.amplitudes[4:], 0, atol=1e-12)

    # the anticommuting variant puts the sum branch on ancilla |1>
    state1 = prepare_lcu_state(psi, segment, (-1,), np.zeros(3), Relation.ANTICOMMUTE)
    np.testing.assert_allclose(state1.amplitudes[4:], psi.amplitudes, atol=1e-12)


def test_prepare_lcu_norm_and_errors():
    rng = np.random.default_rng(5)
    c = build_odd_z_ansatz(2, 2)
    for _ in range(20):
        theta = rng.normal(size=c.n_parameters)
        psi = run_prefix(c, theta, 1)
        state = prepare_lcu_state(
            psi, c.segment_layers(1, 4), c.segment_sign_flips(1, 4), theta, Relation.ANTICOMMUTE
        )
        assert state.n_qubits == 3
        assert abs(state.norm() - 1.0) < 1e-10
    psi = run_prefix(c, np.zeros(c.n_parameters), 1)
    with pytest.raises(ValueError):
        prepare_lcu_state(psi, [], (), np.zeros(6), Relation.COMMUTE)
    with pytest.raises(DimensionError):
        prepare_lcu_state(psi, c.segment_layers(1, 2), (1, -1), np.zeros(6), Relation.COMMUTE)
    with pytest.raises(ValueError):
        prepare_lcu_state(psi, c.segment_layers(1, 2), (1,), np.zeros(6), Relation.SELF)


def test_sampling_eigenstates():
    records = sample_joint_pauli(init_state(1, "zero"), [_p("Z")], 100, 0)
    assert len(records) == 100
    assert all(r.generator_outcomes == (1,) for r in records)
    assert [r.shot_index for r in records[:3]] == [0, 1, 2]

    records = sample_joint_pauli(init_state(2, "zero"), [_p("ZI"), _p("IZ")], 50, 1)
    assert all(r.generator_outcomes == (1, 1) for r in records)


def test_sampling_fair_coin():
    out = sample_outcome_matrix(init_state(1, "plus"), [_p("Z")], 20000, 7)
    assert abs(out.mean()) < 5 / np.sqrt(20000)


def test_sampling_joint_distribution_matches_expectations():
    """Marginals and the joint product both converge to the right moments."""
    rng = np.random.default_rng(8)
    v = StateVector(2, random_state(rng, 2))
    paulis = [_p("ZI"), _p("IZ")]
    shots = 100_000
    out = sample_outcome_matrix(v, paulis, shots, 123).astype(float)
    for k, p in enumerate(paulis):
        mean = out[:, k].mean()
        target = expectation(v, p)
        se = np.sqrt(max(1 - target**2, 1e-12) / shots)
        assert abs(mean - target) < 5 * se
    product_mean = (out[:, 0] * out[:, 1]).mean()
    target_zz = expectation(v, _p("ZZ"))
    se = np.sqrt(max(1 - target_zz**2, 1e-12) / shots)
    assert abs(product_mean - target_zz) < 5 * se


def test_sampling_signed_generator():
    out = sample_outcome_matrix(init_state(1, "zero"), [_p("-Z")], 50, 0)
    assert np.all(out == -1)


def test_sampling_determinism_and_errors():
    state = init_state(2, "plus")
    a = sample_outcome_matrix(state, [_p("ZI"), _p("IZ")], 500, 42)
    b = sample_outcome_matrix(state, [_p("ZI"), _p("IZ")], 500, 42)
    np.testing.assert_array_equal(a, b)
    with pytest.raises(NonCommutingError):
        sample_joint_pauli(state, [_p("ZI"), _p("XI")], 10, 0)
    with pytest.raises(ValueError):
        sample_joint_pauli(state, [_p("iZI")], 10, 0)


def test_norm_preserved_by_public_operations():
    rng = np.random.default_rng(9)
    c = build_odd_z_ansatz(3, 2)
    for _ in range(10):
        theta = rng.normal(size=c.n_parameters)
        for l in range(c.n_layers + 1):
            assert abs(run_prefix(c, theta, l).norm() - 1.0) < 1e-10
