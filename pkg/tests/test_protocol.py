"""Estimation protocol: planning, observables, generating sets, and the
oracle-equivalence of the exact-expectation mode."""
import os

import numpy as np
import pytest

from qfim_cbc import oracle, protocol
from qfim_cbc.circuit import CommutingBlockCircuit, build_odd_z_ansatz, build_random_circuit
from qfim_cbc.pauli import PauliString, Relation
from qfim_cbc.protocol import (
    build_offblock_observable,
    estimate_block_diag,
    estimate_off_block,
    estimate_qfim,
    generating_set,
    plan,
)
from qfim_cbc.simulator import NonCommutingError, expectation, run_prefix


def _p(text):
    return PauliString.parse(text)


@pytest.mark.parametrize("layers,expected", [(1, 1), (2, 3), (3, 6), (4, 10)])
def test_plan_counts(layers, expected):
    c = build_random_circuit(5, 3, layers, 1)
    preps = plan(c)
    assert len(preps) == expected
    block = [p for p in preps if p.kind == protocol.BLOCK_DIAG]
    off = [p for p in preps if p.kind == protocol.OFF_BLOCK]
    assert len(block) == layers and len(off) == layers * (layers - 1) // 2
    assert all(p.qubit_count == 3 for p in block)
    assert all(p.qubit_count == 4 for p in off)


def test_plan_example_ansatz_contents():
    c = build_odd_z_ansatz(2, 1, "plus")
    preps = plan(c)
    assert [p.kind for p in preps] == [
        protocol.BLOCK_DIAG,
        protocol.BLOCK_DIAG,
        protocol.OFF_BLOCK,
    ]
    assert [o.label() for o in preps[0].observables] == ["ZI", "IZ", "ZZ"]
    assert [o.label() for o in preps[1].observables] == ["XX"]
    assert preps[2].relation is Relation.ANTICOMMUTE
    assert preps[2].sign_flips == (-1,)
    assert [o.label() for o in preps[2].observables] == ["YYX", "YXY"]
    assert [o.qfim_entries for o in preps[2].observables] == [((0, 2),), ((1, 2),)]


def test_offblock_observable_anticommuting_case():
    # O = XX * ZI = -i YX, so iO = YX and the ancilla carries Y
    obs = build_offblock_observable(_p("ZI"), _p("XX"), Relation.ANTICOMMUTE)
    assert obs.sign == 1
    assert obs.observable == _p("YYX")


def test_offblock_observable_commuting_case():
    # O = XX * ZZ = -YY, measured as Z (x) YY with sign -1
    obs = build_offblock_observable(_p("ZZ"), _p("XX"), Relation.COMMUTE)
    assert obs.sign == -1
    assert obs.observable == _p("ZYY")


def test_offblock_observable_identity_product():
    obs = build_offblock_observable(_p("ZZ"), _p("ZZ"), Relation.COMMUTE)
    assert obs.sign == 1
    assert obs.observable == _p("ZII")


def test_offblock_observable_relation_mismatch():
    with pytest.raises(ValueError):
        build_offblock_observable(_p("ZI"), _p("XX"), Relation.COMMUTE)


def test_observable_groups_commute_exactly():
    for seed in range(8):
        c = build_random_circuit(seed, 4, 3, 2)
        for prep in plan(c):
            obs = prep.observables
            for i in range(len(obs)):
                for j in range(i + 1, len(obs)):
                    assert (
                        obs[i].observable.commutes(obs[j].observable)
                        is Relation.COMMUTE
                    )


def test_generating_set_examples():
    gens, decomp = generating_set([_p("ZI"), _p("IZ"), _p("ZZ")])
    assert gens == [_p("ZI"), _p("IZ")]
    assert decomp == [(1, (0,)), (1, (1,)), (1, (0, 1))]

    gens, decomp = generating_set([_p("XX")])
    assert gens == [_p("XX")] and decomp == [(1, (0,))]

    with pytest.raises(NonCommutingError):
        generating_set([_p("ZI"), _p("XI")])


def test_generating_set_negative_product_sign():
    # ZZ = -(XX)(YY): the decomposition must carry the -1
    gens, decomp = generating_set([_p("XX"), _p("YY"), _p("ZZ")])
    assert gens == [_p("XX"), _p("YY")]
    assert decomp[2] == (-1, (0, 1))

    # signed input decomposes onto the phase-free generator
    gens, decomp = generating_set([_p("ZI"), _p("-ZI")])
    assert gens == [_p("ZI")]
    assert decomp == [(1, (0,)), (-1, (0,))]

    # identity input needs no generators
    gens, decomp = generating_set([_p("II")])
    assert gens == [] and decomp == [(1, ())]


def test_generating_set_reconstruction_property():
    rng = np.random.default_rng(0)
    for seed in range(6):
        c = build_random_circuit(seed, 4, 3, 3)
        for prep in plan(c):
            observables = [o.observable for o in prep.observables]
            gens, decomp = generating_set(observables)
            for obs, (sign, indices) in zip(observables, decomp):
                product = PauliString(obs.n_qubits, 0, 0, 0)
                for i in indices:
                    product = product * gens[i]
                assert product.scaled_by_i(0 if sign == 1 else 2) == obs


def test_estimate_block_diag_plus_state():
    """A Z-type layer on |++>: the block is 4*I for any angles."""
    c = build_odd_z_ansatz(2, 1, "plus")
    for theta in ([0.0, 0.0, 0.0], [0.4, -1.2, 0.9]):
        result = estimate_block_diag(c, theta, 1)
        assert result.entries[(0, 1)] == pytest.approx(0.0, abs=1e-12)
        assert result.generator_expectations[0] == pytest.approx(0.0, abs=1e-12)
        assert result.generator_expectations[1] == pytest.approx(0.0, abs=1e-12)
        assert result.expectation_products[(0, 1)] == pytest.approx(0.0, abs=1e-12)


def test_estimate_block_diag_eigenstate():
    c = CommutingBlockCircuit.from_generators(1, [[_p("Z")]], "zero")
    result = estimate_block_diag(c, [0.7], 1)
    assert result.generator_expectations[0] == pytest.approx(1.0)
    # diagonal entry 4(1 - <Z>^2) = 0


def test_estimate_block_diag_matches_oracle_block():
    rng = np.random.default_rng(1)
    c = build_random_circuit(3, 4, 3, 2)
    theta = rng.normal(size=c.n_parameters)
    f = oracle.qfim_exact(c, theta)
    g = oracle.generator_expectations(c, theta)
    for l in range(1, c.n_layers + 1):
        result = estimate_block_diag(c, theta, l)
        for (i, j), gram in result.entries.items():
            expected = f[i, j] / 4.0 + g[i] * g[j]
            assert gram == pytest.approx(expected, abs=1e-9)


def test_estimate_off_block_degenerate_segment():
    """Commuting pair with zero segment angles reduces to <G_i G_j> on psi^l1."""
    c = CommutingBlockCircuit.from_generators(2, [[_p("ZI")], [_p("IZ")]], "plus")
    theta = np.array([0.8, 0.0])
    entries = estimate_off_block(c, theta, 1, 2)
    psi1 = run_prefix(c, theta, 1)
    assert entries[(0, 1)] == pytest.approx(expectation(psi1, _p("ZZ")), abs=1e-12)


def test_estimate_off_block_matches_oracle_inner_products():
    c = build_odd_z_ansatz(2, 2, "plus")
    theta = np.random.default_rng(2).normal(size=c.n_parameters)
    tangles = [oracle.derivative_state(c, theta, k).amplitudes for k in range(c.n_parameters)]
    for l1, l2 in [(1, 2), (1, 3), (2, 4), (3, 4)]:
        entries = estimate_off_block(c, theta, l1, l2)
        for (i, j), value in entries.items():
            direct = np.real(np.vdot(tangles[i], tangles[j]))
            assert value == pytest.approx(direct, abs=1e-10)


def test_estimate_qfim_matches_oracle():
    rng = np.random.default_rng(3)
    for seed in range(10):
        c = build_random_circuit(seed, 3 + seed % 2, 2 + seed % 3, 1 + seed % 2)
        theta = rng.normal(size=c.n_parameters)
        estimate = estimate_qfim(c, theta)
        exact = oracle.qfim_exact(c, theta)
        assert np.abs(estimate.matrix - exact).max() <= 1e-9
        np.testing.assert_array_equal(estimate.matrix, estimate.matrix.T)


def test_ledger_contents():
    c = build_odd_z_ansatz(2, 1, "plus")
    estimate = estimate_qfim(c, [0.3, 0.7, 0.5])
    ledger = estimate.ledger
    assert ledger.n_preparations == 3
    assert ledger.qubit_counts == (2, 2, 3)
    assert ledger.mode == protocol.EXACT_EXPECTATION
    assert ledger.total_shots == 0 and ledger.shots_per_preparation is None

    shot = estimate_qfim(c, [0.3, 0.7, 0.5], shots=128, master_seed=1, target_error=0.05)
    assert shot.ledger.mode == protocol.SHOTS
    assert shot.ledger.total_shots == 3 * 128
    assert shot.ledger.target_error == 0.05


def test_provenance_is_total():
    c = build_odd_z_ansatz(2, 2, "plus")
    estimate = estimate_qfim(c, np.zeros(c.n_parameters))
    m = c.n_parameters
    preps = plan(c)
    for i in range(m):
        for j in range(i, m):
            record = estimate.provenance[(i, j)]
            assert 0 <= record.preparation < len(preps)
            assert record.shots == 0
            prep = preps[record.preparation]
            labels = [o.label() for o in prep.observables]
            assert record.observable in labels


def test_shots_determinism_and_thread_invariance():
    c = build_odd_z_ansatz(2, 2, "plus")
    theta = np.random.default_rng(4).normal(size=c.n_parameters)
    a = estimate_qfim(c, theta, shots=256, master_seed=11)
    b = estimate_qfim(c, theta, shots=256, master_seed=11)
    np.testing.assert_array_equal(a.matrix, b.matrix)

    old = os.environ.get("QFIM_CBC_THREADS")
    try:
        os.environ["QFIM_CBC_THREADS"] = "3"
        threaded = estimate_qfim(c, theta, shots=256, master_seed=11)
    finally:
        if old is None:
            os.environ.pop("QFIM_CBC_THREADS", None)
        else:
            os.environ["QFIM_CBC_THREADS"] = old
    np.testing.assert_array_equal(a.matrix, threaded.matrix)


def test_shots_mode_requires_two_shots():
    c = build_odd_z_ansatz(2, 1, "plus")
    with pytest.raises(ValueError):
        estimate_qfim(c, [0.1, 0.2, 0.3], shots=1)
    with pytest.raises(ValueError):
        estimate_qfim(c, [0.1, 0.2, 0.3], shots=0)


def test_shots_unbiasedness_quick():
    """Sample means of every entry stay inside 5 standard errors."""
    c = build_odd_z_ansatz(2, 1, "plus")
    theta = np.array([0.3, 0.7, 0.5])
    exact = estimate_qfim(c, theta).matrix
    runs = 60
    mats = np.stack(
        [estimate_qfim(c, theta, shots=1024, master_seed=[5, r]).matrix for r in range(runs)]
    )
    mean = mats.mean(axis=0)
    se = mats.std(axis=0, ddof=1) / np.sqrt(runs)
    deviation = np.abs(mean - exact)
    assert np.all(deviation[se > 0] <= 5 * se[se > 0])
    np.testing.assert_allclose(deviation[se == 0], 0.0, atol=1e-12)


def test_variance_sweep_structure():
    c = build_odd_z_ansatz(2, 1, "plus")
    sweep = protocol.variance_sweep(c, [0.3, 0.7, 0.5], [64, 256, 1024], 40, master_seed=2)
    assert sweep["shots_list"] == [64, 256, 1024]
    assert len(sweep["mean_variances"]) == 3
    assert -1.4 < sweep["aggregate_slope"] < -0.6
    assert sweep["variances"]["64"][0][0] > sweep["variances"]["1024"][0][0]
    with pytest.raises(ValueError):
        protocol.variance_sweep(c, [0.3, 0.7, 0.5], [64], 40)
    with pytest.raises(ValueError):
        protocol.variance_sweep(c, [0.3, 0.7, 0.5], [64, 256], 1)
