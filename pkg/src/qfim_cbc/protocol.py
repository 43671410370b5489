"""Layer-pair estimation protocol for the QFIM of commuting-block circuits.

For a circuit with L layers the full m x m QFIM is recovered from
L(L+1)/2 distinct state preparations:

* one preparation per layer l (N qubits): the state after layer l, on which
  the layer's generators and their pairwise products form a commuting family
  measured jointly. This yields every same-layer entry and the generator
  expectations <G_k> that enter all phase-term products.
* one preparation per layer pair l1 < l2 (N + 1 qubits): an ancilla-tagged
  interference state of the intermediate block run forwards and with
  sign-flipped parameters. Measuring Z (x) (G_j G_i) when the two layers
  commute, or Y (x) (i G_j G_i) when they anticommute, gives
  Re <d_i psi | d_j psi> for every (i, j) of the pair at once; those
  observables commute among themselves, so one joint measurement covers the
  whole block.

Entries are assembled as F_ij = 4 (Re <d_i psi|d_j psi> - <G_i><G_j>), with
the generator expectations reused from the per-layer preparations so the
preparation count stays at L(L+1)/2.

In shot mode each preparation is jointly sampled M times through a GF(2)
generating set of its observable group. Every entry estimator is exactly
unbiased: plain sample means for the inner-product terms, plug-in products
of means for <G_i><G_j> when i and j live in different layers (independent
shot sets), and the cross-product U-statistic
(S_i S_j - sum_s a_s b_s) / (M (M - 1)) when they share a preparation.
Per-preparation RNG streams are derived from the master seed so results are
independent of execution order.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import simulator
from ._backend import backend_name
from .circuit import CommutingBlockCircuit
from .pauli import PauliString, Relation
from .simulator import NonCommutingError, StateVector

BLOCK_DIAG = "block-diag"
OFF_BLOCK = "off-block"

EXACT_EXPECTATION = "exact-expectation"
SHOTS = "shots"


@dataclass(frozen=True)
class ObservableAssignment:
    """One measured Pauli string and the QFIM entries its value feeds.

    The estimated quantity is ``sign * <observable>``; the observable itself
    is always phase-free Hermitian so it can be jointly sampled.
    """

    target: tuple
    sign: int
    observable: PauliString
    qfim_entries: tuple[tuple[int, int], ...]

    def label(self) -> str:
        return ("-" if self.sign < 0 else "") + self.observable.label()


@dataclass(frozen=True)
class Preparation:
    """One distinct circuit preparation and its commuting observable group."""

    index: int
    kind: str
    l1: int
    l2: int
    relation: Relation | None
    qubit_count: int
    prefix_level: int
    sign_flips: tuple[int, ...]
    observables: tuple[ObservableAssignment, ...]


@dataclass(frozen=True)
class EntryProvenance:
    preparation: int
    observable: str
    shots: int


@dataclass(frozen=True)
class ResourceLedger:
    n_preparations: int
    qubit_counts: tuple[int, ...]
    mode: str
    shots_per_preparation: int | None
    total_shots: int
    target_error: float | None = None


@dataclass
class QfimEstimate:
    matrix: np.ndarray
    provenance: dict[tuple[int, int], EntryProvenance]
    ledger: ResourceLedger


# -- observable construction --------------------------------------------------


def _with_ancilla(p: PauliString, ancilla: str) -> PauliString:
    """Prefix qubit 0 with Z or Y; existing qubits shift to 1..N."""
    x = p.x_mask << 1
    z = p.z_mask << 1
    if ancilla == "Z":
        z |= 1
    elif ancilla == "Y":
        x |= 1
        z |= 1
    else:
        raise ValueError(f"unsupported ancilla letter {ancilla!r}")
    return PauliString(p.n_qubits + 1, x, z, p.phase_exp)


def build_offblock_observable(
    g_i: PauliString,
    g_j: PauliString,
    relation: Relation,
    entry: tuple[int, int] | None = None,
) -> ObservableAssignment:
    """Measured (N+1)-qubit observable for the pair (G_i of l1, G_j of l2).

    The pair product O = G_j G_i is Hermitian up to a factor of i: when the
    layers commute, O itself is +-1 times a plain string and the ancilla
    carries Z; when they anticommute, iO is, and the ancilla carries Y. The
    +-1 is folded into ``sign``.
    """
    actual = g_i.commutes(g_j)
    if actual is not relation:
        raise ValueError(
            f"declared relation {relation.value} but {g_i} and {g_j} {actual.value}"
        )
    product = g_j * g_i
    if relation is Relation.COMMUTE:
        sign = product.hermitian_sign()
        measured = _with_ancilla(product.phase_free(), "Z")
    else:
        i_product = product.scaled_by_i(1)
        sign = i_product.hermitian_sign()
        measured = _with_ancilla(i_product.phase_free(), "Y")
    entries = () if entry is None else (tuple(entry),)
    return ObservableAssignment(
        target=("pair", entry) if entry is not None else ("pair", None),
        sign=sign,
        observable=measured,
        qfim_entries=entries,
    )


def _check_group_commutes(prep: Preparation):
    obs = prep.observables
    for i in range(len(obs)):
        for j in range(i + 1, len(obs)):
            if obs[i].observable.commutes(obs[j].observable) is not Relation.COMMUTE:
                raise NonCommutingError(obs[i].observable, obs[j].observable)


def _blockdiag_preparation(circuit: CommutingBlockCircuit, l: int, index: int) -> Preparation:
    gates = circuit.layer(l).gates
    observables: list[ObservableAssignment] = []
    for g in gates:
        observables.append(
            ObservableAssignment(
                target=("generator", g.param_index),
                sign=1,
                observable=g.generator,
                qfim_entries=((g.param_index, g.param_index),),
            )
        )
    for a in range(len(gates)):
        for b in range(a + 1, len(gates)):
            i, j = gates[a].param_index, gates[b].param_index
            product = gates[a].generator * gates[b].generator
            observables.append(
                ObservableAssignment(
                    target=("pair", (i, j)),
                    sign=product.hermitian_sign(),
                    observable=product.phase_free(),
                    qfim_entries=((i, j),),
                )
            )
    prep = Preparation(
        index=index,
        kind=BLOCK_DIAG,
        l1=l,
        l2=l,
        relation=None,
        qubit_count=circuit.n_qubits,
        prefix_level=l,
        sign_flips=(),
        observables=tuple(observables),
    )
    _check_group_commutes(prep)
    return prep


def _offblock_preparation(
    circuit: CommutingBlockCircuit, l1: int, l2: int, index: int
) -> Preparation:
    relation = circuit.relation(l1, l2)
    observables = tuple(
        build_offblock_observable(
            gi.generator, gj.generator, relation, (gi.param_index, gj.param_index)
        )
        for gi in circuit.layer(l1).gates
        for gj in circuit.layer(l2).gates
    )
    prep = Preparation(
        index=index,
        kind=OFF_BLOCK,
        l1=l1,
        l2=l2,
        relation=relation,
        qubit_count=circuit.n_qubits + 1,
        prefix_level=l1,
        sign_flips=circuit.segment_sign_flips(l1, l2),
        observables=observables,
    )
    _check_group_commutes(prep)
    return prep


def plan(circuit: CommutingBlockCircuit) -> list[Preparation]:
    """The L(L+1)/2 preparations covering the full QFIM.

    The L per-layer preparations come first, then the layer pairs in
    lexicographic order. Every observable group is verified to be pairwise
    commuting at build time.
    """
    preps: list[Preparation] = []
    for l in range(1, circuit.n_layers + 1):
        preps.append(_blockdiag_preparation(circuit, l, len(preps)))
    for l1 in range(1, circuit.n_layers + 1):
        for l2 in range(l1 + 1, circuit.n_layers + 1):
            preps.append(_offblock_preparation(circuit, l1, l2, len(preps)))
    return preps


# -- generating sets -----------------------------------------------------------


def generating_set(
    observables: Sequence[PauliString],
) -> tuple[list[PauliString], list[tuple[int, tuple[int, ...]]]]:
    """GF(2)-independent generators of a commuting Hermitian family.

    Returns ``(generators, decompositions)`` where each input equals
    ``sign * product(generators[i] for i in indices)`` with
    ``decompositions[t] = (sign, indices)``. Generators are phase-free, so a
    joint sample of their outcomes reconstructs every input's eigenvalue per
    shot as the signed product of the corresponding outcomes.
    """
    for i in range(len(observables)):
        if not observables[i].is_hermitian():
            raise ValueError(f"{observables[i]} is not Hermitian")
        for j in range(i + 1, len(observables)):
            if observables[i].commutes(observables[j]) is not Relation.COMMUTE:
                raise NonCommutingError(observables[i], observables[j])
    generators: list[PauliString] = []
    rows: dict[int, tuple[int, int]] = {}  # pivot bit -> (vector, generator mask)
    decompositions: list[tuple[int, tuple[int, ...]]] = []
    for obs in observables:
        n = obs.n_qubits
        vec = (obs.x_mask << n) | obs.z_mask
        mask = 0
        while vec:
            pivot = vec.bit_length() - 1
            row = rows.get(pivot)
            if row is None:
                break
            vec ^= row[0]
            mask ^= row[1]
        if vec == 0:
            indices = tuple(i for i in range(len(generators)) if (mask >> i) & 1)
            product = PauliString(n, 0, 0, 0)
            for i in indices:
                product = product * generators[i]
            sign = 1 if product.phase_exp == obs.phase_exp else -1
            decompositions.append((sign, indices))
        else:
            gi = len(generators)
            generators.append(obs.phase_free())
            rows[vec.bit_length() - 1] = (vec, mask | (1 << gi))
            decompositions.append((obs.hermitian_sign(), (gi,)))
    return generators, decompositions


# -- execution -----------------------------------------------------------------


def _prepare_state(
    circuit: CommutingBlockCircuit, theta: np.ndarray, prep: Preparation
) -> StateVector:
    psi = simulator.run_prefix(circuit, theta, prep.prefix_level)
    if prep.kind == BLOCK_DIAG:
        return psi
    return simulator.prepare_lcu_state(
        psi,
        circuit.segment_layers(prep.l1, prep.l2),
        prep.sign_flips,
        theta,
        prep.relation,
    )


@dataclass
class PreparationResult:
    """Estimates extracted from one preparation's data.

    ``entries`` holds Re <d_i psi|d_j psi> keyed by (i, j), i <= j; the
    diagonal is 1 identically because the generators square to the identity.
    ``expectation_products`` holds unbiased estimates of <G_i><G_j> for pairs
    measured within this preparation (per-layer preparations only).
    """

    entries: dict[tuple[int, int], float] = field(default_factory=dict)
    generator_expectations: dict[int, float] = field(default_factory=dict)
    expectation_products: dict[tuple[int, int], float] = field(default_factory=dict)


def _execute_preparation(
    circuit: CommutingBlockCircuit,
    theta: np.ndarray,
    prep: Preparation,
    shots: int | None,
    rng,
) -> PreparationResult:
    state = _prepare_state(circuit, theta, prep)
    result = PreparationResult()
    if shots is None:
        values = [
            obs.sign * simulator.expectation(state, obs.observable)
            for obs in prep.observables
        ]
        eigenvalue_rows = None
    else:
        if shots < 2:
            raise ValueError("shot mode needs at least 2 shots per preparation")
        generators, decompositions = generating_set(
            [obs.observable for obs in prep.observables]
        )
        outcomes = simulator.sample_outcome_matrix(state, generators, shots, rng)
        flips = outcomes == -1
        values = []
        eigenvalue_rows = {}
        for obs, (dsign, indices) in zip(prep.observables, decompositions):
            if indices:
                parity = flips[:, indices].sum(axis=1) & 1
                per_shot = (obs.sign * dsign) * (1.0 - 2.0 * parity)
            else:
                per_shot = np.full(shots, float(obs.sign * dsign))
            values.append(float(per_shot.mean()))
            if obs.target[0] == "generator":
                eigenvalue_rows[obs.target[1]] = per_shot
    for obs, value in zip(prep.observables, values):
        if obs.target[0] == "generator":
            result.generator_expectations[obs.target[1]] = value
            result.entries[(obs.target[1],) * 2] = 1.0
        else:
            result.entries[obs.qfim_entries[0]] = value
    if prep.kind == BLOCK_DIAG:
        params = sorted(result.generator_expectations)
        for a, i in enumerate(params):
            for j in params[a:]:
                if shots is None:
                    product = (
                        result.generator_expectations[i]
                        * result.generator_expectations[j]
                    )
                else:
                    # Unbiased product from one shot set: the plain product of
                    # means carries an O(1/M) covariance bias, so the same-shot
                    # terms are removed.
                    ei, ej = eigenvalue_rows[i], eigenvalue_rows[j]
                    product = (ei.sum() * ej.sum() - float(ei @ ej)) / (
                        shots * (shots - 1)
                    )
                result.expectation_products[(i, j)] = product
    return result


def estimate_block_diag(
    circuit: CommutingBlockCircuit,
    theta: np.ndarray,
    l: int,
    shots: int | None = None,
    rng=None,
) -> PreparationResult:
    """Same-layer entries, generator expectations, and their unbiased products."""
    theta = np.asarray(theta, dtype=float)
    return _execute_preparation(
        circuit, theta, _blockdiag_preparation(circuit, l, 0), shots, rng
    )


def estimate_off_block(
    circuit: CommutingBlockCircuit,
    theta: np.ndarray,
    l1: int,
    l2: int,
    shots: int | None = None,
    rng=None,
) -> dict[tuple[int, int], float]:
    """Re <d_i psi|d_j psi> for all (i in layer l1, j in layer l2), one preparation."""
    theta = np.asarray(theta, dtype=float)
    return _execute_preparation(
        circuit, theta, _offblock_preparation(circuit, l1, l2, 0), shots, rng
    ).entries


def _worker_count(n_tasks: int, shots: int | None) -> int:
    raw = os.environ.get("QFIM_CBC_THREADS", "0").strip()
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"QFIM_CBC_THREADS must be an integer, got {raw!r}") from None
    if cap < 0:
        raise ValueError("QFIM_CBC_THREADS must be >= 0")
    if cap == 0:
        # Threading only pays off when the compiled kernels release the GIL
        # on a substantial sampling workload.
        if shots and backend_name() == "compiled" and shots * n_tasks >= 200_000:
            cap = min(os.cpu_count() or 1, 4)
        else:
            cap = 1
    return max(1, min(cap, n_tasks))


def estimate_qfim(
    circuit: CommutingBlockCircuit,
    theta: np.ndarray,
    shots: int | None = None,
    master_seed=0,
    target_error: float | None = None,
) -> QfimEstimate:
    """Estimate the full QFIM from L(L+1)/2 preparations.

    ``shots=None`` evaluates every observable exactly on the simulated state;
    the result then matches :func:`.oracle.qfim_exact` to numerical
    precision. With ``shots=M`` each preparation is jointly sampled M times
    using an RNG stream derived from ``master_seed`` and the preparation
    index, making the output deterministic and independent of execution
    order or thread count.
    """
    theta = np.asarray(theta, dtype=float)
    preps = plan(circuit)
    if shots is None:
        rngs = [None] * len(preps)
    else:
        if shots < 2:
            raise ValueError("shot mode needs at least 2 shots per preparation")
        seeds = np.random.SeedSequence(master_seed).spawn(len(preps))
        rngs = [np.random.default_rng(s) for s in seeds]

    def execute(prep_rng):
        prep, rng = prep_rng
        return _execute_preparation(circuit, theta, prep, shots, rng)

    workers = _worker_count(len(preps), shots)
    if workers == 1:
        results = [execute(task) for task in zip(preps, rngs)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(execute, zip(preps, rngs)))

    gram: dict[tuple[int, int], float] = {}
    gen_expectations: dict[int, float] = {}
    products: dict[tuple[int, int], float] = {}
    provenance: dict[tuple[int, int], EntryProvenance] = {}
    shots_recorded = 0 if shots is None else shots
    for prep, result in zip(preps, results):
        gram.update(result.entries)
        gen_expectations.update(result.generator_expectations)
        products.update(result.expectation_products)
        for obs in prep.observables:
            for entry in obs.qfim_entries:
                provenance[entry] = EntryProvenance(prep.index, obs.label(), shots_recorded)

    m = circuit.n_parameters
    matrix = np.zeros((m, m))
    for i in range(m):
        for j in range(i, m):
            # Same-layer pairs use the preparation's own unbiased product;
            # cross-layer pairs multiply means of independent shot sets.
            berry = products.get((i, j))
            if berry is None:
                berry = gen_expectations[i] * gen_expectations[j]
            value = 4.0 * (gram[(i, j)] - berry)
            matrix[i, j] = matrix[j, i] = value
    ledger = ResourceLedger(
        n_preparations=len(preps),
        qubit_counts=tuple(p.qubit_count for p in preps),
        mode=EXACT_EXPECTATION if shots is None else SHOTS,
        shots_per_preparation=shots,
        total_shots=0 if shots is None else shots * len(preps),
        target_error=target_error,
    )
    return QfimEstimate(matrix=matrix, provenance=provenance, ledger=ledger)


# -- estimator statistics --------------------------------------------------------


def variance_sweep(
    circuit: CommutingBlockCircuit,
    theta: np.ndarray,
    shots_list: Sequence[int],
    repetitions: int,
    master_seed=0,
) -> dict:
    """Empirical per-entry estimator variance versus shot count.

    Runs ``repetitions`` independent shot-mode estimates per shot count and
    fits log-variance against log-shots. Returns a JSON-ready dict with the
    per-entry slopes (None where an entry's variance vanishes) and the
    aggregate slope of the mean variance, which is the headline scaling
    figure.
    """
    if repetitions < 2:
        raise ValueError("repetitions must be >= 2 to define a variance")
    if len(shots_list) < 2:
        raise ValueError("need at least two shot counts to fit a slope")
    theta = np.asarray(theta, dtype=float)
    m = circuit.n_parameters
    variances = np.empty((len(shots_list), m, m))
    for mi, shots in enumerate(shots_list):
        mats = np.empty((repetitions, m, m))
        for r in range(repetitions):
            mats[r] = estimate_qfim(
                circuit, theta, shots=int(shots), master_seed=[master_seed, mi, r]
            ).matrix
        variances[mi] = mats.var(axis=0, ddof=1)
    log_shots = np.log(np.asarray(shots_list, dtype=float))
    per_entry: list[list[float | None]] = [[None] * m for _ in range(m)]
    for i in range(m):
        for j in range(m):
            v = variances[:, i, j]
            if np.all(v > 0):
                per_entry[i][j] = float(np.polyfit(log_shots, np.log(v), 1)[0])
    mean_variance = variances.reshape(len(shots_list), -1).mean(axis=1)
    aggregate = float(np.polyfit(log_shots, np.log(mean_variance), 1)[0])
    return {
        "shots_list": [int(s) for s in shots_list],
        "repetitions": int(repetitions),
        "per_entry_slopes": per_entry,
        "aggregate_slope": aggregate,
        "mean_variances": [float(v) for v in mean_variance],
        "variances": {
            str(int(shots)): [[float(x) for x in row] for row in variances[mi]]
            for mi, shots in enumerate(shots_list)
        },
    }
