"""Commuting-block circuit model.

A circuit is a sequence of layers of parameterized Pauli-rotation gates
exp(-i G theta). Within a layer all generators commute; between any two
layers the generators either all commute or all anticommute. ``validate``
certifies both conditions and produces the layer-pair relation matrix that
the estimation protocol relies on.

Layers are indexed 1..L in the public API. Parameters are indexed globally
in circuit order (layer by layer, gate by gate).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .pauli import DimensionError, PauliString, Relation

INITIAL_STATE_NAMES = ("zero", "plus")


class LayerCommutationError(ValueError):
    """Two generators inside one layer fail to commute."""

    def __init__(self, layer: int, gate_a: PauliString, gate_b: PauliString):
        super().__init__(
            f"layer {layer}: generators {gate_a} and {gate_b} do not commute"
        )
        self.layer = layer
        self.gate_a = gate_a
        self.gate_b = gate_b


class MixedRelationError(ValueError):
    """A layer pair mixes commuting and anticommuting generator pairs."""

    def __init__(
        self,
        layer_a: int,
        layer_b: int,
        witness: tuple[PauliString, PauliString],
        expected: Relation,
    ):
        super().__init__(
            f"layers {layer_a} and {layer_b}: pair ({witness[0]}, {witness[1]}) "
            f"breaks the uniform relation {expected.value}"
        )
        self.layer_a = layer_a
        self.layer_b = layer_b
        self.witness = witness


class ConstructionError(RuntimeError):
    """Random circuit construction exhausted its rejection budget."""


@dataclass(frozen=True)
class Gate:
    """One Pauli rotation: generator plus its global parameter index."""

    generator: PauliString
    param_index: int

    def __post_init__(self):
        if self.generator.phase_exp != 0:
            raise ValueError(f"generator {self.generator} must have phase_exp 0")


@dataclass(frozen=True)
class Layer:
    gates: tuple[Gate, ...]

    def __len__(self) -> int:
        return len(self.gates)


def _as_initial_state(spec, n_qubits: int):
    """Normalize an initial-state spec to 'zero', 'plus', or an amplitude array."""
    if isinstance(spec, str):
        if spec not in INITIAL_STATE_NAMES:
            raise ValueError(f"unknown initial state {spec!r}")
        return spec
    amps = np.asarray(spec, dtype=complex)
    if amps.shape != (2**n_qubits,):
        raise DimensionError(
            f"custom initial state needs {2**n_qubits} amplitudes, got {amps.shape}"
        )
    if abs(np.linalg.norm(amps) - 1.0) > 1e-12:
        raise ValueError("custom initial state is not normalized")
    amps = amps.copy()
    amps.flags.writeable = False
    return amps


def validate(
    layers: Sequence[Sequence[PauliString]], n_qubits: int
) -> np.ndarray:
    """Check the commuting-block conditions and return the relation matrix.

    The returned LxL object array holds Relation values, with SELF on the
    diagonal. Raises LayerCommutationError or MixedRelationError on the
    first violation found.
    """
    if not layers or any(len(layer) == 0 for layer in layers):
        raise ValueError("layers must be nonempty")
    for li, layer in enumerate(layers, start=1):
        for g in layer:
            if g.n_qubits != n_qubits:
                raise DimensionError(
                    f"layer {li}: generator {g} acts on {g.n_qubits} qubits, expected {n_qubits}"
                )
        for a_idx in range(len(layer)):
            for b_idx in range(a_idx + 1, len(layer)):
                if layer[a_idx].commutes(layer[b_idx]) is not Relation.COMMUTE:
                    raise LayerCommutationError(li, layer[a_idx], layer[b_idx])
    n_layers = len(layers)
    relation = np.full((n_layers, n_layers), Relation.SELF, dtype=object)
    for a in range(n_layers):
        for b in range(a + 1, n_layers):
            expected = layers[a][0].commutes(layers[b][0])
            for ga in layers[a]:
                for gb in layers[b]:
                    if ga.commutes(gb) is not expected:
                        raise MixedRelationError(a + 1, b + 1, (ga, gb), expected)
            relation[a, b] = relation[b, a] = expected
    return relation


@dataclass(frozen=True)
class CommutingBlockCircuit:
    """Validated commuting-block circuit.

    Instances are immutable; build them through :meth:`from_generators` or
    the ansatz builders so the relation matrix is always consistent.
    """

    n_qubits: int
    layers: tuple[Layer, ...]
    initial_state: object = "plus"
    relation_matrix: np.ndarray = field(repr=False, default=None)

    @classmethod
    def from_generators(
        cls,
        n_qubits: int,
        generators: Sequence[Sequence[PauliString]],
        initial_state="plus",
    ) -> CommutingBlockCircuit:
        relation = validate(generators, n_qubits)
        layers = []
        k = 0
        for layer_gens in generators:
            gates = []
            for g in layer_gens:
                gates.append(Gate(g, k))
                k += 1
            layers.append(Layer(tuple(gates)))
        return cls(
            n_qubits=n_qubits,
            layers=tuple(layers),
            initial_state=_as_initial_state(initial_state, n_qubits),
            relation_matrix=relation,
        )

    # -- shape -------------------------------------------------------------

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def n_parameters(self) -> int:
        return sum(len(layer) for layer in self.layers)

    def layer(self, l: int) -> Layer:
        """Layer by 1-based index."""
        if not 1 <= l <= self.n_layers:
            raise IndexError(f"layer index {l} out of range 1..{self.n_layers}")
        return self.layers[l - 1]

    def relation(self, l1: int, l2: int) -> Relation:
        """Relation between layers l1 and l2 (1-based)."""
        self.layer(l1), self.layer(l2)
        return self.relation_matrix[l1 - 1, l2 - 1]

    def layer_of_param(self, k: int) -> int:
        """1-based layer index containing global parameter k."""
        if not 0 <= k < self.n_parameters:
            raise IndexError(f"parameter index {k} out of range 0..{self.n_parameters - 1}")
        count = 0
        for l, layer in enumerate(self.layers, start=1):
            count += len(layer)
            if k < count:
                return l
        raise AssertionError("unreachable")

    # -- gate slices -------------------------------------------------------

    def prefix_gates(self, l: int) -> tuple[Gate, ...]:
        """Gates of layers 1..l in application order (l = 0 gives none)."""
        if not 0 <= l <= self.n_layers:
            raise IndexError(f"prefix level {l} out of range 0..{self.n_layers}")
        gates: list[Gate] = []
        for layer in self.layers[:l]:
            gates.extend(layer.gates)
        return tuple(gates)

    def segment_layers(self, l1: int, l2: int) -> tuple[Layer, ...]:
        """Layers l1+1..l2, the block product applied between the two levels."""
        if not 1 <= l1 < l2 <= self.n_layers:
            raise IndexError(
                f"need 1 <= l1 < l2 <= {self.n_layers}, got l1={l1}, l2={l2}"
            )
        return self.layers[l1:l2]

    def segment_gates(self, l1: int, l2: int) -> tuple[Gate, ...]:
        """Gates of layers l1+1..l2 in application order."""
        gates: list[Gate] = []
        for layer in self.segment_layers(l1, l2):
            gates.extend(layer.gates)
        return tuple(gates)

    def segment_sign_flips(self, l1: int, l2: int) -> tuple[int, ...]:
        """Per-layer parameter signs for pushing a layer-l1 generator through.

        Commuting a generator of layer l1 leftwards through the adjoint of
        layers l1+1..l2 leaves commuting layers untouched and negates the
        parameters of anticommuting ones; the sign vector is the same for
        every generator in layer l1 because the pair relation is uniform.
        """
        self.segment_layers(l1, l2)
        return tuple(
            -1 if self.relation(l1, b) is Relation.ANTICOMMUTE else 1
            for b in range(l1 + 1, l2 + 1)
        )

    # -- serialization -----------------------------------------------------

    def to_dict(self, parameters=None) -> dict:
        """JSON-ready dict (schema consumed by the CLI)."""
        if isinstance(self.initial_state, str):
            init = self.initial_state
        else:
            init = {
                "amplitudes": [[float(a.real), float(a.imag)] for a in self.initial_state]
            }
        doc = {
            "n_qubits": self.n_qubits,
            "initial_state": init,
            "layers": [[g.generator.label() for g in layer.gates] for layer in self.layers],
        }
        if parameters is not None:
            doc["parameters"] = [float(t) for t in parameters]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> tuple[CommutingBlockCircuit, np.ndarray]:
        """Parse the circuit JSON schema; returns (circuit, parameters).

        Missing "parameters" defaults to zeros.
        """
        try:
            n_qubits = int(doc["n_qubits"])
            raw_layers = doc["layers"]
            init = doc.get("initial_state", "plus")
        except (KeyError, TypeError) as exc:
            raise ValueError(f"circuit document missing field: {exc}") from exc
        if isinstance(init, dict):
            if "amplitudes" not in init:
                raise ValueError("custom initial_state needs an 'amplitudes' field")
            init = np.array([complex(re, im) for re, im in init["amplitudes"]])
        generators = []
        for layer in raw_layers:
            gens = [PauliString.parse(label) for label in layer]
            for g, label in zip(gens, layer):
                if g.phase_exp != 0:
                    raise ValueError(f"generator label {label!r} carries a phase prefix")
            generators.append(gens)
        circuit = cls.from_generators(n_qubits, generators, init)
        theta = np.asarray(doc.get("parameters", np.zeros(circuit.n_parameters)), dtype=float)
        if theta.shape != (circuit.n_parameters,):
            raise ValueError(
                f"expected {circuit.n_parameters} parameters, got {theta.shape}"
            )
        return circuit, theta


# -- ansatz builders --------------------------------------------------------


def build_odd_z_ansatz(
    n_qubits: int, n_repetitions: int, initial_state="plus"
) -> CommutingBlockCircuit:
    """Alternating blocks of all odd-weight Z-type strings and one global X gate.

    Each repetition contributes a layer with the 2^(N-1) strings over {I, Z}
    having an odd number of Z factors, followed by a single gate generated by
    X on every qubit. Z layers mutually commute and anticommute with every X
    layer, so the block structure is valid for any size.
    """
    if n_qubits < 1 or n_repetitions < 1:
        raise ValueError("n_qubits and n_repetitions must be >= 1")
    z_layer = [
        PauliString(n_qubits, 0, mask)
        for mask in range(1, 1 << n_qubits)
        if mask.bit_count() % 2 == 1
    ]
    x_layer = [PauliString(n_qubits, (1 << n_qubits) - 1, 0)]
    generators = (z_layer, x_layer) * n_repetitions
    return CommutingBlockCircuit.from_generators(n_qubits, generators, initial_state)


def build_random_circuit(
    seed: int,
    n_qubits: int,
    n_layers: int,
    gates_per_layer: int,
    initial_state="plus",
    max_attempts_per_gate: int = 400,
    max_layer_restarts: int = 60,
) -> CommutingBlockCircuit:
    """Rejection-sample a valid commuting-block circuit, deterministically.

    Candidate strings are drawn uniformly (identity excluded) and accepted
    only if they commute with the current layer and keep a uniform relation
    with every completed layer. A stalled layer is rebuilt from scratch a
    bounded number of times before ConstructionError is raised, which signals
    an infeasible size request.
    """
    if gates_per_layer < 1 or n_layers < 1:
        raise ValueError("n_layers and gates_per_layer must be >= 1")
    rng = np.random.default_rng(seed)
    space = 1 << n_qubits

    def draw() -> PauliString:
        while True:
            x = int(rng.integers(0, space))
            z = int(rng.integers(0, space))
            if x or z:
                return PauliString(n_qubits, x, z)

    layers: list[list[PauliString]] = []
    restarts = 0
    while len(layers) < n_layers:
        layer: list[PauliString] = []
        relations: list[Relation] = []  # uniform relation to each earlier layer
        attempts = 0
        while len(layer) < gates_per_layer:
            if attempts >= max_attempts_per_gate:
                restarts += 1
                if restarts > max_layer_restarts:
                    raise ConstructionError(
                        f"no valid layer of {gates_per_layer} generators found "
                        f"(n_qubits={n_qubits}, layer {len(layers) + 1})"
                    )
                layer, relations, attempts = [], [], 0
                continue
            attempts += 1
            cand = draw()
            if any(cand == g for g in layer):
                continue
            if any(cand.commutes(g) is not Relation.COMMUTE for g in layer):
                continue
            cand_rel = [cand.commutes(prev[0]) for prev in layers]
            if any(
                cand.commutes(g) is not cand_rel[b]
                for b, prev in enumerate(layers)
                for g in prev
            ):
                continue
            if layer and cand_rel != relations:
                continue
            if not layer:
                relations = cand_rel
            layer.append(cand)
        layers.append(layer)
    return CommutingBlockCircuit.from_generators(n_qubits, layers, initial_state)
