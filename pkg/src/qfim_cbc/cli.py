"""Command-line driver.

Subcommands: validate, qfim, compare, variance-sweep, qng-run. All inputs
and reports are JSON; matrices are row-major lists of lists and complex
amplitudes are [re, im] pairs. Reports embed a content digest of the parsed
inputs plus a hash of the result payload, so reruns can be compared
byte-for-byte and reports from different circuits refuse to compare.

Exit codes: 0 success/pass, 1 semantic failure (validation or tolerance),
2 usage or IO error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time

import numpy as np

from . import __version__, oracle, protocol, qng
from .circuit import CommutingBlockCircuit, LayerCommutationError, MixedRelationError

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

QFIM_MODES = ("exact-oracle", "protocol-exact", "protocol-shots")


class UsageError(Exception):
    """Bad invocation or unreadable/ill-formed input; exit code 2."""


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


def _load_circuit(path: str):
    doc = _load_json(path)
    try:
        circuit, theta = CommutingBlockCircuit.from_dict(doc)
    except (LayerCommutationError, MixedRelationError):
        raise
    except (ValueError, TypeError) as exc:
        raise UsageError(f"{path}: {exc}") from exc
    return doc, circuit, theta


def _matrix_lists(matrix: np.ndarray) -> list[list[float]]:
    return [[float(x) for x in row] for row in matrix]


def _ledger_payload(ledger: protocol.ResourceLedger) -> dict:
    return {
        "n_preparations": ledger.n_preparations,
        "qubit_counts": list(ledger.qubit_counts),
        "mode": ledger.mode,
        "shots_per_preparation": ledger.shots_per_preparation,
        "total_shots": ledger.total_shots,
        "target_error": ledger.target_error,
    }


def _provenance_payload(provenance: dict) -> dict:
    return {
        f"{i},{j}": {
            "preparation": record.preparation,
            "observable": record.observable,
            "shots": record.shots,
        }
        for (i, j), record in sorted(provenance.items())
    }


def _emit(command: str, digest: str, mode, seed, payload: dict, out, started: float) -> dict:
    report = {
        "command": command,
        "input_digest": digest,
        "mode": mode,
        "seed": seed,
        "payload": payload,
        "payload_sha256": _sha256(_canonical(payload)),
        "duration_seconds": round(time.monotonic() - started, 6),
    }
    text = json.dumps(report, indent=2, sort_keys=True)
    if out:
        try:
            with open(out, "w") as fh:
                fh.write(text + "\n")
        except OSError as exc:
            raise UsageError(f"cannot write {out}: {exc}") from exc
    print(text)
    return report


# -- subcommands ---------------------------------------------------------------


def cmd_validate(args) -> int:
    started = time.monotonic()
    doc = _load_json(args.circuit)
    digest = _sha256(_canonical(doc))
    try:
        circuit, _ = CommutingBlockCircuit.from_dict(doc)
    except LayerCommutationError as exc:
        payload = {
            "valid": False,
            "violation": {
                "kind": "intra-layer",
                "layer": exc.layer,
                "gates": [exc.gate_a.label(), exc.gate_b.label()],
            },
        }
        _emit("validate", digest, None, None, payload, args.out, started)
        return EXIT_FAIL
    except MixedRelationError as exc:
        payload = {
            "valid": False,
            "violation": {
                "kind": "mixed-relation",
                "layers": [exc.layer_a, exc.layer_b],
                "witness": [exc.witness[0].label(), exc.witness[1].label()],
            },
        }
        _emit("validate", digest, None, None, payload, args.out, started)
        return EXIT_FAIL
    except (ValueError, TypeError) as exc:
        raise UsageError(f"{args.circuit}: {exc}") from exc
    payload = {
        "valid": True,
        "n_qubits": circuit.n_qubits,
        "n_layers": circuit.n_layers,
        "n_parameters": circuit.n_parameters,
        "relation_matrix": [
            [circuit.relation_matrix[a, b].value for b in range(circuit.n_layers)]
            for a in range(circuit.n_layers)
        ],
    }
    _emit("validate", digest, None, None, payload, args.out, started)
    return EXIT_OK


def cmd_qfim(args) -> int:
    started = time.monotonic()
    doc, circuit, theta = _load_circuit(args.circuit)
    digest = _sha256(_canonical(doc))
    payload = {
        "mode": args.mode,
        "n_parameters": circuit.n_parameters,
        "theta": [float(t) for t in theta],
    }
    if args.mode == "exact-oracle":
        payload["matrix"] = _matrix_lists(oracle.qfim_exact(circuit, theta))
    else:
        if args.mode == "protocol-shots":
            if args.shots is None:
                raise UsageError("--shots is required with --mode protocol-shots")
            shots = args.shots
        else:
            shots = None
        estimate = protocol.estimate_qfim(
            circuit, theta, shots=shots, master_seed=args.seed
        )
        payload["matrix"] = _matrix_lists(estimate.matrix)
        payload["ledger"] = _ledger_payload(estimate.ledger)
        payload["provenance"] = _provenance_payload(estimate.provenance)
    _emit("qfim", digest, args.mode, args.seed, payload, args.out, started)
    return EXIT_OK


def cmd_compare(args) -> int:
    started = time.monotonic()
    report_a = _load_json(args.report_a)
    report_b = _load_json(args.report_b)
    matrices = []
    for path, report in ((args.report_a, report_a), (args.report_b, report_b)):
        try:
            matrices.append(np.asarray(report["payload"]["matrix"], dtype=float))
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"{path} is not a QFIM report: {exc}") from exc
    if report_a.get("input_digest") != report_b.get("input_digest"):
        raise UsageError("reports were produced from different circuits")
    a, b = matrices
    if a.shape != b.shape:
        raise UsageError(f"matrix shapes differ: {a.shape} vs {b.shape}")
    diff = np.abs(a - b)
    max_diff = float(diff.max()) if diff.size else 0.0
    passed = max_diff <= args.tol
    payload = {
        "tol": args.tol,
        "max_abs_diff": max_diff,
        "per_entry_diff": _matrix_lists(diff),
        "pass": passed,
        "modes": [report_a.get("mode"), report_b.get("mode")],
    }
    _emit(
        "compare",
        report_a.get("input_digest", ""),
        None,
        None,
        payload,
        args.out,
        started,
    )
    return EXIT_OK if passed else EXIT_FAIL


def cmd_variance_sweep(args) -> int:
    started = time.monotonic()
    doc, circuit, theta = _load_circuit(args.circuit)
    digest = _sha256(_canonical(doc))
    try:
        shots_list = [int(s) for s in args.shots_list.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --shots-list: {exc}") from exc
    if len(shots_list) < 3:
        raise UsageError("need at least 3 shot counts to fit a scaling slope")
    if any(s < 2 for s in shots_list):
        raise UsageError("every shot count must be >= 2")
    if args.reps < 20:
        raise UsageError("variance estimation requires --reps >= 20")
    sweep = protocol.variance_sweep(
        circuit, theta, shots_list, args.reps, master_seed=args.seed
    )
    passed = -1.15 <= sweep["aggregate_slope"] <= -0.85
    payload = dict(sweep)
    payload["pass"] = passed
    payload["slope_band"] = [-1.15, -0.85]
    _emit("variance-sweep", digest, "protocol-shots", args.seed, payload, args.out, started)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_qng_run(args) -> int:
    started = time.monotonic()
    circuit_doc, circuit, theta0 = _load_circuit(args.circuit)
    ham_doc = _load_json(args.hamiltonian)
    try:
        hamiltonian = qng.Hamiltonian.from_dict(ham_doc)
    except ValueError as exc:
        raise UsageError(f"{args.hamiltonian}: {exc}") from exc
    if hamiltonian.n_qubits != circuit.n_qubits:
        raise UsageError(
            f"Hamiltonian acts on {hamiltonian.n_qubits} qubits, circuit on {circuit.n_qubits}"
        )
    config_doc = {}
    if args.config:
        config_doc = _load_json(args.config)
        if not isinstance(config_doc, dict):
            raise UsageError(f"{args.config} must hold a JSON object")
    known = {
        "eta": "eta",
        "lambda": "regularization",
        "regularization": "regularization",
        "max_iters": "max_iters",
        "qfim_mode": "qfim_mode",
        "grad_mode": "grad_mode",
        "seed": "seed",
        "stop_tol": "stop_tol",
        "shots": "shots",
    }
    kwargs = {}
    for key, value in config_doc.items():
        if key not in known:
            raise UsageError(f"unknown config key {key!r}")
        kwargs[known[key]] = value
    try:
        config = qng.QngConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad config: {exc}") from exc
    digest = _sha256(
        _canonical(circuit_doc) + _canonical(ham_doc) + _canonical(config_doc)
    )
    trajectory = qng.run(circuit, hamiltonian, theta0, config)
    payload = trajectory.to_dict()
    payload["final_energy"] = trajectory.final_energy
    payload["iterations"] = len(trajectory.records) - 1
    if circuit.n_qubits <= 10:
        reference = qng.ground_energy(hamiltonian)
        payload["reference_ground_energy"] = reference
        payload["energy_above_reference"] = trajectory.final_energy - reference
    _emit("qng-run", digest, config.qfim_mode, config.seed, payload, args.out, started)
    return EXIT_OK


# -- argument parsing -----------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qfim-cbc",
        description="Estimate quantum Fisher information matrices of commuting-block circuits.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the commuting-block conditions of a circuit file")
    p.add_argument("circuit")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("qfim", help="compute or estimate the QFIM of a circuit file")
    p.add_argument("circuit")
    p.add_argument("--mode", choices=QFIM_MODES, default="protocol-exact")
    p.add_argument("--shots", type=int, help="shots per preparation (protocol-shots)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_qfim)

    p = sub.add_parser("compare", help="compare the matrices of two qfim reports")
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser(
        "variance-sweep",
        help="fit the estimator variance scaling against the shot count",
    )
    p.add_argument("circuit")
    p.add_argument("--shots-list", default="100,1000,10000")
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_variance_sweep)

    p = sub.add_parser("qng-run", help="natural-gradient descent on a Pauli-sum Hamiltonian")
    p.add_argument("circuit")
    p.add_argument("hamiltonian")
    p.add_argument("--config", help="JSON file with eta/lambda/max_iters/... overrides")
    p.add_argument("--out", help="write the trajectory report here")
    p.set_defaults(func=cmd_qng_run)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors and 0 on --help/--version
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LayerCommutationError, MixedRelationError) as exc:
        # a structurally invalid circuit fed to a command other than validate
        print(f"error: invalid circuit: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
