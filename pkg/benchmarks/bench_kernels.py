"""Benchmark the compiled kernels against the pure-NumPy fallback.

Runs the three hot paths over a range of qubit counts and prints a table
with per-call times and the compiled/python speedup:

* rotation sweep: a full layer-by-layer circuit execution
* expectation batch: Hermitian string expectations on a fixed state
* projective sampling: the per-shot joint measurement loop

Usage: python benchmarks/bench_kernels.py [--qubits 4,8,10] [--shots 20000]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from qfim_cbc import _kernels_py

try:
    from qfim_cbc import _kernels
except ImportError:
    _kernels = None

import qfim_cbc.simulator as sim
from qfim_cbc.circuit import build_odd_z_ansatz
from qfim_cbc.pauli import PauliString


def _random_state(rng, n):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return (v / np.linalg.norm(v)).astype(np.complex128)


def _time(fn, min_time=0.2):
    fn()  # warm up
    count = 0
    start = time.perf_counter()
    while time.perf_counter() - start < min_time:
        fn()
        count += 1
    return (time.perf_counter() - start) / count


def bench_rotation_sweep(kernels, n, rng):
    circuit = build_odd_z_ansatz(n, 2)
    theta = rng.normal(size=circuit.n_parameters)
    gates = [
        (sim._index_masks(g.generator, n), theta[g.param_index])
        for g in circuit.prefix_gates(circuit.n_layers)
    ]
    state = _random_state(rng, n)

    def run():
        amps = state.copy()
        for (x, z, pref), angle in gates:
            kernels.apply_rotation(amps, x, z, pref, angle)

    return _time(run)


def bench_expectation(kernels, n, rng):
    state = _random_state(rng, n)
    strings = []
    for _ in range(32):
        x = int(rng.integers(0, 2**n))
        z = int(rng.integers(0, 2**n))
        strings.append(sim._index_masks(PauliString(n, x, z, 0), n))

    def run():
        for x, z, pref in strings:
            kernels.expectation(state, x, z, pref)

    return _time(run)


def bench_sampling(kernels, n, shots, rng):
    state = _random_state(rng, n)
    paulis = [PauliString(n, 0, 1 << q) for q in range(min(n, 3))]
    k = len(paulis)
    xs = np.empty(k, dtype=np.uint64)
    zs = np.empty(k, dtype=np.uint64)
    prefs = np.empty(k, dtype=np.complex128)
    signs = np.ones(k)
    for i, p in enumerate(paulis):
        x, z, pref = sim._index_masks(p, n)
        xs[i], zs[i], prefs[i] = x, z, pref
    uniforms = np.random.default_rng(0).random((shots, k))

    def run():
        kernels.sample_outcomes(state, xs, zs, prefs, signs, uniforms)

    return _time(run, min_time=0.5)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--qubits", default="4,8,10")
    parser.add_argument("--shots", type=int, default=20000)
    args = parser.parse_args()
    qubit_counts = [int(q) for q in args.qubits.split(",")]

    backends = [("python", _kernels_py)]
    if _kernels is not None:
        backends.insert(0, ("compiled", _kernels))
    else:
        print("compiled extension not built; showing the fallback only\n")

    rng = np.random.default_rng(7)
    rows = []
    for n in qubit_counts:
        for name, fn in (
            ("rotation sweep", lambda k: bench_rotation_sweep(k, n, rng)),
            ("expectations x32", lambda k: bench_expectation(k, n, rng)),
            (f"sampling {args.shots} shots", lambda k: bench_sampling(k, n, args.shots, rng)),
        ):
            times = {bname: fn(kernels) for bname, kernels in backends}
            rows.append((n, name, times))

    header = f"{'qubits':>6}  {'benchmark':<24}" + "".join(
        f"{bname:>14}" for bname, _ in backends
    )
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for n, name, times in rows:
        line = f"{n:>6}  {name:<24}"
        for bname, _ in backends:
            line += f"{times[bname]*1e3:>12.3f}ms"
        if len(backends) == 2:
            line += f"{times['python'] / times['compiled']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
