"""Pure-NumPy statevector kernels.

Fallback for environments where the compiled extension is unavailable.
Signatures and semantics mirror ``_kernels`` exactly; see that module for
the mask and phase conventions.
"""
from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"

_IDX_CACHE: dict[int, np.ndarray] = {}


def _indices(d: int) -> np.ndarray:
    idx = _IDX_CACHE.get(d)
    if idx is None:
        idx = np.arange(d, dtype=np.int64)
        _IDX_CACHE[d] = idx
    return idx


def _pauli_dot(amps: np.ndarray, x_mask: int, z_mask: int, prefactor: complex) -> np.ndarray:
    src = _indices(amps.shape[0]) ^ x_mask
    signs = 1.0 - 2.0 * (np.bitwise_count(src & z_mask) & 1)
    return (prefactor * signs) * amps[src]


def apply_pauli(src, dst, x_mask, z_mask, prefactor):
    """dst <- P src for the string with the given index-space masks."""
    np.copyto(dst, _pauli_dot(src, x_mask, z_mask, prefactor))


def apply_rotation(amps, x_mask, z_mask, prefactor, theta):
    """In-place amps <- (cos(theta) I - i sin(theta) P) amps, P**2 == I."""
    rotated = _pauli_dot(amps, x_mask, z_mask, prefactor)
    amps *= np.cos(theta)
    amps += (-1j * np.sin(theta)) * rotated


def expectation(amps, x_mask, z_mask, prefactor):
    """Return <amps| P |amps> as a complex number."""
    return complex(np.vdot(amps, _pauli_dot(amps, x_mask, z_mask, prefactor)))


def sample_outcomes(state, xs, zs, prefs, signs, uniforms):
    """Sequentially measure commuting Hermitian strings, shot by shot.

    Returns an int8 array of shape (shots, n_strings) holding the +-1
    outcomes; see the compiled twin for the sign convention.
    """
    n_shots, n_gen = uniforms.shape
    out = np.empty((n_shots, n_gen), dtype=np.int8)
    for m in range(n_shots):
        w = state.copy()
        for k in range(n_gen):
            pw = _pauli_dot(w, int(xs[k]), int(zs[k]), prefs[k])
            e = signs[k] * np.vdot(w, pw).real
            p_plus = 0.5 * (1.0 + e)
            if p_plus < -1e-9 or p_plus > 1.0 + 1e-9:
                raise ValueError(
                    "projection probability outside [0, 1]; state or strings inconsistent"
                )
            o = 1 if uniforms[m, k] < p_plus else -1
            out[m, k] = o
            w += (o * signs[k]) * pw
            w *= 0.5
            nrm = np.linalg.norm(w)
            if nrm <= 0.0:
                raise ValueError("projection annihilated the state; outcome has zero probability")
            w /= nrm
    return out
