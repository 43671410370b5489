"""Compiled statevector kernels.

Bit-mask Pauli application, Pauli rotations, expectation values, and the
per-shot projective sampling loop. ``_kernels_py`` provides pure-NumPy
equivalents with the same calling convention; ``_backend`` picks one of the
two at import time.

Masks are in index space: bit b of a mask refers to bit b of the basis-state
index. ``prefactor`` carries the exact power-of-i phase of the string so the
kernels never re-derive phases from the masks.
"""
import numpy as np

from libc.math cimport sqrt

ctypedef double complex cplx

BACKEND_NAME = "compiled"


cdef inline int _parity(unsigned long long v) noexcept nogil:
    v ^= v >> 32
    v ^= v >> 16
    v ^= v >> 8
    v ^= v >> 4
    v ^= v >> 2
    v ^= v >> 1
    return <int> (v & 1ULL)


cdef void _apply(const cplx[::1] src, cplx[::1] dst,
                 unsigned long long x_mask, unsigned long long z_mask,
                 cplx prefactor) noexcept nogil:
    cdef Py_ssize_t d = src.shape[0]
    cdef Py_ssize_t j
    cdef unsigned long long s
    for j in range(d):
        s = (<unsigned long long> j) ^ x_mask
        if _parity(s & z_mask):
            dst[j] = -prefactor * src[<Py_ssize_t> s]
        else:
            dst[j] = prefactor * src[<Py_ssize_t> s]


cdef double _expect_real(const cplx[::1] amps, cplx[::1] scratch,
                         unsigned long long x_mask, unsigned long long z_mask,
                         cplx prefactor) noexcept nogil:
    # scratch <- P amps as a side effect (reused by the projection step)
    cdef Py_ssize_t d = amps.shape[0]
    cdef Py_ssize_t j
    cdef double acc = 0.0
    _apply(amps, scratch, x_mask, z_mask, prefactor)
    for j in range(d):
        acc += amps[j].real * scratch[j].real + amps[j].imag * scratch[j].imag
    return acc


def apply_pauli(src, dst, x_mask, z_mask, prefactor):
    """dst <- P src for the string with the given index-space masks."""
    cdef const cplx[::1] s = src
    cdef cplx[::1] t = dst
    cdef unsigned long long x = x_mask, z = z_mask
    cdef cplx p = prefactor
    with nogil:
        _apply(s, t, x, z, p)


def apply_rotation(amps, x_mask, z_mask, prefactor, double theta):
    """In-place amps <- (cos(theta) I - i sin(theta) P) amps, P**2 == I."""
    cdef cplx[::1] a = amps
    cdef unsigned long long x = x_mask, z = z_mask
    cdef cplx pref = prefactor
    cdef Py_ssize_t d = a.shape[0]
    cdef double c = np.cos(theta), sn = np.sin(theta)
    cdef cplx mis = -1j * sn
    cdef cplx u, v, fj, fj2
    cdef Py_ssize_t j
    cdef unsigned long long j2, pivot
    if x == 0:
        with nogil:
            for j in range(d):
                if _parity((<unsigned long long> j) & z):
                    a[j] = a[j] * (c - mis * pref)
                else:
                    a[j] = a[j] * (c + mis * pref)
        return
    pivot = x & (~x + 1ULL)
    with nogil:
        for j in range(d):
            if (<unsigned long long> j) & pivot:
                continue
            j2 = (<unsigned long long> j) ^ x
            u = a[j]
            v = a[<Py_ssize_t> j2]
            fj = -pref if _parity(j2 & z) else pref
            fj2 = -pref if _parity((<unsigned long long> j) & z) else pref
            a[j] = c * u + mis * fj * v
            a[<Py_ssize_t> j2] = c * v + mis * fj2 * u


def expectation(amps, x_mask, z_mask, prefactor):
    """Return <amps| P |amps> as a complex number."""
    cdef const cplx[::1] a = amps
    cdef unsigned long long x = x_mask, z = z_mask
    cdef cplx pref = prefactor
    cdef Py_ssize_t d = a.shape[0]
    cdef Py_ssize_t j
    cdef unsigned long long s
    cdef cplx acc = 0
    cdef cplx term
    with nogil:
        for j in range(d):
            s = (<unsigned long long> j) ^ x
            term = (a[j].real - 1j * a[j].imag) * a[<Py_ssize_t> s]
            if _parity(s & z):
                acc -= term
            else:
                acc += term
    return complex(pref * acc)


def sample_outcomes(state, xs, zs, prefs, signs, uniforms):
    """Sequentially measure commuting Hermitian strings, shot by shot.

    Returns an int8 array of shape (shots, n_strings) holding the +-1
    outcomes. ``signs`` carries the +-1 Hermitian phase of each string so the
    measured operator is signs[k] * base(xs[k], zs[k], prefs[k]).
    """
    cdef const cplx[::1] psi = state
    cdef const unsigned long long[::1] x = xs
    cdef const unsigned long long[::1] z = zs
    cdef const cplx[::1] pf = prefs
    cdef const double[::1] sg = signs
    cdef const double[:, ::1] u = uniforms
    cdef Py_ssize_t n_shots = u.shape[0], n_gen = u.shape[1], d = psi.shape[0]
    out_arr = np.empty((n_shots, n_gen), dtype=np.int8)
    w_arr = np.empty(d, dtype=np.complex128)
    pw_arr = np.empty(d, dtype=np.complex128)
    cdef signed char[:, ::1] out = out_arr
    cdef cplx[::1] w = w_arr
    cdef cplx[::1] pw = pw_arr
    cdef Py_ssize_t m, k, j
    cdef double e, p_plus, ob, nrm, inv
    cdef int o
    cdef int err = 0
    with nogil:
        for m in range(n_shots):
            w[:] = psi
            for k in range(n_gen):
                e = sg[k] * _expect_real(w, pw, x[k], z[k], pf[k])
                p_plus = 0.5 * (1.0 + e)
                if p_plus < -1e-9 or p_plus > 1.0 + 1e-9:
                    err = 1
                    break
                o = 1 if u[m, k] < p_plus else -1
                out[m, k] = <signed char> o
                ob = o * sg[k]
                nrm = 0.0
                for j in range(d):
                    w[j] = 0.5 * (w[j] + ob * pw[j])
                    nrm += w[j].real * w[j].real + w[j].imag * w[j].imag
                if nrm <= 0.0:
                    err = 2
                    break
                inv = 1.0 / sqrt(nrm)
                for j in range(d):
                    w[j] = w[j] * inv
            if err:
                break
    if err == 1:
        raise ValueError("projection probability outside [0, 1]; state or strings inconsistent")
    if err == 2:
        raise ValueError("projection annihilated the state; outcome has zero probability")
    return out_arr
