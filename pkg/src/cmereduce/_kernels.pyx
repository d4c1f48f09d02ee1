# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernels; same contract and draw order as ``_kernels_py``."""

from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport log
from numpy.random cimport bitgen_t

import numpy as np

cdef enum:
    DONE = 0
    CAP_EXCEEDED = 1
    BUFFER_FULL = 2
    NEED_COLUMN = 3


cdef bitgen_t* _bitgen(object gen) except NULL:
    capsule = gen.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("invalid bit generator capsule")
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline double _uniform_positive(bitgen_t* rng) noexcept nogil:
    cdef double u = rng.next_double(rng.state)
    while u == 0.0:
        u = rng.next_double(rng.state)
    return u


cdef double _propensities(
    const long[:] state,
    const long[:, :] react_species,
    const long[:, :] react_coef,
    const double[:] rates,
    double[:] out,
) noexcept nogil:
    cdef Py_ssize_t l, k, q
    cdef long s, c, n
    cdef double h, b
    cdef double a0 = 0.0
    for l in range(rates.shape[0]):
        h = rates[l]
        for k in range(react_species.shape[1]):
            s = react_species[l, k]
            if s < 0:
                break
            n = state[s]
            c = react_coef[l, k]
            b = 1.0
            for q in range(c):
                b = b * <double>(n - q) / <double>(q + 1)
            h = h * b
        if h < 0.0:
            h = 0.0
        out[l] = h
        a0 += h
    return a0


def direct_run(
    long[:] state, double t, double t_end,
    const long[:, :] react_species, const long[:, :] react_coef,
    const long[:, :] change, const double[:] rates, const long[:] caps,
    const double[:] grid, Py_ssize_t gi, long[:, :] grid_out,
    double[:] jt_buf, long[:, :] js_buf, Py_ssize_t nused, bint record, object gen,
):
    """Gillespie direct method on species counts; ``state`` is updated in place."""
    cdef bitgen_t* rng = _bitgen(gen)
    cdef Py_ssize_t r = rates.shape[0]
    cdef Py_ssize_t m = state.shape[0]
    cdef Py_ssize_t ng = grid.shape[0]
    cdef double[:] a = np.empty(r)
    cdef double a0, u1, tnew, target, cum
    cdef Py_ssize_t l, i, chosen
    cdef bint exceeded
    cdef int status
    with nogil:
        while True:
            a0 = _propensities(state, react_species, react_coef, rates, a)
            if a0 <= 0.0:
                while gi < ng:
                    for i in range(m):
                        grid_out[gi, i] = state[i]
                    gi += 1
                status = DONE
                break
            u1 = _uniform_positive(rng)
            tnew = t - log(u1) / a0
            while gi < ng and grid[gi] < tnew:
                for i in range(m):
                    grid_out[gi, i] = state[i]
                gi += 1
            if tnew > t_end:
                status = DONE
                break
            target = rng.next_double(rng.state) * a0
            cum = 0.0
            chosen = -1
            for l in range(r):
                if a[l] > 0.0:
                    chosen = l
                    cum += a[l]
                    if cum >= target:
                        break
            exceeded = False
            for i in range(m):
                if change[chosen, i] != 0:
                    state[i] += change[chosen, i]
                    if state[i] > caps[i]:
                        exceeded = True
            t = tnew
            if exceeded:
                status = CAP_EXCEEDED
                break
            if record:
                jt_buf[nused] = t
                for i in range(m):
                    js_buf[nused, i] = state[i]
                nused += 1
                if nused == jt_buf.shape[0]:
                    status = BUFFER_FULL
                    break
    return status, t, gi, nused


def chain_run(
    Py_ssize_t state, double t, double t_end,
    const long[:] col_start, const long[:] col_len, const long[:] indices,
    const double[:] data, const double[:] exit_rate,
    const double[:] grid, Py_ssize_t gi, long[:] grid_out,
    double[:] jt_buf, long[:] js_buf, Py_ssize_t nused, bint record, object gen,
):
    """Direct method on a finite chain given column-wise off-diagonal rates."""
    cdef bitgen_t* rng = _bitgen(gen)
    cdef Py_ssize_t ng = grid.shape[0]
    cdef double a0, u1, tnew, target, cum
    cdef Py_ssize_t k, start, chosen
    cdef int status
    with nogil:
        while True:
            if col_len[state] < 0:
                status = NEED_COLUMN
                break
            a0 = exit_rate[state]
            if a0 <= 0.0:
                while gi < ng:
                    grid_out[gi] = state
                    gi += 1
                status = DONE
                break
            u1 = _uniform_positive(rng)
            tnew = t - log(u1) / a0
            while gi < ng and grid[gi] < tnew:
                grid_out[gi] = state
                gi += 1
            if tnew > t_end:
                status = DONE
                break
            target = rng.next_double(rng.state) * a0
            cum = 0.0
            start = col_start[state]
            chosen = -1
            for k in range(start, start + col_len[state]):
                if data[k] > 0.0:
                    chosen = indices[k]
                    cum += data[k]
                    if cum >= target:
                        break
            state = chosen
            t = tnew
            if record:
                jt_buf[nused] = t
                js_buf[nused] = state
                nused += 1
                if nused == jt_buf.shape[0]:
                    status = BUFFER_FULL
                    break
    return status, state, t, gi, nused
