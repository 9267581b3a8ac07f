# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled table kernels: stride-walk product and axis marginalization.

Tables are dense row-major float64 arrays (the Factor layout guarantees
both).  The product kernel maps each operand's axes into the union shape
and runs one odometer over the output; the sum kernel accumulates a
row-major walk of the input into a strided output index.  All bookkeeping
lives in stack arrays so small tables pay almost no per-call overhead.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"

DEF MAX_DIMS = 32


def product(object a, tuple a_axes, object b, tuple b_axes, tuple out_shape):
    cdef cnp.ndarray aa = np.ascontiguousarray(a, dtype=np.float64)
    cdef cnp.ndarray bb = np.ascontiguousarray(b, dtype=np.float64)
    cdef double* av = <double*> cnp.PyArray_DATA(aa)
    cdef double* bv = <double*> cnp.PyArray_DATA(bb)
    cdef Py_ssize_t ndim = len(out_shape)
    if ndim > MAX_DIMS:
        raise ValueError("too many axes")

    cdef long shape[MAX_DIMS]
    cdef long astr[MAX_DIMS]
    cdef long bstr[MAX_DIMS]
    cdef long idx[MAX_DIMS]
    cdef Py_ssize_t k, d
    cdef long total = 1
    for k in range(ndim):
        shape[k] = <long> out_shape[k]
        astr[k] = 0
        bstr[k] = 0
        idx[k] = 0
        total *= shape[k]

    cdef long acc = 1
    cdef Py_ssize_t na = len(a_axes)
    for k in range(na - 1, -1, -1):
        d = <Py_ssize_t> a_axes[k]
        astr[d] = acc
        acc *= shape[d]
    acc = 1
    cdef Py_ssize_t nb = len(b_axes)
    for k in range(nb - 1, -1, -1):
        d = <Py_ssize_t> b_axes[k]
        bstr[d] = acc
        acc *= shape[d]

    cdef cnp.ndarray out_arr = np.empty(total, dtype=np.float64)
    cdef double* out = <double*> cnp.PyArray_DATA(out_arr)
    cdef long i, ai = 0, bi = 0
    for i in range(total):
        out[i] = av[ai] * bv[bi]
        d = ndim - 1
        while d >= 0:
            idx[d] += 1
            ai += astr[d]
            bi += bstr[d]
            if idx[d] < shape[d]:
                break
            idx[d] = 0
            ai -= astr[d] * shape[d]
            bi -= bstr[d] * shape[d]
            d -= 1
    return out_arr.reshape(out_shape)


def sum_axes(object values, tuple axes):
    cdef cnp.ndarray vv = np.ascontiguousarray(values, dtype=np.float64)
    if not axes:
        return vv.copy().reshape(np.shape(values))
    cdef double* v = <double*> cnp.PyArray_DATA(vv)
    in_shape = np.shape(values)
    cdef Py_ssize_t ndim = len(in_shape)
    if ndim > MAX_DIMS:
        raise ValueError("too many axes")

    cdef long shape[MAX_DIMS]
    cdef long ostr[MAX_DIMS]
    cdef long idx[MAX_DIMS]
    cdef char dropped[MAX_DIMS]
    cdef Py_ssize_t k, d
    cdef long total = 1
    for k in range(ndim):
        shape[k] = <long> in_shape[k]
        ostr[k] = 0
        idx[k] = 0
        dropped[k] = 0
        total *= shape[k]
    for ax in axes:
        dropped[<Py_ssize_t> ax] = 1

    cdef long acc = 1
    cdef long out_total = 1
    for k in range(ndim - 1, -1, -1):
        if not dropped[k]:
            ostr[k] = acc
            acc *= shape[k]
            out_total *= shape[k]

    cdef cnp.ndarray out_arr = np.zeros(out_total, dtype=np.float64)
    cdef double* out = <double*> cnp.PyArray_DATA(out_arr)
    cdef long i, oi = 0
    for i in range(total):
        out[oi] += v[i]
        d = ndim - 1
        while d >= 0:
            idx[d] += 1
            oi += ostr[d]
            if idx[d] < shape[d]:
                break
            idx[d] = 0
            oi -= ostr[d] * shape[d]
            d -= 1
    out_shape = tuple(in_shape[k] for k in range(ndim) if not dropped[k])
    return out_arr.reshape(out_shape)
