"""Numpy fallback for the table kernels.

Both backends implement the same two primitives over row-major float64
tables: ``product`` (aligned elementwise multiply onto a union shape) and
``sum_axes`` (marginalize a set of axes).  The compiled backend in
``_tablekern`` walks the tables with explicit strides; here we lean on
numpy broadcasting instead.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def _expand(values: np.ndarray, axes: tuple[int, ...], ndim: int) -> np.ndarray:
    """View ``values`` with singleton dims inserted so axis i maps to axes[i]."""
    shape = [1] * ndim
    for k, ax in enumerate(axes):
        shape[ax] = values.shape[k]
    return values.reshape(shape)


def product(
    a: np.ndarray,
    a_axes: tuple[int, ...],
    b: np.ndarray,
    b_axes: tuple[int, ...],
    out_shape: tuple[int, ...],
) -> np.ndarray:
    ndim = len(out_shape)
    av = _expand(a, a_axes, ndim)
    bv = _expand(b, b_axes, ndim)
    out = av * bv
    if out.shape != out_shape:
        out = np.broadcast_to(out, out_shape).copy()
    return out


def sum_axes(values: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    if not axes:
        return values.copy()
    return values.sum(axis=axes)
