"""Jitted inference kernels with a fixed accumulation order.

BLAS matmul picks different blocking for different batch shapes, so a
row scored alone is not bitwise equal to the same row scored inside a
batch. Frozen-model scoring promises exactly that equality, so these
loops pin the accumulation order per output element regardless of how
many rows are in flight. Training does not need the guarantee and stays
on numpy's `@`.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_SIG2 = "float64[:,::1](float64[:,::1], float64[:,::1])"
_SIG3 = "float64[:,::1](float64[:,::1], float64[:,::1], float64[::1])"


@njit(_SIG2, cache=True)
def matmul(a, b):
    n, k = a.shape
    m = b.shape[1]
    out = np.zeros((n, m))
    for i in range(n):
        for p in range(k):
            aip = a[i, p]
            for j in range(m):
                out[i, j] += aip * b[p, j]
    return out


@njit(_SIG3, cache=True)
def affine(a, w, bias):
    n, k = a.shape
    m = w.shape[1]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            out[i, j] = bias[j]
        for p in range(k):
            aip = a[i, p]
            for j in range(m):
                out[i, j] += aip * w[p, j]
    return out


@njit(_SIG3, cache=True)
def affine_relu(a, w, bias):
    n, k = a.shape
    m = w.shape[1]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            out[i, j] = bias[j]
        for p in range(k):
            aip = a[i, p]
            for j in range(m):
                out[i, j] += aip * w[p, j]
        for j in range(m):
            if out[i, j] < 0.0:
                out[i, j] = 0.0
    return out


@njit("float64[::1](float64[:,::1], float64[:,::1])", cache=True)
def row_dot(a, b):
    n, k = a.shape
    out = np.zeros(n)
    for i in range(n):
        for j in range(k):
            out[i] += a[i, j] * b[i, j]
    return out


def warmup() -> None:
    """Force compilation of every kernel (first call pays the JIT cost)."""
    a = np.ones((2, 3))
    b = np.ones((3, 2))
    c = np.zeros(2)
    matmul(a, b)
    affine(a, b, c)
    affine_relu(a, b, c)
    row_dot(a, a)
