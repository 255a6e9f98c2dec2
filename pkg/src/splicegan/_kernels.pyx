# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: elementwise network ops, the optimizer update, and
the Monte Carlo collection loops.

Must stay numerically identical to ``splicegan._kernels_py`` (same op
order, same random-chunk consumption); the build disables floating-point
contraction for that reason.
"""

import numpy as np

cimport cython
from libc.math cimport sqrt, sqrtf


ctypedef fused floating:
    float
    double


# ---------------------------------------------------------------------------
# elementwise network kernels


cdef void _lrelu_fwd(floating[::1] x, floating[::1] out, floating slope) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        out[i] = x[i] if x[i] > 0 else slope * x[i]


cdef void _lrelu_bwd(floating[::1] x, floating[::1] g, floating[::1] out,
                     floating slope) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        out[i] = g[i] if x[i] > 0 else slope * g[i]


def leaky_relu_forward(x, double slope):
    xc = np.ascontiguousarray(x)
    out = np.empty_like(xc)
    if xc.dtype == np.float32:
        _lrelu_fwd[float](xc.ravel(), out.ravel(), <float>slope)
    elif xc.dtype == np.float64:
        _lrelu_fwd[double](xc.ravel(), out.ravel(), <double>slope)
    else:
        raise TypeError(f"unsupported dtype {xc.dtype}")
    return out


def leaky_relu_backward(x, grad, double slope):
    xc = np.ascontiguousarray(x)
    gc = np.ascontiguousarray(grad, dtype=xc.dtype)
    out = np.empty_like(xc)
    if xc.dtype == np.float32:
        _lrelu_bwd[float](xc.ravel(), gc.ravel(), out.ravel(), <float>slope)
    elif xc.dtype == np.float64:
        _lrelu_bwd[double](xc.ravel(), gc.ravel(), out.ravel(), <double>slope)
    else:
        raise TypeError(f"unsupported dtype {xc.dtype}")
    return out


cdef void _rmsprop32(float[::1] p, float[::1] g, float[::1] acc,
                     float lr, float decay, float eps) noexcept nogil:
    cdef Py_ssize_t i
    cdef float od = <float>1.0 - decay
    for i in range(p.shape[0]):
        acc[i] = decay * acc[i] + od * g[i] * g[i]
        p[i] = p[i] - lr * g[i] / (sqrtf(acc[i]) + eps)


cdef void _rmsprop64(double[::1] p, double[::1] g, double[::1] acc,
                     double lr, double decay, double eps) noexcept nogil:
    cdef Py_ssize_t i
    cdef double od = 1.0 - decay
    for i in range(p.shape[0]):
        acc[i] = decay * acc[i] + od * g[i] * g[i]
        p[i] = p[i] - lr * g[i] / (sqrt(acc[i]) + eps)


def rmsprop_update(param, grad, acc, double lr, double decay, double eps):
    """In-place update: acc <- decay*acc + (1-decay)*g^2; p <- p - lr*g/(sqrt(acc)+eps)."""
    if param.dtype == np.float32:
        _rmsprop32(param.ravel(), grad.ravel(), acc.ravel(),
                   <float>lr, <float>decay, <float>eps)
    elif param.dtype == np.float64:
        _rmsprop64(param.ravel(), grad.ravel(), acc.ravel(), lr, decay, eps)
    else:
        raise TypeError(f"unsupported dtype {param.dtype}")


# ---------------------------------------------------------------------------
# Monte Carlo collection loops


def coupon_collection_run(long long m, long long k, fill_chunk):
    """Draws uniformly from m ids until the first k ids have all appeared."""
    cdef unsigned long long[::1] chunk = fill_chunk()
    cdef Py_ssize_t pos = 0
    cdef Py_ssize_t clen = chunk.shape[0]
    seen_arr = np.zeros(k, dtype=np.uint8)
    cdef unsigned char[::1] seen = seen_arr
    cdef long long remaining = k
    cdef long long draws = 0
    cdef unsigned long long r
    while remaining:
        if pos == clen:
            chunk = fill_chunk()
            clen = chunk.shape[0]
            pos = 0
        r = chunk[pos] % <unsigned long long>m
        pos += 1
        draws += 1
        if r < <unsigned long long>k and not seen[r]:
            seen[r] = 1
            remaining -= 1
    return draws


def random_collection_run(labels, long long target, fill_chunk):
    """Ordered pair draws with replacement until `target` distinct useful
    (different-label) ordered pairs have been seen."""
    cdef long long[::1] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef long long m = lab.shape[0]
    seen_arr = np.zeros(m * m, dtype=np.uint8)
    cdef unsigned char[::1] seen = seen_arr
    cdef unsigned long long[::1] chunk = fill_chunk()
    cdef Py_ssize_t pos = 0
    cdef Py_ssize_t clen = chunk.shape[0]
    cdef long long remaining = target
    cdef long long draws = 0
    cdef long long a, b, idx
    while remaining:
        if pos + 2 > clen:
            chunk = fill_chunk()
            clen = chunk.shape[0]
            pos = 0
        a = <long long>(chunk[pos] % <unsigned long long>m)
        b = <long long>(chunk[pos + 1] % <unsigned long long>m)
        pos += 2
        draws += 1
        if lab[a] != lab[b]:
            idx = a * m + b
            if not seen[idx]:
                seen[idx] = 1
                remaining -= 1
    return draws


def iterative_collection_run(pos_flat, pos_off, pos_len,
                             neg_flat, neg_off, neg_len,
                             long long m, long long target, fill_chunk):
    """Attribute-cycling pair draws until every ordered pair the schedule can
    produce has been seen. Every draw counts, whichever attribute made it."""
    cdef long long[::1] pflat = np.ascontiguousarray(pos_flat, dtype=np.int64)
    cdef long long[::1] poff = np.ascontiguousarray(pos_off, dtype=np.int64)
    cdef long long[::1] plen = np.ascontiguousarray(pos_len, dtype=np.int64)
    cdef long long[::1] nflat = np.ascontiguousarray(neg_flat, dtype=np.int64)
    cdef long long[::1] noff = np.ascontiguousarray(neg_off, dtype=np.int64)
    cdef long long[::1] nlen = np.ascontiguousarray(neg_len, dtype=np.int64)
    cdef Py_ssize_t n_active = poff.shape[0]
    seen_arr = np.zeros(m * m, dtype=np.uint8)
    cdef unsigned char[::1] seen = seen_arr
    cdef unsigned long long[::1] chunk = fill_chunk()
    cdef Py_ssize_t pos = 0
    cdef Py_ssize_t clen = chunk.shape[0]
    cdef long long remaining = target
    cdef long long draws = 0
    cdef Py_ssize_t s = 0
    cdef long long a, b, idx
    while remaining:
        if pos + 2 > clen:
            chunk = fill_chunk()
            clen = chunk.shape[0]
            pos = 0
        a = pflat[poff[s] + <long long>(chunk[pos] % <unsigned long long>plen[s])]
        b = nflat[noff[s] + <long long>(chunk[pos + 1] % <unsigned long long>nlen[s])]
        pos += 2
        draws += 1
        s += 1
        if s == n_active:
            s = 0
        idx = a * m + b
        if not seen[idx]:
            seen[idx] = 1
            remaining -= 1
    return draws
