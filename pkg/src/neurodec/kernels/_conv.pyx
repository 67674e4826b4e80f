# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled temporal-convolution kernels.

Same semantics as ``neurodec.kernels._np``: same-padded 1D convolution over
the trailing time axis, one BLAS GEMM per kernel tap, accumulating straight
into the output with no padded temporaries.  float32 and float64.
"""

cimport cython

import numpy as np

from scipy.linalg.cython_blas cimport dgemm, sgemm

ctypedef fused real:
    float
    double


cdef inline void _gemm(char ta, char tb, int m, int n, int k,
                       real *a, int lda, real *b, int ldb,
                       real beta, real *c, int ldc) noexcept nogil:
    cdef real one = <real>1.0
    if real is float:
        sgemm(&ta, &tb, &m, &n, &k, &one, a, &lda, b, &ldb, &beta, c, &ldc)
    else:
        dgemm(&ta, &tb, &m, &n, &k, &one, a, &lda, b, &ldb, &beta, c, &ldc)


cdef void _fwd(real[:, ::1] x, real[:, :, ::1] wp, real[:, ::1] y,
               int dilation) noexcept nogil:
    # wp is the kernel packed as (K, C_out, C_in); y starts zeroed
    cdef int cin = x.shape[0], T = x.shape[1]
    cdef int K = wp.shape[0], cout = wp.shape[1]
    cdef int mid = (K - 1) // 2
    cdef int k, off, t0, t1, ts
    for k in range(K):
        off = (k - mid) * dilation
        t0 = -off if off < 0 else 0
        t1 = T - off if off > 0 else T
        ts = t1 - t0
        if ts <= 0:
            continue
        # y[:, t0:t1] += wp[k] @ x[:, t0+off:t1+off]
        _gemm(c'N', c'N', ts, cout, cin,
              &x[0, t0 + off], T, &wp[k, 0, 0], cin,
              <real>1.0, &y[0, t0], T)


cdef void _bwd_input(real[:, ::1] gy, real[:, :, ::1] wp, real[:, ::1] gx,
                     int dilation) noexcept nogil:
    cdef int cout = gy.shape[0], T = gy.shape[1]
    cdef int K = wp.shape[0], cin = wp.shape[2]
    cdef int mid = (K - 1) // 2
    cdef int k, off, t0, t1, ts
    for k in range(K):
        off = (k - mid) * dilation
        t0 = -off if off < 0 else 0
        t1 = T - off if off > 0 else T
        ts = t1 - t0
        if ts <= 0:
            continue
        # gx[:, t0+off:t1+off] += wp[k].T @ gy[:, t0:t1]
        _gemm(c'N', c'T', ts, cin, cout,
              &gy[0, t0], T, &wp[k, 0, 0], cin,
              <real>1.0, &gx[0, t0 + off], T)


cdef void _bwd_kernel(real[:, ::1] gy, real[:, ::1] x, real[:, :, ::1] gwp,
                      int dilation) noexcept nogil:
    cdef int cout = gy.shape[0], T = gy.shape[1]
    cdef int K = gwp.shape[0], cin = x.shape[0]
    cdef int mid = (K - 1) // 2
    cdef int k, off, t0, t1, ts
    for k in range(K):
        off = (k - mid) * dilation
        t0 = -off if off < 0 else 0
        t1 = T - off if off > 0 else T
        ts = t1 - t0
        if ts <= 0:
            continue
        # gwp[k] = gy[:, t0:t1] @ x[:, t0+off:t1+off].T
        _gemm(c'T', c'N', cin, cout, ts,
              &x[0, t0 + off], T, &gy[0, t0], T,
              <real>0.0, &gwp[k, 0, 0], cin)


def conv1d_forward(x, w, int dilation=1):
    x = np.ascontiguousarray(x)
    wp = np.ascontiguousarray(np.transpose(w, (2, 0, 1)))
    y = np.zeros((w.shape[0], x.shape[1]), dtype=x.dtype)
    if x.dtype == np.float32:
        _fwd[cython.float](x, wp, y, dilation)
    else:
        _fwd[cython.double](x, wp, y, dilation)
    return y


def conv1d_grad_input(gy, w, int dilation=1):
    gy = np.ascontiguousarray(gy)
    wp = np.ascontiguousarray(np.transpose(w, (2, 0, 1)))
    gx = np.zeros((w.shape[1], gy.shape[1]), dtype=gy.dtype)
    if gy.dtype == np.float32:
        _bwd_input[cython.float](gy, wp, gx, dilation)
    else:
        _bwd_input[cython.double](gy, wp, gx, dilation)
    return gx


def conv1d_grad_kernel(gy, x, int kernel_size, int dilation=1):
    gy = np.ascontiguousarray(gy)
    x = np.ascontiguousarray(x)
    gwp = np.zeros((kernel_size, gy.shape[0], x.shape[0]), dtype=gy.dtype)
    if gy.dtype == np.float32:
        _bwd_kernel[cython.float](gy, x, gwp, dilation)
    else:
        _bwd_kernel[cython.double](gy, x, gwp, dilation)
    return np.ascontiguousarray(np.transpose(gwp, (1, 2, 0)))
