"""Numpy implementations of the temporal-convolution kernels.

These are the reference semantics for the compiled extension: same-padded
1D convolution over the trailing time axis, expressed as one matmul per
kernel tap so BLAS does the heavy lifting.  Inputs are ``(C_in, T)`` or
batched ``(B, C_in, T)``; kernels are ``(C_out, C_in, K)`` with odd K.
"""

import numpy as np


def _tap_range(off, T):
    # valid output columns t for which t + off lies inside [0, T)
    return max(0, -off), min(T, T - off)


def conv1d_forward(x, w, dilation=1):
    K = w.shape[2]
    mid = (K - 1) // 2
    T = x.shape[-1]
    y = np.zeros(x.shape[:-2] + (w.shape[0], T), dtype=x.dtype)
    for k in range(K):
        off = (k - mid) * dilation
        t0, t1 = _tap_range(off, T)
        if t1 <= t0:
            continue
        y[..., t0:t1] += np.matmul(w[:, :, k], x[..., t0 + off : t1 + off])
    return y


def conv1d_grad_input(gy, w, dilation=1):
    K = w.shape[2]
    mid = (K - 1) // 2
    T = gy.shape[-1]
    gx = np.zeros(gy.shape[:-2] + (w.shape[1], T), dtype=gy.dtype)
    wt = np.ascontiguousarray(w.transpose(2, 1, 0))  # (K, C_in, C_out)
    for k in range(K):
        off = (k - mid) * dilation
        t0, t1 = _tap_range(off, T)
        if t1 <= t0:
            continue
        gx[..., t0 + off : t1 + off] += np.matmul(wt[k], gy[..., t0:t1])
    return gx


def conv1d_grad_kernel(gy, x, kernel_size, dilation=1):
    K = kernel_size
    mid = (K - 1) // 2
    T = x.shape[-1]
    c_out = gy.shape[-2]
    c_in = x.shape[-2]
    gw = np.zeros((c_out, c_in, K), dtype=gy.dtype)
    for k in range(K):
        off = (k - mid) * dilation
        t0, t1 = _tap_range(off, T)
        if t1 <= t0:
            continue
        g = np.matmul(gy[..., t0:t1], np.swapaxes(x[..., t0 + off : t1 + off], -1, -2))
        if g.ndim == 3:
            g = g.sum(axis=0)
        gw[:, :, k] = g
    return gw
