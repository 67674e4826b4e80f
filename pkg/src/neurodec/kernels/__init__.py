"""Convolution kernel backends.

The hot inner loops of model training are the same-padded temporal
convolutions.  Two interchangeable backends provide them:

* ``cython`` — the compiled extension ``neurodec.kernels._conv``
* ``numpy``  — pure numpy (``neurodec.kernels._np``)

Selection happens once at import: the compiled extension is preferred when
present, with ``NEURODEC_KERNELS=numpy|cython`` forcing a choice.  Both
backends are float32/float64 exact-semantics twins; ``benchmarks/
bench_kernels.py`` compares their throughput.
"""

import os

import numpy as np

from . import _np

_FORCED = os.environ.get("NEURODEC_KERNELS", "auto").lower()

_impl = _np
_backend = "numpy"
if _FORCED in ("auto", "cython"):
    try:
        from . import _conv

        _impl = _conv
        _backend = "cython"
    except ImportError:
        if _FORCED == "cython":
            raise ImportError(
                "NEURODEC_KERNELS=cython but the compiled extension is not "
                "built; reinstall with Cython available or use numpy"
            )
elif _FORCED != "numpy":
    raise ValueError(f"unknown NEURODEC_KERNELS value: {_FORCED!r}")


def backend():
    """Name of the active kernel backend ('cython' or 'numpy')."""
    return _backend


def get_backend_module(name):
    """Fetch a backend by name, for cross-checks and benchmarks."""
    if name == "numpy":
        return _np
    if name == "cython":
        from . import _conv

        return _conv
    raise ValueError(f"unknown backend: {name!r}")


def _as_float(a):
    a = np.asarray(a)
    if a.dtype not in (np.float32, np.float64):
        a = a.astype(np.float64)
    return a


def conv1d_forward(x, w, dilation=1):
    x, w = _as_float(x), _as_float(w)
    if x.ndim == 3 and _impl is not _np:
        out = np.empty(x.shape[:1] + (w.shape[0], x.shape[-1]), dtype=x.dtype)
        for b in range(x.shape[0]):
            out[b] = _impl.conv1d_forward(x[b], w, dilation)
        return out
    return _impl.conv1d_forward(x, w, dilation)


def conv1d_grad_input(gy, w, dilation=1):
    gy, w = _as_float(gy), _as_float(w)
    if gy.ndim == 3 and _impl is not _np:
        gx = np.empty(gy.shape[:1] + (w.shape[1], gy.shape[-1]), dtype=gy.dtype)
        for b in range(gy.shape[0]):
            gx[b] = _impl.conv1d_grad_input(gy[b], w, dilation)
        return gx
    return _impl.conv1d_grad_input(gy, w, dilation)


def conv1d_grad_kernel(gy, x, kernel_size, dilation=1):
    gy, x = _as_float(gy), _as_float(x)
    if gy.ndim == 3 and _impl is not _np:
        gw = np.zeros((gy.shape[1], x.shape[1], kernel_size), dtype=gy.dtype)
        for b in range(gy.shape[0]):
            gw += _impl.conv1d_grad_kernel(gy[b], x[b], kernel_size, dilation)
        return gw
    return _impl.conv1d_grad_kernel(gy, x, kernel_size, dilation)
