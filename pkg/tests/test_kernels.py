import numpy as np
import pytest

import neurodec.kernels as kernels

from oracles import conv1d_ref


def _has_cython():
    try:
        kernels.get_backend_module("cython")
        return True
    except ImportError:
        return False


needs_ext = pytest.mark.skipif(not _has_cython(), reason="extension not built")


def test_a_backend_is_active():
    assert kernels.backend() in ("cython", "numpy")


@pytest.mark.parametrize("seed", range(4))
def test_numpy_backend_matches_direct_summation(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((3, 15))
    w = rng.standard_normal((2, 3, 7))
    npk = kernels.get_backend_module("numpy")
    np.testing.assert_allclose(npk.conv1d_forward(x, w, 1), conv1d_ref(x, w), atol=1e-12)


@needs_ext
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@pytest.mark.parametrize("dilation", [1, 2, 3])
def test_backends_agree(dtype, dilation):
    rng = np.random.default_rng(11)
    x = rng.standard_normal((5, 33)).astype(dtype)
    w = rng.standard_normal((4, 5, 9)).astype(dtype)
    gy = rng.standard_normal((4, 33)).astype(dtype)
    a = kernels.get_backend_module("numpy")
    b = kernels.get_backend_module("cython")
    tol = 1e-5 if dtype == np.float32 else 1e-12
    np.testing.assert_allclose(
        a.conv1d_forward(x, w, dilation), b.conv1d_forward(x, w, dilation), atol=tol
    )
    np.testing.assert_allclose(
        a.conv1d_grad_input(gy, w, dilation),
        b.conv1d_grad_input(gy, w, dilation),
        atol=tol,
    )
    np.testing.assert_allclose(
        a.conv1d_grad_kernel(gy, x, 9, dilation),
        b.conv1d_grad_kernel(gy, x, 9, dilation),
        atol=tol,
    )


def test_batched_dispatch_matches_loop():
    rng = np.random.default_rng(2)
    xb = rng.standard_normal((4, 3, 12)).astype(np.float32)
    w = rng.standard_normal((2, 3, 5)).astype(np.float32)
    yb = kernels.conv1d_forward(xb, w)
    for i in range(4):
        np.testing.assert_allclose(yb[i], kernels.conv1d_forward(xb[i], w), atol=1e-6)
