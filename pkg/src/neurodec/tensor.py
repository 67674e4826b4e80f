"""Dense tensors with reverse-mode gradients.

This is deliberately not a general autodiff engine: it provides exactly the
differentiable operations the reconstruction network needs (linear maps,
same-padded temporal convolution, GELU, GLU, dropout, a per-subject linear
transform, Pearson similarity and the contrastive loss) plus a
finite-difference gradient checker.

Storage is 32-bit by default; statistics (means, norms, dot products,
log-sum-exp) accumulate in 64-bit.  Ops record onto the active
:class:`GradTape` only while one is open, so evaluation-mode code pays no
tape overhead.
"""

import math
import threading
import warnings

import numpy as np
from scipy.special import erf

from . import kernels
from .errors import NumericsWarning, ShapeError

_SQRT1_2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

_state = threading.local()


class Tensor:
    """A dense real array plus the bookkeeping needed for backprop."""

    __slots__ = ("data", "grad", "requires_grad", "_tracked")

    def __init__(self, data, requires_grad=False, dtype=np.float32):
        arr = np.asarray(data, dtype=dtype)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._tracked = self.requires_grad

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name})"


class _Node:
    __slots__ = ("out", "inputs", "backward")

    def __init__(self, out, inputs, backward):
        self.out = out
        self.inputs = inputs
        self.backward = backward


class GradTape:
    """Records executed ops; replays them once, in reverse order.

    Tapes are single-owner: open one per training step on one thread.
    """

    def __init__(self):
        self._nodes = []
        self._used = False

    def __enter__(self):
        if getattr(_state, "tape", None) is not None:
            raise RuntimeError("a GradTape is already active on this thread")
        _state.tape = self
        return self

    def __exit__(self, *exc):
        _state.tape = None
        return False

    def gradient(self, output, sources):
        """Gradients of a scalar `output` w.r.t. a list of source tensors.

        Consumes the tape.  Sources that did not influence the output get
        zero gradients.
        """
        if self._used:
            raise RuntimeError("this GradTape was already consumed")
        self._used = True
        if output.data.size != 1:
            raise ShapeError("gradient target must be a scalar")
        touched = [output]
        output.grad = np.ones_like(output.data)
        for node in reversed(self._nodes):
            if node.out.grad is None:
                continue
            grads = node.backward(node.out.grad)
            for t, g in zip(node.inputs, grads):
                if g is None or not isinstance(t, Tensor) or not t._tracked:
                    continue
                if t.grad is None:
                    t.grad = g
                    touched.append(t)
                else:
                    t.grad = t.grad + g
        result = [
            s.grad if s.grad is not None else np.zeros_like(s.data) for s in sources
        ]
        for t in touched:
            t.grad = None
        self._nodes = []
        return result


def _active_tape():
    return getattr(_state, "tape", None)


def _record(out, inputs, backward):
    tape = _active_tape()
    if tape is not None and any(
        isinstance(t, Tensor) and t._tracked for t in inputs
    ):
        out._tracked = True
        tape._nodes.append(_Node(out, inputs, backward))
    return out


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise / reduction ops


def add(a, b):
    out = Tensor(a.data + b.data, dtype=a.dtype)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _record(out, (a, b), backward)


def sub(a, b):
    out = Tensor(a.data - b.data, dtype=a.dtype)

    def backward(g):
        return _unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)

    return _record(out, (a, b), backward)


def mul(a, b):
    out = Tensor(a.data * b.data, dtype=a.dtype)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _record(out, (a, b), backward)


def tsum(x):
    out = Tensor(np.sum(x.data, dtype=np.float64), dtype=x.dtype)

    def backward(g):
        return (np.full_like(x.data, g),)

    return _record(out, (x,), backward)


def tmean(x):
    n = x.data.size
    out = Tensor(np.sum(x.data, dtype=np.float64) / n, dtype=x.dtype)

    def backward(g):
        return (np.full_like(x.data, g / n),)

    return _record(out, (x,), backward)


# ---------------------------------------------------------------------------
# network ops


def linear(x, weight, bias=None):
    """Apply ``weight @ x[..., :, t] (+ bias)`` to every time column.

    x: (C, T) or (B, C, T); weight: (D_out, C); bias: (D_out,) or None.
    """
    if x.data.shape[-2] != weight.data.shape[1]:
        raise ShapeError(
            f"linear: input has {x.data.shape[-2]} channels, "
            f"weight expects {weight.data.shape[1]}"
        )
    y = np.matmul(weight.data, x.data)
    if bias is not None:
        y = y + bias.data[:, None]
    out = Tensor(y, dtype=x.dtype)

    def backward(g):
        gx = np.matmul(weight.data.T, g)
        gw = np.matmul(g, np.swapaxes(x.data, -1, -2))
        if gw.ndim == 3:
            gw = gw.sum(axis=0)
        gb = None
        if bias is not None:
            gb = g.sum(axis=(0, -1)) if g.ndim == 3 else g.sum(axis=-1)
        return gx, gw, gb

    return _record(out, (x, weight, bias), backward)


def conv1d(x, kernel, bias=None, dilation=1):
    """Same-padded 1D convolution over the time axis.

    x: (C_in, T) or (B, C_in, T); kernel: (C_out, C_in, K) with odd K.
    Out-of-range input samples are treated as zero, so T is preserved.
    """
    k = kernel.data.shape
    if len(k) != 3:
        raise ShapeError("conv1d kernel must be (C_out, C_in, K)")
    if k[2] % 2 == 0:
        raise ShapeError(f"conv1d kernel size must be odd, got {k[2]}")
    if x.data.shape[-2] != k[1]:
        raise ShapeError(
            f"conv1d: input has {x.data.shape[-2]} channels, kernel expects {k[1]}"
        )
    y = kernels.conv1d_forward(x.data, kernel.data, dilation)
    if bias is not None:
        y += bias.data[:, None]
    out = Tensor(y, dtype=x.dtype)

    def backward(g):
        gx = kernels.conv1d_grad_input(g, kernel.data, dilation)
        gw = kernels.conv1d_grad_kernel(g, x.data, k[2], dilation)
        gb = None
        if bias is not None:
            gb = g.sum(axis=(0, -1)) if g.ndim == 3 else g.sum(axis=-1)
        return gx, gw, gb

    return _record(out, (x, kernel, bias), backward)


def gelu(x):
    """Exact GELU: x * Phi(x) with Phi the standard normal CDF."""
    xd = x.data
    phi = 0.5 * (1.0 + erf(xd * _SQRT1_2))
    out = Tensor(xd * phi, dtype=x.dtype)

    def backward(g):
        dens = np.exp(-0.5 * np.square(xd)) * _INV_SQRT_2PI
        return (g * (phi + xd * dens),)

    return _record(out, (x,), backward)


def glu(x):
    """Gated linear unit over the channel axis: first half * sigmoid(second)."""
    c2 = x.data.shape[-2]
    if c2 % 2 != 0:
        raise ShapeError(f"glu needs an even channel count, got {c2}")
    h = c2 // 2
    a = x.data[..., :h, :]
    s = 1.0 / (1.0 + np.exp(-x.data[..., h:, :]))
    out = Tensor(a * s, dtype=x.dtype)

    def backward(g):
        gx = np.empty_like(x.data)
        gx[..., :h, :] = g * s
        gx[..., h:, :] = g * a * s * (1.0 - s)
        return (gx,)

    return _record(out, (x,), backward)


def dropout(x, rate, training, rng):
    """Zero entries with probability `rate` and rescale survivors.

    Identity in eval mode.  `rng` must be a seeded numpy Generator so that
    training-mode forward passes are reproducible.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    keep = (rng.random(x.data.shape) >= rate).astype(x.dtype)
    scale = x.dtype.type(1.0 / (1.0 - rate))
    out = Tensor(x.data * keep * scale, dtype=x.dtype)

    def backward(g):
        return (g * keep * scale,)

    return _record(out, (x,), backward)


def subject_transform(x, matrices, subjects):
    """Multiply every time column by the owning subject's square matrix.

    x: (C, T) with scalar subject id, or (B, C, T) with an id per item;
    matrices: (S, C, C).
    """
    subs = np.atleast_1d(np.asarray(subjects, dtype=np.int64))
    if np.any(subs < 0) or np.any(subs >= matrices.data.shape[0]):
        raise ShapeError("subject id out of range")
    batched = x.data.ndim == 3
    m = matrices.data[subs] if batched else matrices.data[int(subs[0])]
    out = Tensor(np.matmul(m, x.data), dtype=x.dtype)

    def backward(g):
        gx = np.matmul(np.swapaxes(m, -1, -2), g)
        gm = np.zeros_like(matrices.data)
        contrib = np.matmul(g, np.swapaxes(x.data, -1, -2))
        if batched:
            np.add.at(gm, subs, contrib)
        else:
            gm[int(subs[0])] = contrib
        return gx, gm

    return _record(out, (x, matrices), backward)


# ---------------------------------------------------------------------------
# similarity and contrastive loss


def _center_columns(z):
    """Center over the feature axis and normalize each time column.

    Works on (..., D, T).  Returns (unit, norms, zero_mask); zero-variance
    columns come back all-zero with the mask set.
    """
    mu = z.mean(axis=-2, keepdims=True, dtype=np.float64).astype(z.dtype)
    c = z - mu
    sq = np.sum(np.square(c, dtype=np.float64), axis=-2, keepdims=True)
    n = np.sqrt(sq).astype(z.dtype)
    mask = n == 0
    safe = np.where(mask, z.dtype.type(1), n)
    return c / safe, safe, mask


def normalize_series(z):
    """Eager column normalization for candidate banks (no tape)."""
    unit, _, mask = _center_columns(np.asarray(z))
    if mask.any():
        warnings.warn(
            "zero-variance time columns map to zero similarity", NumericsWarning
        )
    return unit


def _normalize_columns_backward(g_unit, unit, norms, mask):
    # through c/||c|| then through centering; zero-variance columns get 0
    proj = np.sum(g_unit * unit, axis=-2, keepdims=True, dtype=np.float64).astype(
        unit.dtype
    )
    gc = (g_unit - proj * unit) / norms
    np.copyto(gc, 0, where=np.broadcast_to(mask, gc.shape))
    return gc - gc.mean(axis=-2, keepdims=True, dtype=np.float64).astype(unit.dtype)


def pearson(a, b):
    """Pearson correlation of two equal-length vectors, clamped to [-1, 1].

    Zero-variance input is defined as correlation 0 (with a NumericsWarning)
    so silent embedding periods contribute a neutral contrastive logit.
    """
    av, bv = a.data.ravel(), b.data.ravel()
    if av.size != bv.size or av.size < 2:
        raise ShapeError("pearson needs two equal-length vectors of length >= 2")
    ac = av - av.mean(dtype=np.float64)
    bc = bv - bv.mean(dtype=np.float64)
    na = math.sqrt(float(np.dot(ac, ac)))
    nb = math.sqrt(float(np.dot(bc, bc)))
    if na == 0.0 or nb == 0.0:
        warnings.warn("pearson of a zero-variance vector is defined as 0",
                      NumericsWarning)
        out = Tensor(0.0, dtype=a.dtype)
        return _record(out, (a, b), lambda g: (np.zeros_like(a.data),
                                               np.zeros_like(b.data)))
    ah = ac / na
    bh = bc / nb
    r = float(np.clip(np.dot(ah, bh), -1.0, 1.0))
    out = Tensor(r, dtype=a.dtype)

    def backward(g):
        ga = g * (bh - r * ah) / na
        gb = g * (ah - r * bh) / nb
        return (
            (ga - ga.mean()).reshape(a.shape).astype(a.dtype),
            (gb - gb.mean()).reshape(b.shape).astype(b.dtype),
        )

    return _record(out, (a, b), backward)


def _nce_from_normalized(pred_unit, cand_unit, tau):
    """Loss terms for one segment given unit-normalized columns.

    cand_unit is (N, D, T) with the positive at index 0.  Returns the loss
    (float, summed over t) and the softmax weights needed for backward.
    """
    sims = np.einsum("dt,ndt->nt", pred_unit, cand_unit, dtype=np.float64)
    np.clip(sims, -1.0, 1.0, out=sims)
    logits = sims / tau
    m = logits.max(axis=0)
    ex = np.exp(logits - m)
    z = ex.sum(axis=0)
    loss = float(np.sum(np.log(z) - (logits[0] - m)))
    w = ex / z
    w[0] -= 1.0  # d loss / d logits
    return loss, w


def infonce_loss(pred, pos, negs, tau):
    """Contrastive softmax loss over per-column Pearson similarities.

    The positive plus N-1 negatives form an N-way classification at every
    time step; similarities are Pearson over the feature axis, logits are
    sim/tau, max-stabilized per column.  Gradients flow to `pred` only (the
    candidate series are data).
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if len(negs) < 1:
        raise ValueError("infonce_loss needs at least one negative (N >= 2)")
    shape = pred.data.shape
    for c in (pos, *negs):
        if c.data.shape != shape:
            raise ShapeError("all contrastive series must share the D x T shape")
    cand = np.stack([pos.data] + [n.data for n in negs])
    cand_unit = normalize_series(cand)
    pred_unit, norms, mask = _center_columns(pred.data)
    if mask.any():
        warnings.warn(
            "zero-variance time columns map to zero similarity", NumericsWarning
        )
    loss, w = _nce_from_normalized(pred_unit, cand_unit, tau)
    out = Tensor(loss, dtype=pred.dtype)

    def backward(g):
        coeff = (w * (float(g) / tau)).astype(pred.dtype)
        g_unit = np.einsum("nt,ndt->dt", coeff, cand_unit)
        return (_normalize_columns_backward(g_unit, pred_unit, norms, mask), None)

    return _record(out, (pred, pos), backward)


def infonce_from_bank(pred, norm_bank, cand_idx, tau):
    """Batched contrastive loss against a pre-normalized segment bank.

    pred: (B, D, T) tensor; norm_bank: (M, D, T) array already passed through
    :func:`normalize_series`; cand_idx: (B, N) int array whose first column
    is each item's positive.  Returns the mean per-segment loss.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    b_sz = pred.data.shape[0]
    pred_unit, norms, mask = _center_columns(pred.data)
    losses = np.empty(b_sz)
    ws = []
    for b in range(b_sz):
        loss_b, w = _nce_from_normalized(pred_unit[b], norm_bank[cand_idx[b]], tau)
        losses[b] = loss_b
        ws.append(w.astype(np.float32))
    out = Tensor(losses.mean(), dtype=pred.dtype)

    def backward(g):
        scale = float(g) / (tau * b_sz)
        g_unit = np.empty_like(pred_unit)
        for b in range(b_sz):
            coeff = (ws[b] * scale).astype(pred.dtype)
            g_unit[b] = np.einsum("nt,ndt->dt", coeff, norm_bank[cand_idx[b]])
        return (_normalize_columns_backward(g_unit, pred_unit, norms, mask),)

    return _record(out, (pred,), backward)


# ---------------------------------------------------------------------------
# gradient checking


def grad_check(f, points, h=1e-4):
    """Compare reverse-mode gradients with central finite differences.

    `f` maps len(points) float64 tensors to a scalar tensor and must be
    deterministic.  Per-element step is h * max(1, |x|).  Returns the worst
    relative error, measured as max |ad - fd| / max(||ad||_inf, ||fd||_inf).
    """
    tensors = [Tensor(p, requires_grad=True, dtype=np.float64) for p in points]
    with GradTape() as tape:
        out = f(*tensors)
    analytic = tape.gradient(out, tensors)

    worst = 0.0
    for t, ga in zip(tensors, analytic):
        flat = t.data.ravel()
        gf = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            step = h * max(1.0, abs(orig))
            flat[i] = orig + step
            hi = float(f(*tensors).data)
            flat[i] = orig - step
            lo = float(f(*tensors).data)
            flat[i] = orig
            gf[i] = (hi - lo) / (2.0 * step)
        ga = ga.ravel()
        denom = max(np.abs(ga).max(initial=0.0), np.abs(gf).max(initial=0.0), 1e-12)
        worst = max(worst, float(np.abs(ga - gf).max(initial=0.0)) / denom)
    return worst
