"""Independent brute-force reference implementations used by the tests.

Everything here is written the slow, obvious way (explicit loops, direct
formulas) and deliberately shares no code with the package internals.
"""

import math

import numpy as np


def conv1d_ref(x, w, dilation=1):
    """Direct-summation same-padded convolution, triple loop."""
    c_out, c_in, K = w.shape
    T = x.shape[1]
    mid = (K - 1) // 2
    y = np.zeros((c_out, T))
    for o in range(c_out):
        for t in range(T):
            acc = 0.0
            for c in range(c_in):
                for k in range(K):
                    src = t + (k - mid) * dilation
                    if 0 <= src < T:
                        acc += float(w[o, c, k]) * float(x[c, src])
            y[o, t] = acc
    return y


def pearson_ref(a, b):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    ac = a - a.mean()
    bc = b - b.mean()
    na = math.sqrt(float(ac @ ac))
    nb = math.sqrt(float(bc @ bc))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip((ac @ bc) / (na * nb), -1.0, 1.0))


def infonce_ref(pred, pos, negs, tau):
    """Plain softmax cross-entropy over per-column correlations."""
    cands = [np.asarray(pos, dtype=np.float64)]
    cands += [np.asarray(n, dtype=np.float64) for n in negs]
    pred = np.asarray(pred, dtype=np.float64)
    T = pred.shape[1]
    total = 0.0
    for t in range(T):
        sims = [pearson_ref(pred[:, t], c[:, t]) for c in cands]
        exps = [math.exp(s / tau) for s in sims]
        total -= math.log(exps[0] / sum(exps))
    return total


def adam_trace_ref(x0, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Scalar Adam trajectory, one parameter, list of gradients."""
    x, m, v = float(x0), 0.0, 0.0
    xs = []
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        x -= lr * mhat / (math.sqrt(vhat) + eps)
        xs.append(x)
    return xs


def nucleus_ref(probs, p, r):
    """Set construction by enumeration: probability-sorted prefix reaching
    mass >= p, intersected with words within factor r of the mode."""
    probs = np.asarray(probs, dtype=np.float64)
    order = sorted(range(len(probs)), key=lambda i: (-probs[i], i))
    prefix = []
    mass = 0.0
    for i in order:
        prefix.append(i)
        mass += probs[i]
        if mass >= p:
            break
    cutoff = r * probs.max()
    return [i for i in prefix if probs[i] >= cutoff]


def ridge_lstsq_ref(A, Z):
    """Unregularized least squares via numpy's solver."""
    return np.linalg.lstsq(A, Z, rcond=None)[0]


def rank_accuracy_ref(rank, m):
    return 1.0 - (rank - 1) / (m - 1)
