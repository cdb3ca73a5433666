"""Pure numpy implementation of the word-evaluation kernel.

Mirrors ``_kernels.pyx`` opcode for opcode; used when the compiled module is
unavailable and as the reference the compiled kernel is tested against.
"""
from __future__ import annotations

import numpy as np

from ._chartmath import block_affine, chart_affine, u_of_y

OP_CHART_AFFINE = 1
OP_BLOCK_AFFINE = 2
OP_BLOCK_FLOW = 3
OP_HERMITE = 4
OP_HERMITE_INV = 5

_NEWTON_ITERS = 60


def _block_flow(y, data):
    lo, hi, c, n_first, count = data[0], data[1], data[2], int(data[3]), int(data[4])
    table = data[5:5 + 2 * count].reshape(count, 2)
    out = y.copy()
    der = np.ones_like(y)
    inside = np.nonzero((y > 0.0) & (y < 1.0))[0]
    if inside.size == 0:
        return out, der
    u = u_of_y(y[inside])
    # |u| >= 7 puts T beyond 1e300, far outside any block table
    keep = np.abs(u) < 7.0
    inside, u = inside[keep], u[keep]
    if inside.size == 0:
        return out, der
    x = np.sinh(np.sinh(u)) - c
    n = np.floor(x)
    k = n - n_first
    ok = np.isfinite(x) & (k >= 0) & (k < count)
    inside, n, k = inside[ok], n[ok], k[ok].astype(np.int64)
    for kk in np.unique(k):
        a, b = table[kk]
        if a == 1.0 and b == 0.0:
            continue
        sel = inside[k == kk]
        shift = float(n_first + kk)
        y1, d1 = chart_affine(y[sel], 1.0, -shift)
        y2, d2 = block_affine(y1, lo, hi, a, b)
        y3, d3 = chart_affine(y2, 1.0, shift)
        out[sel] = y3
        der[sel] = d1 * d2 * d3
    return out, der


def _hermite_parts(data):
    m = int(data[0])
    knots = data[1:1 + m]
    vals = data[1 + m:1 + 2 * m]
    slopes = data[1 + 2 * m:1 + 3 * m]
    return m, knots, vals, slopes


def _hermite_eval(j, t, knots, vals, slopes):
    h = knots[j + 1] - knots[j]
    t2 = t * t
    t3 = t2 * t
    p = ((2 * t3 - 3 * t2 + 1) * vals[j] + (t3 - 2 * t2 + t) * h * slopes[j]
         + (-2 * t3 + 3 * t2) * vals[j + 1] + (t3 - t2) * h * slopes[j + 1])
    dp = ((6 * t2 - 6 * t) * vals[j] + (3 * t2 - 4 * t + 1) * h * slopes[j]
          + (-6 * t2 + 6 * t) * vals[j + 1] + (3 * t2 - 2 * t) * h * slopes[j + 1]) / h
    return p, dp


def _hermite(y, data):
    m, knots, vals, slopes = _hermite_parts(data)
    out = y.copy()
    der = np.ones_like(y)
    inside = (y > knots[0]) & (y < knots[-1])
    if inside.any():
        yi = y[inside]
        j = np.clip(np.searchsorted(knots, yi, side="right") - 1, 0, m - 2)
        t = (yi - knots[j]) / (knots[j + 1] - knots[j])
        out[inside], der[inside] = _hermite_eval(j, t, knots, vals, slopes)
    return out, der


def _hermite_inverse(y, data):
    m, knots, vals, slopes = _hermite_parts(data)
    out = y.copy()
    der = np.ones_like(y)
    inside = (y > vals[0]) & (y < vals[-1])
    if not inside.any():
        return out, der
    target = y[inside]
    j = np.clip(np.searchsorted(vals, target, side="right") - 1, 0, m - 2)
    lo = np.zeros_like(target)
    hi = np.ones_like(target)
    span = vals[j + 1] - vals[j]
    t = np.clip((target - vals[j]) / span, 0.0, 1.0)
    for _ in range(_NEWTON_ITERS):
        p, dp = _hermite_eval(j, t, knots, vals, slopes)
        r = p - target
        lo = np.where(r < 0, t, lo)
        hi = np.where(r > 0, t, hi)
        h = knots[j + 1] - knots[j]
        step = r / (dp * h)
        t_new = t - step
        bad = (t_new <= lo) | (t_new >= hi) | ~np.isfinite(t_new)
        t_new = np.where(bad, 0.5 * (lo + hi), t_new)
        done = np.abs(t_new - t) <= 1e-16
        t = t_new
        if done.all():
            break
    p, dp = _hermite_eval(j, t, knots, vals, slopes)
    out[inside] = knots[j] + t * (knots[j + 1] - knots[j])
    der[inside] = 1.0 / dp
    return out, der


def eval_word(ops, offs, data, x):
    """Evaluate a composed word at the points ``x``.

    ``ops[k]`` / ``offs[k]`` describe the k-th primitive of the word, which is
    read left to right as a product, so the last primitive acts first.
    Returns ``(values, derivatives)``.
    """
    y = np.array(x, dtype=float, copy=True).ravel()
    der = np.ones_like(y)
    for k in range(len(ops) - 1, -1, -1):
        op = ops[k]
        o = offs[k]
        if op == OP_CHART_AFFINE:
            y, d = chart_affine(y, data[o], data[o + 1])
        elif op == OP_BLOCK_AFFINE:
            y, d = block_affine(y, data[o], data[o + 1], data[o + 2], data[o + 3])
        elif op == OP_BLOCK_FLOW:
            y, d = _block_flow(y, data[o:])
        elif op == OP_HERMITE:
            y, d = _hermite(y, data[o:])
        elif op == OP_HERMITE_INV:
            y, d = _hermite_inverse(y, data[o:])
        else:
            continue
        der *= d
    shape = np.shape(x)
    return y.reshape(shape), der.reshape(shape)
