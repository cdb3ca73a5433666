"""Vectorised chart arithmetic shared by the chart module and the numpy kernel.

The chart time integral is ``T(y) = sinh(sinh(u))`` with ``u = 1/(1-y) - 1/y``.
``T`` overflows a double within ~0.1 of either endpoint, so every map that
acts affinely on ``T`` is carried out on ``s = asinh(T) = sinh(u)`` instead.
"""
from __future__ import annotations

import numpy as np

LN2 = float(np.log(2.0))

# |u| beyond this: the chart maps are the identity to far below one ulp.
U_MAX = 700.0
# |s| beyond this: x -> a*x + b on T is s -> s + sign(s)*log(a) to ~1e-300.
S_BIG = 350.0


def u_of_y(y):
    return 1.0 / (1.0 - y) - 1.0 / y


def y_of_u(u):
    u = np.asarray(u, dtype=float)
    au = np.abs(u)
    # root of u*y^2 + (2-u)*y - 1 = 0 written without cancellation
    left = 2.0 / ((2.0 + au) + np.sqrt(au * au + 4.0))
    return np.where(u <= 0.0, left, 1.0 - left)


def dudy(y):
    return 1.0 / (y * y) + 1.0 / ((1.0 - y) * (1.0 - y))


def log_cosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - LN2


def T_of_y(y):
    """Raw time integral from 1/2; +-inf where it overflows."""
    y = np.asarray(y, dtype=float)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        return np.sinh(np.sinh(u_of_y(y)))


def y_of_T(T):
    T = np.asarray(T, dtype=float)
    return y_of_u(np.arcsinh(np.arcsinh(T)))


def chart_affine(y, a, b):
    """Apply ``T -> a*T + b`` inside (0, 1); identity elsewhere.

    Returns the image and the derivative, both arrays shaped like ``y``.
    """
    y = np.asarray(y, dtype=float)
    out = y.copy()
    der = np.ones_like(y)
    if a == 1.0 and b == 0.0:
        return out, der
    idx = np.nonzero((y > 0.0) & (y < 1.0))[0] if y.ndim == 1 else None
    if idx is None:
        flat_out, flat_der = chart_affine(y.ravel(), a, b)
        return flat_out.reshape(y.shape), flat_der.reshape(y.shape)
    yi = y[idx]
    u = u_of_y(yi)
    keep = np.abs(u) < U_MAX
    idx, yi, u = idx[keep], yi[keep], u[keep]
    if idx.size == 0:
        return out, der
    s = np.sinh(u)
    big = np.abs(s) >= S_BIG
    s2 = np.empty_like(s)
    ds = np.ones_like(s)
    m = ~big
    if m.any():
        Tm = np.sinh(s[m])
        T2 = a * Tm + b
        s2[m] = np.arcsinh(T2)
        ds[m] = a * np.cosh(s[m]) / np.sqrt(1.0 + T2 * T2)
    if big.any():
        s2[big] = s[big] + np.sign(s[big]) * np.log(a)
    u2 = np.arcsinh(s2)
    y2 = y_of_u(u2)
    out[idx] = y2
    der[idx] = dudy(yi) / dudy(y2) * (np.cosh(u) / np.cosh(u2)) * ds
    return out, der


def block_affine(y, lo, hi, a, b):
    """``chart_affine`` conjugated by the affine map [lo, hi] -> [0, 1]."""
    y = np.asarray(y, dtype=float)
    out = y.copy()
    der = np.ones_like(y)
    w = hi - lo
    inside = (y > lo) & (y < hi)
    if inside.any():
        p = (y[inside] - lo) / w
        p2, d = chart_affine(p, a, b)
        out[inside] = lo + w * p2
        der[inside] = d
    return out, der
