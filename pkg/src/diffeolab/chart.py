"""Chart ``phi: R -> (0, 1)`` and one-dimensional vector fields and their flows.

The chart is the inverse of the time integral ``T(y) = int_{b}^{y} du / Y(u)``
of a boundary-flat field ``Y`` on [0, 1].  For the built-in field the integral
has the closed form ``sinh(sinh(1/(1-y) - 1/y))`` (up to the basepoint shift),
which makes ``Y`` and the pushed-forward dilation field ``Yhat`` flat to every
order at both endpoints.

Fields whose flow is not known in closed form are integrated by quadrature of
``1/V`` plus a safeguarded Newton solve for the arrival point.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

import numpy as np

from . import _chartmath as cm
from .errors import ConstructionError, PrecisionError

ArrayFn = Callable[[np.ndarray], np.ndarray]
FlowFn = Callable[[float, np.ndarray], "tuple[np.ndarray, np.ndarray]"]

FIELDS = ("sinh-sinh",)


class Map1D(Protocol):
    def evaluate(self, x): ...

    def derivative(self, x): ...

    def inverse(self) -> "Map1D": ...


@dataclass(frozen=True)
class VectorField1D:
    """A vector field on a closed interval of the line.

    ``exact_flow(t, y)`` returns ``(flow, dflow)`` when the flow is known in
    closed form; otherwise flows are computed by quadrature.
    """

    name: str
    domain: tuple[float, float]
    value: ArrayFn
    zero_set: tuple[float, ...] = ()
    exact_flow: Optional[FlowFn] = field(default=None, compare=False)

    def __call__(self, y):
        return self.value(np.asarray(y, dtype=float))


@dataclass(frozen=True)
class Chart:
    field_name: str
    basepoint: float
    offset: float  # raw time integral at the basepoint

    # -- the chart and its inverse ---------------------------------------
    def phi(self, x):
        """phi(x): a point of (0, 1); ``x`` may be +-inf."""
        return cm.y_of_T(np.asarray(x, dtype=float) + self.offset)

    def phi_inv(self, y):
        """Chart coordinate of ``y`` (the time integral); +-inf if it overflows."""
        return cm.T_of_y(y) - self.offset

    def dphi(self, x):
        return self.Y(self.phi(x))

    def time_integral(self, y):
        return self.phi_inv(y)

    # -- fields -----------------------------------------------------------
    def log_Y(self, y):
        """log Y(y) for y in (0, 1); -inf where Y underflows every format."""
        y = np.asarray(y, dtype=float)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            u = cm.u_of_y(y)
            s = np.sinh(u)
            return -(cm.log_cosh(s) + cm.log_cosh(u) + np.log(cm.dudy(y)))

    def Y(self, y):
        y = np.asarray(y, dtype=float)
        inside = (y > 0.0) & (y < 1.0)
        out = np.zeros_like(y)
        out[inside] = np.exp(self.log_Y(y[inside]))
        return out

    def Yhat(self, y):
        """ln2 * phi^{-1}(y) * Y(y), evaluated without forming T."""
        y = np.asarray(y, dtype=float)
        inside = (y > 0.0) & (y < 1.0)
        out = np.zeros_like(y)
        yi = y[inside]
        with np.errstate(over="ignore", invalid="ignore"):
            u = cm.u_of_y(yi)
            s = np.sinh(u)
            lc = cm.log_cosh(s)
            # T / cosh(s) = tanh(s), c / cosh(s) = c*exp(-log cosh s)
            ratio = np.tanh(s) - self.offset * np.exp(-lc)
            out[inside] = cm.LN2 * ratio * np.exp(-cm.log_cosh(u)) / cm.dudy(yi)
        return out

    def log_abs_Yhat(self, y):
        """log|Yhat(y)|, finite arbitrarily close to the endpoints (basepoint 1/2)."""
        y = np.asarray(y, dtype=float)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            u = cm.u_of_y(y)
            s = np.sinh(u)
            lc = cm.log_cosh(s)
            ratio = np.abs(np.tanh(s) - self.offset * np.exp(-lc))
            return np.log(cm.LN2) + np.log(ratio) - cm.log_cosh(u) - np.log(cm.dudy(y))

    def loglog_inv_Y(self, y):
        """log(-log Y(y)); stays finite where -log Y itself overflows."""
        y = np.asarray(y, dtype=float)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            u = cm.u_of_y(y)
            au = np.abs(u)
            rest = cm.log_cosh(u) + np.log(cm.dudy(y))
            s = np.sinh(au)
            direct = np.log(cm.log_cosh(s) + rest)
            # log(sinh|u| - ln2 + rest) with log sinh|u| = |u| - ln2 + log1p(-e^{-2|u|})
            log_s = au - cm.LN2 + np.log1p(-np.exp(-2.0 * au))
            asym = log_s + np.log1p((rest - cm.LN2) * np.exp(-log_s))
        return np.where(au < 300.0, direct, asym)

    @property
    def field_Y(self) -> VectorField1D:
        return VectorField1D(
            "Y", (0.0, 1.0), self.Y, zero_set=(0.0, 1.0),
            exact_flow=lambda t, y: cm.chart_affine(np.asarray(y, dtype=float), 1.0, float(t)),
        )

    @property
    def field_Yhat(self) -> VectorField1D:
        def flow(t, y):
            a = 2.0 ** float(t)
            return cm.chart_affine(np.asarray(y, dtype=float), a, self.offset * (1.0 - a))

        return VectorField1D(
            "Yhat", (0.0, 1.0), self.Yhat, zero_set=(0.0, self.basepoint, 1.0), exact_flow=flow
        )

    def as_map(self) -> "ChartMap":
        return ChartMap(self, inverse_direction=False)


@dataclass(frozen=True)
class ChartMap:
    """phi (or phi^{-1}) as a map object usable by ``pushforward``."""

    chart: Chart
    inverse_direction: bool = False

    def evaluate(self, x):
        return self.chart.phi_inv(x) if self.inverse_direction else self.chart.phi(x)

    def derivative(self, x):
        if self.inverse_direction:
            return 1.0 / self.chart.Y(x)
        return self.chart.dphi(x)

    def inverse(self) -> "ChartMap":
        return ChartMap(self.chart, not self.inverse_direction)


def _translation_flow(t, x):
    x = np.asarray(x, dtype=float)
    return x + t, np.ones_like(x)


def _dilation_flow(t, x):
    x = np.asarray(x, dtype=float)
    k = 2.0 ** float(t)
    return k * x, np.full_like(x, k)


X_FIELD = VectorField1D("X", (-np.inf, np.inf), lambda x: np.ones_like(x), exact_flow=_translation_flow)
XHAT_FIELD = VectorField1D("Xhat", (-np.inf, np.inf), lambda x: cm.LN2 * x, zero_set=(0.0,),
                           exact_flow=_dilation_flow)


def make_chart(field_choice: str = "sinh-sinh", basepoint: float = 0.5) -> Chart:
    """Build the chart whose translation flow pushes forward to a flat field."""
    if field_choice not in FIELDS:
        raise ConstructionError(f"unknown chart field {field_choice!r}; known: {FIELDS}")
    if not 0.0 < basepoint < 1.0:
        raise ConstructionError(f"basepoint must lie in (0, 1), got {basepoint}")
    offset = float(cm.T_of_y(basepoint))
    if not np.isfinite(offset) or abs(offset) > 1e12:
        raise PrecisionError(f"basepoint {basepoint} too close to the boundary (T = {offset:g})")
    return Chart(field_choice, float(basepoint), offset)


# ---------------------------------------------------------------------------
# flows

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _integral_inv(value, a, b, panels):
    """int_a^b du / V(u), vectorised over the pairs (a, b)."""
    a = a[:, None]
    w = (b[:, None] - a) / panels
    starts = a + w * np.arange(panels)[None, :]
    nodes = starts[:, :, None] + 0.5 * w[:, :, None] * (_GL_NODES + 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        vals = 1.0 / value(nodes.reshape(-1)).reshape(nodes.shape)
    return (0.5 * w[:, :, None] * vals * _GL_WEIGHTS).sum(axis=(1, 2))


def _adaptive_integral(value, a, b, tol=1e-12):
    """Panel-doubling Gauss-Legendre; each pair refines until its own value settles."""
    out = _integral_inv(value, a, b, 4)
    todo = np.arange(a.size)
    panels = 4
    while todo.size and panels < 512:
        fine = _integral_inv(value, a[todo], b[todo], 2 * panels)
        with np.errstate(invalid="ignore"):
            settled = np.abs(fine - out[todo]) <= tol * (1.0 + np.abs(fine))
        out[todo] = fine
        todo = todo[~settled]
        panels *= 2
    return out


def _component(field: VectorField1D, y):
    """Bounds of the zero-free component of the domain containing each y."""
    lo = np.full_like(y, field.domain[0])
    hi = np.full_like(y, field.domain[1])
    for z in field.zero_set:
        lo = np.where((z <= y) & (z > lo), z, lo)
        hi = np.where((z >= y) & (z < hi), z, hi)
    return lo, hi


def _inside(cand, prev, edge, direction):
    """Keep candidates strictly before a finite support edge."""
    past = np.isfinite(edge) & (direction * (cand - edge) >= 0)
    return np.where(past, 0.5 * (prev + np.where(np.isfinite(edge), edge, prev)), cand)


def quadrature_flow(field: VectorField1D, t: float, y, tol: float = 1e-12, max_iter: int = 80):
    """Time-t flow by solving int_y^z du/V(u) = t for z."""
    y = np.atleast_1d(np.asarray(y, dtype=float)).copy()
    out = y.copy()
    if t == 0.0:
        return out
    v0 = field(y)
    act = np.nonzero(v0 != 0.0)[0]
    if act.size == 0:
        return out
    ya, va = y[act], v0[act]
    sign_v = np.sign(va)
    clo, chi = _component(field, ya)
    # direction of motion; I(y, z) = int_y^z du/V has the sign of t along it
    move = np.sign(t) * sign_v
    edge = np.where(move > 0, chi, clo)
    # grow a bracket outward from a local step: integrals over short spans
    # stay accurate even where 1/V varies over hundreds of decades
    step = 2.0 * abs(t) * np.abs(va)
    near = ya.copy()
    far = _inside(ya + move * step, near, edge, move)
    grow = np.arange(ya.size)
    for _ in range(400):
        val = _adaptive_integral(field.value, ya[grow], far[grow], tol)
        with np.errstate(invalid="ignore"):
            reached = np.sign(t) * (val - t) >= 0
        grow = grow[~reached]
        if grow.size == 0:
            break
        near[grow] = far[grow]
        step[grow] *= 2.0
        far[grow] = _inside(ya[grow] + move[grow] * step[grow], far[grow], edge[grow], move[grow])
    else:
        raise PrecisionError(f"flow time {t} reaches the boundary of the field's support")
    lo, hi = np.minimum(near, far), np.maximum(near, far)
    z = 0.5 * (lo + hi)
    live = np.arange(ya.size)
    for _ in range(max_iter):
        yl, zl, sl = ya[live], z[live], sign_v[live]
        # residual made increasing in z
        g = sl * (_adaptive_integral(field.value, yl, zl, tol) - t)
        lo[live] = np.where(g < 0, zl, lo[live])
        hi[live] = np.where(g > 0, zl, hi[live])
        vz = np.abs(field(zl))
        with np.errstate(invalid="ignore", over="ignore"):
            z_new = zl - g * vz
        bad = ~np.isfinite(z_new) | (z_new <= lo[live]) | (z_new >= hi[live])
        z_new = np.where(bad, 0.5 * (lo[live] + hi[live]), z_new)
        done = np.abs(z_new - zl) <= 1e-13 * (1.0 + np.abs(zl))
        z[live] = z_new
        live = live[~done]
        if live.size == 0:
            break
    else:
        raise PrecisionError(
            f"quadrature flow did not converge at {live.size} points; "
            f"worst step {np.max(np.abs(g * vz)):.3g}"
        )
    out[act] = z
    return out


def flow(field: VectorField1D, t: float, y):
    """Time-t flow of ``field`` applied to ``y`` (scalar or array)."""
    scalar = np.ndim(y) == 0
    yy = np.atleast_1d(np.asarray(y, dtype=float))
    if field.exact_flow is not None:
        res = field.exact_flow(float(t), yy)[0]
    else:
        res = quadrature_flow(field, float(t), yy)
    return float(res[0]) if scalar else res


def flow_derivative(field: VectorField1D, t: float, y):
    """D(flow^t)(y) = V(flow^t(y)) / V(y); 1 where V vanishes."""
    scalar = np.ndim(y) == 0
    yy = np.atleast_1d(np.asarray(y, dtype=float))
    if field.exact_flow is not None:
        res = field.exact_flow(float(t), yy)[1]
    else:
        z = quadrature_flow(field, float(t), yy)
        v0, v1 = field(yy), field(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            res = np.where(v0 != 0.0, v1 / v0, 1.0)
    return float(res[0]) if scalar else res


def pushforward(vf: VectorField1D, map: Map1D, name: Optional[str] = None) -> VectorField1D:
    """The field ``map_* vf``: value Dmap(w)*V(w) at the point map(w)."""
    inv = map.inverse()

    def value(z):
        w = np.asarray(inv.evaluate(z), dtype=float)
        return np.asarray(map.derivative(w), dtype=float) * vf.value(w)

    lo, hi = vf.domain
    with np.errstate(over="ignore", invalid="ignore"):
        dom = tuple(float(v) for v in map.evaluate(np.array([lo, hi])))
        zeros = tuple(float(v) for v in map.evaluate(np.array(vf.zero_set, dtype=float)))
    return VectorField1D(name or f"push({vf.name})", dom, value, zero_set=zeros)


# ---------------------------------------------------------------------------
# flatness

@dataclass(frozen=True)
class FlatnessProbe:
    ks: tuple[int, ...]
    ys: tuple[float, ...]
    log_ratios: np.ndarray  # shape (len(ks), len(ys)); log(V(y)/y^k), may be -inf
    loglog: np.ndarray      # log(-log(V(y)/y^k)), finite

    @property
    def monotone(self) -> bool:
        # ys decrease toward the endpoint, so -log ratio must increase
        return bool(np.all(np.diff(self.loglog, axis=1) > 0))

    def below(self, threshold: float) -> bool:
        return bool(np.all(self.loglog > np.log(-np.log(threshold))))


def flatness_probe(chart: Chart, which: str = "Y", ks=range(1, 9), ys=None, end: str = "left"):
    """Sample V(y)/y^k as y approaches an endpoint, in log space.

    ``end='right'`` probes V(1-d)/d^k at the same distances d.
    """
    ys = np.asarray(ys if ys is not None else 10.0 ** -np.arange(2, 9), dtype=float)
    pts = ys if end == "left" else 1.0 - ys
    ks = tuple(int(k) for k in ks)
    if which == "Y":
        loglog_v = chart.loglog_inv_Y(pts)
        with np.errstate(over="ignore"):
            neglog_v = np.exp(loglog_v)
    elif which == "Yhat":
        neglog_v = -chart.log_abs_Yhat(pts)
        loglog_v = np.log(neglog_v)
    else:
        raise ValueError(f"unknown field {which!r}")
    logd = np.log(ys)
    log_ratios = np.empty((len(ks), len(ys)))
    loglog = np.empty_like(log_ratios)
    for r, k in enumerate(ks):
        with np.errstate(over="ignore"):
            log_ratios[r] = -neglog_v - k * logd
        # log(-log ratio) = log(neglog_v) + log1p(k log d / neglog_v)
        loglog[r] = loglog_v + np.log1p(k * logd * np.exp(-loglog_v))
    return FlatnessProbe(ks, tuple(float(v) for v in ys), log_ratios, loglog)
