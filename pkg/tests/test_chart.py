import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffeolab.chart import (X_FIELD, XHAT_FIELD, VectorField1D, flatness_probe, flow,
                             flow_derivative, make_chart, pushforward, quadrature_flow)
from diffeolab.errors import ConstructionError

mp.mp.dps = 60


def T_mp(y):
    y = mp.mpf(y)
    return mp.sinh(mp.sinh(1 / (1 - y) - 1 / y))


def log_Y_mp(y):
    # Y = 1/T'
    y = mp.mpf(y)
    u = 1 / (1 - y) - 1 / y
    du = 1 / (1 - y) ** 2 + 1 / y ** 2
    return -(mp.log(mp.cosh(mp.sinh(u))) + mp.log(mp.cosh(u)) + mp.log(du))


def y_of_T_mp(T):
    # bisection: T is increasing on (0, 1)
    lo, hi = mp.mpf("1e-30"), 1 - mp.mpf("1e-30")
    for _ in range(220):
        mid = (lo + hi) / 2
        if T_mp(mid) < T:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


# --- oracles: mpmath at 60 digits --------------------------------------------

@pytest.mark.parametrize("y", [0.15, 0.3, 0.45, 0.5, 0.61, 0.77, 0.85])
def test_time_integral_matches_mpmath(chart, y):
    ref = float(T_mp(y))
    got = float(chart.phi_inv(y))
    assert got == pytest.approx(ref, rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("x", [-500.0, -7.5, -1.0, 0.0, 0.25, 3.0, 64.0, 1e4])
def test_phi_matches_mpmath_inverse(chart, x):
    assert float(chart.phi(x)) == pytest.approx(float(y_of_T_mp(x)), abs=2e-16)


@pytest.mark.parametrize("y", [1e-6, 1e-3, 0.05, 0.2, 0.5, 0.9, 0.999, 1 - 1e-7])
def test_log_Y_matches_mpmath(chart, y):
    ref = log_Y_mp(y)
    if abs(ref) > 1e300:
        # beyond double range: compare log(-log Y) instead
        assert float(chart.loglog_inv_Y(y)) == pytest.approx(float(mp.log(-ref)), rel=1e-12)
    else:
        assert float(chart.log_Y(y)) == pytest.approx(float(ref), rel=1e-12)


@pytest.mark.parametrize("y", [0.02, 0.2, 0.4, 0.6, 0.93])
def test_Yhat_is_ln2_T_Y(chart, y):
    ref = mp.log(2) * T_mp(y) * mp.exp(log_Y_mp(y))
    assert float(chart.Yhat(np.array([y]))[0]) == pytest.approx(float(ref), rel=1e-11, abs=1e-300)


def test_flatness_loglog_matches_mpmath(chart):
    ys = [1e-2, 1e-4, 1e-6]
    probe = flatness_probe(chart, "Y", ks=(1, 8), ys=ys)
    for r, k in enumerate((1, 8)):
        for c, y in enumerate(ys):
            ref = mp.log(-(log_Y_mp(y) - k * mp.log(y)))
            assert probe.loglog[r, c] == pytest.approx(float(ref), rel=1e-10)


@pytest.mark.parametrize("which", ["Y", "Yhat"])
@pytest.mark.parametrize("end", ["left", "right"])
def test_fields_are_flat(chart, which, end):
    probe = flatness_probe(chart, which, end=end)
    assert probe.monotone
    assert probe.below(1e-6)


def test_time_one_flow_matches_mpmath(chart):
    for y in (0.2, 0.5, 0.7):
        ref = y_of_T_mp(T_mp(y) + 1)
        assert flow(chart.field_Y, 1.0, y) == pytest.approx(float(ref), abs=1e-15)
    y = 0.6  # dilation flow: T -> 2T for basepoint 1/2
    assert flow(chart.field_Yhat, 1.0, y) == pytest.approx(float(y_of_T_mp(2 * T_mp(y))), abs=1e-15)


# --- trivial values ------------------------------------------------------------

def test_phi_zero_is_basepoint():
    for b in (0.5, 0.3, 0.7):
        assert float(make_chart(basepoint=b).phi(0.0)) == pytest.approx(b, abs=1e-15)


def test_model_flows_exact():
    x = np.linspace(-20, 20, 41)
    assert np.array_equal(flow(X_FIELD, 1.0, x), x + 1)
    assert np.array_equal(flow(XHAT_FIELD, 1.0, x), 2 * x)
    assert np.array_equal(flow_derivative(XHAT_FIELD, 1.0, x), np.full_like(x, 2.0))
    assert flow(X_FIELD, 0.0, 3.5) == 3.5


def test_bad_chart_arguments():
    with pytest.raises(ConstructionError):
        make_chart("polynomial")
    with pytest.raises(ConstructionError):
        make_chart(basepoint=1.0)


def test_endpoints_fixed(chart):
    for fld in (chart.field_Y, chart.field_Yhat):
        assert flow(fld, 5.0, 0.0) == 0.0
        assert flow(fld, -5.0, 1.0) == 1.0


# --- properties ----------------------------------------------------------------

times = st.floats(-3, 3, allow_nan=False)
points = st.floats(0.2, 0.8)


@settings(max_examples=60, deadline=None)
@given(times, times, points)
def test_flow_group_law(s, t, y):
    chart = make_chart()
    for fld in (chart.field_Y, chart.field_Yhat):
        assert flow(fld, s + t, y) == pytest.approx(flow(fld, s, flow(fld, t, y)), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(times, points, points)
def test_flow_monotone_in_y(t, y1, y2):
    chart = make_chart()
    if y1 == y2:
        return
    lo, hi = min(y1, y2), max(y1, y2)
    for fld in (chart.field_Y, chart.field_Yhat):
        assert flow(fld, t, lo) <= flow(fld, t, hi)
        assert flow_derivative(fld, t, lo) > 0


@settings(max_examples=40, deadline=None)
@given(times, st.floats(0.25, 0.75))
def test_flow_derivative_matches_field_ratio(t, y):
    chart = make_chart()
    fld = chart.field_Y
    z = flow(fld, t, y)
    ratio = float(chart.Y(np.array([z]))[0] / chart.Y(np.array([y]))[0])
    assert flow_derivative(fld, t, y) == pytest.approx(ratio, rel=1e-10)


# --- the two flow routes ---------------------------------------------------------

def test_pushforward_values(chart):
    y = np.linspace(0.15, 0.85, 500)
    pushed = pushforward(X_FIELD, chart.as_map())
    assert np.allclose(pushed(y), chart.Y(y), rtol=1e-12, atol=0)
    pushed_hat = pushforward(XHAT_FIELD, chart.as_map())
    assert np.allclose(pushed_hat(y), chart.Yhat(y), rtol=1e-10, atol=1e-15)


@pytest.mark.parametrize("t", [1.0, -0.5, 2.5])
def test_quadrature_route_matches_closed_form(chart, t):
    y = np.linspace(0.15, 0.85, 200)
    for base, exact in ((X_FIELD, chart.field_Y), (XHAT_FIELD, chart.field_Yhat)):
        fld = pushforward(base, chart.as_map())
        assert fld.exact_flow is None
        assert np.max(np.abs(flow(fld, t, y) - flow(exact, t, y))) < 1e-9


def test_quadrature_flow_of_a_polynomial_field():
    # V(y) = y(1-y): flow is the logistic map in closed form
    fld = VectorField1D("logistic", (0.0, 1.0), lambda y: y * (1 - y), zero_set=(0.0, 1.0))
    y = np.linspace(0.05, 0.95, 37)
    t = 1.3
    exact = y * math.exp(t) / (1 - y + y * math.exp(t))
    assert np.max(np.abs(quadrature_flow(fld, t, y) - exact)) < 1e-11
