import json

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffeolab import diffeo as dm
from diffeolab.construction import build_kit, realize
from diffeolab.chart import make_chart
from diffeolab.diffeo import (IDENTITY, BlockAffine, BlockFlow, ChartAffine, Diffeo, Hermite,
                              c1_distance, compose, compose_all, conjugate, invert,
                              merge_intervals, monotone_hermite, numerically_equal, power,
                              primitive_from_json, sup_distance)
from diffeolab.errors import ConstructionError, WordLengthError
from diffeolab.words import GENERATORS, GeneratorWord

mp.mp.dps = 50


def T_mp(y):
    y = mp.mpf(y)
    return mp.sinh(mp.sinh(1 / (1 - y) - 1 / y))


def y_of_T_mp(T):
    lo, hi = mp.mpf("1e-30"), 1 - mp.mpf("1e-30")
    for _ in range(200):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if T_mp(mid) < T else (lo, mid)
    return (lo + hi) / 2


def dT_mp(y):
    y = mp.mpf(y)
    u = 1 / (1 - y) - 1 / y
    return mp.cosh(mp.sinh(u)) * mp.cosh(u) * (1 / (1 - y) ** 2 + 1 / y ** 2)


def chart_affine_mp(y, a, b):
    return y_of_T_mp(a * T_mp(y) + b)


def prim(p):
    return Diffeo.from_primitive(p)


# --- primitives against independent evaluations --------------------------------

@pytest.mark.parametrize("a,b", [(1.0, 1.0), (2.0, 0.0), (0.5, -3.0), (3.0, 7.5)])
@pytest.mark.parametrize("y", [0.2, 0.45, 0.5, 0.66, 0.8])
def test_chart_affine_matches_mpmath(a, b, y):
    d = prim(ChartAffine(a, b))
    ref = chart_affine_mp(y, a, b)
    assert d(y) == pytest.approx(float(ref), abs=3e-16)
    dref = a * dT_mp(y) / dT_mp(ref)
    assert d.derivative(y) == pytest.approx(float(dref), rel=1e-12)


def test_block_affine_is_rescaled_chart_affine():
    lo, hi = -0.7, 1.6
    blk, base = prim(BlockAffine(lo, hi, 2.0, 0.3)), prim(ChartAffine(2.0, 0.3))
    x = np.linspace(lo, hi, 301)[1:-1]
    assert np.allclose(blk(x), lo + (hi - lo) * base((x - lo) / (hi - lo)), atol=1e-15)
    outside = np.array([-1.0, lo, hi, 1.9])
    assert np.array_equal(blk(outside), outside)


def hermite_ref(k, v, m, x):
    j = np.searchsorted(k, x) - 1
    h = k[j + 1] - k[j]
    t = (x - k[j]) / h
    h00, h10 = 2 * t**3 - 3 * t**2 + 1, t**3 - 2 * t**2 + t
    h01, h11 = -2 * t**3 + 3 * t**2, t**3 - t**2
    return h00 * v[j] + h10 * h * m[j] + h01 * v[j + 1] + h11 * h * m[j + 1]


def test_hermite_matches_textbook_formula():
    H = monotone_hermite([-1.0, 0.1, 0.4, 0.7, 2.0], [-1.0, 0.0, 0.5, 1.2, 2.0])
    k, v, m = map(np.asarray, (H.knots, H.values, H.slopes))
    x = np.linspace(-0.999, 1.999, 1001)
    d = prim(H)
    assert np.allclose(d(x), hermite_ref(k, v, m, x), atol=1e-14)
    # inverse by bisection on the forward map
    y = d(x)
    assert np.allclose(invert(d)(y), x, atol=1e-12)


def test_hermite_validation():
    with pytest.raises(ConstructionError):
        Hermite((0.0, 1.0), (0.0, 0.5), (1.0, 1.0))  # outer knot moved
    with pytest.raises(ConstructionError):
        Hermite((0.0, 0.5, 1.0), (0.0, 0.7, 1.0), (1.0, -1.0, 1.0))
    with pytest.raises(ConstructionError):
        monotone_hermite([0, 1, 2], [0, 1.9, 2], clamp={1: 30.0})


def test_bad_primitive_arguments():
    with pytest.raises(ConstructionError):
        ChartAffine(0.0, 1.0)
    with pytest.raises(ConstructionError):
        BlockAffine(1.0, 0.0, 1.0, 0.0)


def test_block_flow_acts_blockwise(chart):
    bf = BlockFlow(float(chart.phi(0)), float(chart.phi(1)), chart.offset, 2, ((1.0, 0.5), (1.0, 0.0)))
    d = prim(bf)
    lo2, hi2 = bf.block_edges(2)
    assert bf.support == ((lo2, hi2),)
    # flat at the block edges, so only the middle moves visibly
    mid = np.linspace(lo2 + 0.3 * (hi2 - lo2), hi2 - 0.3 * (hi2 - lo2), 41)
    assert np.all(d(mid) > mid)
    outside = np.concatenate([np.linspace(0, lo2, 50), np.linspace(hi2, 1, 50)])
    assert np.allclose(d(outside), outside, atol=1e-15)


# --- algebra --------------------------------------------------------------------

def test_identity_and_trivial_values():
    x = np.linspace(-1, 2, 11)
    assert np.array_equal(IDENTITY(x), x)
    assert np.array_equal(IDENTITY.derivative(x), np.ones_like(x))
    assert power(prim(ChartAffine(1.0, 1.0)), 0).word == ()
    assert prim(ChartAffine(1.0, 0.0)).cached_support == ()


def test_power_and_inverse(kit):
    f = kit.f
    assert sup_distance(power(f, -3), invert(power(f, 3))) < 1e-14
    assert sup_distance(compose(power(f, 5), power(f, -5)), IDENTITY) < 1e-13
    assert (f ** 2).word == (f @ f).word


def test_conjugate_support(kit):
    c = conjugate(kit.g, kit.f)
    assert c.cached_support[0] == pytest.approx((kit.x(1), kit.x(2)), abs=1e-15)
    assert sup_distance(c, compose_all([kit.f, kit.g, invert(kit.f)])) == 0.0


def test_merge_intervals():
    assert merge_intervals([(0, 1), (0.5, 2), (3, 4)]) == ((0, 2), (3, 4))
    assert merge_intervals([]) == ()


def test_distances(kit):
    assert numerically_equal(kit.f, kit.f)
    assert not numerically_equal(kit.f, kit.fhat)
    assert c1_distance(kit.f, kit.f) == 0.0
    assert sup_distance(kit.f, IDENTITY, np.array([0.0, 1.0])) == 0.0
    with pytest.raises(ValueError):
        sup_distance(kit.f, kit.g, 1)


def test_word_length_guard(kit, monkeypatch):
    monkeypatch.setattr(dm, "MAX_WORD_LENGTH", 10)
    with pytest.raises(WordLengthError):
        power(kit.f, 11).evaluate(0.5)


def test_json_round_trip(kit):
    for d in (kit.fbar, kit.h, kit.psi, compose(kit.hhat, invert(kit.g))):
        back = Diffeo.from_json(json.dumps(d.to_json()))
        assert back.word == d.word
        assert sup_distance(back, d) == 0.0
    p = ChartAffine(2.0, -0.25)
    assert primitive_from_json(p.to_json()) == p


# --- properties over random words ---------------------------------------------

_KIT = build_kit(make_chart())
letters = st.tuples(st.sampled_from(GENERATORS), st.sampled_from([-2, -1, 1, 2]))
words = st.lists(letters, min_size=1, max_size=6).map(lambda ls: GeneratorWord(tuple(ls)))
GRID = np.linspace(-1, 2, 2001)


@settings(max_examples=40, deadline=None)
@given(words)
def test_inverse_cancels(w):
    d = realize(_KIT, w)
    assert sup_distance(compose(d, invert(d)), IDENTITY, GRID) < 1e-9
    assert sup_distance(compose(invert(d), d), IDENTITY, GRID) < 1e-9


@settings(max_examples=30, deadline=None)
@given(words, words, words)
def test_associativity(a, b, c):
    A, B, C = (realize(_KIT, w) for w in (a, b, c))
    assert sup_distance(compose(compose(A, B), C), compose(A, compose(B, C)), GRID) < 1e-12


@settings(max_examples=40, deadline=None)
@given(words)
def test_increasing_and_fixes_ambient_ends(w):
    d = realize(_KIT, w)
    y = d(GRID)
    assert np.all(np.diff(y) > 0)
    assert d(-1.0) == -1.0 and d(2.0) == 2.0
    assert np.all(d.derivative(GRID) > 0)


@settings(max_examples=40, deadline=None)
@given(words)
def test_identity_off_cached_support(w):
    d = realize(_KIT, w)
    off = np.ones_like(GRID, dtype=bool)
    for lo, hi in d.cached_support:
        off &= ~((GRID >= lo) & (GRID <= hi))
    assert np.allclose(d(GRID[off]), GRID[off], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(words)
def test_derivative_matches_centred_differences(w):
    d = realize(_KIT, w)
    x = np.linspace(0.25, 0.75, 201)
    der = d.derivative(x)

    # Richardson-extrapolated centred differences.  A centred difference is the
    # mean of D over its stencil, so the combination below is off by at most
    # 5/3 of the oscillation of D there.  That bound holds at psi's knots (D'
    # jumps) and at steep block edges (D' near 1e6) alike.
    def richardson(h):
        cd = [(d(x + k) - d(x - k)) / (2 * k) for k in (h, h / 2)]
        return (4 * cd[1] - cd[0]) / 3

    def oscillation(h):
        return np.max([np.abs(d.derivative(x + t) - der) for t in np.linspace(-h, h, 17)], axis=0)

    e1 = np.abs(richardson(4e-6) - der)
    e2 = np.abs(richardson(4e-7) - der)
    assert np.all(e2 <= 2 * oscillation(4e-7) + 1e-8)
    # where D is tame on the wider stencil the differences close in
    tame = (oscillation(4e-6) < 1e-3) & (e1 > 1e-7)
    assert np.all(e2[tame] < 0.2 * e1[tame])


# --- generator words --------------------------------------------------------------

def test_word_reduction_and_printing():
    w = GeneratorWord.of(("f", 2), ("f", -2), ("g", 1), ("g", 1), ("psi", -1))
    assert w.letters == (("g", 2), ("psi", -1))
    assert str(w) == "g^2 psi^-1"
    assert w.length == 3 and w.count("g") == 2
    assert str(GeneratorWord()) == "1"
    assert GeneratorWord.from_json(json.dumps(w.to_json())) == w
    with pytest.raises(ValueError):
        GeneratorWord.gen("q")


@settings(max_examples=100)
@given(words, words)
def test_word_group_laws(a, b):
    assert (a * a.inverse()).length == 0
    assert (a * b).length <= a.length + b.length
    assert (a * b).inverse() == b.inverse() * a.inverse()
    assert (a ** 3).length <= 3 * a.length
    assert len(a.expanded()) == a.length
    assert a.conjugate_by(b) == b * a * b.inverse()
