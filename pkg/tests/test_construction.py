from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from diffeolab import construction as con
from diffeolab.chart import make_chart
from diffeolab.construction import (MarkerIndex, Schedule, build_kit, commutator_chain,
                                    commutator_words, h_n_map, h_n_via_fbar_word, h_n_word,
                                    key_identity_check, realize, support_of)
from diffeolab.diffeo import IDENTITY, sup_distance
from diffeolab.errors import ConstructionError, ScheduleRangeError
from diffeolab.words import GENERATORS, GeneratorWord

GRID = np.linspace(-1, 2, 10**4)


# --- schedule -------------------------------------------------------------------

def test_default_schedule_values():
    s = Schedule()
    assert [s.ell(j) for j in (1, 2, 3)] == [2, 3, 4]
    assert s.level_of(1) is None and s.level_of(2) == 2 and s.level_of(5) is None
    assert s.level_of(8) == 4 and s.level_of(63) == 6
    assert s.t(3) == pytest.approx(2 ** -0.5)
    assert 2 ** s.s(3) == pytest.approx(1 - 2 ** -0.5)
    assert s.t(5) == 0.0 and s.s(5) == 0.0  # odd level: identity block


def test_explicit_lists():
    s = Schedule((3, 0, 2))
    assert s.level_ell(2) == 3 and s.level_ell(4) == 0 and s.level_ell(6) == 2
    assert s.t(8) == 0.0
    with pytest.raises(ScheduleRangeError):
        Schedule((2,)).check_range(4)
    with pytest.raises(ConstructionError):
        Schedule((1, 2, 2)).check_range(6)
    empty = Schedule(())
    assert empty.is_empty and empty.t(2) == 0.0
    assert Schedule(lambda j: 2 * j).level_ell(4) == 4


@pytest.mark.parametrize("ell", range(2, 21))
def test_flow_time_arithmetic_exact(ell):
    # (1 - 2^s) t with 2^s = 1 - 1/sqrt(l), t = 1/sqrt(l); the product is 1/l
    r = con.exact_flow_time(ell)
    assert sympy.nsimplify(r) == sympy.Rational(1, ell)
    # the floating times reproduce it too
    s = Schedule(lambda j: ell)
    n = 2
    assert (1 - 2 ** s.s(n)) * s.t(n) == pytest.approx(1 / ell, rel=1e-14)


# --- markers ----------------------------------------------------------------------

def test_marker_index_arithmetic():
    m = MarkerIndex(Fraction(-3, 4))
    assert m.shift().q == Fraction(1, 4)
    assert m.scale(2).q == -3
    assert m.scale(-1).q == Fraction(-3, 8)
    assert repr(m) == "x[-3/4]"


@settings(max_examples=60, deadline=None)
@given(st.fractions(min_value=-8, max_value=8, max_denominator=16))
def test_markers_transport(q):
    kit = _KIT
    m = MarkerIndex(q)
    x = m.point(kit.chart)
    assert kit.f(x) == pytest.approx(m.shift().point(kit.chart), abs=1e-12)
    if abs(q) <= 4:
        assert kit.fhat(x) == pytest.approx(m.scale().point(kit.chart), abs=1e-12)


def test_named_points(kit):
    assert kit.x(-0.5) == pytest.approx(0.4427, abs=1e-4)
    assert kit.x(-0.75) == pytest.approx(0.4211, abs=1e-4)
    assert kit.x(1) == pytest.approx(0.5957, abs=1e-4)
    assert kit.x(64) == pytest.approx(0.7267, abs=1e-4)


# --- generators ---------------------------------------------------------------------

_KIT = build_kit(make_chart())


def test_build_kit_validation(chart):
    with pytest.raises(ConstructionError):
        build_kit(chart, i_max=5)
    with pytest.raises(ConstructionError):
        build_kit(chart, Schedule((1, 2, 3)), 6)
    k = build_kit(chart, Schedule(()), 6)
    assert k.h.word == () and k.hhat.word == ()
    assert k.active_blocks() == []


def test_active_blocks(kit):
    blocks = kit.active_blocks()
    assert blocks == list(range(2, 4)) + list(range(8, 16)) + list(range(32, 64))


def test_summary(kit):
    s = kit.summary()
    assert set(s["generators"]) == set(GENERATORS)
    assert s["ell"] == "j_plus_1" and s["i_max"] == 6


@pytest.mark.parametrize("i", [1, 2, 3, 4])
def test_bs_relation(kit, i):
    w = realize(kit, GeneratorWord.of(("fhat", i), ("f", 1), ("fhat", -i)))
    assert sup_distance(w, kit.f ** (2 ** i), GRID) < 1e-8


def test_g_and_psi(kit):
    x0, x1 = kit.x(0), kit.x(1)
    assert kit.g(x0) == x0 and kit.g(x1) == x1
    assert kit.g(0.55) > 0.55
    assert kit.psi(kit.x(-0.75)) == pytest.approx(0.0, abs=1e-15)
    assert kit.psi(x1) == pytest.approx(1.0, abs=1e-15)
    mid = np.linspace(kit.x(-0.5), x0, 500)
    assert np.max(np.abs(kit.psi(mid) - mid)) < 1e-15


def test_h_and_hhat_blockwise(kit):
    # on an active block h is the block translation by t_n, read in chart time
    n = 9
    t = kit.schedule.t(n)
    p = kit.chart.phi(np.linspace(n + 0.3, n + 0.7, 9))
    back = kit.chart.phi_inv(kit.chart.phi(kit.chart.phi_inv(p) - n))  # same block of index 0
    assert np.allclose(back, np.linspace(0.3, 0.7, 9), atol=1e-12)
    assert np.all(kit.h(p) > p)
    odd = kit.chart.phi(np.linspace(4.1, 7.9, 50))  # level 3: identity
    assert np.array_equal(kit.h(odd), odd) and np.array_equal(kit.hhat(odd), odd)
    assert t > 0


# --- supports -------------------------------------------------------------------------

def test_support_labels(chart):
    k = build_kit(chart, i_max=6, h_focus=4)
    assert support_of(k, GeneratorWord.gen("h")).labels() == [("0", "x_4"), ("x_8", "x_16"), ("x_32", "1")]
    a = support_of(k, commutator_words(4)[0])
    assert a.labels() == [("0", "x_-3/4"), ("x_-1/2", "x_0"), ("x_1", "1")]
    b = support_of(k, commutator_words(4)[1])
    assert b.labels() == [("-1", "0"), ("x_-1/2", "x_0"), ("1", "2")]


@pytest.mark.parametrize("n", [1, 3, 6])
def test_support_of_h_n(kit, n):
    assert support_of(kit, h_n_word(n)).labels() == [(f"x_{-n}", "x_0")]


letters = st.tuples(st.sampled_from(GENERATORS), st.sampled_from([-2, -1, 1, 2]))
words = st.lists(letters, min_size=1, max_size=6).map(lambda ls: GeneratorWord(tuple(ls)))


@settings(max_examples=60, deadline=None)
@given(words)
def test_support_of_is_sound(w):
    # numerical oracle: nothing outside the computed support moves
    d = realize(_KIT, w)
    off = np.ones_like(GRID, dtype=bool)
    for lo, hi in d.cached_support:
        off &= ~((GRID >= lo) & (GRID <= hi))
    assert np.max(np.abs(d(GRID[off]) - GRID[off]), initial=0.0) < 1e-12


@pytest.mark.parametrize("i", [2, 4])
def test_support_chain(kit, i):
    w = GeneratorWord.gen("psi") * commutator_words(i)[0] * GeneratorWord.gen("psi", -1)
    d = realize(kit, w, track_support=False)
    pts = np.concatenate([np.linspace(1e-9, kit.x(-0.5), 5000)[:-1], np.linspace(kit.x(0), 1 - 1e-9, 5000)[1:]])
    assert np.max(np.abs(d(pts) - pts)) < 1e-8


@pytest.mark.parametrize("i", [2, 4])
def test_commutator_lives_on_middle_interval(kit, i):
    a, b, c = commutator_chain(kit, i)
    outside = np.concatenate([np.linspace(-1, kit.x(-0.5), 4000), np.linspace(kit.x(0), 2, 4000)])
    assert np.max(np.abs(c(outside) - outside)) < 1e-8
    n = 2 ** i
    fh, fn = GeneratorWord.gen("fhat", i), GeneratorWord.gen("f", n)
    inner = GeneratorWord.of(("h", 1), ("hhat", 1), ("h", -1), ("hhat", -1))
    other = realize(kit, fh.inverse() * fn.inverse() * inner * fn * fh, track_support=False)
    mid = np.linspace(kit.x(-0.5), kit.x(0), 4000)
    assert np.max(np.abs(c(mid) - other(mid))) < 1e-8


def test_commutator_chain_level_check(kit):
    with pytest.raises(ConstructionError):
        commutator_chain(kit, 3)
    with pytest.raises(ConstructionError):
        commutator_chain(kit, 8)


# --- identities ------------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3, 4, 6])
def test_h_n_two_routes(kit, n):
    assert sup_distance(h_n_map(kit, n), realize(kit, h_n_via_fbar_word(n)), GRID) < 1e-12


def test_h_n_zero(kit):
    assert h_n_map(kit, 0) is IDENTITY
    with pytest.raises(ValueError):
        h_n_map(kit, -1)


@pytest.mark.parametrize("i", [2, 4])
def test_key_identity(kit, i):
    r = key_identity_check(kit, i)
    assert r.passed(1e-7)
    assert Fraction(r.r_exact) == Fraction(1, r.ell)
    assert r.r_measured_max_error < 1e-6


@pytest.mark.slow
def test_key_identity_level_six(kit):
    r = key_identity_check(kit, 6, per_block=200)
    assert r.passed(1e-7)


def test_key_identity_with_explicit_list(chart):
    k = build_kit(chart, Schedule((3, 0, 2)), 6)
    r = key_identity_check(k, 2)
    assert r.ell == 3 and r.passed(1e-7)
    with pytest.raises(ConstructionError):
        key_identity_check(k, 4)


def test_endpoint_profile_shrinks(kit):
    for gen in ("h", "hhat"):
        vals = [v for _, v in con.endpoint_c1_profile(kit, gen)]
        assert len(vals) == 3
        assert all(b < a for a, b in zip(vals, vals[1:]))


def test_marker_errors(kit):
    assert max(max(a, b) for _, a, b in con.marker_transport_errors(kit)) < 1e-9
